/** Payload shapes of the /v1 API, mirrored field for field. */

export interface ScreeningItem {
  detection_id: string;
  queued_on: string;
  status: "pending" | "accepted" | "rejected";
  reject_reason: string | null;
  screener_note: string;
  decided_on: string | null;
  score: number;
  image_uri: string;
  summer_image_uri: string | null;
  static_map_uri: string;
  capture_date: string;
  centroid: { lat: number; lon: number };
}

export interface Assignment {
  assignment_id: string;
  detection_id: string;
  org: "wdnr" | "elpc";
  dispatched_on: string;
  verifier_id: string | null;
  region_tag: string | null;
  rank: number | null;
  run_id: string;
  score: number;
}

export interface PacketManifest {
  assignment_id: string;
  title: string;
  detection_image_uri: string;
  summer_image_uri: string | null;
  static_map_uri: string;
  north_arrow: boolean;
  capture_date: string;
  centroid: { lat: number; lon: number };
  bbox: { min_lat: number; min_lon: number; max_lat: number; max_lon: number };
  notes: string[];
}

export interface Bucket {
  label: string;
  low: number;
  high: number;
  n_sent: number;
  n_followed: number;
  n_visible: number;
  n_confirmed: number;
  rate: number | null;
  ci_low: number | null;
  ci_high: number | null;
}

export interface ConfirmationReport {
  org: string;
  screened_only: boolean;
  edges: number[];
  buckets: Bucket[];
  totals: { org: string; sent: number; followed: number; visible: number | null; confirmed: number };
}

export interface LiftReport {
  total_images: number;
  sent: number;
  confirmed: number;
  top_bucket_rate: number;
  base_rate: number;
  review_reduction: number;
  overall_lift: number;
  top_lift: number;
  notes: string[];
}

export interface AgreementReport {
  total_overlap: number;
  cells: {
    both_followed: { n: number; elpc_rate: number | null; wdnr_rate: number | null };
    elpc_only: { n: number; elpc_rate: number | null };
    wdnr_only: { n: number; wdnr_rate: number | null };
    neither: { n: number };
  };
}

export interface ComplianceReport {
  org: string;
  confirmed: number;
  counts: Record<string, number>;
  share_noncompliant: number | null;
  share_cracks: number | null;
  share_afo_post_window: number | null;
}

export interface ProcessReport {
  org: string;
  followup_rate_by_bucket: { label: string; n_sent: number; n_followed: number; rate: number | null }[];
  responses: number;
  visited: number;
  visibility_rate: number | null;
  latency_histogram: Record<string, number>;
  latency_p_le_1: number | null;
  latency_max: number | null;
}

export interface GroupComparisonReport {
  group_by: string;
  excluded: string[];
  groups: Record<string, { n: number; metrics: Record<string, { mean: number; ci_half: number | null }> }>;
}

export interface CrosstabReport {
  buckets: string[];
  rows: Record<string, number[]>;
}

export interface IncidentalsReport {
  total: number;
  counts: Record<string, number>;
  score_floor?: number;
}

export interface ApiErrorBody {
  code: string;
  field: string | null;
  message: string;
}

export interface ResponseFormState {
  assignment_id: string;
  visited_on: string;
  site_visited: boolean;
  location_visible: boolean;
  manure_present: boolean | null;
  reporter_confidence: "high" | "medium" | "low" | null;
  notes: string;
  photo_uris: string[];
}
