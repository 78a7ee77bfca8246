"""Trial analytics computed from raw engine state.

Every report here is a pure function of the event log: no report stores
anything and replaying the same log gives bit-identical output. Rates are
binomial proportions with Wilson score intervals (well-behaved at the
small counts this trial produces); means carry t-intervals. Serialized
rates are rounded to 3 decimals and lifts to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import stats as _scipy_stats

from .engine import Engine
from .errors import ValidationError
from .registry import Org
from .routing import ScreeningStatus

DEFAULT_EDGES = tuple(round(x / 10.0, 1) for x in range(11))  # 0.0 .. 1.0 step 0.1

Z_95 = 1.959963984540054


def wilson_interval(successes: int, trials: int, z: float = Z_95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Endpoints always land in [0, 1] and the interval behaves sensibly for
    tiny n and extreme rates, unlike the normal approximation.
    """
    if trials == 0:
        return (0.0, 1.0)
    p_hat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p_hat + z2 / (2.0 * trials)) / denom
    margin = (z / denom) * math.sqrt(p_hat * (1.0 - p_hat) / trials
                                     + z2 / (4.0 * trials * trials))
    # Clamp against float rounding: the interval always contains p_hat.
    low = min(max(0.0, center - margin), p_hat)
    high = max(min(1.0, center + margin), p_hat)
    return (low, high)


def t_mean_ci(values: list[float], confidence: float = 0.95) -> tuple[float, float | None]:
    """Sample mean with a t-interval half-width; half-width is None for n < 2."""
    n = len(values)
    if n == 0:
        raise ValidationError("cannot summarize an empty group", code="empty_input")
    mean = sum(values) / n
    if n < 2:
        return (mean, None)
    variance = sum((v - mean) ** 2 for v in values) / (n - 1)
    t_quantile = float(_scipy_stats.t.ppf((1.0 + confidence) / 2.0, n - 1))
    return (mean, t_quantile * math.sqrt(variance / n))


def bucket_index(score: float, edges: tuple[float, ...]) -> int:
    """Index of the score's bucket: right-exclusive except the last bucket,
    which includes its upper edge."""
    if score >= edges[-2]:
        return len(edges) - 2
    for i in range(len(edges) - 1):
        if edges[i] <= score < edges[i + 1]:
            return i
    return 0


def bucket_label(edges: tuple[float, ...], i: int) -> str:
    closer = "]" if i == len(edges) - 2 else ")"
    return f"[{edges[i]:.1f},{edges[i + 1]:.1f}{closer}"


def _round_rate(x: float | None) -> float | None:
    return None if x is None else round(x, 3)


@dataclass
class Bucket:
    low: float
    high: float
    label: str
    n_sent: int = 0
    n_followed: int = 0
    n_visible: int = 0
    n_confirmed: int = 0
    rate: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None

    def to_dict(self) -> dict:
        return {"label": self.label, "low": self.low, "high": self.high,
                "n_sent": self.n_sent, "n_followed": self.n_followed,
                "n_visible": self.n_visible, "n_confirmed": self.n_confirmed,
                "rate": _round_rate(self.rate), "ci_low": _round_rate(self.ci_low),
                "ci_high": _round_rate(self.ci_high)}


@dataclass
class BucketedRates:
    org: str
    screened_only: bool
    edges: tuple[float, ...]
    buckets: list[Bucket]
    totals: dict

    def to_dict(self) -> dict:
        return {"org": self.org, "screened_only": self.screened_only,
                "edges": list(self.edges),
                "buckets": [b.to_dict() for b in self.buckets],
                "totals": dict(self.totals)}


@dataclass(frozen=True)
class _Row:
    """One dispatched detection flattened for aggregation."""
    detection_id: str
    score: float
    bbox_area_m2: float
    followed: bool
    visited: bool
    visible: bool
    confirmed: bool
    latency: int | None
    reporter_confidence: str | None
    compliance: str | None


def _elpc_rows(engine: Engine) -> list[_Row]:
    from .geo import bbox_area_m2
    rows = []
    for assignment in engine.assignments.values():
        if assignment.org is not Org.ELPC:
            continue
        det = engine.detections[assignment.detection_id]
        response_id = engine.response_by_assignment.get(assignment.assignment_id)
        response = engine.responses.get(response_id) if response_id else None
        rows.append(_Row(
            detection_id=det.detection_id,
            score=det.score,
            bbox_area_m2=bbox_area_m2(det.bbox),
            followed=response is not None,
            visited=bool(response and response.site_visited),
            visible=bool(response and response.location_visible),
            confirmed=bool(response and response.manure_present),
            latency=(response.visited_on - assignment.dispatched_on).days if response else None,
            reporter_confidence=(response.reporter_confidence.value
                                 if response and response.reporter_confidence else None),
            compliance=None,
        ))
    return rows


def _wdnr_rows(engine: Engine) -> list[_Row]:
    from .geo import bbox_area_m2
    from .routing import wdnr_assignment_id
    rows = []
    for item in engine.screening.values():
        det = engine.detections[item.detection_id]
        accepted = item.status is ScreeningStatus.ACCEPTED
        determination = None
        if accepted:
            assignment_id = wdnr_assignment_id(item.detection_id)
            det_id = engine.determination_by_assignment.get(assignment_id)
            determination = engine.determinations.get(det_id) if det_id else None
        assignment = engine.assignments.get(wdnr_assignment_id(item.detection_id))
        latency = None
        if determination is not None and assignment is not None:
            latency = (determination.decided_on - assignment.dispatched_on).days
        rows.append(_Row(
            detection_id=det.detection_id,
            score=det.score,
            bbox_area_m2=bbox_area_m2(det.bbox),
            followed=accepted,
            visited=accepted,
            visible=False,
            confirmed=bool(determination and determination.manure_present),
            latency=latency,
            reporter_confidence=None,
            compliance=(determination.compliance.value
                        if determination and determination.compliance else None),
        ))
    return rows


def _rows_for(engine: Engine, org: str) -> list[_Row]:
    if org == Org.ELPC.value:
        return _elpc_rows(engine)
    if org == Org.WDNR.value:
        return _wdnr_rows(engine)
    raise ValidationError(f"org must be elpc or wdnr, got {org!r}",
                          code="invalid_org", field="org")


def trial_totals(engine: Engine, org: str) -> dict:
    """Topline counts: detections sent, field follow-ups, visible sites,
    and confirmed applications. Visibility is not tracked on the regulator
    track."""
    rows = _rows_for(engine, org)
    totals = {
        "org": org,
        "sent": len(rows),
        "followed": sum(r.followed for r in rows),
        "visible": sum(r.visible for r in rows) if org == Org.ELPC.value else None,
        "confirmed": sum(r.confirmed for r in rows),
    }
    return totals


def confirmation_by_bucket(engine: Engine, org: str, screened_only: bool = False,
                           edges: tuple[float, ...] = DEFAULT_EDGES) -> BucketedRates:
    """Confirmation rate per model-confidence bucket.

    The denominator is everything sent, or only what passed desk screening
    when screened_only is set (regulator track only).
    """
    if screened_only and org != Org.WDNR.value:
        raise ValidationError("screened_only applies to the regulator track",
                              code="invalid_params", field="screened_only")
    rows = _rows_for(engine, org)
    buckets = [Bucket(low=edges[i], high=edges[i + 1], label=bucket_label(edges, i))
               for i in range(len(edges) - 1)]
    for row in rows:
        b = buckets[bucket_index(row.score, edges)]
        b.n_sent += 1
        b.n_followed += int(row.followed)
        b.n_visible += int(row.visible)
        b.n_confirmed += int(row.confirmed)
    for b in buckets:
        denom = b.n_followed if screened_only else b.n_sent
        if denom > 0:
            b.rate = b.n_confirmed / denom
            b.ci_low, b.ci_high = wilson_interval(b.n_confirmed, denom)
    totals = trial_totals(engine, org)
    return BucketedRates(org=org, screened_only=screened_only, edges=edges,
                         buckets=buckets, totals=totals)


def pooled_rate(engine: Engine, org: str, min_score: float,
                screened_only: bool = False) -> float | None:
    """Confirmation rate pooled over every detection at or above a score."""
    rows = [r for r in _rows_for(engine, org) if r.score >= min_score]
    denom = sum(r.followed for r in rows) if screened_only else len(rows)
    if denom == 0:
        return None
    return sum(r.confirmed for r in rows) / denom


@dataclass
class LiftMetrics:
    total_images: int
    sent: int
    confirmed: int
    top_bucket_rate: float
    base_rate: float
    review_reduction: float
    overall_lift: float
    top_lift: float
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"total_images": self.total_images, "sent": self.sent,
                "confirmed": self.confirmed,
                "top_bucket_rate": _round_rate(self.top_bucket_rate),
                "base_rate": round(self.base_rate, 6),
                "review_reduction": _round_rate(self.review_reduction),
                "overall_lift": round(self.overall_lift, 1),
                "top_lift": round(self.top_lift, 1),
                "notes": list(self.notes)}


def lift_metrics(total_images: int, sent: int, confirmed: int,
                 top_bucket_rate: float) -> LiftMetrics:
    """Efficiency of model-directed review against random image selection.

    overall_lift is (confirmed/sent) / (confirmed/total) which reduces to
    total/sent exactly; top_lift compares the top-bucket rate to the base
    rate over all images.
    """
    if not total_images >= sent >= confirmed >= 0:
        raise ValidationError("need total_images >= sent >= confirmed >= 0",
                              code="invalid_counts", field="sent")
    if total_images == 0 or sent == 0:
        raise ValidationError("lift undefined for zero denominators",
                              code="zero_denominator", field="total_images")
    base_rate = confirmed / total_images
    review_reduction = 1.0 - sent / total_images
    overall_lift = total_images / sent
    if base_rate == 0:
        raise ValidationError("top lift undefined with zero confirmations",
                              code="zero_denominator", field="confirmed")
    top_lift = top_bucket_rate / base_rate
    notes = [f"review_reduction = 1 - sent/total = {review_reduction:.1%}"]
    if (total_images, sent) == (40_995, 533):
        notes.append("the 99.8% review-reduction figure sometimes quoted for the "
                     "2023 trial is inconsistent with these counts; "
                     "1 - 533/40,995 = 98.7%")
    return LiftMetrics(total_images=total_images, sent=sent, confirmed=confirmed,
                       top_bucket_rate=top_bucket_rate, base_rate=base_rate,
                       review_reduction=review_reduction, overall_lift=overall_lift,
                       top_lift=top_lift, notes=notes)


@dataclass
class AgreementCell:
    n: int = 0
    elpc_confirmed: int = 0
    wdnr_confirmed: int = 0

    @property
    def elpc_rate(self) -> float | None:
        return self.elpc_confirmed / self.n if self.n else None

    @property
    def wdnr_rate(self) -> float | None:
        return self.wdnr_confirmed / self.n if self.n else None


@dataclass
class AgreementTable:
    both: AgreementCell
    elpc_only: AgreementCell
    wdnr_only: AgreementCell
    neither: AgreementCell

    @property
    def total_overlap(self) -> int:
        return self.both.n + self.elpc_only.n + self.wdnr_only.n + self.neither.n

    def to_dict(self) -> dict:
        return {"total_overlap": self.total_overlap, "cells": {
            "both_followed": {"n": self.both.n,
                              "elpc_rate": _round_rate(self.both.elpc_rate),
                              "wdnr_rate": _round_rate(self.both.wdnr_rate)},
            "elpc_only": {"n": self.elpc_only.n,
                          "elpc_rate": _round_rate(self.elpc_only.elpc_rate)},
            "wdnr_only": {"n": self.wdnr_only.n,
                          "wdnr_rate": _round_rate(self.wdnr_only.wdnr_rate)},
            "neither": {"n": self.neither.n},
        }}


def agreement_table(engine: Engine) -> AgreementTable:
    """Follow-up crosstab over detections sent to both organizations, with
    per-cell confirmation rates per organization."""
    elpc_by_detection = {r.detection_id: r for r in _elpc_rows(engine)}
    wdnr_by_detection = {r.detection_id: r for r in _wdnr_rows(engine)}
    table = AgreementTable(AgreementCell(), AgreementCell(), AgreementCell(), AgreementCell())
    for det_id in elpc_by_detection.keys() & wdnr_by_detection.keys():
        elpc_row = elpc_by_detection[det_id]
        wdnr_row = wdnr_by_detection[det_id]
        if elpc_row.followed and wdnr_row.followed:
            cell = table.both
        elif elpc_row.followed:
            cell = table.elpc_only
        elif wdnr_row.followed:
            cell = table.wdnr_only
        else:
            cell = table.neither
        cell.n += 1
        cell.elpc_confirmed += int(elpc_row.confirmed)
        cell.wdnr_confirmed += int(wdnr_row.confirmed)
    return table


@dataclass
class ComplianceBreakdown:
    confirmed: int
    counts: dict
    share_noncompliant: float | None
    share_cracks: float | None
    share_afo_post_window: float | None

    def to_dict(self) -> dict:
        return {"org": "wdnr", "confirmed": self.confirmed, "counts": dict(self.counts),
                "share_noncompliant": _round_rate(self.share_noncompliant),
                "share_cracks": _round_rate(self.share_cracks),
                "share_afo_post_window": _round_rate(self.share_afo_post_window)}


def compliance_breakdown(engine: Engine) -> ComplianceBreakdown:
    """Counts per compliance ruling over confirmed applications, plus the
    derived shares: outright violations, confirmed events no rule reaches,
    and the unregulated-entity share of in-window events."""
    from .compliance import ComplianceOutcome
    counts = {outcome.value: 0 for outcome in ComplianceOutcome}
    confirmed = 0
    for determination in engine.determinations.values():
        if not determination.manure_present:
            continue
        confirmed += 1
        counts[determination.compliance.value] += 1
    violations = counts[ComplianceOutcome.VIOLATION.value]
    pre_window = counts[ComplianceOutcome.COMPLIANT_PRE_WINDOW.value]
    unregulated = counts[ComplianceOutcome.COMPLIANT_UNREGULATED_ENTITY.value]
    share_noncompliant = violations / confirmed if confirmed else None
    share_cracks = (confirmed - violations) / confirmed if confirmed else None
    post_window = confirmed - pre_window
    share_afo_post_window = unregulated / post_window if post_window else None
    return ComplianceBreakdown(confirmed=confirmed, counts=counts,
                               share_noncompliant=share_noncompliant,
                               share_cracks=share_cracks,
                               share_afo_post_window=share_afo_post_window)


@dataclass
class ProcessMetrics:
    org: str
    followup_by_bucket: list[dict]
    responses: int
    visited: int
    visibility_rate: float | None
    latency_histogram: dict
    latency_p_le_1: float | None
    latency_max: int | None

    def to_dict(self) -> dict:
        return {"org": self.org,
                "followup_rate_by_bucket": [
                    {**entry, "rate": _round_rate(entry["rate"])}
                    for entry in self.followup_by_bucket],
                "responses": self.responses, "visited": self.visited,
                "visibility_rate": _round_rate(self.visibility_rate),
                "latency_histogram": {str(k): v for k, v in sorted(self.latency_histogram.items())},
                "latency_p_le_1": _round_rate(self.latency_p_le_1),
                "latency_max": self.latency_max}


def process_metrics(engine: Engine, org: str = Org.ELPC.value,
                    edges: tuple[float, ...] = DEFAULT_EDGES) -> ProcessMetrics:
    """Operational health of a track: follow-up rate per score bucket,
    visibility among sites actually visited, and days-to-follow-up."""
    rows = _rows_for(engine, org)
    per_bucket = []
    for i in range(len(edges) - 1):
        bucket_rows = [r for r in rows if bucket_index(r.score, edges) == i]
        sent = len(bucket_rows)
        followed = sum(r.followed for r in bucket_rows)
        per_bucket.append({"label": bucket_label(edges, i), "n_sent": sent,
                           "n_followed": followed,
                           "rate": followed / sent if sent else None})
    responses = sum(r.followed for r in rows)
    visited = sum(r.visited for r in rows)
    visible = sum(r.visible for r in rows)
    visibility_rate = visible / visited if visited else None
    latencies = [r.latency for r in rows if r.latency is not None]
    histogram: dict[int, int] = {}
    for days in latencies:
        histogram[days] = histogram.get(days, 0) + 1
    p_le_1 = (sum(1 for d in latencies if d <= 1) / len(latencies)) if latencies else None
    return ProcessMetrics(org=org, followup_by_bucket=per_bucket,
                          responses=responses, visited=visited,
                          visibility_rate=visibility_rate,
                          latency_histogram=histogram, latency_p_le_1=p_le_1,
                          latency_max=max(latencies) if latencies else None)


@dataclass
class GroupComparison:
    group_by: str
    excluded: tuple[str, ...]
    groups: dict  # name -> {"n": int, "metrics": {metric: {"mean", "ci_half"}}}

    def to_dict(self) -> dict:
        out_groups = {}
        for name, summary in self.groups.items():
            out_groups[name] = {"n": summary["n"], "metrics": {
                metric: {"mean": round(values["mean"], 3),
                         "ci_half": None if values["ci_half"] is None
                         else round(values["ci_half"], 3)}
                for metric, values in summary["metrics"].items()}}
        return {"group_by": self.group_by, "excluded": list(self.excluded),
                "groups": out_groups}


def group_comparison(engine: Engine,
                     exclude: tuple[str, ...] = ("compliant_other",),
                     confidence: float = 0.95) -> GroupComparison:
    """Compare confirmed violations against compliant confirmations on
    model score and detection box area, as means with t-intervals.
    Categories in `exclude` (rulings on technicalities by default) are
    dropped before grouping."""
    rows = [r for r in _wdnr_rows(engine)
            if r.confirmed and r.compliance and r.compliance not in exclude]
    grouped: dict[str, list[_Row]] = {"noncompliant": [], "compliant": []}
    for row in rows:
        grouped["noncompliant" if row.compliance == "violation" else "compliant"].append(row)
    groups = {}
    for name, members in grouped.items():
        if not members:
            groups[name] = {"n": 0, "metrics": {}}
            continue
        metrics = {}
        for metric, getter in (("score", lambda r: r.score),
                               ("bbox_area_m2", lambda r: r.bbox_area_m2)):
            mean, ci_half = t_mean_ci([getter(r) for r in members], confidence)
            metrics[metric] = {"mean": mean, "ci_half": ci_half}
        groups[name] = {"n": len(members), "metrics": metrics}
    return GroupComparison(group_by="compliance", excluded=exclude, groups=groups)


@dataclass
class ConfidenceCrosstab:
    labels: list[str]
    rows: dict  # confidence level -> list of counts per bucket

    def to_dict(self) -> dict:
        return {"buckets": list(self.labels), "rows": {k: list(v) for k, v in self.rows.items()}}


def reporter_confidence_crosstab(engine: Engine,
                                 edges: tuple[float, ...] = DEFAULT_EDGES) -> ConfidenceCrosstab:
    """Counts of self-reported verifier confidence per score bucket, over
    advocacy responses that carry a confidence level."""
    labels = [bucket_label(edges, i) for i in range(len(edges) - 1)]
    rows = {"high": [0] * len(labels), "medium": [0] * len(labels), "low": [0] * len(labels)}
    for row in _elpc_rows(engine):
        if row.reporter_confidence is None:
            continue
        rows[row.reporter_confidence][bucket_index(row.score, edges)] += 1
    return ConfidenceCrosstab(labels=labels, rows=rows)


def trial_report(engine: Engine, org: str, total_images: int | None = None) -> dict:
    """Composite report: totals plus the org's sections, recomputable from
    the raw records at any time."""
    out = {"totals": trial_totals(engine, org),
           "confirmation_by_bucket": confirmation_by_bucket(engine, org).to_dict(),
           "process": process_metrics(engine, org).to_dict()}
    if org == Org.WDNR.value:
        out["compliance"] = compliance_breakdown(engine).to_dict()
        if total_images:
            totals = out["totals"]
            out["lift"] = lift_metrics(total_images, totals["sent"], totals["confirmed"],
                                       pooled_rate(engine, org, 0.8) or 0.0).to_dict()
    out["agreement"] = agreement_table(engine).to_dict()
    return out
