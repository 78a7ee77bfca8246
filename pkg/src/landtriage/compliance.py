"""Winter-spreading compliance rules and imagery-time-series corroboration.

The rule set models the Wisconsin winter window: during February and March
a permitted CAFO may not apply liquid waste to any field, nor solid waste
to a snow-covered or frozen field, outside of approved emergency
applications. Operations below 1,000 animal units are unregulated, and
applications dated outside the window are out of scope regardless of the
other facts.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta
from enum import Enum

from .errors import ValidationError


class EntityClass(str, Enum):
    CAFO = "cafo"
    AFO = "afo"
    UNKNOWN = "unknown"


class SpreadPhase(str, Enum):
    LIQUID = "liquid"
    SOLID = "solid"
    UNKNOWN = "unknown"


class Surface(str, Enum):
    SNOW_COVERED = "snow_covered"
    FROZEN = "frozen"
    BARE_UNFROZEN = "bare_unfrozen"
    UNKNOWN = "unknown"


class ComplianceOutcome(str, Enum):
    VIOLATION = "violation"
    COMPLIANT_PRE_WINDOW = "compliant_pre_window"
    COMPLIANT_UNREGULATED_ENTITY = "compliant_unregulated_entity"
    COMPLIANT_OTHER = "compliant_other"
    INDETERMINATE = "indeterminate"


class Corroboration(str, Enum):
    PRE_WINDOW = "pre_window"
    BOUNDARY = "boundary"
    IN_WINDOW = "in_window"
    UNSURE = "unsure"


@dataclass(frozen=True)
class RuleWindow:
    """The restricted application window and the permitting size threshold."""

    start: date = date(2023, 2, 1)
    end: date = date(2023, 3, 31)
    animal_unit_threshold: float = 1_000.0

    def __post_init__(self):
        if self.start > self.end:
            raise ValidationError("window start after end", code="invalid_window", field="start")
        if self.animal_unit_threshold <= 0:
            raise ValidationError("animal unit threshold must be positive",
                                  code="invalid_window", field="animal_unit_threshold")

    def contains(self, d: date) -> bool:
        return self.start <= d <= self.end


@dataclass(frozen=True)
class SpreadEvent:
    """One confirmed application with the facts needed to classify it."""

    event_date: date
    entity_class: EntityClass = EntityClass.UNKNOWN
    animal_units: float | None = None
    waste_phase: SpreadPhase = SpreadPhase.UNKNOWN
    surface: Surface = Surface.UNKNOWN
    emergency_approved: bool = False
    claimed_pre_window: bool = False

    def __post_init__(self):
        if self.animal_units is not None:
            if self.animal_units < 0:
                raise ValidationError("animal_units must be non-negative",
                                      code="invalid_event", field="animal_units")
            if self.entity_class is EntityClass.CAFO and self.animal_units < 1_000.0:
                raise ValidationError("CAFO event with under 1,000 animal units",
                                      code="invalid_event", field="animal_units")
            if self.entity_class is EntityClass.AFO and self.animal_units >= 1_000.0:
                raise ValidationError("AFO event with 1,000+ animal units",
                                      code="invalid_event", field="animal_units")


def classify(event: SpreadEvent, window: RuleWindow = RuleWindow()) -> ComplianceOutcome:
    """Classify a spreading event against the rule window.

    Decision order:
      1. dated outside the window -> compliant_pre_window
      2. unregulated entity (AFO, or animal units below the threshold)
      3. approved emergency application -> compliant_other
      4. entity unknown, or both waste phase and surface unknown -> indeterminate
      5. CAFO in-window: liquid violates on any surface; solid violates on
         snow-covered or frozen ground and is compliant_other on bare
         unfrozen ground.

    At step 5 a partly-unknown fact resolves by dominance: when every
    concrete completion of the unknowns is a violation (unknown phase on
    snow or frozen ground, liquid with unknown surface) the event is a
    violation; when completions disagree, it is indeterminate.
    """
    if event.event_date < window.start or event.event_date > window.end:
        return ComplianceOutcome.COMPLIANT_PRE_WINDOW
    if event.entity_class is EntityClass.AFO or (
            event.animal_units is not None
            and event.animal_units < window.animal_unit_threshold):
        return ComplianceOutcome.COMPLIANT_UNREGULATED_ENTITY
    if event.emergency_approved:
        return ComplianceOutcome.COMPLIANT_OTHER
    if event.entity_class is EntityClass.UNKNOWN or (
            event.waste_phase is SpreadPhase.UNKNOWN and event.surface is Surface.UNKNOWN):
        return ComplianceOutcome.INDETERMINATE

    if event.waste_phase is SpreadPhase.LIQUID:
        return ComplianceOutcome.VIOLATION
    if event.waste_phase is SpreadPhase.SOLID:
        if event.surface in (Surface.SNOW_COVERED, Surface.FROZEN):
            return ComplianceOutcome.VIOLATION
        if event.surface is Surface.BARE_UNFROZEN:
            return ComplianceOutcome.COMPLIANT_OTHER
        return ComplianceOutcome.INDETERMINATE
    # Phase unknown, surface known: snow or frozen violates either way.
    if event.surface in (Surface.SNOW_COVERED, Surface.FROZEN):
        return ComplianceOutcome.VIOLATION
    return ComplianceOutcome.INDETERMINATE


@dataclass(frozen=True)
class Observation:
    """One imagery look at a site: was manure visible, and is the image usable."""

    observed_on: date
    manure_visible: bool
    usable: bool = True


def corroborate_pre_window(observations: list[Observation],
                           window: RuleWindow = RuleWindow(),
                           boundary_days: int = 2) -> Corroboration:
    """Test a claimed pre-window application against an imagery time series.

    With F the earliest usable positive date and L the latest usable
    negative date strictly before F:
      no F               -> unsure
      F before the window -> pre_window
      L inside the window -> in_window
      L within boundary_days before the window -> boundary
      otherwise           -> unsure (the series cannot pin the date down)
    """
    for earlier, later in zip(observations, observations[1:]):
        if later.observed_on < earlier.observed_on:
            raise ValidationError("observations must be sorted by date",
                                  code="unsorted_observations", field="observations")
    usable = [o for o in observations if o.usable]
    positives = [o.observed_on for o in usable if o.manure_visible]
    if not positives:
        return Corroboration.UNSURE
    first_positive = min(positives)
    if first_positive < window.start:
        return Corroboration.PRE_WINDOW
    negatives = [o.observed_on for o in usable
                 if not o.manure_visible and o.observed_on < first_positive]
    if not negatives:
        return Corroboration.UNSURE
    last_negative = max(negatives)
    if last_negative >= window.start:
        return Corroboration.IN_WINDOW
    if last_negative >= window.start - timedelta(days=boundary_days):
        return Corroboration.BOUNDARY
    return Corroboration.UNSURE


def substantiation_rate(results: list[Corroboration]) -> float:
    """Fraction of corroboration results consistent with the pre-window
    claim (pre_window plus boundary)."""
    if not results:
        raise ValidationError("no corroboration results", code="empty_input", field="results")
    supported = sum(1 for r in results
                    if r in (Corroboration.PRE_WINDOW, Corroboration.BOUNDARY))
    return supported / len(results)
