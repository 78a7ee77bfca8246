"""landtriage: triage and dispatch for satellite-detected winter manure spreading.

Ingests detector output, routes it through the regulator (desk screening
plus specialist follow-up) and advocacy (radius and top-K verifier
dispatch) protocols, records ground observations and compliance rulings,
and recomputes every trial process metric from the raw event log.
"""

__version__ = "0.1.0"
