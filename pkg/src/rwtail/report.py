"""Assembly and serialization of analysis reports.

A report is a plain nested dict, JSON-serializable and lossless: every
float is rounded to 12 significant digits at build time, so serializing
and re-parsing reproduces the report exactly and repeated runs with the
same inputs yield byte-identical files.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from typing import Any, Optional, Sequence

from .asymptotics import DirectionRate, TauResult
from .geometry import GeometrySummary
from .model import ConditionReport, ModelSpec, model_to_dict
from .network import MTBound, NetworkSpec, network_to_dict
from .stability import StabilityVerdict


def round12(x: float) -> float:
    """Round to 12 significant digits (the report's numeric resolution)."""
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r} cannot enter a report")
    return float(f"{x:.12g}")


def _vec(v: Sequence[float]) -> list[float]:
    return [round12(float(x)) for x in v]


def conditions_block(report: ConditionReport) -> dict:
    out = {}
    for name in ("i", "ii", "iii", "iv"):
        flag = getattr(report, name)
        out[name] = {"ok": flag.ok, "note": flag.note, "approximate": flag.approximate}
    out["all_ok"] = report.all_ok
    return out


def stability_block(v: StabilityVerdict) -> dict:
    return {
        "stable": v.stable,
        "case": v.case,
        "inner_products": _vec(v.inner_products),
        "extra_condition_applied": v.extra_condition_applied,
        "geometric_agreement": v.geometric_agreement,
        "note": v.note,
    }


def geometry_block(g: GeometrySummary) -> dict:
    ex = g.extreme
    return {
        "classification": g.classification,
        "theta_max": {str(k): _vec(ex.theta_max[k]) for k in (1, 2)},
        "theta_min": {str(k): _vec(ex.theta_min[k]) for k in (1, 2)},
        "theta_e": {
            str(k): (_vec(ex.theta_e[k]) if ex.theta_e[k] is not None else None) for k in (1, 2)
        },
        "theta_c": {str(k): _vec(ex.theta_c[k]) for k in (1, 2)},
        "gamma_k_at_max": {str(k): round12(ex.gamma_k_at_max[k]) for k in (1, 2)},
    }


def tau_block(direct: TauResult, iteration: Optional[TauResult]) -> dict:
    block: dict[str, Any] = {
        "classification": direct.classification,
        "direct": _vec(direct.tau),
    }
    if iteration is not None:
        gap = max(abs(direct.tau[0] - iteration.tau[0]), abs(direct.tau[1] - iteration.tau[1]))
        block["iteration"] = _vec(iteration.tau)
        block["iteration_steps"] = len(iteration.iteration_trace)
        block["route_gap"] = round12(gap)
    return block


def _fraction_str(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}" if f.denominator != 1 else str(f.numerator)


def direction_block(rate: DirectionRate, exactness: str) -> dict:
    per: dict[str, Any]
    if rate.periodicity.kind == "arithmetic" and rate.periodicity.delta is not None:
        per = {"kind": "arithmetic", "delta": _fraction_str(rate.periodicity.delta)}
    else:
        per = {"kind": "unknown", "note": "not representable - supply rational components"}
    block = {
        "unit": _vec(rate.c),
        "alpha": round12(rate.alpha),
        "active_constraint": rate.active_constraint,
        "periodicity": per,
        "exactness": exactness,
    }
    if rate.raw_direction is not None:
        block["raw"] = ",".join(_fraction_str(Fraction(x)) for x in rate.raw_direction)
    return block


def network_block(ns: NetworkSpec, rho: tuple[float, float], bound: Optional[MTBound], note: str = "") -> dict:
    block: dict[str, Any] = {
        "spec": {
            **{k: round12(v) for k, v in network_to_dict(ns).items() if k != "batch"},
            "batch": [[b1, b2, round12(p)] for b1, b2, p in ns.batch],
        },
        "rho": _vec(rho),
    }
    if ns.routing_warning:
        block["warning"] = ns.routing_warning
    if bound is not None:
        block["mt_bound"] = {
            "h": _vec((bound.h1, bound.h2)),
            "eta": _vec((bound.eta1, bound.eta2)),
            "solvable": bound.solvable,
            "tight": [bound.tight1, bound.tight2],
            "reasons": list(bound.reasons),
        }
    elif note:
        block["mt_bound_note"] = note
    return block


def model_block(model: ModelSpec) -> dict:
    doc = model_to_dict(model)
    return {
        region: [[dx, dy, round12(p)] for dx, dy, p in rows] for region, rows in doc.items()
    }


def serialize(report: dict) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def roundtrips(report: dict) -> bool:
    return json.loads(serialize(report)) == report
