"""Instance and report files.

Instances are strict JSON documents: unknown keys are rejected and every
number must be finite.  Reports are JSON with a fixed key order so that a
rerun with the same seed is byte-identical except for the timestamp;
floats serialize through Python's shortest-round-trip repr, which is exact
at double precision.  Infinite values (an unbounded Fitzpatrick value, an
open dual) appear as the string "inf" so the parser can restore them
without ever feeding a float infinity through arithmetic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import ValidationError
from .fitzpatrick import AffineSubspace, FiniteSet, LipschitzGraph, MonotoneSet
from .measures import DiscreteMeasure, MartingalePlan
from .solver import SolverConfig
from .sspace import SSpace, make_sspace

__all__ = ["Instance", "load_instance", "dump_report", "load_report",
           "encode_set", "decode_set", "encode_plan", "decode_plan"]


def _reject_nonfinite(ignored):
    raise ValidationError("instance numbers must be finite")


def _check_finite_numbers(node, path="$"):
    if isinstance(node, bool):
        return
    if isinstance(node, (int, float)):
        if not math.isfinite(node):
            raise ValidationError(f"non-finite number at {path}")
    elif isinstance(node, list):
        for i, item in enumerate(node):
            _check_finite_numbers(item, f"{path}[{i}]")
    elif isinstance(node, dict):
        for key, item in node.items():
            _check_finite_numbers(item, f"{path}.{key}")


def _require_keys(doc: dict, allowed: set[str], where: str):
    unknown = set(doc) - allowed
    if unknown:
        raise ValidationError(f"unknown key(s) in {where}: {sorted(unknown)}")


@dataclass
class Instance:
    space: SSpace
    sigma: np.ndarray | None = None
    mean: np.ndarray | None = None
    nu: DiscreteMeasure | None = None
    monotone_set: MonotoneSet | None = None
    plan: MartingalePlan | None = None
    config: SolverConfig = SolverConfig()


_INSTANCE_KEYS = {"S", "Sigma", "mean", "nu", "G", "plan", "config"}
_CONFIG_KEYS = {"max_clusters", "exact_atom_cap", "restarts", "max_iterations",
                "seed", "fractional_split", "tolerances"}


def load_instance(path, tol: Tolerances = DEFAULT_TOLERANCES) -> Instance:
    """Parse and validate an instance file."""
    with open(path) as fh:
        try:
            doc = json.load(fh, parse_constant=_reject_nonfinite)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError("instance must be a JSON object")
    _require_keys(doc, _INSTANCE_KEYS, "instance")
    _check_finite_numbers(doc)
    if "S" not in doc:
        raise ValidationError('instance is missing "S"')

    cfg = _decode_config(doc.get("config", {}), tol)
    space = make_sspace(np.asarray(doc["S"], dtype=float), tol=cfg.tol)

    inst = Instance(space=space, config=cfg)
    if "Sigma" in doc:
        inst.sigma = np.asarray(doc["Sigma"], dtype=float)
    if "mean" in doc:
        inst.mean = np.asarray(doc["mean"], dtype=float)
    if "nu" in doc:
        nu_doc = doc["nu"]
        _require_keys(nu_doc, {"atoms", "weights"}, "nu")
        if "atoms" not in nu_doc:
            raise ValidationError('"nu" needs "atoms"')
        inst.nu = DiscreteMeasure.from_data(nu_doc["atoms"], nu_doc.get("weights"),
                                            merge_tol=cfg.tol.merge)
    if "G" in doc:
        inst.monotone_set = decode_set(space, doc["G"], cfg.tol)
    if "plan" in doc:
        if inst.nu is None:
            raise ValidationError('a "plan" needs a "nu" to couple to')
        inst.plan = decode_plan(inst.nu, doc["plan"], cfg.tol)
    return inst


def _decode_config(doc, tol: Tolerances) -> SolverConfig:
    if not isinstance(doc, dict):
        raise ValidationError('"config" must be an object')
    _require_keys(doc, _CONFIG_KEYS, "config")
    overrides = doc.get("tolerances", {})
    if not isinstance(overrides, dict):
        raise ValidationError('"config.tolerances" must be an object')
    try:
        tol = tol.replace(**{k: float(v) for k, v in overrides.items()})
    except KeyError as exc:
        raise ValidationError(str(exc)) from None
    kwargs = {k: doc[k] for k in doc if k != "tolerances"}
    return SolverConfig(tol=tol, **kwargs)


def encode_set(g: MonotoneSet) -> dict:
    if isinstance(g, FiniteSet):
        return {"type": "finite", "points": g.points.tolist()}
    if isinstance(g, AffineSubspace):
        return {"type": "affine", "x0": g.x0.tolist(), "P": g.p.tolist()}
    if isinstance(g, LipschitzGraph):
        return {"type": "lipschitz_graph",
                "axes": [ax.tolist() for ax in g.axes],
                "values": g.values.tolist()}
    raise ValidationError(f"unknown set representation {type(g).__name__}")


def decode_set(space: SSpace, doc, tol: Tolerances) -> MonotoneSet:
    if not isinstance(doc, dict) or "type" not in doc:
        raise ValidationError('"G" must be an object with a "type"')
    kind = doc["type"]
    if kind == "finite":
        _require_keys(doc, {"type", "points"}, "G")
        return FiniteSet(space, doc["points"], tol=tol)
    if kind == "affine":
        _require_keys(doc, {"type", "x0", "P"}, "G")
        return AffineSubspace(space, doc["x0"], doc["P"], tol=tol)
    if kind == "lipschitz_graph":
        _require_keys(doc, {"type", "axes", "values"}, "G")
        axes = [np.asarray(ax, dtype=float) for ax in doc["axes"]]
        return LipschitzGraph(space, axes, np.asarray(doc["values"], dtype=float),
                              tol=tol)
    raise ValidationError(f'unknown set type "{kind}"')


def encode_plan(plan: MartingalePlan) -> dict:
    return {"clusters": [
        {"x": c.x.tolist(), "p": c.p,
         "assignment": [[int(j), float(w)] for j, w in zip(c.atom_indices, c.masses)]}
        for c in plan.clusters]}


def decode_plan(nu: DiscreteMeasure, doc, tol: Tolerances) -> MartingalePlan:
    if not isinstance(doc, dict) or "clusters" not in doc:
        raise ValidationError('"plan" must be an object with "clusters"')
    _require_keys(doc, {"clusters"}, "plan")
    rows, cols, masses = [], [], []
    for k, cl in enumerate(doc["clusters"]):
        _require_keys(cl, {"x", "p", "assignment"}, f"plan.clusters[{k}]")
        for j, w in cl["assignment"]:
            rows.append(k)
            cols.append(int(j))
            masses.append(float(w))
    return MartingalePlan.from_assignment(nu, np.array(rows, dtype=int),
                                          np.array(cols, dtype=int),
                                          np.array(masses), tol=tol)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

_REPORT_KEYS = ["version", "command", "timestamp", "seed", "tolerances",
                "primal_value", "dual_value", "gap", "verdict", "checks",
                "plan", "set", "decomposition"]


def _enc_value(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, dict):
        return {k: _enc_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_enc_value(x) for x in v]
    return v


def _dec_value(v):
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    if isinstance(v, dict):
        return {k: _dec_value(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_dec_value(x) for x in v]
    return v


def dump_report(report: dict, path):
    """Write a report with fixed key order; floats round-trip exactly."""
    out = {}
    for key in _REPORT_KEYS:
        if key in report:
            out[key] = _enc_value(report[key])
    extra = set(report) - set(_REPORT_KEYS)
    if extra:
        raise ValidationError(f"unknown report key(s): {sorted(extra)}")
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, allow_nan=False)
        fh.write("\n")


def load_report(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh, parse_constant=_reject_nonfinite)
    if not isinstance(doc, dict):
        raise ValidationError("report must be a JSON object")
    _require_keys(doc, set(_REPORT_KEYS), "report")
    return {k: _dec_value(v) for k, v in doc.items()}
