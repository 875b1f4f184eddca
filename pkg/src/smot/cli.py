"""Command-line surface.

Subcommands: ``gaussian`` (closed-form covariance split), ``solve``
(discrete primal solver plus affine-dual certification), ``certify``
(check a given plan/set pair), ``fitz`` (tabulate Fitzpatrick values,
projections, and optional hyperboloid level-set traces as CSV plot data).

Exit codes: 0 success or certified, 2 validation error, 3 numerical
failure, 4 duality gap open, 5 certificate violated.  Reports embed the
effective seed and tolerances; a rerun with the same seed is byte-identical
except for the timestamp field.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time

import numpy as np

from . import __version__
from .errors import (
    EvaluationError,
    MarginalMismatch,
    NumericalError,
    ValidationError,
)
from .fitzpatrick import LipschitzGraph
from .gaussian import decompose, pca_directions
from .io import Instance, dump_report, encode_plan, encode_set, load_instance
from .linalg import rank_tol, sym_eig
from .solver import certify, dual_affine_candidate, solve_exact, solve_local
from .sspace import SSpace

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_GAP_OPEN = 4
EXIT_VIOLATED = 5


def _base_report(command: str, seed, tol) -> dict:
    return {
        "version": __version__,
        "command": command,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "seed": seed,
        "tolerances": tol.as_dict(),
    }


def _psd_min(a: np.ndarray) -> float:
    sym = 0.5 * (a + a.T)
    return float(np.linalg.eigvalsh(sym).min())


def _cmd_gaussian(args) -> int:
    inst = _load(args)
    if inst.sigma is None:
        raise ValidationError("gaussian needs a Sigma matrix in the instance")
    sp = inst.space
    tol = inst.config.tol
    dec = decompose(sp, inst.sigma, inst.mean, tol=tol)
    pca = pca_directions(sp, inst.sigma, tol=tol)
    d = sp.d
    sig_scale = float(np.abs(sym_eig(dec.sigma, tol=tol).values).max())
    s_scale = float(np.abs(sp.eigen.values).max())
    slack = 1e-9 * max(1.0, sig_scale) * max(1.0, s_scale)
    eye = np.eye(d)
    checks = {
        "sum_is_sigma": bool(np.linalg.norm(dec.q + dec.r - dec.sigma)
                             <= 1e-10 * max(1.0, sig_scale)),
        "q_psd": _psd_min(dec.q) >= -slack,
        "r_psd": _psd_min(dec.r) >= -slack,
        "qsq_psd": _psd_min(dec.q @ sp.s @ dec.q) >= -slack,
        "rsr_nsd": _psd_min(-dec.r @ sp.s @ dec.r) >= -slack,
        "qsr_zero": bool(np.linalg.norm(dec.q @ sp.s @ dec.r) <= slack),
        "p_idempotent": bool(np.linalg.norm(dec.p @ dec.p - dec.p) <= slack),
        "p_sigma_is_q": bool(np.linalg.norm(dec.p @ dec.sigma - dec.q) <= slack),
        "sp_symmetric": bool(np.linalg.norm(sp.s @ dec.p - (sp.s @ dec.p).T)
                             <= slack),
        "sp_psd": _psd_min(sp.s @ dec.p) >= -slack,
        "s_rest_nsd": _psd_min(-sp.s @ (eye - dec.p)) >= -slack,
        "s_gap_pd": _psd_min(sp.s @ (2.0 * dec.p - eye)) > 0.0,
        "rank_q": rank_tol(dec.q, tol.rank, tol=tol, scale=sig_scale),
        "rank_r": rank_tol(dec.r, tol.rank, tol=tol, scale=sig_scale),
        "rank_q_expected": sp.m,
        "rank_r_expected": d - sp.m,
        "value_agreement": abs(dec.primal_value - dec.dual_value)
        <= 1e-8 * (1.0 + abs(dec.primal_value)),
        "near_singular_s": bool(
            (np.abs(sp.eigen.values) <= 10.0 * tol.rank * s_scale).any()),
    }
    report = _base_report("gaussian", args.seed, tol)
    report.update({
        "primal_value": dec.primal_value,
        "dual_value": dec.dual_value,
        "gap": dec.dual_value - dec.primal_value,
        "verdict": "certified" if all(
            v for k, v in checks.items() if isinstance(v, bool)) else "violated",
        "checks": checks,
        "set": {"type": "affine", "x0": dec.mean.tolist(), "P": dec.p.tolist()},
        "decomposition": {
            "Q": dec.q, "R": dec.r, "P": dec.p, "V": dec.v, "Lambda": dec.lam,
            "mean": dec.mean, "Sigma": dec.sigma,
            "pca": [{"value": lam, "direction": v.tolist()} for lam, v in pca],
        },
    })
    dump_report(report, args.output)
    if report["verdict"] != "certified":
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_solve(args) -> int:
    inst = _load(args)
    if inst.nu is None:
        raise ValidationError("solve needs a nu measure in the instance")
    sp, nu, cfg = inst.space, inst.nu, inst.config
    if nu.n <= cfg.exact_atom_cap:
        plan = solve_exact(sp, nu, cfg)
        method = "exact"
    else:
        plan = solve_local(sp, nu, cfg)
        method = "local"
    report = _base_report("solve", cfg.seed, cfg.tol)
    checks: dict = {"method": method, "atoms": nu.n, "clusters": plan.k,
                    "max_clusters_cap": cfg.max_clusters or nu.n}
    primal = plan.value(sp)
    report["primal_value"] = primal
    report["plan"] = encode_plan(plan)
    verdict = "gap_open"
    try:
        cand = dual_affine_candidate(sp, nu, tol=cfg.tol)
    except ValidationError:
        cand = None
        checks["affine_candidate"] = False
    if cand is not None:
        checks["affine_candidate"] = True
        checks["martingale_residual"] = cand.martingale_residual
        cert = certify(sp, plan, cand.monotone_set, nu, eps=args.eps, tol=cfg.tol)
        verdict = cert.verdict
        report["dual_value"] = cert.dual_value
        report["gap"] = cert.gap
        report["set"] = encode_set(cand.monotone_set)
        checks["support_all_passed"] = all(c.passed for c in cert.support_check)
        checks["forward_all_member"] = all(f.member for f in cert.forward_check)
        checks["forward_eps"] = cert.eps
    report["verdict"] = verdict
    report["checks"] = checks
    dump_report(report, args.output)
    return EXIT_OK if verdict == "certified" else EXIT_GAP_OPEN


def _cmd_certify(args) -> int:
    inst = _load(args)
    if inst.nu is None or inst.plan is None or inst.monotone_set is None:
        raise ValidationError("certify needs nu, plan, and G in the instance")
    sp, cfg = inst.space, inst.config
    cert = certify(sp, inst.plan, inst.monotone_set, inst.nu,
                   eps=args.eps, tol=cfg.tol)
    report = _base_report("certify", cfg.seed, cfg.tol)
    report.update({
        "primal_value": cert.primal_value,
        "dual_value": cert.dual_value,
        "gap": cert.gap,
        "verdict": cert.verdict,
        "checks": {
            "support_all_passed": all(c.passed for c in cert.support_check),
            "forward_all_member": all(f.member for f in cert.forward_check),
            "forward_eps": cert.eps,
            "dual_is_lower_bound": cert.dual_is_lower_bound,
            "support": [dataclasses.asdict(c) for c in cert.support_check],
            "forward": [dataclasses.asdict(f) for f in cert.forward_check],
        },
        "plan": encode_plan(inst.plan),
        "set": encode_set(inst.monotone_set),
    })
    dump_report(report, args.output)
    if cert.verdict == "certified":
        return EXIT_OK
    if cert.verdict == "violated":
        return EXIT_VIOLATED
    return EXIT_GAP_OPEN


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_grid(spec: str, d: int) -> np.ndarray:
    axes = []
    for part in spec.split(","):
        pieces = part.split(":")
        if len(pieces) != 3:
            raise ValidationError(f'bad grid axis "{part}" (want lo:hi:n)')
        lo, hi, count = float(pieces[0]), float(pieces[1]), int(pieces[2])
        if count < 1 or not (hi > lo or count == 1):
            raise ValidationError(f'bad grid axis "{part}"')
        axes.append(np.linspace(lo, hi, count))
    if len(axes) != d:
        raise ValidationError(f"grid spec has {len(axes)} axes, space has {d}")
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def _load_probes(path, d: int) -> np.ndarray:
    import json
    with open(path) as fh:
        doc = json.load(fh)
    pts = np.atleast_2d(np.asarray(doc, dtype=float))
    if pts.shape[1] != d or not np.isfinite(pts).all():
        raise ValidationError("probe points must be finite d-vectors")
    return pts


def _trace_hyperboloid(sp: SSpace, y: np.ndarray, phi: float,
                       box: tuple[np.ndarray, np.ndarray], n: int = 201,
                       ) -> list[tuple[float, float]]:
    """Points of { z : S(y - z, y - z) = phi } found by grid sign changes."""
    xs = np.linspace(box[0][0], box[1][0], n)
    ys = np.linspace(box[0][1], box[1][1], n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    diff = np.stack([y[0] - gx, y[1] - gy], axis=-1)
    vals = np.einsum("...i,ij,...j->...", diff, sp.s, diff) - phi
    pts = []
    sign_change = (vals[:-1, :] * vals[1:, :]) < 0.0
    for i, j in zip(*np.nonzero(sign_change)):
        t = vals[i, j] / (vals[i, j] - vals[i + 1, j])
        pts.append((xs[i] + t * (xs[i + 1] - xs[i]), ys[j]))
    sign_change = (vals[:, :-1] * vals[:, 1:]) < 0.0
    for i, j in zip(*np.nonzero(sign_change)):
        t = vals[i, j] / (vals[i, j] - vals[i, j + 1])
        pts.append((xs[i], ys[j] + t * (ys[j + 1] - ys[j])))
    return pts


def _cmd_fitz(args) -> int:
    inst = _load(args)
    if inst.monotone_set is None:
        raise ValidationError("fitz needs a G in the instance")
    sp, g = inst.space, inst.monotone_set
    if args.probes is not None and args.grid is not None:
        raise ValidationError("give either --probes or --grid, not both")
    if args.probes is not None:
        probes = _load_probes(args.probes, sp.d)
    elif args.grid is not None:
        probes = _parse_grid(args.grid, sp.d)
    else:
        raise ValidationError("fitz needs --probes FILE or --grid SPEC")
    if args.hyperboloid is not None and sp.d != 2:
        raise ValidationError("tracing supported for d = 2 only")

    header = (["probe_index"] + [f"y_{i+1}" for i in range(sp.d)]
              + ["psi", "psi_finite", "psi_lower_bound", "phi", "n_proj",
                 "proj_index"] + [f"x_{i+1}" for i in range(sp.d)])
    rows = [",".join(header)]
    hyper_rows = ["probe_index,z_1,z_2"]
    for idx, y in enumerate(probes):
        ev = g.psi(y)
        base = [str(idx)] + [_fmt(c) for c in y]
        if not ev.is_finite:
            rows.append(",".join(base + ["", "0", "0", "", "0", "", ""]
                                 + [""] * (sp.d - 1)))
            continue
        phi = sp.scalar_square(y) - 2.0 * ev.value
        try:
            projections = g.project(y)
        except EvaluationError:
            projections = []
        shared = [_fmt(ev.value), "1", "1" if ev.lower_bound else "0",
                  _fmt(phi), str(len(projections))]
        if not projections:
            rows.append(",".join(base + shared + [""] * (sp.d + 1)))
        for pi, x in enumerate(projections):
            rows.append(",".join(base + shared + [str(pi)]
                                 + [_fmt(c) for c in x]))
        if args.hyperboloid is not None:
            box = _fitz_box(sp, g, probes)
            for z1, z2 in _trace_hyperboloid(sp, y, phi, box):
                hyper_rows.append(f"{idx},{_fmt(z1)},{_fmt(z2)}")
    with open(args.output, "w") as fh:
        fh.write("\n".join(rows) + "\n")
    if args.hyperboloid is not None:
        with open(args.hyperboloid, "w") as fh:
            fh.write("\n".join(hyper_rows) + "\n")
    return EXIT_OK


def _fitz_box(sp: SSpace, g, probes: np.ndarray):
    pts = [probes]
    if isinstance(g, LipschitzGraph):
        pts.append(g._nodes_x)
    elif hasattr(g, "points"):
        pts.append(g.points)
    else:
        pts.append(probes)
    allpts = np.concatenate(pts, axis=0)
    lo = allpts.min(axis=0)
    hi = allpts.max(axis=0)
    width = np.maximum(hi - lo, 1.0)
    return lo - 0.5 * width, hi + 0.5 * width


def _load(args) -> Instance:
    inst = load_instance(args.input)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "max_clusters", None) is not None:
        overrides["max_clusters"] = args.max_clusters
    if getattr(args, "restarts", None) is not None:
        overrides["restarts"] = args.restarts
    tol = inst.config.tol
    for item in args.tol or []:
        name, _, value = item.partition("=")
        if not value:
            raise ValidationError(f'bad --tol "{item}" (want NAME=VALUE)')
        try:
            tol = tol.replace(**{name: float(value)})
        except KeyError as exc:
            raise ValidationError(str(exc)) from None
    overrides["tol"] = tol
    inst.config = dataclasses.replace(inst.config, **overrides)
    return inst


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smot",
        description="Backward martingale transport in pseudo-Euclidean spaces")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--input", required=True, help="instance JSON path")
        p.add_argument("--output", required=True, help="report output path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tol", action="append", metavar="NAME=VALUE",
                       help="tolerance override, repeatable")

    p = sub.add_parser("gaussian", help="closed-form covariance split")
    common(p)

    p = sub.add_parser("solve", help="discrete primal solve plus certification")
    common(p)
    p.add_argument("--eps", type=float, default=1e-3,
                   help="forward-check epsilon")
    p.add_argument("--max-clusters", type=int, default=None)
    p.add_argument("--restarts", type=int, default=None)

    p = sub.add_parser("certify", help="certify a given plan against a set")
    common(p)
    p.add_argument("--eps", type=float, default=1e-3)

    p = sub.add_parser("fitz", help="tabulate psi/phi/projections as CSV")
    common(p)
    p.add_argument("--probes", default=None, help="JSON file of probe points")
    p.add_argument("--grid", default=None, metavar="lo:hi:n[,lo:hi:n...]")
    p.add_argument("--hyperboloid", default=None,
                   help="also trace level sets to this CSV (d = 2 only)")
    return parser


_HANDLERS = {
    "gaussian": _cmd_gaussian,
    "solve": _cmd_solve,
    "certify": _cmd_certify,
    "fitz": _cmd_fitz,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except MarginalMismatch as exc:
        print(f"smot: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValidationError as exc:
        print(f"smot: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"smot: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FileNotFoundError as exc:
        print(f"smot: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
