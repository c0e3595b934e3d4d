"""Command-line front end.

Subcommands: analyze (conditions, stability, geometry, decay rates),
verify (analyze plus truncated-chain and Monte Carlo oracle table),
mtbound (geometric product-form bound for batch networks), simulate
(Monte Carlo only) and plot (SVG of the level sets and domain).

Exit codes: 0 success on a stable model, 2 stable-analysis refused because
the model is unstable, 3 a standing condition fails, 4 simultaneous
arrivals where single-node batches are required, 1 anything else (I/O,
parse or numeric failure).  Machine-readable error payloads go to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction
from typing import Optional, Sequence

from . import asymptotics as asy
from . import geometry as geo
from . import network as nw
from . import report as rp
from . import verify as vf
from .errors import (
    ModelFileError,
    NoisyWindowError,
    NullDriftError,
    RwtailError,
    SimultaneousArrivalsError,
)
from .model import ModelSpec, check_conditions, load_model, model_from_dict
from .stability import assess_stability
from .svgplot import render_geometry_svg, write_svg

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNSTABLE = 2
EXIT_CONDITION = 3
EXIT_SIMULTANEOUS = 4

DEFAULT_DIRECTIONS = "1,0;0,1;1,1"
TRUNCATED_COORD_TOL = 0.03
TRUNCATED_DIR_TOL = 0.05
MONTE_CARLO_TOL = 0.10


def _fail(kind: str, message: str, **extra) -> None:
    payload = {"error": kind, "message": message}
    payload.update(extra)
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)


def _parse_rational(tok: str) -> Fraction:
    tok = tok.strip()
    if "/" in tok:
        num, den = tok.split("/", 1)
        return Fraction(int(num), int(den))
    value = float(tok)
    if value == int(value):
        return Fraction(int(value))
    # decimals become rationals over 10^6 (documented approximation)
    return Fraction(round(value * 10**6), 10**6)


def parse_directions(spec: str) -> list[tuple[Fraction, Fraction]]:
    out = []
    for pair in spec.split(";"):
        pair = pair.strip()
        if not pair:
            continue
        parts = pair.split(",")
        if len(parts) != 2:
            raise ModelFileError(f"direction {pair!r} is not 'c1,c2'")
        c1, c2 = _parse_rational(parts[0]), _parse_rational(parts[1])
        if c1 < 0 or c2 < 0 or (c1 == 0 and c2 == 0):
            raise ModelFileError(f"direction {pair!r} must be nonnegative and nonzero")
        out.append((c1, c2))
    if not out:
        raise ModelFileError("no directions given")
    return out


def _unit(c: tuple[Fraction, Fraction]) -> tuple[float, float]:
    norm = math.hypot(float(c[0]), float(c[1]))
    return (float(c[0]) / norm, float(c[1]) / norm)


def _load_input(path: str) -> tuple[ModelSpec, Optional[nw.NetworkSpec]]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"cannot read input file {path!r}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelFileError("input file must hold a JSON object")
    if nw.is_network_document(doc):
        ns = nw.network_from_dict(doc)
        return nw.build_model(ns), ns
    return model_from_dict(doc), None


def _analysis(
    path: str,
    directions: list[tuple[Fraction, Fraction]],
) -> tuple[dict, int, Optional[dict]]:
    """Shared pipeline; returns (report, exit_code, context or None).

    The context carries live objects (model, geometry, domain, rates) for
    the verify and plot layers; it is None when analysis stopped early.
    """
    model, ns = _load_input(path)
    report: dict = {"input": {"path": path, "kind": "network" if ns else "model"}}
    report["model"] = rp.model_block(model)

    conditions = check_conditions(model)
    report["conditions"] = rp.conditions_block(conditions)
    if not conditions.all_ok:
        report["verdict"] = "condition failure: " + ", ".join(conditions.failed())
        _fail(
            "condition_failure",
            "standing conditions failed",
            conditions_failed=conditions.failed(),
        )
        return report, EXIT_CONDITION, None

    verdict = assess_stability(model)
    report["stability"] = rp.stability_block(verdict)
    if not verdict.stable:
        report["verdict"] = "unstable: no stationary distribution"
        return report, EXIT_UNSTABLE, None

    gamma, gamma1, gamma2 = model.mgfs()
    summary = geo.analyze_geometry(gamma, gamma1, gamma2)
    report["geometry"] = rp.geometry_block(summary)

    tau_d = asy.tau_direct(summary)
    tau_i = asy.tau_iteration(gamma, gamma1, gamma2)
    report["tau"] = rp.tau_block(tau_d, tau_i)

    domain = asy.DomainDescription(tau=tau_d, geometry=summary)
    rates = []
    blocks = []
    for raw in directions:
        rate = asy.alpha_direction(domain, _unit(raw), raw)
        exact = asy.exactness_verdict(summary, tau_d.tau, rate)
        rates.append(rate)
        blocks.append(rp.direction_block(rate, exact))
    report["directions"] = blocks

    axis_rates = (
        asy.alpha_direction(domain, (1.0, 0.0)).alpha,
        asy.alpha_direction(domain, (0.0, 1.0)).alpha,
    )
    report["alpha_axes"] = [rp.round12(axis_rates[0]), rp.round12(axis_rates[1])]

    if ns is not None:
        rho = nw.utilizations(ns)
        if ns.has_simultaneous():
            report["network"] = rp.network_block(
                ns, rho, None, note="simultaneous arrivals: bound not defined"
            )
        else:
            bound = nw.mt_bound(ns, summary)
            t1, t2, reasons = nw.tightness(ns, summary, bound, axis_rates)
            block = rp.network_block(ns, rho, bound)
            block["mt_bound"]["numeric_tight"] = [t1, t2]
            block["mt_bound"]["reasons"] = list(reasons)
            report["network"] = block

    report["verdict"] = "stable"
    context = {
        "model": model,
        "network": ns,
        "geometry": summary,
        "domain": domain,
        "rates": rates,
        "tau": tau_d,
        "directions": directions,
    }
    return report, EXIT_OK, context


def _print_summary(report: dict) -> None:
    cond = report.get("conditions")
    if cond:
        flags = " ".join(
            f"({name}) {'ok' if cond[name]['ok'] else 'FAIL'}" for name in ("i", "ii", "iii", "iv")
        )
        print(f"conditions: {flags}")
    stab = report.get("stability")
    if stab:
        print(
            f"stability: {'stable' if stab['stable'] else 'UNSTABLE'}"
            f" case={stab['case']} inner_products={stab['inner_products']}"
        )
    if "geometry" in report:
        print(f"classification: {report['geometry']['classification']}")
    if "tau" in report:
        t = report["tau"]
        print(f"tau (direct):    ({t['direct'][0]:.12g}, {t['direct'][1]:.12g})")
        if "iteration" in t:
            print(
                f"tau (iteration): ({t['iteration'][0]:.12g}, {t['iteration'][1]:.12g})"
                f"  route gap {t['route_gap']:.3g}"
            )
    for block in report.get("directions", []):
        per = block["periodicity"]
        per_s = f"delta={per['delta']}" if per["kind"] == "arithmetic" else per["kind"]
        print(
            f"alpha[{block.get('raw', '?')}] = {block['alpha']:.12g}"
            f"  [{block['active_constraint']}] {per_s}; {block['exactness']}"
        )
    net = report.get("network")
    if net:
        print(f"rho: ({net['rho'][0]:.6g}, {net['rho'][1]:.6g})")
        mt = net.get("mt_bound")
        if mt:
            print(
                f"mt bound: h=({mt['h'][0]:.12g}, {mt['h'][1]:.12g})"
                f" eta=({mt['eta'][0]:.12g}, {mt['eta'][1]:.12g}) tight={mt['tight']}"
            )
    for row in report.get("oracle", {}).get("rows", []):
        print(
            f"oracle {row['quantity']:<38} analytic={row.get('analytic', float('nan')):> 12.6g}"
            f" fitted={row.get('fitted', float('nan')):> 12.6g} status={row['status']}"
        )
    print(f"verdict: {report.get('verdict', '?')}")


def _write_outputs(report: dict, args) -> None:
    text = rp.serialize(report)
    if getattr(args, "json", None):
        if args.json == "-":
            sys.stdout.write(text)
        else:
            with open(args.json, "w", encoding="utf-8") as fh:
                fh.write(text)
    _print_summary(report)


def cmd_analyze(args) -> int:
    directions = parse_directions(args.directions)
    report, code, context = _analysis(args.input, directions)
    if context is not None and getattr(args, "plot", None):
        svg = render_geometry_svg(
            context["geometry"], context["domain"], context["rates"]
        )
        write_svg(args.plot, svg)
    _write_outputs(report, args)
    return code


def _oracle_row(quantity, analytic, tol, source, fit_call) -> dict:
    row = {
        "quantity": quantity,
        "analytic": rp.round12(analytic),
        "tolerance": tol,
        "source": source,
    }
    try:
        fit = fit_call()
    except NoisyWindowError as exc:
        row["status"] = "WINDOW_TOO_NOISY"
        row["note"] = str(exc)
        return row
    fitted = -fit.slope
    rel = abs(fitted - analytic) / abs(analytic) if analytic else math.inf
    row.update(
        fitted=rp.round12(fitted),
        rel_err=rp.round12(rel),
        r_squared=rp.round12(fit.r_squared),
        status="PASS" if rel <= tol else "FAIL",
    )
    return row


def cmd_verify(args) -> int:
    directions = parse_directions(args.directions)
    report, code, context = _analysis(args.input, directions)
    if context is None:
        _write_outputs(report, args)
        return code

    model = context["model"]
    tau = context["tau"].tau
    domain = context["domain"]
    window = (args.fit_lo, args.fit_hi)
    axis = report["alpha_axes"]
    chain = None
    if args.truncation >= 20:
        chain = vf.solve_truncated(model, args.truncation)

    def _noisy(msg: str):
        def raise_it():
            raise NoisyWindowError(msg)

        return raise_it

    too_small = _noisy(
        f"truncation {args.truncation} below the minimum usable size 20 (WINDOW_TOO_NOISY)"
    )
    rows = []
    for k in (1, 2):
        for level in (0, 1, 2):
            rows.append(
                _oracle_row(
                    f"tau{k} (other fixed at {level})",
                    tau[k - 1],
                    TRUNCATED_COORD_TOL,
                    "truncated",
                    (
                        lambda k=k, level=level: vf.fit_decay(
                            chain, coord=k, fixed_level=level, window=window
                        )
                    )
                    if chain is not None
                    else too_small,
                )
            )
    for k in (1, 2):
        rows.append(
            _oracle_row(
                f"alpha{k} (marginal)",
                axis[k - 1],
                TRUNCATED_COORD_TOL,
                "truncated",
                (lambda k=k: vf.fit_decay(chain, coord=k, window=window))
                if chain is not None
                else too_small,
            )
        )
    for raw, rate in zip(context["directions"], context["rates"]):
        label = ",".join(str(x) for x in raw)
        rows.append(
            _oracle_row(
                f"alpha ({label})",
                rate.alpha,
                TRUNCATED_DIR_TOL,
                "truncated",
                (lambda raw=raw: vf.fit_decay(chain, direction=raw, window=window))
                if chain is not None
                else too_small,
            )
        )
    sim = vf.simulate(model, args.replications, args.horizon, args.seed)
    for k in (1, 2):
        rows.append(
            _oracle_row(
                f"alpha{k} (simulated marginal)",
                axis[k - 1],
                MONTE_CARLO_TOL,
                "montecarlo",
                lambda k=k: vf.fit_sim_decay(sim, k),
            )
        )
    oracle: dict = {
        "truncation": args.truncation,
        "replications": args.replications,
        "horizon": args.horizon,
        "seed": args.seed,
        "rows": rows,
    }
    if chain is not None:
        oracle["residual"] = rp.round12(chain.residual)
        oracle["solver"] = chain.method
    report["oracle"] = oracle
    if args.csv:
        vf.export_tail_csv(args.csv, vf.tail_rows(chain=chain, sim=sim, k=1, max_level=60))
    if getattr(args, "plot", None):
        svg = render_geometry_svg(context["geometry"], domain, context["rates"])
        write_svg(args.plot, svg)
    _write_outputs(report, args)
    if any(row["status"] == "FAIL" for row in rows):
        return EXIT_ERROR
    return code


def cmd_mtbound(args) -> int:
    model, ns = _load_input(args.input)
    if ns is None:
        raise ModelFileError("mtbound needs a network file, not a raw model")
    rho = nw.utilizations(ns)
    bound = nw.mt_bound(ns)
    report = {
        "input": {"path": args.input, "kind": "network"},
        "network": rp.network_block(ns, rho, bound),
        "verdict": "bound solved" if bound.solvable else "bound unsolvable",
    }
    _write_outputs(report, args)
    return EXIT_OK if bound.solvable else EXIT_ERROR


def cmd_simulate(args) -> int:
    model, _ = _load_input(args.input)
    sim = vf.simulate(model, args.replications, args.horizon, args.seed)
    report = {
        "input": {"path": args.input},
        "replications": sim.replications,
        "horizon": sim.horizon,
        "burn_in": sim.burn_in,
        "seed": sim.seed,
        "samples": sim.samples,
        "tail_probability_1": [rp.round12(float(x)) for x in sim.tail_probability(1)[:41]],
        "tail_probability_2": [rp.round12(float(x)) for x in sim.tail_probability(2)[:41]],
        "verdict": "simulated",
    }
    if args.csv:
        vf.export_tail_csv(args.csv, vf.tail_rows(sim=sim, k=1, max_level=60))
    _write_outputs(report, args)
    return EXIT_OK


def cmd_plot(args) -> int:
    directions = parse_directions(args.directions)
    report, code, context = _analysis(args.input, directions)
    if context is None:
        _write_outputs(report, args)
        return code
    svg = render_geometry_svg(context["geometry"], context["domain"], context["rates"])
    write_svg(args.output, svg)
    print(f"wrote {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rwtail",
        description="stability, convergence domain and tail decay rates of a "
        "two-dimensional reflecting random walk or batch-arrival network",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_dirs=True):
        p.add_argument("input", help="model or network JSON file")
        if with_dirs:
            p.add_argument(
                "--directions",
                default=DEFAULT_DIRECTIONS,
                help="semicolon-separated direction pairs, rational or decimal "
                f"components (default {DEFAULT_DIRECTIONS!r})",
            )
        p.add_argument("--json", help="write the full report to this file ('-' for stdout)")

    p = sub.add_parser("analyze", help="conditions, stability, geometry and decay rates")
    common(p)
    p.add_argument("--plot", help="also write an SVG of the geometry")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="analyze plus truncated-chain and Monte Carlo oracles")
    common(p)
    p.add_argument("--truncation", type=int, default=80, help="grid size N (default 80)")
    p.add_argument("--replications", type=int, default=200)
    p.add_argument("--horizon", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=20240501)
    p.add_argument("--fit-lo", type=float, default=vf.FIT_WINDOW[0], help="fit window lower fraction")
    p.add_argument("--fit-hi", type=float, default=vf.FIT_WINDOW[1], help="fit window upper fraction")
    p.add_argument("--csv", help="export tail curves (level, tail_probability, source)")
    p.add_argument("--plot", help="also write an SVG of the geometry")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("mtbound", help="geometric product-form bound for a batch network")
    common(p, with_dirs=False)
    p.set_defaults(func=cmd_mtbound)

    p = sub.add_parser("simulate", help="Monte Carlo tail counts only")
    common(p, with_dirs=False)
    p.add_argument("--replications", type=int, default=200)
    p.add_argument("--horizon", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=20240501)
    p.add_argument("--csv", help="export tail curves")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plot", help="SVG of the level sets, tau box and domain")
    common(p)
    p.add_argument("output", help="output SVG path")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ModelFileError as exc:
        _fail("input_error", str(exc))
        return EXIT_ERROR
    except SimultaneousArrivalsError as exc:
        _fail("simultaneous_arrivals", str(exc))
        return EXIT_SIMULTANEOUS
    except NullDriftError as exc:
        _fail("condition_failure", str(exc), conditions_failed=["iv"])
        return EXIT_CONDITION
    except RwtailError as exc:
        _fail("numeric_failure", str(exc))
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
