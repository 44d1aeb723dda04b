"""Command-line interface: ``bellkit {check,chsh,local,quantum,simulate,verify}``.

Exit codes: 0 success / condition holds / member, 1 a condition fails or the
behavior is non-local, 2 input error, 3 resource or solver error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import conditions as cond
from .core import EPS_NORM, EPS_ZERO, JointDistribution, build_joint
from .errors import BellkitError
from .geometry import (TOL_BIS, TOL_LP, MINUS_POSITION, chsh_max, correlator_form,
                       deterministic_strategies, local_membership, local_visibility)
from .modelfile import behavior_file, load_model, serialize_model, write_transcript
from .quantum import MeasurementDirection, TwoQubitState, pure_state_behavior, singlet_behavior
from .simulator import empirical_condition_check, simulate, summarize

ENV_TOL = "BELLKIT_TOL"

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_RESOURCE = 0, 1, 2, 3


def _default_tol() -> float:
    raw = os.environ.get(ENV_TOL)
    if raw is None:
        return EPS_NORM
    try:
        return float(raw)
    except ValueError:
        print(f"warning: ignoring non-numeric {ENV_TOL}={raw!r}", file=sys.stderr)
        return EPS_NORM


def _fmt(x: float, digits: int) -> str:
    return f"{x:#.{digits}g}"


def _table(rows: list[tuple], headers: tuple) -> str:
    cells = [tuple(map(str, headers))] + [tuple(map(str, r)) for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def cmd_check(args) -> int:
    mf = load_model(args.file, args.norm_tol)
    tol = args.tol
    reports = []
    if mf.hv_model is not None:
        m = mf.hv_model
        j = build_joint(m, tol=args.norm_tol)
        j = JointDistribution(j.scenario, j.table, args.zero_tol)
        reports += [
            cond.check_no_conspiracy(j, tol),
            cond.check_bell_local_factorized(m, tol),
            cond.check_bell_local_conditional(m, tol),
            cond.check_parameter_independence(j, tol),
            cond.check_outcome_independence(j, tol),
            cond.check_fr(j, tol),
            cond.check_no_signaling(mf.as_behavior(), tol),
        ]
        if m.labels is not None:
            reports.append(cond.check_no_extension(m, tol))
    else:
        # A bare behavior is viewed as a model with a single hidden-variable value.
        b = mf.as_behavior()
        m = mf.as_model()
        j = build_joint(m, tol=args.norm_tol)
        j = JointDistribution(j.scenario, j.table, args.zero_tol)
        reports += [
            cond.check_no_signaling(b, tol),
            cond.check_bell_local_factorized(m, tol),
            cond.check_parameter_independence(j, tol),
            cond.check_outcome_independence(j, tol),
        ]
    rows = [(r.condition_name, "holds" if r.holds else "FAILS", _fmt(r.max_deviation, args.digits),
             r.vacuous_cells, f"{r.worst_term} {r.worst_cell}" if r.worst_term else "-") for r in reports]
    print(f"{args.file}: {mf.kind}, scenario {mf.scenario.shape}, tolerance {tol:g}")
    print(_table(rows, ("condition", "verdict", "max deviation", "vacuous", "worst cell")))
    return EXIT_OK if all(r.holds for r in reports) else EXIT_FAIL


def cmd_chsh(args) -> int:
    b = load_model(args.file, args.norm_tol).as_behavior()
    res = chsh_max(b)
    E = res.correlators
    print("correlators E(a,b):")
    print(_table([(f"a={a}", _fmt(E[a, 0], args.digits), _fmt(E[a, 1], args.digits)) for a in range(2)],
                 ("", "b=0", "b=1")))
    sign = "+" if res.variant < 4 else "-"
    print(f"best variant: {res.variant} (minus on E{MINUS_POSITION[res.variant % 4]}, overall sign {sign})")
    print(f"CHSH value: {res.value:.4f}")
    return EXIT_OK


def cmd_local(args) -> int:
    b = load_model(args.file, args.norm_tol).as_behavior()
    cert = local_membership(b, args.tol_lp)
    d = args.digits
    if cert.member:
        print(f"member of the local polytope (phase-one residual {cert.residual:.3g})")
        strategies = deterministic_strategies(b.scenario)
        rows = [(k, strategies[k][0], strategies[k][1], _fmt(w, d)) for k, w in sorted(cert.weights.items())]
        print(_table(rows, ("strategy", "x per a", "y per b", "weight")))
    else:
        print("NOT a member of the local polytope")
        print(f"separating functional: value {_fmt(cert.functional_value, d)} > local bound {_fmt(cert.local_bound, d)}")
        c = cert.functional
        rows = [((a, bb, x, y), _fmt(c[a, bb, x, y], d)) for a, bb, x, y in np.ndindex(c.shape)]
        print(_table(rows, ("(a,b,x,y)", "coefficient")))
        if b.scenario.shape == (2, 2, 2, 2):
            g, ga, gb = correlator_form(c)
            if np.allclose(ga, 0, atol=1e-9) and np.allclose(gb, 0, atol=1e-9):
                scale = np.abs(g).max()
                print("correlator form (rescaled): " + " ".join(
                    f"{g[a, bb] / scale:+.0f}*E{a}{bb}" for a in range(2) for bb in range(2)))
    if args.visibility:
        v = local_visibility(b, args.tol_bis, args.tol_lp)
        print(f"critical visibility: {_fmt(v, d)}")
    return EXIT_OK if cert.member else EXIT_FAIL


def _direction(text: str) -> MeasurementDirection:
    parts = text.split(":")
    return MeasurementDirection.from_angles(*(float(p) for p in parts))


def cmd_quantum(args) -> int:
    da = [_direction(t) for t in args.angles_a]
    db = [_direction(t) for t in args.angles_b]
    if args.state:
        amps = []
        for tok in args.state:
            re, _, im = tok.partition(",")
            amps.append(complex(float(re), float(im or 0)))
        b = pure_state_behavior(TwoQubitState(amps), da, db)
        desc = f"pure state {args.state}"
    else:
        b = singlet_behavior(da, db)
        desc = "singlet"
    desc += f", angles A {args.angles_a}, B {args.angles_b}"
    text = serialize_model(behavior_file(b, name=args.name or "quantum behavior", description=desc))
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    mf = load_model(args.file, args.norm_tol)
    ref = load_model(args.ref, args.norm_tol).as_behavior() if args.ref else mf.as_behavior()
    t = simulate(mf.as_model(), args.runs, args.seed, workers=args.workers)
    stem = Path(args.file).stem
    out = Path(args.out or f"{stem}-seed{args.seed}.transcript")
    with open(out, "w", encoding="utf-8") as fh:
        write_transcript(t, fh)
    summary = summarize(t, ref)
    checks = [empirical_condition_check(t, c, args.z) for c in
              ("no-signaling", "no-conspiracy", "parameter-independence", "outcome-independence")]
    doc = {
        "runs": summary.n_runs,
        "seed": t.seed,
        "model_digest": t.model_digest,
        "counts": summary.counts.tolist(),
        "empirical_behavior": summary.behavior.p.tolist(),
        "stderr": summary.stderr.tolist(),
        "unsampled_settings": [list(c) for c in summary.unsampled],
        "chsh": summary.chsh,
        "chsh_stderr": summary.chsh_stderr,
        "tv_distance": summary.tv_distance,
        "empirical_checks": [
            {"condition": r.condition_name, "holds": r.holds, "max_z": r.max_deviation,
             "vacuous": r.vacuous_cells, "min_support": r.min_support} for r in checks
        ],
    }
    summary_path = Path(args.summary or out.with_suffix(".summary.json"))
    summary_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {out} ({len(t)} runs) and {summary_path}")
    d = args.digits
    if summary.chsh is not None:
        print(f"empirical CHSH: {_fmt(summary.chsh, d)} +/- {_fmt(summary.chsh_stderr, d)}")
    if summary.tv_distance is not None:
        print(f"max total-variation distance to reference: {_fmt(summary.tv_distance, d)}")
    for r in checks:
        print(f"  {r.condition_name}: {'holds' if r.holds else 'FAILS'} at {args.z:g} sigma "
              f"(max z {_fmt(r.max_deviation, d)}, min cell count {r.min_support})")
    return EXIT_OK


def cmd_verify(args) -> int:
    suites = [
        lambda: cond.verify_appendix_a(args.trials, args.seed, args.tol),
        lambda: cond.verify_appendix_b(args.trials, args.seed, args.tol),
        lambda: cond.verify_jarrett(args.trials, args.seed, args.tol),
    ]
    ok = True
    for run in suites:
        start = time.perf_counter()
        rep = run()
        elapsed = time.perf_counter() - start
        fails = ", ".join(f"{k}: {v}" for k, v in rep.direction_failures.items())
        print(f"{rep.name}: {rep.agreements}/{rep.trials} agree [{fails}] ({elapsed:.2f}s)")
        if not rep.ok:
            ok = False
            print(f"  counterexample: {json.dumps(rep.counterexample)}")
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bellkit", description="Bell-experiment probability toolkit")
    parser.add_argument("--digits", type=int, default=6, help="significant digits in reports (default 6)")
    parser.add_argument("--norm-tol", type=float, default=EPS_NORM, help="normalization tolerance for input files")
    parser.add_argument("--zero-tol", type=float, default=EPS_ZERO, help="probability below which a conditioning event is vacuous")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="run every applicable condition checker on a model file")
    p.add_argument("file")
    p.add_argument("--tol", type=float, default=_default_tol(), help=f"condition tolerance (env {ENV_TOL})")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("chsh", help="correlators and maximal CHSH value")
    p.add_argument("file")
    p.set_defaults(func=cmd_chsh)

    p = sub.add_parser("local", help="local-polytope membership with certificate")
    p.add_argument("file")
    p.add_argument("--visibility", action="store_true", help="also compute the critical visibility")
    p.add_argument("--tol-lp", type=float, default=TOL_LP)
    p.add_argument("--tol-bis", type=float, default=TOL_BIS)
    p.set_defaults(func=cmd_local)

    p = sub.add_parser("quantum", help="write the behavior of a two-qubit state")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=["singlet"], default="singlet")
    src.add_argument("--state", nargs=4, metavar="RE,IM", help="amplitudes of |00>,|01>,|10>,|11>")
    p.add_argument("--angles-a", nargs="+", required=True, metavar="POLAR[:AZIMUTH]", help="degrees")
    p.add_argument("--angles-b", nargs="+", required=True, metavar="POLAR[:AZIMUTH]")
    p.add_argument("--name")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_quantum)

    p = sub.add_parser("simulate", help="sample single runs and summarize")
    p.add_argument("file")
    p.add_argument("--runs", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--ref", help="reference behavior file for the distance estimate")
    p.add_argument("--out", help="transcript path")
    p.add_argument("--summary", help="summary JSON path")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--z", type=float, default=5.0, help="z-threshold for empirical checks")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="property suites for the equivalence results")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--tol", type=float, default=_default_tol())
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except BellkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
