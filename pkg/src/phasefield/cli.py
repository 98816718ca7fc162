"""Command-line entry point.

    phasefield run configs/fig1_ac_eq.json --out-dir out/fig1
    phasefield refine configs/table1_refine.json --out-dir out/table1
    phasefield stability --model AC --phiss 0.5 --modes 0,0 1,0 --measure

The stability analysis is carried out on [-pi, pi]^2; a mode (k, l) there is
cos(kx) cos(ly).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .potential import Formulation, Identity, ModelKind, ModelSpec, Polynomial
from .scenarios import ExperimentConfig, refinement_harness, run_experiment, write_refinement_csv
from .stability import StabilityQuery, growth_rate, measure_growth_rate

log = logging.getLogger("phasefield")


def _load(args) -> ExperimentConfig:
    config = ExperimentConfig.from_json(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.snapshot_every is not None:
        changes["snapshot_every"] = args.snapshot_every
    if args.policy is not None:
        changes["policy"] = args.policy
    return config.replace(**changes) if changes else config


def cmd_run(args) -> int:
    config = _load(args)
    out = Path(args.out_dir) / config.name
    log.info("running %s (%s, %d steps) into %s", config.name, config.scheme, config.steps, out)
    result = run_experiment(config, out, keep_snapshots=False)
    if not result.ok:
        log.error("run aborted: %s", result.error)
        return 2
    last = result.records[-1]
    log.info("done: t=%g energy=%.10g volume=%.10g", last.t, last.energy, last.volume)
    return 0


def cmd_refine(args) -> int:
    config = _load(args)
    out = Path(args.out_dir) / config.name
    out.mkdir(parents=True, exist_ok=True)
    rows = refinement_harness(config)
    write_refinement_csv(out / "refinement.csv", rows)
    for row in rows:
        order = "" if row.order is None else f"{row.order:.3f}"
        print(f"{row.dt:10.3e} {row.error:14.6e} {order}")
    return 0


def _mode(text: str) -> tuple[int, int]:
    try:
        k, l = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"mode must look like 'k,l', got {text!r}")
    return k, l


def cmd_stability(args) -> int:
    kind = ModelKind(args.model)
    h = Polynomial(args.m) if args.h == "polynomial" else Identity()
    model = ModelSpec(
        kind=kind,
        gamma1=args.gamma1,
        gamma2=args.gamma2,
        mobility=args.mobility,
        eta=args.eta,
        h=h,
        V0=args.v0,
    )
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out)
        header = ["model", "phiss", "k", "l", "sigma_analytic"]
        if args.measure:
            header.append("sigma_measured")
        w.writerow(header)
        for k, l in args.modes:
            sigma = growth_rate(StabilityQuery(model, args.phiss, k, l))
            row = [kind.value, repr(args.phiss), k, l, f"{sigma:.17g}"]
            if args.measure:
                measured = measure_growth_rate(
                    model, args.phiss, k, l, dt=args.dt, steps=args.steps, n=args.n,
                    formulation=Formulation(args.formulation),
                )
                row.append(f"{measured:.17g}")
            w.writerow(row)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phasefield", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, func, help_ in (
        ("run", cmd_run, "integrate one experiment"),
        ("refine", cmd_refine, "temporal refinement study against a fine reference"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="JSON experiment file")
        p.add_argument("--out-dir", default="out")
        p.add_argument("--seed", type=int)
        p.add_argument("--snapshot-every", type=int, metavar="N")
        p.add_argument("--policy", choices=("cn", "reset", "hybrid"))
        p.set_defaults(func=func)

    p = sub.add_parser("stability", help="growth rates of cos(kx)cos(ly) modes")
    p.add_argument("--model", choices=[k.value for k in ModelKind], default="AC")
    p.add_argument("--phiss", type=float, default=0.5)
    p.add_argument("--modes", type=_mode, nargs="+", default=[(0, 0), (1, 0), (1, 1)])
    p.add_argument("--gamma1", type=float, default=5e-2)
    p.add_argument("--gamma2", type=float, default=10.0)
    p.add_argument("--mobility", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=1e5)
    p.add_argument("--v0", type=float)
    p.add_argument("--h", choices=("identity", "polynomial"), default="identity")
    p.add_argument("--m", type=int, default=1)
    p.add_argument("--measure", action="store_true", help="also measure the rate by simulation")
    p.add_argument("--formulation", choices=("EQ", "SAV"), default="EQ")
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--steps", type=int, default=500)
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--output", help="CSV file (default: stdout)")
    p.set_defaults(func=cmd_stability)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(message)s")
    try:
        return args.func(args)
    except (ValueError, NotImplementedError, OSError) as exc:
        log.error("error: %s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
