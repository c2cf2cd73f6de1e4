"""Command-line interface: generate | train | query | verify.

Every command is deterministic given its flags and seed. Exit codes:
0 success, 1 validation error, 2 I/O error, 3 no robust schedule within
eps (query only).
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, distributions, eda, io as edio
from .core import CapacityError, Instance, ValidationError, evaluate, make_scheduler

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NO_SCHEDULE = 3


def _derived_seed(seed: int, salt: int) -> int:
    return int(np.random.SeedSequence([seed, salt]).generate_state(1)[0])


def _add_theory_flags(parser: argparse.ArgumentParser, with_defaults: bool) -> None:
    """Flags mirror the theory-constant names one-to-one."""
    d = (lambda v: v) if with_defaults else (lambda v: None)
    parser.add_argument("--alpha", type=float, default=d(0.5), help="undercount slack in (0,1)")
    parser.add_argument("--delta", type=float, default=None,
                        help="tolerated local-average error (default eps/4)")
    parser.add_argument("--l", type=float, default=d(1.0), help="sample-target exponent")
    parser.add_argument("--c", type=float, default=d(1.0), help="event-count exponent")
    parser.add_argument("--d", type=float, default=d(1.0), help="delivery-bound exponent")
    parser.add_argument("--const", type=float, default=None,
                        help="event-probability floor scale (default: the mixture's)")
    parser.add_argument("--const1", type=float, default=d(1.0), help="event-count coefficient")
    parser.add_argument("--const2", type=float, default=None,
                        help="delivery-bound coefficient (default M / n^d)")


def _theory_from(args, n: int, eps: float, M: float, mixture_const: float) -> analysis.TheoryConstants:
    delta = args.delta if args.delta is not None else eps / 4.0
    const = args.const if args.const is not None else mixture_const
    const2 = args.const2 if args.const2 is not None else M / (n ** args.d)
    return analysis.TheoryConstants(
        n=n, c=args.c, d=args.d, l=args.l, alpha=args.alpha,
        delta=delta, eps=eps, const=const, const1=args.const1, const2=const2,
    )


# -- generate ----------------------------------------------------------------

def _cmd_generate(args) -> int:
    mixture = distributions.build_cube_mixture(
        n=args.n, f=args.events, eps=args.eps, M=args.M, const=args.const,
        tail_mass=args.tail_mass, law=args.law, grid=args.grid, seed=args.seed,
        separated=not args.overlap, sigma=args.sigma,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec_path = out_dir / "mixture.txt"
    edio.write_mixture_spec(mixture, spec_path)
    print(f"wrote {spec_path}")

    statics = analysis.default_statics(
        args.n, args.M, 0.05 * args.M, 0.2 * args.M, _derived_seed(args.seed, 1)
    )
    statics_path = out_dir / "statics.json"
    edio.write_statics(statics, statics_path)
    print(f"wrote {statics_path}")

    if args.emit_instances:
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 2]))
        for k in range(args.emit_instances):
            q, _ = distributions.sample(mixture, rng)
            path = out_dir / f"instance_{k:03d}.json"
            edio.write_instance(Instance(statics, q), path)
        print(f"wrote {args.emit_instances} instance files to {out_dir}")
    return EXIT_OK


# -- train -------------------------------------------------------------------

def _cmd_train(args) -> int:
    mixture = edio.read_mixture_spec(args.mixture)
    eps = args.eps if args.eps is not None else mixture.eps
    tc = _theory_from(args, mixture.n, eps, mixture.bound, mixture.const)

    if args.statics is not None:
        statics = edio.read_statics(args.statics)
        if statics.n != mixture.n:
            raise ValidationError(
                f"statics dimension {statics.n} != mixture dimension {mixture.n}"
            )
    else:
        statics = analysis.default_statics(
            mixture.n, mixture.bound, 0.05 * mixture.bound, 0.2 * mixture.bound,
            _derived_seed(args.seed, 2),
        )

    T = args.T if args.T is not None else analysis.required_runtime(tc)
    if args.max_samples is not None:
        T = min(T, args.max_samples)
    scheduler = make_scheduler(statics, args.target_ratio, bb_cap=args.bb_cap)
    pop = eda.run_eda(distributions.make_sampler(mixture), T, eps, scheduler,
                      args.seed, statics=statics)
    edio.write_population(pop, args.out)

    print(f"wrote {args.out}")
    print(f"training length T = {T}; samples consumed = {pop.counter.total}")
    print(f"final individuals: {len(pop.finals)}")
    shown = sorted(pop.finals, key=lambda fi: -fi.event_prob)[:10]
    for fi in shown:
        print(f"  members={len(fi.members):5d}  event_prob={fi.event_prob:.6f}  "
              f"value={fi.value:.6f}  ratio={fi.certified_ratio}")
    if len(pop.finals) > len(shown):
        print(f"  ... and {len(pop.finals) - len(shown)} more")
    if len(pop.finals) < mixture.f:
        print(f"warning: only {len(pop.finals)} final individuals for {mixture.f} mixture "
              "events; some events are likely uncovered (T may be too small)",
              file=sys.stderr)
    return EXIT_OK


# -- query -------------------------------------------------------------------

def _cmd_query(args) -> int:
    pop = edio.read_population(args.population)
    instance = edio.read_instance(args.instance)
    if instance.n != pop.counter.n:
        raise ValidationError(
            f"instance dimension {instance.n} != population dimension {pop.counter.n}"
        )
    eps = args.eps if args.eps is not None else pop.eps
    hit = eda.query_robust_schedule(pop, instance.delivery, eps)
    if hit is None:
        print(f"no robust schedule within eps = {eps} of the queried delivery vector")
        return EXIT_NO_SCHEDULE
    fi, schedule = hit
    idx = next(i for i, cand in enumerate(pop.finals) if cand is fi)
    dist = float(np.max(np.abs(fi.mean - instance.delivery)))
    value = evaluate(instance, schedule.perm).max_lateness
    bound = analysis.approx_ratio_bound(fi.value, fi.certified_ratio, eps, args.delta)
    print(f"matched individual: {idx}")
    print(f"distance: {dist!r}")
    print(f"permutation: {' '.join(str(int(j)) for j in schedule.perm)}")
    print(f"max lateness on queried instance: {value!r}")
    print("certified ratio bound: " + ("no guarantee" if math.isinf(bound) else repr(bound)))
    return EXIT_OK


# -- verify ------------------------------------------------------------------

_VERIFY_KEYS = (
    "n", "events", "eps", "M", "const", "tail_mass", "law", "grid",
    "separated", "sigma", "alpha", "delta", "l", "c", "d", "const1", "const2",
    "replications", "master_seed", "m_fresh", "T", "sample_cap", "target_ratio",
    "enum_cap", "bb_cap", "workers", "sweep_invariants",
)


def _cmd_verify(args) -> int:
    doc: dict = {}
    if args.config is not None:
        doc = edio.read_flat_config(args.config)
        unknown = set(doc) - set(_VERIFY_KEYS)
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    for key in _VERIFY_KEYS:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            doc[key] = flag_val

    for req in ("n", "events", "eps", "M", "const", "replications", "master_seed"):
        if doc.get(req) is None:
            raise ValidationError(f"missing required setting {req!r}")

    n, eps, M = doc["n"], doc["eps"], doc["M"]
    d_exp = doc.get("d", 1.0)
    cfg = analysis.CampaignConfig(
        n=n,
        events=doc["events"],
        eps=eps,
        bound=M,
        const=doc["const"],
        alpha=doc.get("alpha", 0.5),
        delta=doc.get("delta") if doc.get("delta") is not None else eps / 4.0,
        l=doc.get("l", 1.0),
        c=doc.get("c", 1.0),
        d=d_exp,
        const1=doc.get("const1", 1.0),
        const2=doc.get("const2") if doc.get("const2") is not None else M / (n ** d_exp),
        replications=doc["replications"],
        master_seed=doc["master_seed"],
        tail_mass=doc.get("tail_mass", 0.02),
        law=doc.get("law", "uniform"),
        grid=doc.get("grid", "auto"),
        separated=doc.get("separated", True),
        sigma=doc.get("sigma"),
        m_fresh=doc.get("m_fresh", 10_000),
        t_override=doc.get("T"),
        sample_cap=doc.get("sample_cap"),
        target_ratio=doc.get("target_ratio", 2.0),
        enum_cap=doc.get("enum_cap"),
        bb_cap=doc.get("bb_cap"),
        workers=doc.get("workers", 1),
        sweep_invariants=bool(doc.get("sweep_invariants", False)),
    )
    result = analysis.run_campaign(cfg)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "report.csv"
    json_path = out_dir / "summary.json"
    edio.write_campaign_csv(result, csv_path)
    edio.write_campaign_summary(result, {k: doc.get(k) for k in _VERIFY_KEYS}, json_path)
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    print(f"note: {result.note}")
    for key, value in result.aggregate.items():
        print(f"{key}: {value}")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edasched",
        description="Robust single-machine scheduling under uncertain delivery times.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a mixture spec (and optional instances)")
    g.add_argument("--n", type=int, required=True, help="jobs / vector dimension")
    g.add_argument("--events", type=int, required=True, help="number of concentration cubes")
    g.add_argument("--eps", type=float, required=True, help="cube side length")
    g.add_argument("--M", type=float, default=10.0, help="delivery-time bound")
    g.add_argument("--const", type=float, default=0.5, help="event-probability floor scale")
    g.add_argument("--tail-mass", type=float, default=0.02, dest="tail_mass")
    g.add_argument("--law", choices=("uniform", "gauss"), default="uniform")
    g.add_argument("--grid", default="auto", type=edio.parse_flat_value,
                   help="quantization step, 'auto' (eps/10) or 'none'")
    g.add_argument("--sigma", type=float, default=None, help="gauss law std dev (default eps/6)")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--overlap", action="store_true", help="allow overlapping cubes")
    g.add_argument("--emit-instances", type=int, default=0, dest="emit_instances")
    g.add_argument("--out-dir", default=".", dest="out_dir")
    g.set_defaults(func=_cmd_generate)

    t = sub.add_parser("train", help="run the sampling loop and write the population")
    t.add_argument("--mixture", required=True, help="mixture spec file")
    t.add_argument("--out", required=True, help="population file to write")
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--statics", default=None, help="statics/instance file (default: seeded)")
    t.add_argument("--T", type=int, default=None, help="training length override")
    t.add_argument("--max-samples", type=int, default=None, dest="max_samples",
                   help="cap on the default training length")
    t.add_argument("--eps", type=float, default=None, help="closeness radius (default: mixture eps)")
    t.add_argument("--target-ratio", type=float, default=2.0, dest="target_ratio")
    t.add_argument("--bb-cap", type=int, default=None, dest="bb_cap")
    _add_theory_flags(t, with_defaults=True)
    t.set_defaults(func=_cmd_train)

    q = sub.add_parser("query", help="look up a robust schedule for an instance")
    q.add_argument("--population", required=True)
    q.add_argument("--instance", required=True)
    q.add_argument("--eps", type=float, default=None, help="match radius (default: population eps)")
    q.add_argument("--delta", type=float, default=0.0, help="extra slack in the ratio bound")
    q.set_defaults(func=_cmd_query)

    v = sub.add_parser("verify", help="run a train-and-verify campaign, write reports")
    v.add_argument("--config", default=None, help="flat key=value config file")
    v.add_argument("--out-dir", default=".", dest="out_dir")
    v.add_argument("--n", type=int, default=None)
    v.add_argument("--events", type=int, default=None)
    v.add_argument("--eps", type=float, default=None)
    v.add_argument("--M", type=float, default=None)
    v.add_argument("--tail-mass", type=float, default=None, dest="tail_mass")
    v.add_argument("--law", choices=("uniform", "gauss"), default=None)
    v.add_argument("--grid", default=None, type=edio.parse_flat_value)
    v.add_argument("--sigma", type=float, default=None)
    v.add_argument("--replications", type=int, default=None)
    v.add_argument("--master-seed", type=int, default=None, dest="master_seed")
    v.add_argument("--m-fresh", type=int, default=None, dest="m_fresh")
    v.add_argument("--T", type=int, default=None)
    v.add_argument("--sample-cap", type=int, default=None, dest="sample_cap")
    v.add_argument("--target-ratio", type=float, default=None, dest="target_ratio")
    v.add_argument("--enum-cap", type=int, default=None, dest="enum_cap")
    v.add_argument("--bb-cap", type=int, default=None, dest="bb_cap")
    v.add_argument("--workers", type=int, default=None)
    v.add_argument("--sweep-invariants", action="store_const", const=True, default=None,
                   dest="sweep_invariants")
    _add_theory_flags(v, with_defaults=False)
    v.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
