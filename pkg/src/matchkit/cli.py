"""Command line entry point: ``matchkit <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .adversary import AdversaryAbort, run_adversary_C, run_adversary_R
from .adwords import (adwords_certify, adwords_frac_run, adwords_round_many, gen_adwords,
                      parse_adwords, rounding_bound, rounding_gamma, serialize_adwords)
from .baselines import (BalancePolicy, CoinFlipPolicy, FollowAdvicePolicy, GreedyPolicy,
                        balance_run, coinflip_run, follow_advice_run, greedy_run)
from .charts import emit_chart
from .core import ParseError, RunError, parse_instance, serialize_instance
from .frlp import FrlpError, build_frlp, export_lp, solve_frlp_embedded, solve_frlp_external
from .lab import LabPolicy, lab_certify, lab_run
from .numerics import CURVES, tradeoff_curve
from .offline import NoiseModel, gen_er, gen_ut, gen_weights, generate_advice, ingest_real, opt_matching
from .paw import PawPolicy, paw_certify, paw_run
from .sweep import parse_config, read_csv_rows, run_sweep, write_sweep

log = logging.getLogger("matchkit")


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_curve(args):
    algs = sorted(CURVES) if args.alg == "both" else [args.alg]
    if len(algs) == 1:
        rows = [(repr(lam), repr(r), repr(c)) for lam, r, c in tradeoff_curve(algs[0], args.grid)]
        text = _csv(["lambda", "r", "c"], rows)
    else:
        rows = [(a, repr(lam), repr(r), repr(c)) for a in algs for lam, r, c in tradeoff_curve(a, args.grid)]
        text = _csv(["algorithm", "lambda", "r", "c"], rows)
    _emit(text, args.out)
    if args.svg:
        Path(args.svg).write_text(emit_chart(read_csv_rows(text), "curve"))


def _run_alg(args, g):
    alg, lam = args.alg, args.lam
    if alg == "lab":
        res = lab_run(g, lam)
        report = lab_certify(res, g, lam).as_dict() if args.certify else None
    elif alg == "paw":
        res = paw_run(g, lam)
        report = paw_certify(res, g, lam).as_dict() if args.certify else None
    elif alg == "balance":
        res, report = balance_run(g), None
    elif alg == "greedy":
        res, report = greedy_run(g), None
    elif alg == "advice":
        res, report = follow_advice_run(g, args.complete), None
    else:
        res, report = coinflip_run(g, args.mix, args.complete), None
    return res, report


def cmd_run(args):
    g = parse_instance(Path(args.instance).read_text())
    res, report = _run_alg(args, g)
    opt, _ = opt_matching(g)
    lam = args.lam if args.alg in ("lab", "paw") else (args.mix if args.alg == "coinflip" else None)
    record = {"algorithm": args.alg, "lambda": lam, "alg_value": res.value,
              "opt_value": opt, "ratio": res.value / opt if opt > 0 else math.nan,
              "advice_value": g.advice_value()}
    if report is not None:
        record["certificate"] = {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
                                 for k, v in report.items()}
    if args.format == "json":
        print(json.dumps(record, sort_keys=True))
    else:
        flat = {k: v for k, v in record.items() if k != "certificate"}
        flat.update({f"cert_{k}": v for k, v in record.get("certificate", {}).items()})
        print(_csv(list(flat), [list(flat.values())]), end="")
    if report is not None and not report["passed"]:
        return 3
    return 0


_POLICIES = {
    "lab": lambda a: LabPolicy(a.lam),
    "paw": lambda a: PawPolicy(a.lam),
    "balance": lambda a: BalancePolicy(),
    "greedy": lambda a: GreedyPolicy(),
    "advice": lambda a: FollowAdvicePolicy(),
    "coinflip": lambda a: CoinFlipPolicy(a.mix),
}


def cmd_adversary(args):
    which = ["R", "C"] if args.which == "both" else [args.which]
    rows = []
    for w in which:
        fn = run_adversary_R if w == "R" else run_adversary_C
        try:
            t = fn(_POLICIES[args.alg](args), args.n)
        except AdversaryAbort as exc:
            print(f"error: adversary {w} aborted: {exc}", file=sys.stderr)
            return 2
        rows.append((w, args.alg, repr(args.lam), args.n, repr(t.alg_value), t.opt, repr(t.ratio)))
    print(_csv(["adversary", "algorithm", "lambda", "n", "alg_value", "opt_value", "ratio"], rows), end="")
    return 0


def cmd_frlp(args):
    if args.lp_file:
        sol = solve_frlp_external(Path(args.lp_file).read_text())
        print(f"c*={sol.c!r}")
        return 0
    model = build_frlp(args.n, args.r)
    if args.export:
        Path(args.export).write_text(export_lp(model))
        print(f"wrote {args.export}: {len(model.rows)} rows, {model.n_vars} variables")
        return 0
    sol = solve_frlp_embedded(model, args.solver)
    print(f"n={args.n} r={args.r!r} c*={sol.c!r} solver={sol.solver} max_violation={sol.max_violation():.3g}")
    return 0


def cmd_gen(args):
    if args.adwords:
        k, m, eps = args.adwords.split(",")
        _emit(serialize_adwords(gen_adwords(int(k), int(m), float(eps), args.seed)), args.out)
        return 0
    if args.er:
        n, p = args.er.split(",")
        g = gen_er(int(n), float(p), args.seed)
    else:
        g = gen_ut(args.ut)
    if args.weighted:
        g = gen_weights(g, args.seed)
    _emit(serialize_instance(g), args.out)
    return 0


def cmd_ingest(args):
    _emit(serialize_instance(ingest_real(Path(args.edges).read_text(), args.seed)), args.out)
    return 0


def cmd_advise(args):
    g = parse_instance(Path(args.instance).read_text()).without_advice()
    advice = generate_advice(g, NoiseModel(args.gamma, args.seed))
    _emit(serialize_instance(g.with_advice(advice)), args.out)
    return 0


def cmd_sweep(args):
    text = Path(args.config).read_text() if args.config else ""
    overrides = {"generator": args.generator, "trials": args.trials, "seed": args.seed,
                 "out": args.out, "workers": args.workers, "algorithms": args.algorithms,
                 "consistencies": args.consistencies, "gammas": args.gammas,
                 "weighted": True if args.weighted else None}
    cfg = parse_config(text, overrides)
    rows = run_sweep(cfg)
    path = write_sweep(cfg, rows)
    failed = sum(1 for r in rows if math.isnan(r[4]))
    print(f"wrote {path} ({len(rows)} rows, {failed} failed cells)")
    if args.svg:
        Path(args.svg).write_text(emit_chart(read_csv_rows(path.read_text()), "sweep"))
    return 0


def cmd_chart(args):
    rows = read_csv_rows(Path(args.csv).read_text())
    _emit(emit_chart(rows, args.style), args.out)
    return 0


def cmd_adwords(args):
    inst = parse_adwords(Path(args.instance).read_text())
    res = adwords_frac_run(inst, args.lam)
    cert = adwords_certify(res, inst, args.lam)
    revenue, spend = adwords_round_many(inst, res.allocation.rows, args.epsilon,
                                        range(args.seed, args.seed + args.trials))
    record = {"lambda": args.lam, "epsilon": args.epsilon, "gamma": rounding_gamma(args.epsilon),
              "frac_revenue": res.value, "advice_value": inst.advice_value(),
              "int_mean": float(revenue.mean()), "int_std": float(revenue.std(ddof=1)) if args.trials > 1 else 0.0,
              "bound": rounding_bound(args.epsilon) * res.value, "max_spend_ratio": float(spend.max()),
              "certificate_passed": bool(cert.passed)}
    print(json.dumps(record, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="matchkit", description="Learning-augmented online bipartite matching toolkit.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curve", help="closed-form robustness/consistency curve")
    p.add_argument("--alg", choices=["lab", "paw", "both"], default="lab")
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--out")
    p.add_argument("--svg")
    p.set_defaults(fn=cmd_curve)

    p = sub.add_parser("run", help="run one algorithm on an instance file")
    p.add_argument("--alg", choices=["lab", "paw", "balance", "greedy", "advice", "coinflip"], required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--mix", type=float, default=0.5, help="weight on advice for coinflip")
    p.add_argument("--complete", action="store_true", help="baselines also fill leftover mass greedily")
    p.add_argument("--instance", required=True)
    p.add_argument("--certify", action="store_true")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("adversary", help="run an adaptive hard instance")
    p.add_argument("--alg", choices=sorted(_POLICIES), required=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--mix", type=float, default=0.5)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--which", choices=["R", "C", "both"], default="both")
    p.set_defaults(fn=cmd_adversary)

    p = sub.add_parser("frlp", help="factor-revealing LP")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--r", type=float, default=0.5)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--export", metavar="FILE")
    g.add_argument("--solve", action="store_true")
    g.add_argument("--lp-file", metavar="FILE", help="solve an exported LP file")
    p.add_argument("--solver", choices=["highs", "simplex"], default="highs")
    p.set_defaults(fn=cmd_frlp)

    p = sub.add_parser("gen", help="generate an instance")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--er", metavar="N,P")
    g.add_argument("--ut", type=int, metavar="N")
    g.add_argument("--adwords", metavar="K,M,EPS")
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("ingest", help="bipartite instance from an edge list")
    p.add_argument("--edges", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("advise", help="attach noisy advice to an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_advise)

    p = sub.add_parser("sweep", help="noise sweep; key=value config plus overrides")
    p.add_argument("--config")
    p.add_argument("--generator", help="er:N,P | ut:N | file:PATH | edges:PATH")
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--algorithms")
    p.add_argument("--consistencies")
    p.add_argument("--gammas")
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--svg")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("chart", help="SVG chart from a CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--style", choices=["sweep", "curve"], default="sweep")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_chart)

    p = sub.add_parser("adwords", help="fractional AdWords run plus randomized rounding")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instance", required=True)
    p.set_defaults(fn=cmd_adwords)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args) or 0
    except (ParseError, RunError, FrlpError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
