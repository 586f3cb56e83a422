"""Noise sweeps over generated or ingested instances."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .baselines import balance_run, greedy_run
from .core import GraphInstance, parse_instance, serialize_instance
from .lab import lab_run
from .numerics import BALANCE_RATIO, lambda_lab_for_consistency, lambda_paw_for_consistency
from .offline import NoiseModel, gen_er, gen_ut, gen_weights, generate_advice, ingest_real, opt_matching
from .paw import paw_run

log = logging.getLogger(__name__)

CSV_HEADER = ["algorithm", "lambda", "gamma", "trial", "alg_value", "opt_value", "ratio"]


@dataclass
class SweepConfig:
    generator: str = "er:100,0.2"
    weighted: bool = False
    algorithms: tuple = ("greedy", "balance", "lab", "paw")
    consistencies: tuple = (0.7, 0.8, 0.9, 1.0)
    gammas: tuple = tuple(np.linspace(0.0, 1.0, 10).tolist())
    trials: int = 10
    seed: int = 0
    out: str = "sweep_out"
    workers: int = 0

    def __post_init__(self):
        self.algorithms = tuple(self.algorithms)
        self.consistencies = tuple(float(c) for c in self.consistencies)
        self.gammas = tuple(float(g) for g in self.gammas)
        unknown = set(self.algorithms) - {"greedy", "balance", "lab", "paw"}
        if unknown:
            raise ValueError(f"unknown algorithms {sorted(unknown)}")
        if any(not BALANCE_RATIO < c <= 1.0 for c in self.consistencies):
            raise ValueError("consistency targets must lie in (1 - 1/e, 1]")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if any(not 0.0 <= g <= 1.0 for g in self.gammas):
            raise ValueError("gammas must lie in [0, 1]")

    def to_text(self) -> str:
        d = asdict(self)
        out = []
        for k, v in d.items():
            if isinstance(v, (tuple, list)):
                v = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            out.append(f"{k}={v}")
        return "\n".join(out) + "\n"


_LISTS = {"algorithms": str, "consistencies": float, "gammas": float}
_SCALARS = {"generator": str, "trials": int, "seed": int, "out": str, "workers": int}


def parse_config(text: str, overrides: dict | None = None) -> SweepConfig:
    """``key=value`` lines (``#`` comments) merged with non-None overrides."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        raw[k] = v
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    kw = {}
    for k, v in raw.items():
        if k in _LISTS:
            kw[k] = tuple(_LISTS[k](s) for s in v.split(",")) if isinstance(v, str) else tuple(v)
        elif k in _SCALARS:
            kw[k] = _SCALARS[k](v)
        elif k == "weighted":
            kw[k] = v if isinstance(v, bool) else v.lower() in ("1", "true", "yes")
        else:
            raise ValueError(f"unknown config key {k!r}")
    return SweepConfig(**kw)


def _seed(*parts) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def make_instance(cfg: SweepConfig, trial: int) -> GraphInstance:
    kind, _, arg = cfg.generator.partition(":")
    s = _seed(cfg.seed, trial)
    if kind == "er":
        n, p = arg.split(",")
        g = gen_er(int(n), float(p), s)
    elif kind == "ut":
        g = gen_ut(int(arg))
    elif kind == "file":
        g = parse_instance(Path(arg).read_text()).without_advice()
    elif kind == "edges":
        g = ingest_real(Path(arg).read_text(), s)
    else:
        raise ValueError(f"unknown generator {cfg.generator!r}")
    if cfg.weighted:
        g = gen_weights(g, _seed(cfg.seed, trial, 1))
    return g


def _algorithms(cfg: SweepConfig, unweighted: bool):
    out = []
    for name in cfg.algorithms:
        if name == "greedy":
            out.append(("greedy", None, lambda g, lam: greedy_run(g)))
        elif name == "balance":
            out.append(("balance", None, balance_run))
        elif name == "lab":
            out += [("lab", lambda_lab_for_consistency(c), lab_run) for c in cfg.consistencies]
        elif name == "paw" and unweighted:
            out += [("paw", lambda_paw_for_consistency(c), paw_run) for c in cfg.consistencies]
    return out


def run_cell(cfg: SweepConfig, gi: int, trial: int) -> list[list]:
    gamma = cfg.gammas[gi]
    g = make_instance(cfg, trial)
    opt, _ = opt_matching(g)
    advice = generate_advice(g, NoiseModel(gamma, _seed(cfg.seed, trial, 2, gi)))
    # every algorithm reads the same serialized instance and advice
    h = parse_instance(serialize_instance(g.with_advice(advice)))
    rows = []
    for name, lam, fn in _algorithms(cfg, g.unweighted):
        try:
            val = fn(h, lam).value
        except Exception as exc:  # recorded, the sweep goes on
            log.warning("cell gamma=%s trial=%s %s failed: %s", gamma, trial, name, exc)
            val = math.nan
        ratio = val / opt if opt > 0 else math.nan
        rows.append([name, lam, gamma, trial, val, opt, ratio])
    return rows


def _run_cell_args(args):
    return run_cell(*args)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _sort_key(row):
    name, lam, gamma, trial = row[:4]
    return (name, -1.0 if lam is None else lam, gamma, trial)


def worker_count(cfg: SweepConfig, cells: int) -> int:
    cap = int(os.environ.get("MATCHKIT_WORKERS", "0") or 0)
    want = cfg.workers or os.cpu_count() or 1
    if cap > 0:
        want = min(want, cap)
    return max(1, min(want, cells))


def run_sweep(cfg: SweepConfig) -> list[list]:
    """All cells of the (gamma, trial) grid, sorted by (algorithm, lambda, gamma, trial)."""
    cells = [(cfg, gi, trial) for gi in range(len(cfg.gammas)) for trial in range(cfg.trials)]
    workers = worker_count(cfg, len(cells))
    if workers == 1:
        parts = [run_cell(*c) for c in cells]
    else:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_cell_args, cells))
    rows = [r for part in parts for r in part]
    return sorted(rows, key=_sort_key)


def write_sweep(cfg: SweepConfig, rows) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(cfg.to_text())
    path = out / "sweep.csv"
    path.write_text(rows_to_csv(rows))
    return path


def read_csv_rows(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))
