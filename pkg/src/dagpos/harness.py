"""Command-line entry point: single runs, sweeps, baseline comparison, oracle vectors.

Config files are plain ``key = value`` lines; ``#`` starts a comment.  Keys are
the :class:`~dagpos.sim.SimConfig` field names.  A file becomes a sweep spec as
soon as it carries any of::

    sweep.<field> = v1, v2, ...     # one axis per line
    seeds = 20                      # or an explicit list: seeds = 3, 5, 8
    output_dir = out/sweep
    budget = 5000                   # max cells x seeds (default 100000)

Exit codes: 0 success, 2 config error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import itertools
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from multiprocessing import Pool
from pathlib import Path
from typing import Sequence

from .metrics import (RunSummary, build_report, histogram_csv, summarize, tips_csv)
from .sim import ConfigInvalid, SimConfig, export_trace, run_simulation

log = logging.getLogger("dagpos")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class ParseError(ValueError):
    def __init__(self, msg: str, line: int | None = None, key: str | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + msg)
        self.line = line
        self.key = key


class ValidationError(ValueError):
    pass


@dataclass
class SweepSpec:
    base: SimConfig
    axes: list = field(default_factory=list)        # [(field, [values])]
    seeds: list = field(default_factory=lambda: [0])
    output_dir: str = "sweep_out"
    budget: int = 100_000

    def cells(self) -> list[SimConfig]:
        names = [a for a, _ in self.axes]
        out = []
        for combo in itertools.product(*(vals for _, vals in self.axes)):
            out.append(self.base.replace(**dict(zip(names, combo))))
        return out or [self.base]

    def validate(self) -> "SweepSpec":
        cells = self.cells()
        if len(cells) * len(self.seeds) > self.budget:
            raise ValidationError(f"{len(cells)} cells x {len(self.seeds)} seeds exceeds budget "
                                  f"{self.budget}")
        for c in cells:
            try:
                c.validate()
            except ConfigInvalid as exc:
                raise ValidationError(str(exc)) from None
        return self


_FIELDS = {f.name: f for f in dataclasses.fields(SimConfig)}


def _convert(name: str, raw: str, line: int):
    kind = type(getattr(SimConfig(), name))
    try:
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if kind is int:
            return int(raw, 0)
        if kind is float:
            return float(raw)
        if kind is tuple:
            return tuple(float(x) for x in raw.replace(",", " ").split())
        return raw
    except ValueError:
        raise ParseError(f"bad value {raw!r} for {name}", line, name) from None


def parse_text(text: str) -> SimConfig | SweepSpec:
    kv: dict = {}
    axes: list = []
    seeds = None
    output_dir = None
    budget = None
    for n, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ParseError(f"expected 'key = value', got {body!r}", n)
        key, val = (s.strip() for s in body.split("=", 1))
        if key.startswith("sweep."):
            name = key[6:]
            if name not in _FIELDS or name == "seed":
                raise ParseError(f"unknown sweep field {name!r}", n, name)
            if _FIELDS[name].type in ("tuple", tuple):
                raise ParseError(f"cannot sweep {name}", n, name)
            vals = [_convert(name, v.strip(), n) for v in val.split(",") if v.strip()]
            if not vals:
                raise ParseError(f"empty axis {name}", n, name)
            axes.append((name, vals))
        elif key == "seeds":
            parts = [p.strip() for p in val.split(",") if p.strip()]
            try:
                nums = [int(p, 0) for p in parts]
            except ValueError:
                raise ParseError(f"bad seeds {val!r}", n, key) from None
            seeds = list(range(nums[0])) if len(nums) == 1 else nums
        elif key == "output_dir":
            output_dir = val
        elif key == "budget":
            try:
                budget = int(val)
            except ValueError:
                raise ParseError(f"bad budget {val!r}", n, key) from None
        elif key in _FIELDS:
            kv[key] = _convert(key, val, n)
        else:
            raise ParseError(f"unknown key {key!r}", n, key)
    cfg = SimConfig(**kv)
    sweep = axes or seeds is not None or output_dir is not None or budget is not None
    if not sweep:
        try:
            return cfg.validate()
        except ConfigInvalid as exc:
            raise ValidationError(str(exc)) from None
    spec = SweepSpec(cfg, axes, seeds if seeds is not None else [cfg.seed],
                     output_dir or "sweep_out", budget or 100_000)
    return spec.validate()


def parse_config(path: str | os.PathLike) -> SimConfig | SweepSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_text(text)


def config_hash(cfg: SimConfig) -> str:
    d = cfg.to_dict()
    d.pop("seed")
    blob = json.dumps(d, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def warn_regime(cfg: SimConfig) -> None:
    if cfg.variant != "praos" and cfg.w < cfg.delta_slots:
        log.warning("w = %d is below the delay bound of %d slots; insecure regime",
                    cfg.w, cfg.delta_slots)


# ---------------------------------------------------------------------------
# sweeps


def _run_job(job: tuple[dict, int, int, str]) -> tuple[str, int, str | None]:
    cfgd, seed, first, path = job
    cfgd = dict(cfgd, epsilon_targets=tuple(cfgd["epsilon_targets"]))
    try:
        tr = run_simulation(SimConfig(**cfgd).replace(seed=seed))
        s = summarize(tr)
        if seed == first:
            Path(path).with_name(f"tips_{seed}.csv").write_text(tips_csv(tr))
        tmp = path + ".tmp"
        Path(tmp).write_text(s.to_json() + "\n")
        os.replace(tmp, path)
        return path, seed, None
    except Exception as exc:  # reported, not raised: other cells continue
        return path, seed, f"{type(exc).__name__}: {exc}"


def write_report(cell_dir: Path, cfg: SimConfig, seeds: Sequence[int]) -> None:
    runs = cell_dir / "runs"
    sums = [RunSummary.from_json((runs / f"seed_{s}.json").read_text()) for s in seeds]
    rep = build_report(sums, cfg.epsilon_targets, cfg.w, cfg.calib_c1, cfg.calib_c2,
                       cfg.slot_duration)
    (cell_dir / "summary.json").write_text(rep.to_json() + "\n")
    (cell_dir / "histogram.csv").write_text(histogram_csv(rep))
    first = runs / f"tips_{seeds[0]}.csv"
    if first.exists():
        (cell_dir / "tips.csv").write_text(first.read_text())
    (cell_dir / "config.json").write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=1) + "\n")
    (cell_dir / "DONE").write_text("")


def run_sweep(spec: SweepSpec, jobs: int | None = None) -> int:
    out = Path(spec.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = spec.cells()
    manifest = {"seeds": list(spec.seeds),
                "cells": [{"hash": config_hash(c), "config": {**c.to_dict(), "seed": None}}
                          for c in cells]}
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    todo = []
    pending_cells = []
    for c in cells:
        d = out / config_hash(c)
        if (d / "DONE").exists():
            continue
        (d / "runs").mkdir(parents=True, exist_ok=True)
        pending_cells.append((c, d))
        for s in spec.seeds:
            p = d / "runs" / f"seed_{s}.json"
            if not p.exists():
                todo.append((c.to_dict(), s, spec.seeds[0], str(p)))
    failures = []
    jobs = jobs or os.cpu_count() or 1
    if jobs > 1 and len(todo) > 1:
        with Pool(min(jobs, len(todo))) as pool:
            results = pool.map(_run_job, todo, chunksize=1)
    else:
        results = [_run_job(j) for j in todo]
    for path, seed, err in results:
        if err:
            failures.append((path, seed, err))
            log.error("run %s failed: %s", path, err)
    bad_dirs = {str(Path(p).parent.parent) for p, _, _ in failures}
    for c, d in pending_cells:
        if str(d) in bad_dirs:
            continue
        write_report(d, c, spec.seeds)
    return EXIT_RUNTIME if failures else EXIT_OK


# ---------------------------------------------------------------------------
# comparison


@dataclass
class RatioRow:
    depth: int
    p_dag: float
    p_praos: float
    ratio: float | None
    lower_bound: bool

    def cell(self) -> str:
        if self.ratio is None:
            return "n/a"
        return (">= " if self.lower_bound else "") + f"{self.ratio:.4g}"


def _load_summaries(d: Path) -> list[RunSummary]:
    runs = d / "runs"
    if not runs.is_dir():
        subs = sorted(p for p in d.iterdir() if (p / "runs").is_dir()) if d.is_dir() else []
        if len(subs) != 1:
            raise ParseError(f"{d} is not a cell directory")
        runs = subs[0] / "runs"
    files = sorted(runs.glob("seed_*.json"), key=lambda p: int(p.stem.split("_")[1]))
    if not files:
        raise ParseError(f"no run summaries under {runs}")
    return [RunSummary.from_json(p.read_text()) for p in files]


def compare_baseline(dag: Sequence[RunSummary], praos: Sequence[RunSummary],
                     depths: Sequence[int]) -> list[RatioRow]:
    """Per depth, P_praos(d) / P_dag(d) over per-run max depths.

    When the DAG side has no run reaching ``d`` the ratio is reported as the
    lower bound ``N * P_praos(d)`` with N the number of DAG runs.
    """
    na, nb = len(dag), len(praos)
    rows = []
    for d in depths:
        ca = sum(1 for s in dag if s.max_depth >= d)
        cb = sum(1 for s in praos if s.max_depth >= d)
        pa, pb = ca / na, cb / nb
        if ca > 0:
            rows.append(RatioRow(d, pa, pb, pb / pa, False))
        elif cb > 0:
            rows.append(RatioRow(d, pa, pb, na * pb, True))
        else:
            rows.append(RatioRow(d, pa, pb, None, False))
    return rows


def ratio_table(rows: Sequence[RatioRow]) -> str:
    lines = ["depth,p_dag,p_praos,ratio"]
    for r in rows:
        lines.append(f"{r.depth},{r.p_dag!r},{r.p_praos!r},{r.cell()}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# oracle vectors


def oracle_vectors(seed: int, count: int, size: int) -> list[dict]:
    import random

    from . import oracles as O

    out = []
    for k in range(count):
        rng = random.Random(seed * 1_000_003 + k)
        g, w = O.random_dag(rng, rng.randint(2, size))
        t = max(v["slot"] for v in g.values()) + 1
        names = O.topo_names(g)
        pairs = []
        for a, b in itertools.combinations(names, 2):
            if O.comparable(g, a, b):
                continue
            rec = {"i": a, "j": b, "cca": O.cca(g, a, b), "gap": O.gap(g, a, b, w, t)}
            if O.hist_conflict(g, a, b):
                rec["ctr"] = O.ctr(g, a, b, w, t)
            pairs.append(rec)
        win = O.window(g, t, w)
        out.append({
            "seed": seed, "index": k, "w": w, "t": t, "dag": g,
            "tips": sorted(O.tips(g, t, w)),
            "frontier": sorted(O.frontier(g, t, w)),
            "max_antichain": O.max_antichain(g, win),
            "min_chain_cover": O.min_chain_cover(g, win),
            "linearize": O.linearize(g, "g", O.frontier(g, t, w)),
            "pairs": pairs,
        })
    return out


# ---------------------------------------------------------------------------
# CLI


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if isinstance(cfg, SweepSpec):
        raise ValidationError("run expects a single config; use 'sweep' for sweep specs")
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    warn_regime(cfg)
    out = Path(args.out or "run_out")
    out.mkdir(parents=True, exist_ok=True)
    tr = run_simulation(cfg)
    s = summarize(tr)
    with open(out / "trace.jsonl", "w") as fh:
        export_trace(tr, fh)
    rep = build_report([s], cfg.epsilon_targets, cfg.w, cfg.calib_c1, cfg.calib_c2,
                       cfg.slot_duration)
    runs = out / "runs"
    runs.mkdir(exist_ok=True)
    (runs / f"seed_{cfg.seed}.json").write_text(s.to_json() + "\n")
    (out / "summary.json").write_text(rep.to_json() + "\n")
    (out / "histogram.csv").write_text(histogram_csv(rep))
    (out / "tips.csv").write_text(tips_csv(tr))
    print(f"seed {cfg.seed}: {s.n_blocks} blocks, {sum(s.reorg_events.values())} reorg events, "
          f"max depth {s.max_depth}, max tips {s.tips_max}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    spec = parse_config(args.spec)
    if isinstance(spec, SimConfig):
        spec = SweepSpec(spec, [], [spec.seed])
    if args.seed is not None:
        spec.seeds = list(range(args.seed, args.seed + len(spec.seeds)))
    if args.out:
        spec.output_dir = args.out
    for c in spec.cells():
        warn_regime(c)
    code = run_sweep(spec, args.jobs)
    print(f"sweep: {len(spec.cells())} cells x {len(spec.seeds)} seeds -> {spec.output_dir}")
    return code


def _cmd_compare(args) -> int:
    a = _load_summaries(Path(args.dirA))
    b = _load_summaries(Path(args.dirB))
    depths = [int(x) for x in args.depths.split(",")]
    table = ratio_table(compare_baseline(a, b, depths))
    if args.out:
        Path(args.out).write_text(table)
    sys.stdout.write(table)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    if args.what == "vectors":
        seed = 0 if args.seed is None else args.seed
        vec = oracle_vectors(seed, args.count, args.size)
        text = "".join(json.dumps(v, sort_keys=True) + "\n" for v in vec)
    else:
        from .metrics import finality_time, k_calibration
        k = k_calibration(args.w, args.epsilon, args.c1, args.c2)
        text = json.dumps({"k": k, "final_time": finality_time(k, args.tau)}) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dagpos", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--jobs", type=int, default=None)
        sp.add_argument("--out", default=None)

    r = sub.add_parser("run", help="run one configuration")
    r.add_argument("config")
    common(r)
    r.set_defaults(fn=_cmd_run)

    s = sub.add_parser("sweep", help="run a parameter sweep")
    s.add_argument("spec")
    common(s)
    s.set_defaults(fn=_cmd_sweep)

    c = sub.add_parser("compare", help="DAG vs chain reorg ratio table")
    c.add_argument("dirA", help="DAG cell directory")
    c.add_argument("dirB", help="chain cell directory")
    c.add_argument("--depths", default="5,10,15")
    common(c)
    c.set_defaults(fn=_cmd_compare)

    o = sub.add_parser("oracle", help="brute-force oracle outputs")
    osub = o.add_subparsers(dest="what", required=True)
    v = osub.add_parser("vectors", help="random DAGs with all oracle answers (JSON lines)")
    v.add_argument("--count", type=int, default=10)
    v.add_argument("--size", type=int, default=10)
    common(v)
    k = osub.add_parser("k", help="confirmation depth for a window and target")
    k.add_argument("--w", type=int, default=30)
    k.add_argument("--epsilon", type=float, default=1e-6)
    k.add_argument("--c1", type=float, default=1.8)
    k.add_argument("--c2", type=float, default=2.7)
    k.add_argument("--tau", type=float, default=1.0)
    common(k)
    o.set_defaults(fn=_cmd_oracle)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except (ParseError, ValidationError, ConfigInvalid) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
