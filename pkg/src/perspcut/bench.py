"""Benchmark harness: runs (instance, setting, permutation) jobs and aggregates them."""

from __future__ import annotations

import csv
import io
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .bnb import OPTIMAL, settings_for, solve
from .fileformat import parse_instance
from .model.instance import Instance, permute_instance

FIELDS = ("instance", "setting", "seed", "status", "primal", "dual", "rootdual", "nodes",
          "lpiters", "time", "cuts_plain", "cuts_persp")
ERROR = "error"
TIME_SHIFT = 1.0
NODE_SHIFT = 100.0


def shifted_geomean(values: Sequence[float], shift: float) -> float:
    """``exp(mean(log(x + shift))) - shift``."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return math.nan
    return float(np.exp(np.mean(np.log(x + shift))) - shift)


@dataclass
class RunRecord:
    instance: str
    setting: str
    seed: int
    status: str
    primal: float = math.inf
    dual: float = -math.inf
    rootdual: float = -math.inf
    nodes: int = 0
    lpiters: int = 0
    time: float = 0.0
    cuts_plain: int = 0
    cuts_persp: int = 0

    def row(self) -> List[str]:
        out = []
        for f in FIELDS:
            v = getattr(self, f)
            out.append(repr(v) if isinstance(v, float) else str(v))
        return out

    def csv_line(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="").writerow(self.row())
        return buf.getvalue()


def instance_variant(inst: Instance, seed: int) -> Instance:
    """Seed 0 is the model as written; other seeds shuffle variables and constraints."""
    return inst if seed == 0 else permute_instance(inst, seed)


def run_one(inst: Instance, setting: str, seed: int = 0, time_limit: float = 3600.0,
            gap: float = 1e-4, **overrides) -> RunRecord:
    variant = instance_variant(inst, seed)
    settings = settings_for(setting, time_limit=time_limit, gap_limit=gap, seed=seed, **overrides)
    _, st = solve(variant, settings)
    return RunRecord(inst.name, setting, seed, st.status, st.primal, st.dual, st.root_dual,
                     st.nodes, st.lp_iterations, st.time, st.cuts_plain, st.cuts_perspective)


def _job(args) -> RunRecord:
    text, name, setting, seed, time_limit, gap = args
    try:
        return run_one(parse_instance(text, name=name), setting, seed, time_limit, gap)
    except Exception:  # noqa: BLE001 - a failing run must not abort the sweep
        traceback.print_exc()
        return RunRecord(name, setting, seed, ERROR)


def run_jobs(instances: Sequence[Tuple[str, str]], settings: Sequence[str], permutations: int = 1,
             jobs: int = 1, time_limit: float = 3600.0, gap: float = 1e-4) -> List[RunRecord]:
    """``instances`` holds ``(name, file text)`` pairs; results come back in sorted order."""
    if permutations < 1:
        raise ValueError("permutations must be at least 1")
    work = [(text, name, s, seed, time_limit, gap)
            for name, text in instances for seed in range(permutations) for s in settings]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_job, work))
    else:
        records = [_job(w) for w in work]
    order = {s: i for i, s in enumerate(settings)}
    return sorted(records, key=lambda r: (r.instance, r.seed, order[r.setting]))


@dataclass
class SettingSummary:
    setting: str
    count: int
    time: float
    rel_time: float
    nodes: float
    rel_nodes: float


def affected_items(records: Sequence[RunRecord], settings: Sequence[str]
                   ) -> List[Tuple[str, int]]:
    """Items where some setting solved, none failed, and LP iteration totals differ."""
    groups: Dict[Tuple[str, int], Dict[str, RunRecord]] = {}
    for r in records:
        groups.setdefault((r.instance, r.seed), {})[r.setting] = r
    out = []
    for key in sorted(groups):
        g = groups[key]
        if any(s not in g for s in settings):
            continue
        runs = [g[s] for s in settings]
        if any(r.status == ERROR for r in runs):
            continue
        if not any(r.status == OPTIMAL for r in runs):
            continue
        if len({r.lpiters for r in runs}) > 1:
            out.append(key)
    return out


def summarize(records: Sequence[RunRecord], settings: Sequence[str]
              ) -> Tuple[List[SettingSummary], bool]:
    """Per-setting shifted geometric means; the flag tells whether the affected filter applied.

    With fewer than two settings, or no affected item, all items solved by every
    setting are aggregated instead.
    """
    keys = affected_items(records, settings) if len(settings) > 1 else []
    filtered = bool(keys)
    by = {(r.instance, r.seed, r.setting): r for r in records}
    if not keys:
        items = sorted({(r.instance, r.seed) for r in records})
        keys = [k for k in items
                if all(by.get((k[0], k[1], s)) is not None
                       and by[(k[0], k[1], s)].status == OPTIMAL for s in settings)]
    rows = []
    for s in settings:
        times = [by[(k[0], k[1], s)].time for k in keys]
        nodes = [by[(k[0], k[1], s)].nodes for k in keys]
        rows.append((s, len(keys), shifted_geomean(times, TIME_SHIFT),
                     shifted_geomean(nodes, NODE_SHIFT)))
    base_t, base_n = (rows[0][2], rows[0][3]) if rows else (math.nan, math.nan)
    out = [SettingSummary(s, n, t, t / base_t if base_t else math.nan, nd,
                          nd / base_n if base_n else math.nan) for s, n, t, nd in rows]
    return out, filtered


def format_table(summary: Sequence[SettingSummary], filtered: bool) -> str:
    head = "affected instances" if filtered else "all solved instances"
    lines = [f"# {head}: {summary[0].count if summary else 0}",
             f"{'setting':<10} {'time':>10} {'rel.time':>9} {'nodes':>10} {'rel.nodes':>10}"]
    for s in summary:
        lines.append(f"{s.setting:<10} {s.time:>10.3f} {s.rel_time:>9.2f} {s.nodes:>10.1f} "
                     f"{s.rel_nodes:>10.2f}")
    return "\n".join(lines)


def write_csv(records: Iterable[RunRecord], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(FIELDS)
        for r in records:
            w.writerow(r.row())
