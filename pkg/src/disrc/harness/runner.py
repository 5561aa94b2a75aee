"""Seeded training runs, agent comparisons and beta0 x lambda sweeps.

Every run writes into its own directory:

``episodes.csv``
    ``episode,raw_reward,shaped_reward_sum,steps,mean_loss,epsilon``; reals in
    positional notation with 17 significant digits, empty ``mean_loss`` when
    no update ran during the episode.
``summary.txt``
    ``key = value`` lines: the five metrics plus seed, agent, env, episodes.
``config.txt``
    The resolved configuration; its timestamp comment is the only
    non-deterministic byte of a run.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import logging
import os
import statistics
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..exceptions import ConfigurationError
from ..metrics import RunSummary, summarize
from .config import RunConfig

log = logging.getLogger(__name__)

EPISODE_COLUMNS = ["episode", "raw_reward", "shaped_reward_sum", "steps", "mean_loss", "epsilon"]
METRIC_COLUMNS = ["mean_final", "ep_to_thr", "loss_var", "reward_std", "auc"]
_METRIC_FIELDS = dict(
    zip(METRIC_COLUMNS, ["mean_final_reward", "episodes_to_threshold", "loss_variance", "reward_std", "auc"])
)


def fmt_real(x) -> str:
    if x is None:
        return ""
    return np.format_float_positional(float(x), precision=17, unique=False, fractional=False)


def _fmt_cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return fmt_real(x)
    return str(x)


def episodes_csv_text(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EPISODE_COLUMNS)
    for r in records:
        writer.writerow([r.episode, fmt_real(r.raw_reward), fmt_real(r.shaped_reward_sum),
                         r.steps, fmt_real(r.mean_loss), fmt_real(r.epsilon)])
    return buf.getvalue()


def summary_text(summary: RunSummary) -> str:
    lines = []
    for key, value in summary.to_dict().items():
        lines.append(f"{key} = {'none' if value is None else _fmt_cell(value)}")
    return "\n".join(lines) + "\n"


def read_summary(path) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "=" in line:
            k, v = (p.strip() for p in line.split("=", 1))
            out[k] = v
    return out


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8", newline="\n")


def train(config: RunConfig, callback=None) -> RunSummary:
    """Run one experiment and write its artifacts into ``config.out_dir``.

    On a numeric failure the telemetry gathered so far is flushed before the
    exception propagates.
    """
    config = config.resolved()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.write_echo(out / "config.txt")
    agent = config.make_agent()
    try:
        agent.fit(config.env, total_episodes=config.total_episodes, callback=callback)
    except Exception:
        history = getattr(agent, "history_", [])
        _write(out / "episodes.csv", episodes_csv_text(history))
        log.error("run in %s failed after %d episodes", out, len(history))
        raise
    _write(out / "episodes.csv", episodes_csv_text(agent.history_))
    summary = summarize(agent.history_, agent.losses_, seed=config.seed, agent=config.agent, env=config.env)
    _write(out / "summary.txt", summary_text(summary))
    if config.save_checkpoint:
        agent.save_checkpoint(out / "checkpoint")
        if hasattr(agent, "encoder_"):
            from ..nn import save_mlp

            save_mlp(agent.encoder_.net_, out / "checkpoint" / "encoder.bin")
    return summary


def _run_job(job):
    label, config = job
    try:
        return label, config, train(config), None
    except Exception as exc:  # isolate failures; the row is marked failed
        return label, config, None, f"{type(exc).__name__}: {exc}"


def _run_jobs(jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def _metric_row(summary: RunSummary | None) -> dict:
    if summary is None:
        return {c: None for c in METRIC_COLUMNS}
    return {c: getattr(summary, f) for c, f in _METRIC_FIELDS.items()}


def median_or_none(values, none_is_worst: bool = False):
    """Median of ``values``. ``None`` entries are dropped, or ranked above every
    number when ``none_is_worst`` (e.g. a threshold never reached); the median
    is then ``None`` if it falls on such an entry."""
    if none_is_worst:
        keyed = sorted(values, key=lambda v: (v is None, v if v is not None else 0))
        n = len(keyed)
        if n == 0:
            return None
        mid = keyed[(n - 1) // 2 : n // 2 + 1]
        if any(v is None for v in mid):
            return None
        return statistics.fmean(mid)
    present = [v for v in values if v is not None]
    return statistics.median(present) if present else None


@dataclasses.dataclass
class ComparisonTable:
    rows: list[dict]

    columns = ["agent", "seed", "status", *METRIC_COLUMNS]

    def for_agent(self, label: str, seed="median") -> dict:
        for row in self.rows:
            if row["agent"] == label and row["seed"] == seed:
                return row
        raise KeyError((label, seed))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt_cell(row[c]) for c in self.columns])
        return buf.getvalue()

    def to_text(self) -> str:
        def show(v):
            if v is None:
                return "-"
            if isinstance(v, float):
                return f"{v:.4f}"
            return str(v)

        cells = [self.columns] + [[show(row[c]) for c in self.columns] for row in self.rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(self.columns))]
        return "\n".join("  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in cells) + "\n"


def _labels(config_a: RunConfig, config_b: RunConfig) -> tuple[str, str]:
    if config_a.agent != config_b.agent:
        return config_a.agent, config_b.agent
    return f"{config_a.agent}_a", f"{config_b.agent}_b"


def compare(config_a: RunConfig, config_b: RunConfig, seeds, out_dir=None, workers: int = 1) -> ComparisonTable:
    """Train both configurations on every seed and tabulate the metrics.

    Rows are per (agent, seed) plus one ``median`` row per agent.
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ConfigurationError("compare needs at least one seed")
    base = Path(out_dir or config_a.out_dir)
    jobs = []
    for label, cfg in zip(_labels(config_a, config_b), (config_a, config_b)):
        for seed in seeds:
            run_dir = base / f"{label}_seed{seed}"
            jobs.append((label, cfg.with_overrides(seed=seed, out_dir=str(run_dir))))
    results = _run_jobs(jobs, workers)

    rows = []
    for label in _labels(config_a, config_b):
        mine = [r for r in results if r[0] == label]
        for _, cfg, summary, err in mine:
            row = {"agent": label, "seed": cfg.seed, "status": "ok" if err is None else "failed"}
            row.update(_metric_row(summary))
            if err is not None:
                log.warning("%s seed %d failed: %s", label, cfg.seed, err)
            rows.append(row)
        ok = [s for _, _, s, _ in mine if s is not None]
        med = {"agent": label, "seed": "median", "status": f"{len(ok)}/{len(mine)} ok"}
        for col, fname in _METRIC_FIELDS.items():
            vals = [getattr(s, fname) for s in ok]
            med[col] = median_or_none(vals, none_is_worst=(col == "ep_to_thr")) if vals else None
        rows.append(med)
    table = ComparisonTable(rows)
    base.mkdir(parents=True, exist_ok=True)
    _write(base / "compare.csv", table.to_csv())
    _write(base / "compare.txt", table.to_text())
    return table


SWEEP_COLUMNS = ["beta0", "lambda", "seed", "status", *METRIC_COLUMNS]


def sweep(base_config: RunConfig, beta0s, lambdas, seeds, out_dir=None, workers: int = 1) -> list[dict]:
    """One DISRC run per (beta0, lambda, seed); writes ``sweep.csv``.

    Duplicate grid values are dropped with a warning. Failed cells are
    reported with status ``failed`` and the sweep carries on.
    """
    if base_config.agent != "disrc":
        raise ConfigurationError("sweep varies DISRC parameters; set agent = disrc")
    grid = []
    for axis_name, values in (("beta0", beta0s), ("lambda", lambdas)):
        vals = [float(v) for v in values]
        unique = list(dict.fromkeys(vals))
        if len(unique) != len(vals):
            warnings.warn(f"duplicate {axis_name} values dropped: {vals} -> {unique}", stacklevel=2)
        grid.append(unique)
    seeds = list(dict.fromkeys(int(s) for s in seeds))
    if not grid[0] or not grid[1] or not seeds:
        raise ConfigurationError("sweep grid and seed list must be nonempty")

    base = Path(out_dir or base_config.out_dir)
    jobs = []
    for b in grid[0]:
        for lam in grid[1]:
            for seed in seeds:
                run_dir = base / f"beta{b:g}_lambda{lam:g}_seed{seed}"
                cfg = base_config.with_overrides(beta0=b, lam=lam, seed=seed, out_dir=str(run_dir))
                jobs.append(((b, lam), cfg))
    rows = []
    for (b, lam), cfg, summary, err in _run_jobs(jobs, workers):
        row = {"beta0": b, "lambda": lam, "seed": cfg.seed, "status": "ok" if err is None else "failed"}
        row.update(_metric_row(summary))
        rows.append(row)
    base.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([_fmt_cell(row[c]) for c in SWEEP_COLUMNS])
    _write(base / "sweep.csv", buf.getvalue())
    return rows
