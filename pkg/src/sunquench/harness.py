"""Experiment harness: configuration, disorder sweeps, checkpoints, reports.

A sweep runs ``disorder.realizations`` independent trajectories of one
(N, L, alpha) cell, seeded ``base_seed + k``, and writes one JSON-lines
record file per realization plus a manifest.  Outputs are a pure function
of the configuration: workers share nothing and each realization is
computed identically regardless of the pool size.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import observables as obs
from .initial import InitialStateSpec, build_initial_state, initial_bond_classes
from .model import sample_couplings
from .mps import MatrixProductState, sidecar_path
from .tebd import EvolutionSchedule, TruncationOverflowError, evolve

OUTPUT_ROOT_ENV = "SUNQUENCH_OUTPUT_ROOT"

MANIFEST_NAME = "manifest.json"
REPORT_DIR_NAME = "report"


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class MissingRecordsError(FileNotFoundError):
    """Report generation found no records for listed realizations."""


@dataclass(frozen=True)
class ExperimentConfig:
    model_n: int = 2
    chain_length: int = 24
    disorder_alpha: float = 0.5
    disorder_realizations: int = 1
    disorder_base_seed: int = 0
    evolve_dt: float = 0.1
    evolve_t_final: float = 10.0
    evolve_chi_max: int | None = 128
    evolve_eps_max: float = 1e-12
    evolve_abort_eps: float = 1e-3
    observe_block_sizes: tuple = (5,)
    observe_final_block_sizes: tuple = (1, 2, 3, 4, 5, 6, 7, 8)
    observe_sample_interval: float = 1.0
    output_dir: str = "run"
    checkpoint_interval: float | None = None
    checkpoint_keep: str = "all"  # "all": every checkpoint time, "latest": prune
    workers: int = 1

    # dotted config key -> dataclass field
    KEYMAP = {
        "model.n": "model_n",
        "chain.length": "chain_length",
        "disorder.alpha": "disorder_alpha",
        "disorder.realizations": "disorder_realizations",
        "disorder.base_seed": "disorder_base_seed",
        "evolve.dt": "evolve_dt",
        "evolve.t_final": "evolve_t_final",
        "evolve.chi_max": "evolve_chi_max",
        "evolve.eps_max": "evolve_eps_max",
        "evolve.abort_eps": "evolve_abort_eps",
        "observe.block_sizes": "observe_block_sizes",
        "observe.final_block_sizes": "observe_final_block_sizes",
        "observe.sample_interval": "observe_sample_interval",
        "output.dir": "output_dir",
        "checkpoint.interval": "checkpoint_interval",
        "checkpoint.keep": "checkpoint_keep",
        "workers": "workers",
    }

    def __post_init__(self):
        object.__setattr__(self, "observe_block_sizes",
                           tuple(int(x) for x in self.observe_block_sizes))
        object.__setattr__(self, "observe_final_block_sizes",
                           tuple(int(x) for x in self.observe_final_block_sizes))
        self.validate()

    def validate(self) -> None:
        try:
            InitialStateSpec(self.model_n, self.chain_length)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not (self.disorder_alpha > 0):
            raise ConfigError(f"disorder.alpha must be > 0, got {self.disorder_alpha}")
        if self.disorder_realizations < 1:
            raise ConfigError("disorder.realizations must be >= 1")
        if self.evolve_dt <= 0:
            raise ConfigError("evolve.dt must be positive")
        ratio = self.observe_sample_interval / self.evolve_dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("observe.sample_interval must be a multiple of evolve.dt")
        if self.checkpoint_interval is not None:
            ratio = self.checkpoint_interval / self.observe_sample_interval
            if abs(ratio - round(ratio)) > 1e-9:
                raise ConfigError(
                    "checkpoint.interval must be a multiple of the sample interval")
        all_sizes = set(self.observe_block_sizes) | set(self.observe_final_block_sizes)
        for size in all_sizes:
            if not 1 <= size <= 8:
                raise ConfigError(f"block size {size} outside 1..8")
            if self.model_n**size > 4096:
                raise ConfigError(
                    f"block size {size}: N^l = {self.model_n**size} exceeds the "
                    f"4096 density-matrix cap")
        if all_sizes and self.chain_length % 6 != 0:
            raise ConfigError(
                "entropy windows need chain.length divisible by 6")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.evolve_chi_max is not None and self.evolve_chi_max < 1:
            raise ConfigError("evolve.chi_max must be positive or null")
        if self.checkpoint_keep not in ("all", "latest"):
            raise ConfigError("checkpoint.keep must be 'all' or 'latest'")

    # -- dict / file round trip ------------------------------------------------

    def to_nested(self) -> dict:
        out: dict = {}
        for dotted, attr in self.KEYMAP.items():
            value = getattr(self, attr)
            if isinstance(value, tuple):
                value = list(value)
            node = out
            *parents, leaf = dotted.split(".")
            for p in parents:
                node = node.setdefault(p, {})
            node[leaf] = value
        return out

    @classmethod
    def from_nested(cls, nested: dict) -> "ExperimentConfig":
        kwargs = {}
        flat = _flatten(nested)
        unknown = set(flat) - set(cls.KEYMAP)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for dotted, value in flat.items():
            kwargs[cls.KEYMAP[dotted]] = value
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            nested = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_nested(nested)

    def with_overrides(self, overrides: dict) -> "ExperimentConfig":
        """Apply {dotted key: value} overrides."""
        unknown = set(overrides) - set(self.KEYMAP)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {attr: getattr(self, attr) for attr in
                  (f.name for f in dataclasses.fields(self))}
        for dotted, value in overrides.items():
            kwargs[self.KEYMAP[dotted]] = value
        return ExperimentConfig(**kwargs)

    def physics_hash(self) -> str:
        """Hash of everything that determines trajectory numerics."""
        nested = self.to_nested()
        nested.pop("output", None)
        nested.pop("workers", None)
        nested.pop("checkpoint", None)
        return hashlib.sha256(
            json.dumps(nested, sort_keys=True).encode()).hexdigest()

    def resolved_output_dir(self) -> Path:
        out = Path(self.output_dir)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not out.is_absolute():
            out = Path(root) / out
        return out

    def schedule(self) -> EvolutionSchedule:
        return EvolutionSchedule.regular(
            dt=self.evolve_dt,
            t_final=self.evolve_t_final,
            sample_interval=self.observe_sample_interval,
            chi_max=self.evolve_chi_max,
            eps_max=self.evolve_eps_max,
            abort_eps=self.evolve_abort_eps,
        )


def _flatten(nested: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in nested.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, dotted + "."))
        else:
            flat[dotted] = value
    return flat


def _json_line(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True)


def record_path(run_dir: Path, index: int) -> Path:
    return run_dir / f"r{index:04d}.jsonl"


def checkpoint_path(run_dir: Path, index: int, t: float) -> Path:
    return run_dir / f"r{index:04d}_t{t:.4f}.ckpt"


def list_checkpoints(run_dir: Path, index: int) -> list[tuple[float, Path]]:
    """(time, path) of every checkpoint for one realization, ascending."""
    out = []
    for path in Path(run_dir).glob(f"r{index:04d}_t*.ckpt"):
        stamp = path.stem.split("_t", 1)[1]
        out.append((float(stamp), path))
    return sorted(out)


def make_observer(config: ExperimentConfig, write_row, save_checkpoint=None):
    """Measurement callback: correlators + windowed entropies per sample."""
    t_final = config.evolve_t_final
    sizes = set(config.observe_block_sizes)
    final_sizes = sizes | set(config.observe_final_block_sizes)

    def observer(t: float, state: MatrixProductState, stats) -> obs.EvolutionRecord:
        want = final_sizes if abs(t - t_final) < 1e-9 else sizes
        entropies = obs.windowed_entropies(state, want) if want else {}
        record = obs.EvolutionRecord(
            t=t,
            correlators=tuple(float(c) for c in obs.nn_correlators(state)),
            entropies=entropies,
            eps_cum=stats.cum_max_eps,
            max_chi=max(stats.max_bond_dim, state.max_bond_dim),
        )
        write_row(record)
        if save_checkpoint is not None:
            save_checkpoint(t, state)
        return record

    return observer


def _checkpoint_saver(config: ExperimentConfig, run_dir: Path, index: int,
                      seed: int):
    interval = config.checkpoint_interval

    def save(t: float, state: MatrixProductState) -> None:
        at_end = abs(t - config.evolve_t_final) < 1e-9
        if interval is None and not at_end:
            return
        if interval is not None and not at_end:
            ratio = t / interval
            if abs(ratio - round(ratio)) > 1e-9:
                return
        path = checkpoint_path(run_dir, index, t)
        tmp = path.with_suffix(".tmp")
        state.save(tmp, metadata={
            "seed": seed,
            "alpha": config.disorder_alpha,
            "t_reached": t,
            "config_hash": config.physics_hash(),
        })
        os.replace(tmp, path)
        os.replace(sidecar_path(tmp), sidecar_path(path))
        if config.checkpoint_keep == "latest":
            for old_t, old_path in list_checkpoints(run_dir, index):
                if old_t < t - 1e-9:
                    old_path.unlink(missing_ok=True)
                    sidecar_path(old_path).unlink(missing_ok=True)

    return save


def run_realization(config: ExperimentConfig, index: int,
                    run_dir: Path) -> dict:
    """Evolve one disorder realization, streaming records to disk."""
    seed = config.disorder_base_seed + index
    realization = sample_couplings(config.disorder_alpha, config.chain_length,
                                   seed)
    state = build_initial_state(config.model_n, config.chain_length)
    schedule = config.schedule()
    rec_file = record_path(run_dir, index)

    entry = {"index": index, "seed": seed, "status": "ok",
             "t_reached": config.evolve_t_final, "error": None}
    with open(rec_file, "w") as fh:
        def write_row(record: obs.EvolutionRecord) -> None:
            fh.write(_json_line(record.to_json_dict()) + "\n")
            fh.flush()

        observer = make_observer(config, write_row,
                                 _checkpoint_saver(config, run_dir, index, seed))
        try:
            _, stats, _ = evolve(state, realization, schedule,
                                 observer=observer, track_energy=False)
        except TruncationOverflowError as exc:
            entry["status"] = "aborted-eps"
            entry["t_reached"] = exc.time
            entry["error"] = str(exc)
        except Exception as exc:  # recorded per realization, sweep continues
            entry["status"] = "failed"
            entry["t_reached"] = None
            entry["error"] = f"{type(exc).__name__}: {exc}"
    return entry


def _run_realization_job(config_json: str, index: int, run_dir: str) -> dict:
    config = ExperimentConfig.from_nested(json.loads(config_json))
    return run_realization(config, index, Path(run_dir))


def run_sweep(config: ExperimentConfig) -> Path:
    """Run all realizations of one cell; outputs are worker-count independent."""
    run_dir = config.resolved_output_dir()
    run_dir.mkdir(parents=True, exist_ok=True)
    indices = list(range(config.disorder_realizations))
    config_json = json.dumps(config.to_nested())

    if config.workers == 1:
        entries = [run_realization(config, k, run_dir) for k in indices]
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(_run_realization_job, config_json, k,
                                   str(run_dir)) for k in indices]
            entries = [f.result() for f in futures]
    entries.sort(key=lambda e: e["index"])

    manifest = {
        "config": config.to_nested(),
        "config_hash": config.physics_hash(),
        "realizations": entries,
    }
    (run_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return run_dir


# -- checkpoint / resume -------------------------------------------------------

class CheckpointMismatchError(RuntimeError):
    """Checkpoint belongs to a different configuration."""


def resume_realization(run_dir, index: int,
                       config: ExperimentConfig | None = None,
                       at_time: float | None = None) -> dict:
    """Continue one trajectory from a checkpoint to t_final.

    Resumes from the newest checkpoint, or from the newest one at or before
    ``at_time`` when given.  Rows after the checkpoint time are discarded
    and regenerated; the regenerated records equal an uninterrupted run's
    records to 1e-10.
    """
    run_dir = Path(run_dir)
    if config is None:
        manifest = json.loads((run_dir / MANIFEST_NAME).read_text())
        config = ExperimentConfig.from_nested(manifest["config"])
    checkpoints = list_checkpoints(run_dir, index)
    if at_time is not None:
        checkpoints = [c for c in checkpoints if c[0] <= at_time + 1e-9]
    if not checkpoints:
        raise FileNotFoundError(
            f"no usable checkpoint for realization {index} in {run_dir}")
    state, meta = MatrixProductState.load(checkpoints[-1][1])
    if meta.get("config_hash") != config.physics_hash():
        raise CheckpointMismatchError(
            "checkpoint config hash does not match the sweep configuration")
    t0 = float(meta["t_reached"])
    seed = config.disorder_base_seed + index
    realization = sample_couplings(config.disorder_alpha, config.chain_length,
                                   seed)

    rec_file = record_path(run_dir, index)
    kept_rows = []
    if rec_file.exists():
        for line in rec_file.read_text().splitlines():
            row = json.loads(line)
            if row["t"] <= t0 + 1e-9:
                kept_rows.append(_json_line(row))

    entry = {"index": index, "seed": seed, "status": "ok",
             "t_reached": config.evolve_t_final, "error": None}
    if t0 >= config.evolve_t_final - 1e-9:
        return entry

    base = config.schedule()
    remaining = tuple(t - t0 for t in base.sample_times if t > t0 + 1e-9)
    schedule = EvolutionSchedule(
        dt=base.dt, t_final=config.evolve_t_final - t0,
        sample_times=remaining, chi_max=base.chi_max, eps_max=base.eps_max,
        abort_eps=base.abort_eps)

    with open(rec_file, "w") as fh:
        for line in kept_rows:
            fh.write(line + "\n")
        fh.flush()

        def write_row(record: obs.EvolutionRecord) -> None:
            fh.write(_json_line(record.to_json_dict()) + "\n")
            fh.flush()

        saver = _checkpoint_saver(config, run_dir, index, seed)

        def observer(t: float, state: MatrixProductState, stats):
            record_t = t + t0
            want = (set(config.observe_block_sizes)
                    | set(config.observe_final_block_sizes)
                    if abs(record_t - config.evolve_t_final) < 1e-9
                    else set(config.observe_block_sizes))
            entropies = obs.windowed_entropies(state, want) if want else {}
            record = obs.EvolutionRecord(
                t=record_t,
                correlators=tuple(float(c) for c in obs.nn_correlators(state)),
                entropies=entropies,
                eps_cum=stats.cum_max_eps,
                max_chi=max(stats.max_bond_dim, state.max_bond_dim),
            )
            write_row(record)
            saver(record_t, state)
            return record

        try:
            evolve(state, realization, schedule, observer=observer,
                   track_energy=False)
        except TruncationOverflowError as exc:
            entry["status"] = "aborted-eps"
            entry["t_reached"] = exc.time + t0
            entry["error"] = str(exc)
    return entry


def resume_sweep(run_dir, config: ExperimentConfig | None = None) -> Path:
    """Finish every incomplete realization of a sweep from its checkpoints.

    Realizations whose record files already reach t_final are untouched;
    eps-aborted ones are final by policy and not retried.  Trajectories
    without a usable checkpoint are rerun from scratch.
    """
    run_dir = Path(run_dir)
    manifest_file = run_dir / MANIFEST_NAME
    if config is None:
        if not manifest_file.exists():
            raise ConfigError(
                f"{run_dir} has no manifest; pass the sweep config explicitly")
        config = ExperimentConfig.from_nested(
            json.loads(manifest_file.read_text())["config"])
    entries = {}
    if manifest_file.exists():
        for e in json.loads(manifest_file.read_text())["realizations"]:
            entries[e["index"]] = e

    for k in range(config.disorder_realizations):
        if entries.get(k, {}).get("status") == "aborted-eps":
            continue
        complete = False
        try:
            recs = load_records(run_dir, k)
            complete = bool(recs) and abs(
                recs[-1].t - config.evolve_t_final) < 1e-9
        except MissingRecordsError:
            pass
        if complete:
            entries.setdefault(k, {"index": k,
                                   "seed": config.disorder_base_seed + k,
                                   "status": "ok",
                                   "t_reached": config.evolve_t_final,
                                   "error": None})
            continue
        if list_checkpoints(run_dir, k):
            entries[k] = resume_realization(run_dir, k, config)
        else:
            entries[k] = run_realization(config, k, run_dir)

    manifest = {
        "config": config.to_nested(),
        "config_hash": config.physics_hash(),
        "realizations": [entries[k] for k in sorted(entries)],
    }
    manifest_file.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return run_dir


# -- reports -------------------------------------------------------------------

def load_records(run_dir, index: int) -> list[obs.EvolutionRecord]:
    path = record_path(Path(run_dir), index)
    if not path.exists():
        raise MissingRecordsError(f"missing record file {path}")
    return [obs.EvolutionRecord.from_json_dict(json.loads(line))
            for line in path.read_text().splitlines()]


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(x) for x in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def _sweep_report(run_dir: Path, out_dir: Path) -> dict:
    manifest = json.loads((run_dir / MANIFEST_NAME).read_text())
    config = ExperimentConfig.from_nested(manifest["config"])
    n = config.model_n
    length = config.chain_length
    ln_n = math.log(n)
    spec = InitialStateSpec(n, length)
    classes = initial_bond_classes(spec)

    ok_entries = [e for e in manifest["realizations"] if e["status"] == "ok"]
    missing = [e["index"] for e in manifest["realizations"]
               if e["status"] == "ok"
               and not record_path(run_dir, e["index"]).exists()]
    if missing:
        raise MissingRecordsError(
            f"{run_dir}: missing records for realizations {missing}")

    all_records = {e["index"]: load_records(run_dir, e["index"])
                   for e in ok_entries}
    out_dir.mkdir(parents=True, exist_ok=True)

    # final-time entropy table
    rows = []
    summaries = []
    for k in sorted(all_records):
        final = all_records[k][-1]
        for size in sorted(final.entropies):
            s = final.entropies[size]
            rows.append((k, size, s, s / obs.LN2, s / ln_n))
        summaries.append(obs.RealizationSummary(
            k, config.disorder_base_seed + k, final.entropies))
    _write_csv(out_dir / "entropy_final.csv",
               ["realization", "block_size", "S_nats", "S_ln2", "S_lnN"], rows)

    summary: dict = {
        "n": n, "L": length, "alpha": config.disorder_alpha,
        "t_final": config.evolve_t_final,
        "statuses": {e["index"]: e["status"] for e in manifest["realizations"]},
        "realizations_ok": len(ok_entries),
    }

    # entropy distribution and variance at block size 5
    if len(summaries) >= 2 and all(5 in s.final_entropies for s in summaries):
        hist, variance = obs.entropy_statistics(summaries, 5)
        _write_csv(out_dir / "entropy_dist.csv",
                   ["bin_lo", "bin_hi", "density", "count"],
                   [(hist.edges[i], hist.edges[i + 1], hist.densities[i],
                     int(hist.counts[i])) for i in range(len(hist.counts))])
        summary["entropy_variance_ln2"] = variance

    # correlator histograms at final time
    final_corrs = [np.array(all_records[k][-1].correlators)
                   for k in sorted(all_records)]
    if final_corrs:
        pooled = np.concatenate(final_corrs)
        hist_all = obs.correlator_histogram(pooled, n)
        _write_csv(out_dir / "corr_hist_all.csv",
                   ["bin_lo", "bin_hi", "density", "count"],
                   [(hist_all.edges[i], hist_all.edges[i + 1],
                     hist_all.densities[i], int(hist_all.counts[i]))
                    for i in range(len(hist_all.counts))])
        if n == 2:
            triplet_idx = [i for i, c in enumerate(classes) if c == "triplet"]
            init_vals = np.concatenate([c[triplet_idx] for c in final_corrs])
        else:
            init_vals = np.concatenate([
                obs.extremal_bond_filter([c], classes)[0] for c in final_corrs])
        hist_init = obs.correlator_histogram(init_vals, n)
        _write_csv(out_dir / "corr_hist_init.csv",
                   ["bin_lo", "bin_hi", "density", "count"],
                   [(hist_init.edges[i], hist_init.edges[i + 1],
                     hist_init.densities[i], int(hist_init.counts[i]))
                    for i in range(len(hist_init.counts))])
        if n == 2:
            summary["localized_fraction"] = obs.localized_fraction(hist_init)

    # per-bond class map (for trajectory plots)
    _write_csv(out_dir / "bond_classes.csv", ["bond", "class"],
               list(enumerate(classes)))

    # entropy growth series at block size 5
    series = []
    for k in sorted(all_records):
        recs = all_records[k]
        if all(5 in r.entropies for r in recs):
            series.append((np.array([r.t for r in recs]),
                           np.array([r.entropies[5] for r in recs])))
    if series:
        times = series[0][0]
        mean = np.mean([v for _, v in series], axis=0)
        _write_csv(out_dir / "growth_mean.csv",
                   ["t", "S5_nats", "S5_ln2", "S5_lnN"],
                   [(t, s, s / obs.LN2, s / ln_n)
                    for t, s in zip(times, mean)])
        if len(series) >= 4:
            qt, qs = obs.lowest_quartile_growth(series)
            _write_csv(out_dir / "growth_lowest_quartile.csv",
                       ["t", "S5_nats", "S5_ln2", "S5_lnN"],
                       [(t, s, s / obs.LN2, s / ln_n)
                        for t, s in zip(qt, qs)])

    # realization classes (needs final S_ent(8))
    if summaries and all(8 in s.final_entropies for s in summaries):
        _write_csv(out_dir / "classes.csv",
                   ["realization", "seed", "S8_ln2", "class"],
                   [(s.index, s.seed, s.s8_ln2, obs.classify_realization(s))
                    for s in summaries])

    # discarded-weight traces
    eps_rows = []
    for k in sorted(all_records):
        for r in all_records[k]:
            eps_rows.append((k, r.t, r.eps_cum, r.max_chi))
    _write_csv(out_dir / "eps_trace.csv",
               ["realization", "t", "eps_cum", "chi_max_seen"], eps_rows)

    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return summary


def emit_reports(root) -> Path:
    """Aggregate tables for one sweep dir or a directory of sweep cells."""
    root = Path(root)
    if (root / MANIFEST_NAME).exists():
        cells = [root]
    else:
        cells = sorted(p.parent for p in root.glob(f"*/{MANIFEST_NAME}"))
    if not cells:
        raise MissingRecordsError(f"no sweep manifests under {root}")
    report_dir = root / REPORT_DIR_NAME
    report_dir.mkdir(parents=True, exist_ok=True)

    summaries = {}
    for cell in cells:
        name = cell.name if cell != root else "cell"
        summaries[name] = _sweep_report(cell, report_dir / name)

    # cross-cell trends
    by_nl: dict = {}
    by_nalpha: dict = {}
    for name, s in summaries.items():
        if "localized_fraction" not in s:
            continue
        by_nl.setdefault((s["n"], s["L"]), []).append(
            (s["alpha"], s["localized_fraction"], name))
        if not math.isinf(s["alpha"]):
            by_nalpha.setdefault((s["n"], s["alpha"]), []).append(
                (s["L"], s["localized_fraction"], name))
    for (n, length), rows in sorted(by_nl.items()):
        finite = [r for r in rows if not math.isinf(r[0])]
        if len(finite) >= 2:
            _write_csv(report_dir / f"localized_vs_alpha_n{n}_L{length}.csv",
                       ["alpha", "fraction", "cell"], sorted(finite))
    for (n, alpha), rows in sorted(by_nalpha.items()):
        if len(rows) >= 2:
            _write_csv(report_dir / f"localized_vs_invL_n{n}_alpha{alpha}.csv",
                       ["L", "inv_L", "fraction", "cell"],
                       [(length, 1.0 / length, frac, name)
                        for length, frac, name in sorted(rows)])

    (report_dir / "cells.json").write_text(
        json.dumps(summaries, indent=1, sort_keys=True) + "\n")
    return report_dir
