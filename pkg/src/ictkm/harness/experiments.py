"""Synthetic recovery studies and the audio pipeline.

Every run is determined by an :class:`ExperimentConfig` and its seed.
Random streams are derived with :class:`numpy.random.SeedSequence` from
``(seed, trial)`` for the initial dictionary and from
``(seed, trial, kind, ratio, d)`` for the learner, so a trial sees the
same initialization at every compression ratio and results do not
depend on how trials are spread over workers.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import learner
from ..signal_model import (CoefficientModel, build_dirac_dct_dictionary, noise_sigma_for_snr,
                            random_dictionary)
from . import io

_logger = logging.getLogger(__name__)

DEFAULT_RATIOS = (1.5, 2, 2.5, 2.9, 3.33, 4, 5, 6.67, 10, 20, 33.33, 40)
KIND_CODES = {"none": 0, "dft": 1, "dct": 2, "circulant": 3}


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment.

    ``sparsity`` is an integer, ``"sqrt"`` (``sqrt(d_tilde)/2``) or
    ``"const"`` (4). ``batch_size=None`` means ``50 K log K``. A ratio of
    1 runs uncompressed ITKrM.
    """

    experiment: str = "sweep"
    d: int = 256
    d_tilde: int | None = None
    sparsity: int | str = "sqrt"
    snr: float | None = 4.0
    coefficients: str = "geometric"
    dynamic_range: float = 4.0
    kinds: list = field(default_factory=lambda: ["dft", "dct", "circulant"])
    ratios: list = field(default_factory=lambda: list(DEFAULT_RATIOS))
    iterations: int = 100
    batch_size: int | None = None
    batch_mode: str = "fresh"
    trials: int = 10
    seed: int = 0
    recovery_threshold: float = 0.99
    atom_fraction: float = 0.9
    min_passing_fraction: float = 0.7
    force: bool = False
    target_rate: float = 0.99
    dims: list = field(default_factory=lambda: [2048, 4096, 8192])
    workers: int = 1
    chunk_size: int = 4096
    output_dir: str = "results"
    # audio
    audio_paths: list = field(default_factory=list)
    block_seconds: float = 0.25
    overlap: float = 0.95
    atoms: int = 64
    audio_sparsity: int = 4
    audio_ratio: float = 5.0
    audio_kind: str = "dct"
    audio_iterations: int = 200
    frequency_floor: float = 50.0

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self):
        return dataclasses.asdict(self)

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    @property
    def intrinsic_dim(self):
        return self.d if self.d_tilde is None else self.d_tilde

    def sparsity_level(self):
        if isinstance(self.sparsity, str):
            if self.sparsity == "sqrt":
                return max(1, int(round(math.sqrt(self.intrinsic_dim) / 2)))
            if self.sparsity == "const":
                return 4
            raise ValueError(f"unknown sparsity rule {self.sparsity!r}")
        return int(self.sparsity)

    def n_atoms(self, d_tilde=None):
        return 3 * (d_tilde or self.intrinsic_dim) // 2

    def signals_per_iteration(self, K):
        if self.batch_size:
            return int(self.batch_size)
        return int(math.ceil(50 * K * math.log(K)))

    def validate(self):
        if self.experiment not in ("sweep", "curve", "scale", "audio"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        for kind in self.kinds:
            if kind not in ("dft", "dct", "circulant"):
                raise ValueError(f"unknown transform kind {kind!r}")
        if any(r < 1 for r in self.ratios):
            raise ValueError("compression ratios must be >= 1")
        if self.trials < 1 or self.iterations < 1:
            raise ValueError("need at least one trial and one iteration")
        if self.experiment == "audio":
            if not self.audio_paths:
                raise ValueError("audio experiment needs audio_paths")
            if not 1 <= self.audio_sparsity < self.atoms:
                raise ValueError("need 1 <= audio_sparsity < atoms")
            return
        dims = self.dims if self.experiment == "scale" else [self.d]
        d_tilde = self.intrinsic_dim
        if d_tilde % 2:
            raise ValueError("d_tilde must be even so that K = 3 d_tilde / 2 is integral")
        for d in dims:
            if d_tilde > d:
                raise ValueError(f"d_tilde={d_tilde} exceeds d={d}")
        S = self.sparsity_level()
        if not 1 <= S < self.n_atoms():
            raise ValueError(f"sparsity {S} out of range")


def load_config(path, **overrides):
    """Read a YAML (or JSON) key-value config file and apply overrides."""
    import yaml

    text = Path(path).read_text()
    data = yaml.safe_load(text) or {}
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(data)


def embedding_dim(d, ratio):
    """``ceil(d / ratio)``; ratio 1 means no compression."""
    return d if ratio <= 1 else int(math.ceil(d / ratio - 1e-9))


def _trial_seeds(config, trial, kind, ratio, d):
    init = np.random.SeedSequence([config.seed, trial])
    run = np.random.SeedSequence([config.seed, trial, KIND_CODES[kind], int(round(ratio * 1000)), d])
    return init, run


def run_trial(config: ExperimentConfig, kind, ratio, trial, d=None):
    """One random initialization learned for ``config.iterations`` steps.

    Returns a list of per-iteration rows.
    """
    d = config.d if d is None else d
    d_tilde = config.intrinsic_dim
    dictionary = build_dirac_dct_dictionary(d, d_tilde)
    K = dictionary.K
    S = config.sparsity_level()
    model = (CoefficientModel.geometric(S, K, config.dynamic_range)
             if config.coefficients == "geometric" else CoefficientModel.flat(S, K))
    sigma = noise_sigma_for_snr(d, config.snr)
    source = learner.SyntheticSource(dictionary, model, sigma)
    init_seed, run_seed = _trial_seeds(config, trial, kind, ratio, d)
    init = random_dictionary(d, K, np.random.default_rng(init_seed))
    compressed = ratio > 1
    m = embedding_dim(d, ratio)
    cfg = learner.LearnerConfig(
        S=S, compressed=compressed, kind=kind if compressed else "dct", m=m,
        iterations=config.iterations, batch_size=config.signals_per_iteration(K),
        batch_mode=config.batch_mode, seed=run_seed, chunk_size=config.chunk_size)
    rows = []
    elapsed = 0.0
    label = kind if compressed else "none"

    def record(it, dico, report):
        nonlocal elapsed
        elapsed += report.wall_time
        rows.append({
            "d": d, "kind": label, "ratio": ratio, "m": m, "trial": trial, "iteration": it + 1,
            "recovery_rate": report.metrics["recovery_rate"],
            "distance": report.metrics["distance"],
            "wall_time": report.wall_time, "cumulative_time": elapsed,
            "replaced_atoms": report.replaced_atoms,
        })

    learner.learn(init, source, cfg, reference=dictionary.atoms, callback=record)
    return rows


def _run_many(config, jobs):
    """Run ``(kind, ratio, trial, d)`` jobs, in worker processes if asked."""
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            futures = [pool.submit(run_trial, config, *job) for job in jobs]
            return [f.result() for f in futures]
    return [run_trial(config, *job) for job in jobs]


def _output_dir(config):
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(config, out, name, extra):
    manifest = {"experiment": config.experiment, "config": config.to_dict(),
                "config_hash": config.config_hash(), "workers": config.workers, **extra}
    (out / f"{name}_manifest.json").write_text(json.dumps(manifest, indent=2, default=str))


def run_compression_sweep(config: ExperimentConfig):
    """Highest compression ratio at which the generating dictionary is
    recovered.

    A trial passes when at least ``atom_fraction`` of the atoms are
    recovered after the last iteration; a ratio passes when at least
    ``min_passing_fraction`` of the trials pass. Ratios are visited in
    ascending order; after a ratio where every trial fails, larger ratios
    are skipped unless ``force`` is set.

    Returns ``(rows, summary)`` where ``summary`` maps each kind to its
    highest passing ratio (``None`` if none passed).
    """
    config.validate()
    chash = config.config_hash()
    rows, summary = [], {}
    for kind in config.kinds:
        best = None
        for ratio in sorted(config.ratios):
            jobs = [(kind, ratio, t, config.d) for t in range(config.trials)]
            results = _run_many(config, jobs)
            finals = [r[-1] for r in results]
            passed = [f["recovery_rate"] >= config.atom_fraction for f in finals]
            ratio_passes = sum(passed) >= math.ceil(config.min_passing_fraction * config.trials - 1e-9)
            for f, ok in zip(finals, passed):
                rows.append({"config_hash": chash, "kind": kind, "ratio": ratio, "m": f["m"],
                             "trial": f["trial"], "recovery_rate": f["recovery_rate"],
                             "distance": f["distance"], "passed": int(ok),
                             "ratio_passed": int(ratio_passes)})
            _logger.info("%s %.2f:1 -> %d/%d trials passed", kind, ratio, sum(passed), config.trials)
            if ratio_passes:
                best = ratio
            if not any(passed) and not config.force:
                break
        summary[kind] = best
    out = _output_dir(config)
    io.write_rows(out / "sweep.csv", rows)
    io.write_rows(out / "sweep_summary.csv",
                  [{"config_hash": chash, "kind": k, "highest_ratio": v} for k, v in summary.items()])
    _write_manifest(config, out, "sweep", {"summary": summary})
    return rows, summary


def run_recovery_curve(config: ExperimentConfig):
    """Per-iteration recovery rate and wall time for every kind and ratio
    (ratio 1 is the uncompressed baseline, run once)."""
    config.validate()
    chash = config.config_hash()
    jobs = []
    for ratio in sorted(set(config.ratios)):
        for kind in (["none"] if ratio <= 1 else config.kinds):
            jobs += [(kind, ratio, t, config.d) for t in range(config.trials)]
    rows = [dict(config_hash=chash, **row) for result in _run_many(config, jobs) for row in result]
    out = _output_dir(config)
    io.write_rows(out / "curve.csv", rows)
    _write_manifest(config, out, "curve", {"rows": len(rows)})
    return rows


def time_to_target(rows, target):
    """Cumulative learning time and iteration at which ``target`` is first
    reached; ``(nan, nan)`` if never."""
    for row in rows:
        if row["recovery_rate"] >= target:
            return row["cumulative_time"], row["iteration"]
    return math.nan, math.nan


def run_scalability(config: ExperimentConfig):
    """Time to reach ``target_rate`` as the ambient dimension grows with
    the intrinsic dimension (and hence ``K``) held fixed."""
    config.validate()
    chash = config.config_hash()
    jobs = []
    for d in config.dims:
        for ratio in sorted(set(config.ratios)):
            for kind in (["none"] if ratio <= 1 else config.kinds):
                jobs += [(kind, ratio, t, d) for t in range(config.trials)]
    rows = []
    for result in _run_many(config, jobs):
        first = result[0]
        seconds, iters = time_to_target(result, config.target_rate)
        rows.append({"config_hash": chash, "d": first["d"], "kind": first["kind"],
                     "ratio": first["ratio"], "m": first["m"], "trial": first["trial"],
                     "time_to_target": seconds, "iterations_to_target": iters,
                     "final_recovery_rate": result[-1]["recovery_rate"]})
    out = _output_dir(config)
    io.write_rows(out / "scale.csv", rows)
    _write_manifest(config, out, "scale", {"rows": len(rows)})
    return rows


@dataclass
class AudioResult:
    dico: np.ndarray
    corpus: object
    spectra: list
    selection_counts: np.ndarray
    reports: list


def learn_audio(Y, config: ExperimentConfig, sample_rate):
    """Learn a dictionary from audio blocks (fixed dataset, fresh embedding
    every iteration) and analyze its atoms."""
    from .audio import analyze_atoms

    d = Y.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0]))
    init = random_dictionary(d, config.atoms, rng)
    compressed = config.audio_ratio > 1
    cfg = learner.LearnerConfig(
        S=config.audio_sparsity, compressed=compressed, kind=config.audio_kind,
        m=embedding_dim(d, config.audio_ratio), iterations=config.audio_iterations,
        batch_mode="fixed", seed=np.random.SeedSequence([config.seed, 1]),
        chunk_size=config.chunk_size)
    dico, reports = learner.learn(init, Y, cfg)
    counts = reports[-1].selection_counts if reports else np.zeros(config.atoms, dtype=int)
    spectra = analyze_atoms(dico, sample_rate, config.frequency_floor)
    return dico, spectra, counts, reports


def run_audio(config: ExperimentConfig, export_wav=True):
    """Audio pipeline: ingest, learn, analyze, write CSV/checkpoint/WAVs."""
    from .audio import export_atoms_wav, ingest_audio

    config.validate()
    corpus, Y = ingest_audio(config.audio_paths, config.block_seconds, config.overlap)
    if Y.shape[1] == 0:
        raise ValueError("no non-silent audio blocks")
    start = time.perf_counter()
    dico, spectra, counts, reports = learn_audio(Y, config, corpus.sample_rate)
    elapsed = time.perf_counter() - start
    out = _output_dir(config)
    chash = config.config_hash()
    io.write_rows(out / "audio_atoms.csv", [
        {"config_hash": chash, "rank": r, "atom": s.index, "fundamental_hz": s.fundamental_hz,
         "selection_count": int(counts[s.index])} for r, s in enumerate(spectra)])
    io.write_rows(out / "audio_iterations.csv", [
        {"config_hash": chash, "iteration": rep.iteration + 1, "wall_time": rep.wall_time,
         "replaced_atoms": rep.replaced_atoms} for rep in reports])
    io.save_dictionary(out / "audio_dictionary.dic", dico)
    if export_wav:
        export_atoms_wav(dico[:, [s.index for s in spectra]], corpus.sample_rate, out / "atoms")
    _write_manifest(config, out, "audio", {"signals": int(Y.shape[1]), "d": int(Y.shape[0]),
                                           "sample_rate": corpus.sample_rate, "seconds": elapsed})
    return AudioResult(dico, corpus, spectra, counts, reports)

