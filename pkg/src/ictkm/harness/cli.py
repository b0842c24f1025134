"""Command line entry point: ``ictkm {sweep,curve,scale,audio,theory,generate}``."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys

import numpy as np

from . import experiments, io
from .experiments import ExperimentConfig


def _floats(text):
    return [float(x) for x in text.split(",") if x]


def _ints(text):
    return [int(x) for x in text.split(",") if x]


def _words(text):
    return [x.strip() for x in text.split(",") if x.strip()]


def _sparsity(text):
    return text if text in ("sqrt", "const") else int(text)


def _add_common(p):
    p.add_argument("--config", help="YAML/JSON key-value experiment file")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", dest="output_dir", help="output directory")
    p.add_argument("--chunk-size", dest="chunk_size", type=int)


def _add_synthetic(p):
    p.add_argument("--d", type=int)
    p.add_argument("--d-tilde", dest="d_tilde", type=int)
    p.add_argument("--sparsity", type=_sparsity, help="integer, 'sqrt' or 'const'")
    p.add_argument("--snr", type=float)
    p.add_argument("--coefficients", choices=["geometric", "flat"])
    p.add_argument("--dynamic-range", dest="dynamic_range", type=float)
    p.add_argument("--kinds", type=_words, help="comma list of dft,dct,circulant")
    p.add_argument("--ratios", type=_floats, help="comma list of compression ratios")
    p.add_argument("--iterations", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--batch-mode", dest="batch_mode", choices=["fresh", "fixed"])
    p.add_argument("--trials", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="ictkm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="highest compression ratio with recovery")
    _add_common(p)
    _add_synthetic(p)
    p.add_argument("--atom-fraction", dest="atom_fraction", type=float)
    p.add_argument("--min-passing-fraction", dest="min_passing_fraction", type=float)
    p.add_argument("--force", action="store_true", default=None)

    p = sub.add_parser("curve", help="recovery rate per iteration")
    _add_common(p)
    _add_synthetic(p)

    p = sub.add_parser("scale", help="time to target rate versus ambient dimension")
    _add_common(p)
    _add_synthetic(p)
    p.add_argument("--dims", type=_ints)
    p.add_argument("--target-rate", dest="target_rate", type=float)

    p = sub.add_parser("audio", help="learn a dictionary from WAV files")
    _add_common(p)
    p.add_argument("paths", nargs="*", help="PCM WAV files")
    p.add_argument("--block-seconds", dest="block_seconds", type=float)
    p.add_argument("--overlap", type=float)
    p.add_argument("--atoms", type=int)
    p.add_argument("--sparsity", dest="audio_sparsity", type=int)
    p.add_argument("--ratio", dest="audio_ratio", type=float)
    p.add_argument("--kind", dest="audio_kind", choices=["dft", "dct", "circulant"])
    p.add_argument("--iterations", dest="audio_iterations", type=int)
    p.add_argument("--no-wav", action="store_true", help="skip writing atom WAV files")

    p = sub.add_parser("theory", help="evaluate the convergence-theorem quantities")
    p.add_argument("--d", type=int, default=256)
    p.add_argument("--d-tilde", dest="d_tilde", type=int)
    p.add_argument("--sparsity", type=int, default=8)
    p.add_argument("--coefficients", choices=["geometric", "flat"], default="flat")
    p.add_argument("--dynamic-range", dest="dynamic_range", type=float, default=4.0)
    p.add_argument("--snr", type=float, default=4.0)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--theta", type=float, default=0.01)
    p.add_argument("--target-error", dest="target_error", type=float, default=0.1)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--target-probability", dest="target_probability", type=float, default=0.5)
    p.add_argument("--kind", choices=["dft", "dct", "circulant"], default="dct")
    p.add_argument("--constant", type=float, default=1.0,
                   help="constant for the O(.) bounds (embedding size, admissibility)")
    p.add_argument("--trials", type=int, default=100_000, help="Monte Carlo draws for C_n")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("generate", help="export a synthetic signal batch")
    p.add_argument("output", help="destination (.sig binary or .csv)")
    p.add_argument("--d", type=int, default=256)
    p.add_argument("--d-tilde", dest="d_tilde", type=int)
    p.add_argument("--sparsity", type=int, default=4)
    p.add_argument("--coefficients", choices=["geometric", "flat"], default="geometric")
    p.add_argument("--dynamic-range", dest="dynamic_range", type=float, default=4.0)
    p.add_argument("--snr", type=float, default=4.0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dictionary", help="also write the generating dictionary here (.dic or .csv)")
    return parser


_CONFIG_KEYS = {f for f in ExperimentConfig.__dataclass_fields__}


def _config_from_args(args, experiment):
    overrides = {k: v for k, v in vars(args).items() if k in _CONFIG_KEYS and v is not None}
    if getattr(args, "paths", None):
        overrides["audio_paths"] = list(args.paths)
    overrides["experiment"] = experiment
    if args.config:
        return experiments.load_config(args.config, **overrides)
    return ExperimentConfig.from_dict(overrides)


def _theory(args):
    from ..jl_embedding import recommended_embedding_dim
    from ..signal_model import CoefficientModel, build_dirac_dct_dictionary, noise_sigma_for_snr
    from .. import theory

    dictionary = build_dirac_dct_dictionary(args.d, args.d_tilde)
    K = dictionary.K
    model = (CoefficientModel.geometric(args.sparsity, K, args.dynamic_range)
             if args.coefficients == "geometric" else CoefficientModel.flat(args.sparsity, K))
    sigma = noise_sigma_for_snr(args.d, args.snr)
    t = theory.recommended_inputs(dictionary, model, sigma, args.delta, args.theta,
                                  args.target_error, args.trials, np.random.default_rng(args.seed))
    L = theory.iteration_count(args.target_error)
    N = args.batch_size or int(math.ceil(50 * K * math.log(K)))
    check = theory.admissibility_check(t, args.constant)
    try:
        radius = theory.convergence_radius(t)
    except ValueError:
        radius = None
    try:
        n_needed = theory.sample_bound(t, args.target_probability, L)
    except ValueError:
        n_needed = None
    result = {
        "inputs": t.__dict__,
        "eps_opt": theory.eps_opt(t),
        "convergence_radius": radius,
        "iterations": L,
        "batch_size": N,
        "failure_probability": theory.failure_probability(t, N, L),
        "sample_bound": n_needed,
        "embedding_dim": recommended_embedding_dim(args.delta, 4 * K * K, args.theta, args.d,
                                                   args.kind, args.constant),
        "admissibility": {**check.conditions, "eps_mu": check.eps_mu},
    }
    json.dump(result, sys.stdout, indent=2, default=float)
    sys.stdout.write("\n")


def _generate(args):
    from ..signal_model import (CoefficientModel, build_dirac_dct_dictionary, draw_signals,
                                noise_sigma_for_snr)

    dictionary = build_dirac_dct_dictionary(args.d, args.d_tilde)
    K = dictionary.K
    model = (CoefficientModel.geometric(args.sparsity, K, args.dynamic_range)
             if args.coefficients == "geometric" else CoefficientModel.flat(args.sparsity, K))
    batch = draw_signals(dictionary, model, noise_sigma_for_snr(args.d, args.snr), args.n,
                         np.random.default_rng(args.seed))
    if args.output.endswith(".csv"):
        io.save_batch_csv(args.output, batch)
    else:
        io.save_batch(args.output, batch)
    if args.dictionary:
        if args.dictionary.endswith(".csv"):
            io.save_dictionary_csv(args.dictionary, dictionary.atoms)
        else:
            io.save_dictionary(args.dictionary, dictionary.atoms)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    if args.command == "theory":
        _theory(args)
        return 0
    if args.command == "generate":
        _generate(args)
        return 0
    config = _config_from_args(args, args.command)
    if args.command == "sweep":
        _, summary = experiments.run_compression_sweep(config)
        for kind, ratio in summary.items():
            print(f"{kind}\t{ratio if ratio is not None else '-'}")
    elif args.command == "curve":
        rows = experiments.run_recovery_curve(config)
        print(f"wrote {len(rows)} rows to {config.output_dir}/curve.csv")
    elif args.command == "scale":
        rows = experiments.run_scalability(config)
        for r in rows:
            print(f"{r['d']}\t{r['kind']}\t{r['ratio']}\t{r['trial']}\t{r['time_to_target']:.3f}")
    else:
        result = experiments.run_audio(config, export_wav=not args.no_wav)
        for s in result.spectra:
            print(f"{s.index}\t{s.fundamental_hz:.1f}\t{int(result.selection_counts[s.index])}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
