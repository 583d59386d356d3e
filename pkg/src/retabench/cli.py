"""Command-line pipeline: prompt sampling, synthetic generation, validation,
metric computation, and curve export.

Exit codes: 0 success, 2 input/validation error, 3 computation error.
Failures emit a machine-readable JSON object on stderr. All randomness
flows from the ``--seed`` flag; no command consults the clock, the
environment, or OS entropy, so reruns with the same arguments produce
byte-identical output files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .bon import BonVariant, bon_curve, write_bon_csv
from .dataset import (
    DEFAULT_MAX_ORACLE_SCORE,
    load_benchmark,
    load_candidate_prompts,
    ingest_rm_scores,
    validate_dataset,
    write_benchmark,
    write_rm_scores,
)
from .dpp import DppSampleConfig, build_dpp, default_chain_steps, sample_kdpp
from .errors import ComputationError, InputError, InvalidConfig, RetabenchError
from .metrics import load_win_labels, metric_report, write_metrics_csv
from .reta import (
    RetaConfig,
    default_eta_grid,
    reta_curve,
    write_curve_csv,
    write_per_prompt_csv,
)
from .synthetic import DistSpec, gen_synthetic

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_COMPUTE = 3

# Keys that exist on the namespace but are not part of a command's tunable
# config (and so are not overridable from a config file).
_NON_CONFIG_KEYS = {"command", "func", "config"}

# Operational knobs that cannot change results; excluded from the canonical
# config echo and hash so outputs stay byte-identical across thread counts
# and destination directories.
_OPERATIONAL_KEYS = {"output_dir", "threads"}


def _canonical_config(args: argparse.Namespace) -> dict:
    config = {}
    for key, value in sorted(vars(args).items()):
        if key in _NON_CONFIG_KEYS or key in _OPERATIONAL_KEYS:
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, (list, tuple)):
            value = [str(v) if isinstance(v, Path) else v for v in value]
        config[key] = value
    return config


def _apply_config_file(args: argparse.Namespace) -> None:
    """Values from --config take precedence over command-line flags."""
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    if not path.is_file():
        raise InvalidConfig(f"config file not found: {path}")
    try:
        overrides = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(overrides, dict):
        raise InvalidConfig("config file must hold a JSON object")
    known = set(vars(args)) - _NON_CONFIG_KEYS
    unknown = set(overrides) - known
    if unknown:
        raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
    for key, value in overrides.items():
        setattr(args, key, value)


def _config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def _provenance(config: dict) -> str:
    seed = config.get("seed", "")
    return f"retabench={__version__} seed={seed} config={_config_hash(config)}"


def _write_config_echo(config: dict, output_dir: Path, command: str) -> None:
    output_dir.mkdir(parents=True, exist_ok=True)
    path = output_dir / f"{command}_config.json"
    path.write_text(json.dumps(config, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _load_tables(dataset, paths: Sequence[str]):
    tables = []
    for path in paths:
        tables.append(ingest_rm_scores(dataset, path))
    names = [t.rm_name for t in tables]
    if len(set(names)) != len(names):
        raise InvalidConfig(f"duplicate rm_name among score files: {names}")
    return tables


# --- subcommands ----------------------------------------------------------------


def _cmd_sample_prompts(args: argparse.Namespace) -> int:
    prompts = load_candidate_prompts(args.candidates)
    model = build_dpp(prompts)
    config = DppSampleConfig(k=args.k, seed=args.seed, epsilon=args.epsilon,
                             max_steps=args.max_steps)
    selected = sample_kdpp(model, config)

    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    echo = _canonical_config(args)
    _write_config_echo(echo, out_dir, "sample_prompts")
    ids = [prompts[i].prompt_id for i in selected]
    (out_dir / "selected_prompts.txt").write_text(
        "".join(f"{pid}\n" for pid in ids), encoding="utf-8")
    steps = (config.max_steps if config.max_steps is not None
             else default_chain_steps(model.num_candidates, config.k, config.epsilon))
    provenance = {
        "seed": args.seed,
        "lambda": model.lam,
        "steps": steps,
        "epsilon": args.epsilon,
        "k": args.k,
        "num_candidates": model.num_candidates,
    }
    (out_dir / "sample_provenance.json").write_text(
        json.dumps(provenance, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    spec_path = Path(args.spec)
    if not spec_path.is_file():
        raise InvalidConfig(f"spec file not found: {spec_path}")
    spec = DistSpec.from_json(spec_path.read_text(encoding="utf-8"))
    dataset, table = gen_synthetic(
        spec, args.num_prompts, args.num_responses, args.seed, rm_name=args.rm_name)
    out_dir = Path(args.output_dir)
    write_benchmark(dataset, out_dir)
    write_rm_scores(table, out_dir / "rm_scores.jsonl")
    _write_config_echo(_canonical_config(args), out_dir, "synth")
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    dataset = load_benchmark(args.dataset, max_oracle_score=args.max_oracle_score)
    tables = _load_tables(dataset, args.rm_scores)
    report = validate_dataset(dataset, tables, max_oracle_score=args.max_oracle_score)
    payload = {
        "ok": report.ok,
        "issues": [
            {"severity": i.severity, "location": i.location, "message": i.message}
            for i in report.issues
        ],
    }
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if args.output_dir:
        out_dir = Path(args.output_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "validation_report.json").write_text(text, encoding="utf-8")
        _write_config_echo(_canonical_config(args), out_dir, "validate")
    else:
        sys.stdout.write(text)
    return EXIT_OK if report.ok else EXIT_INPUT


def _reta_config(args: argparse.Namespace, normalize: bool) -> RetaConfig:
    return RetaConfig(
        resamples=args.resamples,
        n_range_low_coeff=args.n_low_coeff,
        n_range_high_coeff=args.n_high_coeff,
        n_exponent=args.n_exponent,
        seed=args.seed,
        normalize=normalize,
    )


def _cmd_reta(args: argparse.Namespace) -> int:
    dataset = load_benchmark(args.dataset, max_oracle_score=args.max_oracle_score)
    tables = _load_tables(dataset, args.rm_scores)
    etas = args.eta if args.eta else default_eta_grid()
    out_dir = Path(args.output_dir)
    echo = _canonical_config(args)
    _write_config_echo(echo, out_dir, "reta")
    provenance = _provenance(echo)
    for table in tables:
        curve = reta_curve(dataset, table, etas, _reta_config(args, normalize=True),
                           threads=args.threads)
        write_curve_csv(curve, out_dir / f"reta_{table.rm_name}.csv", provenance)
        write_per_prompt_csv(curve, dataset,
                             out_dir / f"reta_{table.rm_name}_per_prompt.csv", provenance)
        if args.raw_variant:
            raw = reta_curve(dataset, table, etas, _reta_config(args, normalize=False),
                             threads=args.threads)
            write_curve_csv(raw, out_dir / f"reta_{table.rm_name}_unnormalized.csv",
                            provenance)
    return EXIT_OK


def _cmd_bon(args: argparse.Namespace) -> int:
    dataset = load_benchmark(args.dataset, max_oracle_score=args.max_oracle_score)
    tables = _load_tables(dataset, args.rm_scores)
    if args.variant == "best_of_n":
        variant = BonVariant("best_of_n")
    elif args.variant == "rank_k_of_n":
        variant = BonVariant("rank_k_of_n", args.rank_k)
    else:
        variant = BonVariant("best_m_of_n", args.best_m)
    out_dir = Path(args.output_dir)
    echo = _canonical_config(args)
    _write_config_echo(echo, out_dir, "bon")
    provenance = _provenance(echo)
    for table in tables:
        curve = bon_curve(dataset, table, variant, args.n_values or None)
        write_bon_csv(curve, out_dir / f"bon_{table.rm_name}_{variant.label}.csv",
                      provenance)
    return EXIT_OK


def _cmd_metrics(args: argparse.Namespace) -> int:
    dataset = load_benchmark(args.dataset, max_oracle_score=args.max_oracle_score)
    tables = _load_tables(dataset, args.rm_scores)
    win_labels = load_win_labels(args.win_labels) if args.win_labels else None
    reports = [
        metric_report(dataset, table, eta=args.eta,
                      selection_rank=args.selection_rank, win_labels=win_labels)
        for table in tables
    ]
    out_dir = Path(args.output_dir)
    echo = _canonical_config(args)
    _write_config_echo(echo, out_dir, "metrics")
    write_metrics_csv(reports, out_dir / "metrics.csv", _provenance(echo))
    return EXIT_OK


def _cmd_export(args: argparse.Namespace) -> int:
    dataset = load_benchmark(args.dataset, max_oracle_score=args.max_oracle_score)
    tables = _load_tables(dataset, args.rm_scores)
    out_dir = Path(args.output_dir)
    write_benchmark(dataset, out_dir)
    for table in tables:
        write_rm_scores(table, out_dir / f"rm_scores_{table.rm_name}.jsonl")
    _write_config_echo(_canonical_config(args), out_dir, "export")
    return EXIT_OK


# --- parser ----------------------------------------------------------------------


def _add_dataset_flags(parser: argparse.ArgumentParser, scores_required: bool = True) -> None:
    parser.add_argument("--dataset", required=True, help="benchmark directory")
    parser.add_argument("--rm-scores", dest="rm_scores", nargs="+" if scores_required else "*",
                        default=None if scores_required else [],
                        required=scores_required, help="rm_scores.jsonl files")
    parser.add_argument("--max-oracle-score", dest="max_oracle_score", type=float,
                        default=DEFAULT_MAX_ORACLE_SCORE,
                        help="upper bound accepted for oracle scores")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="retabench",
        description="Reliability benchmarking for reward models.")
    parser.add_argument("--version", action="version", version=f"retabench {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-prompts", help="select a diverse prompt subset")
    p.add_argument("--candidates", required=True, help="prompts.jsonl with embeddings")
    p.add_argument("--k", type=int, required=True, help="number of prompts to select")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--max-steps", dest="max_steps", type=int, default=None)
    p.add_argument("--output-dir", dest="output_dir", required=True)
    p.add_argument("--config", default=None, help="JSON config overriding flags")
    p.set_defaults(func=_cmd_sample_prompts)

    p = sub.add_parser("synth", help="generate a synthetic benchmark")
    p.add_argument("--spec", required=True, help="distribution spec JSON file")
    p.add_argument("--num-prompts", dest="num_prompts", type=int, required=True)
    p.add_argument("--num-responses", dest="num_responses", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rm-name", dest="rm_name", default="synthetic-rm")
    p.add_argument("--output-dir", dest="output_dir", required=True)
    p.add_argument("--config", default=None, help="JSON config overriding flags")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("validate", help="check a dataset and score tables")
    _add_dataset_flags(p, scores_required=False)
    p.add_argument("--output-dir", dest="output_dir", default=None)
    p.add_argument("--config", default=None, help="JSON config overriding flags")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("reta", help="reliability curves over an eta grid")
    _add_dataset_flags(p)
    p.add_argument("--eta", type=float, action="append", default=None,
                   help="curve point (repeatable, strictly decreasing); "
                        "default: 15-point log grid from 1 to 1/128")
    p.add_argument("--resamples", type=int, default=200)
    p.add_argument("--n-low-coeff", dest="n_low_coeff", type=float, default=3.0)
    p.add_argument("--n-high-coeff", dest="n_high_coeff", type=float, default=5.0)
    p.add_argument("--n-exponent", dest="n_exponent", type=float, default=2.0 / 3.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--raw-variant", dest="raw_variant", action="store_true",
                   help="also emit the curve without the per-prompt normalizer")
    p.add_argument("--output-dir", dest="output_dir", required=True)
    p.add_argument("--config", default=None, help="JSON config overriding flags")
    p.set_defaults(func=_cmd_reta)

    p = sub.add_parser("bon", help="best-of-n style curves with KL column")
    _add_dataset_flags(p)
    p.add_argument("--variant", choices=["best_of_n", "rank_k_of_n", "best_m_of_n"],
                   default="best_of_n")
    p.add_argument("--rank-k", dest="rank_k", type=int, default=2,
                   help="k for rank_k_of_n")
    p.add_argument("--best-m", dest="best_m", type=int, default=32,
                   help="m for best_m_of_n")
    p.add_argument("--n-values", dest="n_values", type=int, nargs="*", default=None,
                   help="explicit n grid; default: powers of two up to N")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", dest="output_dir", required=True)
    p.add_argument("--config", default=None, help="JSON config overriding flags")
    p.set_defaults(func=_cmd_bon)

    p = sub.add_parser("metrics", help="hit rate / NDCG / MRR / pairwise table")
    _add_dataset_flags(p)
    p.add_argument("--eta", type=float, default=0.25,
                   help="ground-truth quantile for hit rates")
    p.add_argument("--selection-rank", dest="selection_rank", type=int, default=1,
                   help="which RM pick NDCG/MRR evaluate (1 = best)")
    p.add_argument("--win-labels", dest="win_labels", default=None,
                   help="JSONL win/draw/loss labels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", dest="output_dir", required=True)
    p.add_argument("--config", default=None, help="JSON config overriding flags")
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("export", help="rewrite a dataset and tables canonically")
    _add_dataset_flags(p, scores_required=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", dest="output_dir", required=True)
    p.add_argument("--config", default=None, help="JSON config overriding flags")
    p.set_defaults(func=_cmd_export)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args)
        return args.func(args)
    except InputError as exc:
        _emit_error(exc)
        return EXIT_INPUT
    except ComputationError as exc:
        _emit_error(exc)
        return EXIT_COMPUTE
    except RetabenchError as exc:
        _emit_error(exc)
        return EXIT_COMPUTE


def _emit_error(exc: RetabenchError) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")


if __name__ == "__main__":
    sys.exit(main())
