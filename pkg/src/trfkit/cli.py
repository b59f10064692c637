"""Command-line pipeline: synth, fit, evaluate, lda, inspect.

One JSON config drives every stage. Relative paths inside the config
resolve against the config file's directory, so a config can travel with
its data. `--set section.key=value` overrides single entries; `--seed`
and `--output` override their config counterparts.

Identical config and seed produce byte-identical output trees. All
outputs of a command are staged and moved into place only after the
whole command has succeeded, so a failed run leaves no partial files.

Exit codes: 0 success, 2 config or validation error, 3 data-format
error, 4 numerical failure.
"""

import argparse
import copy
import json
import os
import shutil
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from ._util import round_half_up
from .errors import (
    ConfigError,
    FormatError,
    NumericalError,
    PreconditionError,
    TrfkitError,
    ValidationError,
)
from .lagged_design import lag_range_to_samples
from .lda_reduce import fit_lda, separation_report, transform, write_lda
from .preprocess import SegmentSet, impulse_align, segment, zscore_channels, zscore_features
from .ridge_trf import cross_validate, fit_trf, make_lambda_grid, read_trf, write_trf
from .stats_eval import evaluate_subject, group_report, topo_report, write_topo_csv
from .synthgen import SynthSpec, circle_layout, gen_kernel, gen_response, gen_words
from .tensorio import (
    WordEventSequence,
    read_channel_layout,
    read_eeg,
    read_tensor_header,
    read_word_events,
    write_channel_layout,
    write_eeg,
    write_json,
    write_word_events,
)

__all__ = [
    "DEFAULT_CONFIG",
    "PipelineConfig",
    "load_config",
    "split_segments",
    "cmd_synth",
    "cmd_fit",
    "cmd_evaluate",
    "cmd_lda",
    "cmd_inspect",
    "main",
]

DEFAULT_CONFIG = {
    "paths": {"eeg": [], "word_events": "", "layout": "", "output": "out"},
    "lags": {"tmin_s": -0.1, "tmax_s": 1.0},
    "window_s": 2.0,
    "overlap": 0.1,
    "lambda_grid": {"lo": 1e-3, "hi": 1e5, "n": 10},
    "folds": 5,
    "solver": "closed_form",
    "iterative": {"lr": 1e-4, "batch_size": 64, "tol": 1e-8, "max_epochs": 1000},
    "lda": {"enabled": False, "n_components": 9},
    "test_fraction": 0.2,
    "seed": 0,
    "synth": {
        "fs_hz": 100.0,
        "duration_s": 120.0,
        "n_channels": 4,
        "n_features": 8,
        "word_rate_hz": 2.0,
        "snr": 5.0,
        "n_subjects": 1,
    },
}


@dataclass
class PipelineConfig:
    """Validated, path-resolved pipeline settings."""

    eeg_paths: list[Path]
    word_events: Path | None
    layout: Path | None
    output: Path
    tmin_s: float
    tmax_s: float
    window_s: float
    overlap: float
    grid_lo: float
    grid_hi: float
    grid_n: int
    folds: int
    solver: str
    lr: float
    batch_size: int
    tol: float
    max_epochs: int
    lda_enabled: bool
    lda_components: int
    test_fraction: float
    seed: int
    synth: dict


def _merge(base: dict, override: dict, trail: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{trail}.{key}" if trail else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be an object")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _apply_set(cfg: dict, assignment: str) -> None:
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    dotted, raw = assignment.split("=", 1)
    keys = dotted.strip().split(".")
    node = cfg
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"unknown config key {dotted!r}")
        node = node[key]
    leaf = keys[-1]
    if not isinstance(node, dict) or leaf not in node:
        raise ConfigError(f"unknown config key {dotted!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw  # bare strings may be given unquoted
    node[leaf] = value


def _expect(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_config(
    config_path,
    sets: list[str] | None = None,
    seed: int | None = None,
    output: str | None = None,
) -> PipelineConfig:
    """Read, merge, override and validate a pipeline config.

    Validation is total: any problem raises ConfigError before the
    caller gets a chance to touch the filesystem.
    """
    config_path = Path(config_path)
    try:
        text = config_path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {config_path}: {e}") from None
    try:
        user_cfg = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{config_path}: malformed JSON at offset {e.pos}: {e.msg}") from None
    if not isinstance(user_cfg, dict):
        raise ConfigError(f"{config_path}: config must be a JSON object")

    cfg = _merge(DEFAULT_CONFIG, user_cfg)
    for assignment in sets or []:
        _apply_set(cfg, assignment)
    if seed is not None:
        cfg["seed"] = seed
    if output is not None:
        cfg["paths"]["output"] = None  # replaced below, resolved against cwd

    base = config_path.parent

    paths = cfg["paths"]
    _expect(isinstance(paths["eeg"], list), "paths.eeg must be a list of file paths")
    _expect(
        all(isinstance(p, str) and p for p in paths["eeg"]),
        "paths.eeg entries must be non-empty strings",
    )
    eeg_paths = [_resolve(base, p) for p in paths["eeg"]]
    word_events = _resolve(base, paths["word_events"]) if paths["word_events"] else None
    layout = _resolve(base, paths["layout"]) if paths["layout"] else None
    if output is not None:
        out_path = Path(output)
    else:
        _expect(
            isinstance(paths["output"], str) and paths["output"],
            "paths.output must be a non-empty string",
        )
        out_path = _resolve(base, paths["output"])

    lags = cfg["lags"]
    _expect(
        isinstance(lags["tmin_s"], (int, float)) and isinstance(lags["tmax_s"], (int, float)),
        "lags.tmin_s and lags.tmax_s must be numbers",
    )
    _expect(lags["tmin_s"] < lags["tmax_s"], "lags.tmin_s must be below lags.tmax_s")
    _expect(
        isinstance(cfg["window_s"], (int, float)) and cfg["window_s"] > 0,
        "window_s must be positive",
    )
    _expect(
        isinstance(cfg["overlap"], (int, float)) and 0.0 <= cfg["overlap"] < 1.0,
        "overlap must lie in [0, 1)",
    )

    grid = cfg["lambda_grid"]
    _expect(
        isinstance(grid["lo"], (int, float)) and isinstance(grid["hi"], (int, float)),
        "lambda_grid.lo and lambda_grid.hi must be numbers",
    )
    _expect(0 < grid["lo"] < grid["hi"], "lambda_grid needs 0 < lo < hi")
    _expect(
        isinstance(grid["n"], int) and not isinstance(grid["n"], bool) and grid["n"] >= 2,
        "lambda_grid.n must be an integer >= 2",
    )
    _expect(
        isinstance(cfg["folds"], int) and not isinstance(cfg["folds"], bool) and cfg["folds"] >= 2,
        "folds must be an integer >= 2",
    )
    _expect(cfg["solver"] in ("closed_form", "iterative"), "solver must be closed_form or iterative")

    it = cfg["iterative"]
    _expect(isinstance(it["lr"], (int, float)) and it["lr"] > 0, "iterative.lr must be positive")
    _expect(
        isinstance(it["batch_size"], int) and it["batch_size"] >= 1,
        "iterative.batch_size must be an integer >= 1",
    )
    _expect(isinstance(it["tol"], (int, float)) and it["tol"] >= 0, "iterative.tol must be >= 0")
    _expect(
        isinstance(it["max_epochs"], int) and it["max_epochs"] >= 1,
        "iterative.max_epochs must be an integer >= 1",
    )

    lda = cfg["lda"]
    _expect(isinstance(lda["enabled"], bool), "lda.enabled must be a boolean")
    _expect(
        isinstance(lda["n_components"], int) and lda["n_components"] >= 1,
        "lda.n_components must be an integer >= 1",
    )
    _expect(
        isinstance(cfg["test_fraction"], (int, float)) and 0.0 < cfg["test_fraction"] < 1.0,
        "test_fraction must lie in (0, 1)",
    )
    _expect(
        isinstance(cfg["seed"], int) and not isinstance(cfg["seed"], bool),
        "seed must be an integer",
    )
    synth = cfg["synth"]
    _expect(
        isinstance(synth["n_subjects"], int) and synth["n_subjects"] >= 1,
        "synth.n_subjects must be an integer >= 1",
    )

    return PipelineConfig(
        eeg_paths=eeg_paths,
        word_events=word_events,
        layout=layout,
        output=out_path,
        tmin_s=float(lags["tmin_s"]),
        tmax_s=float(lags["tmax_s"]),
        window_s=float(cfg["window_s"]),
        overlap=float(cfg["overlap"]),
        grid_lo=float(grid["lo"]),
        grid_hi=float(grid["hi"]),
        grid_n=int(grid["n"]),
        folds=int(cfg["folds"]),
        solver=str(cfg["solver"]),
        lr=float(it["lr"]),
        batch_size=int(it["batch_size"]),
        tol=float(it["tol"]),
        max_epochs=int(it["max_epochs"]),
        lda_enabled=bool(lda["enabled"]),
        lda_components=int(lda["n_components"]),
        test_fraction=float(cfg["test_fraction"]),
        seed=int(cfg["seed"]),
        synth=dict(synth),
    )


def split_segments(segments: SegmentSet, test_fraction: float) -> tuple[SegmentSet, SegmentSet]:
    """Hold out the final fraction of segments (at least one) as a test set."""
    n = len(segments)
    if n < 2:
        raise PreconditionError(f"need at least 2 segments to split, got {n}")
    n_test = max(1, round_half_up(n * test_fraction))
    if n_test >= n:
        raise PreconditionError(
            f"test fraction {test_fraction} leaves no training segments out of {n}"
        )
    return segments.subset(range(n - n_test)), segments.subset(range(n - n_test, n))


# ---------------------------------------------------------------------------
# output staging


def _commit_outputs(out_dir: Path, writers: list[tuple[str, object]]) -> None:
    """Run every writer into a staging dir, then move all files into place."""
    out_dir.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".stage-", dir=out_dir))
    try:
        for name, write in writers:
            write(stage / name)
        for name, _ in writers:
            os.replace(stage / name, out_dir / name)
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def _log(message: str) -> None:
    print(message, file=sys.stderr)


# ---------------------------------------------------------------------------
# commands


def cmd_synth(cfg: PipelineConfig) -> None:
    """Generate synthetic subjects sharing one word stream."""
    synth = cfg.synth
    base_spec = SynthSpec(
        fs_hz=float(synth["fs_hz"]),
        duration_s=float(synth["duration_s"]),
        n_channels=int(synth["n_channels"]),
        n_features=int(synth["n_features"]),
        tmin_s=cfg.tmin_s,
        tmax_s=cfg.tmax_s,
        word_rate_hz=float(synth["word_rate_hz"]),
        snr=float(synth["snr"]),
        seed=cfg.seed,
    )
    n_subjects = int(synth["n_subjects"])
    words = gen_words(base_spec)
    layout = circle_layout(base_spec.channel_names())

    writers = [
        ("words.tsv", lambda p, w=words: write_word_events(p, w)),
        ("layout.csv", lambda p, l=layout: write_channel_layout(p, l)),
    ]
    for s in range(n_subjects):
        sid = f"sub{s:02d}"
        spec_s = replace(base_spec, seed=cfg.seed + s)
        kernel = gen_kernel(spec_s)
        rec = gen_response(kernel, words, spec_s, subject_id=sid)
        writers.append((f"{sid}_truth_trf.btsr", lambda p, k=kernel: write_trf(p, k)))
        writers.append((f"{sid}_eeg.btsr", lambda p, r=rec: write_eeg(p, r)))
        _log(f"synth {sid}: {rec.n_channels} channels x {rec.n_samples} samples, "
             f"{len(words)} words")
    _commit_outputs(cfg.output, writers)


def _prepare_segments(rec, words, cfg: PipelineConfig) -> SegmentSet:
    rec_z = zscore_channels(rec)
    words_z = zscore_features(words)
    aligned = impulse_align(words_z, rec.fs_hz, rec.n_samples)
    return segment(aligned, rec_z, cfg.window_s, cfg.overlap)


def _fit_one(rec, words, cfg: PipelineConfig):
    segs = _prepare_segments(rec, words, cfg)
    train, test = split_segments(segs, cfg.test_fraction)
    if len(train) < cfg.folds:
        raise PreconditionError(
            f"subject {rec.subject_id}: {len(train)} training segments "
            f"cannot fill {cfg.folds} folds"
        )
    spec = lag_range_to_samples(cfg.tmin_s, cfg.tmax_s, rec.fs_hz)
    grid = make_lambda_grid(cfg.grid_lo, cfg.grid_hi, cfg.grid_n)
    report = cross_validate(
        train,
        spec,
        grid,
        cfg.folds,
        seed=cfg.seed,
        solver=cfg.solver,
        lr=cfg.lr,
        batch_size=cfg.batch_size,
        max_epochs=cfg.max_epochs,
        tol=cfg.tol,
    )
    model = fit_trf(
        train,
        spec,
        report.best_lambda,
        solver=cfg.solver,
        lr=cfg.lr,
        batch_size=cfg.batch_size,
        max_epochs=cfg.max_epochs,
        tol=cfg.tol,
        seed=cfg.seed,
    )
    return model, report, len(train), len(test)


def _read_subjects(cfg: PipelineConfig):
    if not cfg.eeg_paths:
        raise ConfigError("paths.eeg is empty")
    if cfg.word_events is None:
        raise ConfigError("paths.word_events is not set")
    words = read_word_events(cfg.word_events)
    recs = [read_eeg(p) for p in cfg.eeg_paths]
    seen = set()
    for rec in recs:
        if rec.subject_id in seen:
            raise ValidationError(f"duplicate subject id {rec.subject_id!r} across EEG files")
        seen.add(rec.subject_id)
    return recs, words


def _map_subjects(fn, recs, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, recs))
    return [fn(rec) for rec in recs]


def cmd_fit(cfg: PipelineConfig, workers: int = 1) -> None:
    """Cross-validate and fit one kernel per subject."""
    recs, words = _read_subjects(cfg)
    results = _map_subjects(lambda rec: _fit_one(rec, words, cfg), recs, workers)
    writers = []
    for rec, (model, report, n_train, n_test) in zip(recs, results):
        sid = rec.subject_id
        cv_doc = {
            "subject_id": sid,
            "grid": report.grid,
            "per_lambda_scores": [list(map(float, row)) for row in report.per_lambda_scores],
            "best_lambda": report.best_lambda,
            "fold_assignment": report.fold_assignment,
            "n_train_segments": n_train,
            "n_test_segments": n_test,
            "solver": cfg.solver,
        }
        writers.append((f"{sid}_trf.btsr", lambda p, m=model: write_trf(p, m)))
        writers.append((f"{sid}_cv.json", lambda p, d=cv_doc: write_json(p, d)))
        _log(f"fit {sid}: best lambda {report.best_lambda:g} "
             f"({n_train} train / {n_test} test segments)")
    _commit_outputs(cfg.output, writers)


def cmd_evaluate(cfg: PipelineConfig, workers: int = 1) -> None:
    """Score fitted kernels on each subject's held-out segments."""
    if cfg.layout is None:
        raise ConfigError("paths.layout is not set")
    layout = read_channel_layout(cfg.layout)
    recs, words = _read_subjects(cfg)
    models = []
    for rec in recs:
        path = cfg.output / f"{rec.subject_id}_trf.btsr"
        if not path.exists():
            raise ValidationError(
                f"no fitted kernel for subject {rec.subject_id!r} (expected {path})"
            )
        models.append(read_trf(path))

    def evaluate_one(pair):
        rec, model = pair
        segs = _prepare_segments(rec, words, cfg)
        _, test = split_segments(segs, cfg.test_fraction)
        return evaluate_subject(model, test, model.lag_spec, subject_id=rec.subject_id)

    reports = _map_subjects(evaluate_one, list(zip(recs, models)), workers)
    group = group_report(reports)
    writers = []
    for report in reports:
        sid = report.subject_id
        rows = topo_report(report, layout)
        writers.append((f"{sid}_eval.json", lambda p, d=report.to_json(): write_json(p, d)))
        writers.append((f"{sid}_topo.csv", lambda p, r=rows: write_topo_csv(p, r)))
        _log(f"evaluate {sid}: mean r {report.mean_r:.4f} over {report.n_samples} samples")
    writers.append(("group_eval.json", lambda p, d=group.to_json(): write_json(p, d)))
    _log(f"group: pooled r {group.pooled_r:.4f}, fisher p {group.fisher_p:.3g}")
    _commit_outputs(cfg.output, writers)


def cmd_lda(cfg: PipelineConfig) -> None:
    """Reduce word vectors to discriminant space; write a reduced TSV."""
    if not cfg.lda_enabled:
        raise ConfigError("lda.enabled is false; enable it to run the lda command")
    if cfg.word_events is None:
        raise ConfigError("paths.word_events is not set")
    words = read_word_events(cfg.word_events)
    untagged = [k for k, ev in enumerate(words.events) if ev.pos_tag is None]
    if untagged:
        shown = ", ".join(
            f"row {k + 2} ({words.events[k].token!r})" for k in untagged[:10]
        )
        more = "" if len(untagged) <= 10 else f" and {len(untagged) - 10} more"
        raise ValidationError(f"word events without a POS tag: {shown}{more}")
    labels = [ev.pos_tag for ev in words.events]
    model = fit_lda(words.vectors(), labels, cfg.lda_components)
    if model.clamped:
        _log(
            f"lda: clamped from {model.requested_components} to "
            f"{model.n_components} components"
        )
    reduced_mat = transform(model, words.vectors())
    reduced = WordEventSequence(
        events=[
            replace(ev, vector=reduced_mat[k]) for k, ev in enumerate(words.events)
        ],
        dim=model.n_components,
    )
    scores = separation_report(model, words.vectors(), labels)
    doc = {
        "n_components": model.n_components,
        "requested_components": model.requested_components,
        "clamped": model.clamped,
        "eigenvalues": [float(v) for v in model.eigenvalues],
        "classes": [
            {
                "label": s.label,
                "mean_within_distance": s.mean_within_distance,
                "nearest_centroid_distance": s.nearest_centroid_distance,
                "nearest_class": s.nearest_class,
            }
            for s in scores
        ],
    }
    _log(f"lda: {len(model.class_labels)} classes -> {model.n_components} components")
    _commit_outputs(
        cfg.output,
        [
            ("lda_model.btsr", lambda p: write_lda(p, model)),
            ("words_lda.tsv", lambda p: write_word_events(p, reduced)),
            ("lda_separation.json", lambda p: write_json(p, doc)),
        ],
    )


def cmd_inspect(paths: list[str]) -> int:
    """Print the BTSR header of each file."""
    for path in paths:
        header = read_tensor_header(path)
        print(f"{path}:")
        print(json.dumps(header, indent=2))
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_config_flags(sub: argparse.ArgumentParser, workers: bool = False) -> None:
    sub.add_argument("--config", required=True, help="pipeline config (JSON)")
    sub.add_argument("--seed", type=int, default=None, help="override config seed")
    sub.add_argument("--output", default=None, help="override output directory")
    sub.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config entry, e.g. --set lambda_grid.n=10",
    )
    if workers:
        sub.add_argument(
            "--workers", type=int, default=1, help="subjects processed in parallel"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trfkit",
        description="Time-lagged ridge regression pipeline for multichannel recordings",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    _add_config_flags(commands.add_parser("synth", help="generate synthetic subjects"))
    _add_config_flags(commands.add_parser("fit", help="cross-validate and fit kernels"), workers=True)
    _add_config_flags(
        commands.add_parser("evaluate", help="score kernels on held-out segments"), workers=True
    )
    _add_config_flags(commands.add_parser("lda", help="reduce word vectors to discriminant space"))
    inspect = commands.add_parser("inspect", help="print BTSR headers")
    inspect.add_argument("files", nargs="+", help="BTSR files to inspect")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "inspect":
            return cmd_inspect(args.files)
        workers = getattr(args, "workers", 1)
        if workers < 1:
            raise ConfigError(f"--workers must be >= 1, got {workers}")
        cfg = load_config(args.config, sets=args.set, seed=args.seed, output=args.output)
        if args.command == "synth":
            cmd_synth(cfg)
        elif args.command == "fit":
            cmd_fit(cfg, workers)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, workers)
        elif args.command == "lda":
            cmd_lda(cfg)
        return 0
    except FormatError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except NumericalError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    except TrfkitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
