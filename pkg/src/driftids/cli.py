"""Command-line front end.

Exit codes: 0 ok, 1 usage, 2 ingest, 3 synthesis, 4 evaluation.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import __version__
from .errors import DriftIdsError, EvaluationError, IngestError, SynthesisError, TooFewRuns
from .evaluate import (
    aggregate, atomic_write_text, batch_reference_run, check_versions, load_summary,
    prequential_run, to_json, trace_csv_text,
)
from .features import OnlineMinMaxScaler, extract_stream, read_feature_csv, write_feature_csv
from .learners import LEARNERS, make_learner
from .packets import read_packets
from .seeding import derive_seed
from .synth import (
    DriftSchedule, build_stream, drift_stream, load_spec, read_boundaries,
    synthetic_pools_for, write_boundaries,
)

EXIT_OK, EXIT_USAGE, EXIT_INGEST, EXIT_SYNTH, EXIT_EVAL = 0, 1, 2, 3, 4
WORKERS_ENV = "DRIFTIDS_WORKERS"


class UsageError(DriftIdsError):
    exit_code = EXIT_USAGE


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 by default, which is reserved for ingest errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# extract

def cmd_extract(args) -> int:
    try:
        packets, skipped = read_packets(args.input)
    except OSError as exc:
        raise IngestError(f"cannot read {args.input}: {exc}") from None
    vectors = list(extract_stream(packets))
    write_feature_csv(vectors, args.out)
    print(f"packets read: {len(packets)}  skipped: {skipped}  windows: {len(vectors)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth

def load_pools(source: str, spec, seed_default=0):
    """``synthetic`` / ``synthetic:SEED`` or a directory of ``<pool_id>.csv`` files."""
    if source.startswith("synthetic"):
        _, _, seed = source.partition(":")
        return synthetic_pools_for(spec, int(seed) if seed else seed_default)
    directory = Path(source)
    if not directory.is_dir():
        raise SynthesisError(f"pool directory {source!r} not found")
    pools = {}
    for phase in spec.phases:
        path = directory / f"{phase.pool_id}.csv"
        if phase.pool_id not in pools:
            pools[phase.pool_id] = read_feature_csv(path) if path.exists() else []
    return pools


def boundaries_path(stream_path) -> Path:
    return Path(stream_path).with_suffix(".boundaries")


def cmd_synth(args) -> int:
    try:
        spec = load_spec(args.spec)
    except OSError as exc:
        raise SynthesisError(f"cannot read spec: {exc}") from None
    samples, schedule = build_stream(spec, load_pools(args.pools, spec))
    write_feature_csv(samples, args.out)
    write_boundaries(schedule, boundaries_path(args.out))
    print(f"samples: {len(samples)}  boundaries: {','.join(map(str, schedule.boundaries))}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# run

_TRUE = {"1", "true", "yes", "on"}


@dataclass
class ExperimentConfig:
    learner: str = "arf"
    repetitions: int = 5
    seed: int = 0
    aggregate: bool = True
    scale: bool = True
    spec: str = ""
    pools: str = "synthetic"
    stream: str = ""
    samples_per_phase: int = 2000
    direction: str = "forward"
    params: dict = field(default_factory=dict)
    base_dir: str = "."

    def validate(self):
        if self.learner not in LEARNERS:
            raise UsageError(f"learner must be one of {sorted(LEARNERS)}, got {self.learner!r}")
        if self.repetitions < 1:
            raise UsageError("repetitions must be >= 1")

    def echo(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "learner", "repetitions", "seed", "aggregate", "scale", "spec", "pools",
            "stream", "samples_per_phase", "direction")}
        out["params"] = dict(self.params)
        return out

    def resolve(self, path):
        return str(Path(self.base_dir, path)) if path and not os.path.isabs(path) else path


def _coerce(text):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_config(text: str, base_dir=".") -> ExperimentConfig:
    """Flat ``key = value`` lines; ``param.<name>`` keys go to the learner."""
    cfg = ExperimentConfig(base_dir=str(base_dir))
    ints = {"repetitions", "seed", "samples_per_phase"}
    bools = {"aggregate", "scale"}
    strings = {"learner", "spec", "pools", "stream", "direction"}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, value = key.strip(), value.strip()
        try:
            if key.startswith("param."):
                cfg.params[key[len("param."):]] = _coerce(value)
            elif key in ints:
                setattr(cfg, key, int(value))
            elif key in bools:
                setattr(cfg, key, value.lower() in _TRUE)
            elif key in strings:
                setattr(cfg, key, value)
            else:
                raise UsageError(f"config line {lineno}: unknown key {key!r}")
        except ValueError:
            raise UsageError(f"config line {lineno}: bad value {value!r} for {key}") from None
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    return parse_config(text, base_dir=Path(path).parent)


def _stream_for(cfg: ExperimentConfig, rep: int):
    rep_seed = derive_seed(cfg.seed, rep)
    if cfg.stream:
        path = cfg.resolve(cfg.stream)
        samples = read_feature_csv(path)
        bpath = boundaries_path(path)
        boundaries = read_boundaries(bpath) if bpath.exists() else ()
        return samples, DriftSchedule(boundaries, len(samples))
    if cfg.spec:
        spec = replace(load_spec(cfg.resolve(cfg.spec)), shuffle_seed=rep_seed)
        pools_src = cfg.pools if cfg.pools.startswith("synthetic") else cfg.resolve(cfg.pools)
        return build_stream(spec, load_pools(pools_src, spec, seed_default=cfg.seed))
    return drift_stream(cfg.samples_per_phase, seed=cfg.seed, shuffle_seed=rep_seed,
                        direction=cfg.direction)


def run_repetition(cfg: ExperimentConfig, rep: int):
    samples, schedule = _stream_for(cfg, rep)
    seed = derive_seed(cfg.seed, rep)
    echo = cfg.echo()
    echo["repetition"] = rep
    if cfg.learner == "batch-rf":
        first = schedule.boundaries[0] if schedule.boundaries else len(samples)
        return batch_reference_run(samples[:first], samples, schedule, seed=seed,
                                   forest_params=cfg.params, scale=cfg.scale, config=echo)
    learner = make_learner(cfg.learner, seed=seed, **cfg.params)
    scaler = OnlineMinMaxScaler(len(samples[0].features)) if cfg.scale and samples else None
    return prequential_run(learner, samples, schedule, scaler=scaler, config=echo)


def _workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.reps is not None:
        cfg.repetitions = args.reps
    cfg.validate()
    if cfg.aggregate and cfg.repetitions < 2:
        raise TooFewRuns(f"aggregation needs at least 2 runs, got {cfg.repetitions}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reps = range(1, cfg.repetitions + 1)
    try:
        workers = _workers()
        if workers > 1 and cfg.repetitions > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run_repetition, [cfg] * len(reps), reps))
        else:
            results = [run_repetition(cfg, rep) for rep in reps]
    except (SynthesisError, IngestError):
        raise
    except (DriftIdsError, TypeError, ValueError) as exc:
        raise EvaluationError(f"{type(exc).__name__}: {exc}") from exc
    for rep, result in zip(reps, results):
        atomic_write_text(out_dir / f"run_{rep:02d}.json", to_json(result.summary()))
        atomic_write_text(out_dir / f"run_{rep:02d}_trace.csv", trace_csv_text(result))
        print(f"run {rep}: {cfg.learner} F1={result.f1:.3f} "
              f"drift_events={len(result.drift_events)} {result.bandwidth_mbps:.1f} Mbps")
    if cfg.aggregate:
        agg = aggregate(results, config=cfg.echo())
        atomic_write_text(out_dir / "aggregate.json", to_json(agg.summary()))
        print(f"aggregate: F1 {agg.mean['f1']:.3f} +/- {agg.std['f1']:.3f} over {agg.n_runs} runs")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report

_NAMES = {"batch-rf": "RF (batch)", "arf": "ARF", "hat": "Hoeffding T.", "nb": "Naive Bayes",
          "ht": "Hoeffding (plain)"}


def _fmt(mean, std=None):
    if mean is None:
        return "n/a"
    if std is None:
        return f"{mean:.3f}"
    return f"{mean:.3f} ± {std:.3f}"


def report_rows(summaries):
    rows = []
    for s in summaries:
        name = _NAMES.get(s.get("learner"), s.get("learner", "?"))
        if s.get("kind") == "aggregate":
            cells = [_fmt(s["mean"].get(m), s["std"].get(m))
                     for m in ("f1", "accuracy", "precision", "recall", "auc")]
            t = s.get("timing", {})
            bw = _fmt(t.get("bandwidth_mbps_mean"), t.get("bandwidth_mbps_std"))
            rows.append([name, str(s["runs"]), *cells, bw])
        else:
            cells = [_fmt(s["metrics"].get(m)) for m in ("f1", "accuracy", "precision", "recall", "auc")]
            rows.append([name, "1", *cells, _fmt(s.get("timing", {}).get("bandwidth_mbps"))])
    return rows


def format_table(rows) -> str:
    header = ["Algorithm", "Runs", "F1 Score", "Accuracy", "Precision", "Recall", "AUC",
              "Bandwidth (Mbps)"]
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    line = lambda r: "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([line(header), sep, *(line(r) for r in rows)])


def cmd_report(args) -> int:
    if not args.files:
        raise UsageError("report needs at least one run or aggregate JSON file")
    summaries = []
    for path in args.files:
        try:
            summaries.append(load_summary(path))
        except (OSError, ValueError) as exc:
            raise UsageError(f"{path}: {exc}") from None
    check_versions(summaries)
    print(format_table(report_rows(summaries)))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="driftids", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("extract", help="packets (pcap or packet CSV) -> feature CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("synth", help="stream spec + pools -> stream CSV and boundary file")
    p.add_argument("--spec", required=True)
    p.add_argument("--pools", required=True,
                   help="directory of <pool_id>.csv feature files, or synthetic[:SEED]")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="repeated prequential runs from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="summary table of run/aggregate JSON files")
    p.add_argument("files", nargs="*")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except DriftIdsError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
