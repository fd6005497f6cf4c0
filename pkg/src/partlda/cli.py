"""Command-line entry point: ``partlda {partition,train,report,synth}``.

Exit status is 0 on success, 2 on usage errors and 1 on runtime errors.
Every run can write a flat ``key = value`` manifest; passing it back with
``--manifest`` reuses its parameters (explicit flags still win).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from partlda import __version__
from partlda.corpus import (CorpusError, generate_synthetic, generate_years, read_timestamps,
                            read_uci_bow, write_timestamps, write_uci_bow)
from partlda.metrics import TopicEstimates, top_words
from partlda.partitioner import ALGORITHMS, PartitionerConfig, partition
from partlda.sampler import ModelConfig, train
from partlda.workload import build_bot_workload, build_workload

log = logging.getLogger("partlda")

THREADS_ENV = "PARTLDA_THREADS"

PARTITION_DEFAULTS = {"vocab": None, "algo": "all", "p": "1,10,30,60", "repeats": 100, "seed": 0}
TRAIN_DEFAULTS = {
    "vocab": None, "timestamps": None, "mode": "lda", "topics": 256, "alpha": 0.5, "beta": 0.1,
    "gamma": 0.1, "ts_length": 16, "iterations": 200, "seed": 0, "algo": "a3", "p": None, "repeats": 100,
    "eval_every": 1,
}


class UsageError(Exception):
    pass


# -- manifests -------------------------------------------------------------

def write_manifest(path: Path, fields: dict) -> None:
    with open(path, "w") as fh:
        for k, v in fields.items():
            fh.write(f"{k} = {'' if v is None else v}\n")


def read_manifest(path: str | os.PathLike) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}: line {lineno}: expected 'key = value'")
            out[key.strip()] = value.strip()
    return out


def file_digest(path: str | os.PathLike | None) -> str | None:
    if path is None:
        return None
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _resolve(args: argparse.Namespace, defaults: dict, types: dict) -> dict:
    """Explicit flag, else manifest value, else built-in default."""
    manifest = read_manifest(args.manifest) if getattr(args, "manifest", None) else {}
    out = {}
    for key, default in defaults.items():
        value = getattr(args, key, None)
        if value is None and manifest.get(key, "") != "":
            value = types.get(key, str)(manifest[key])
        out[key] = default if value is None else value
    if getattr(args, "data", None) is None:
        if "data" not in manifest:
            raise UsageError("--data is required (or a --manifest naming it)")
        args.data = manifest["data"]
    return out


def _p_list(value) -> list[int]:
    items = value if isinstance(value, list) else [value]
    try:
        ps = [int(x) for item in items for x in str(item).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad --p value {value!r}") from None
    if not ps or min(ps) < 1:
        raise UsageError("--p values must be positive integers")
    return ps


def _algos(names: str) -> list[str]:
    algos = list(ALGORITHMS) if names == "all" else [a.strip() for a in names.split(",")]
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad:
        raise UsageError(f"unknown algorithm(s) {bad}; choose from {', '.join(ALGORITHMS)} or 'all'")
    return algos


def _load_corpus(data, vocab):
    for p in (data, vocab):
        if p is not None and not Path(p).is_file():
            raise FileNotFoundError(f"no such file: {p}")
    return read_uci_bow(data, vocab)


# -- partition -------------------------------------------------------------

def cmd_partition(args: argparse.Namespace) -> int:
    opts = _resolve(args, PARTITION_DEFAULTS, {"repeats": int, "seed": int})
    ps = _p_list(opts["p"])
    algos = _algos(opts["algo"])
    if args.partition_out and len(ps) * len(algos) > 1 and "{" not in args.partition_out:
        raise UsageError("--partition-out needs {algo} and/or {P} placeholders when sweeping")

    t0 = time.perf_counter()
    corpus = _load_corpus(args.data, opts["vocab"])
    matrix = build_workload(corpus)
    timings = {"load_s": time.perf_counter() - t0}

    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["algorithm", "P", "eta", "predicted_speedup", "elapsed_ms"])
    for algo in algos:
        for num_parts in ps:
            t = time.perf_counter()
            part, report = partition(matrix, algo, PartitionerConfig(num_parts, opts["repeats"], opts["seed"]))
            elapsed = (time.perf_counter() - t) * 1000
            timings[f"{algo}_P{num_parts}_ms"] = round(elapsed, 3)
            writer.writerow(report.csv_row(algo) + [f"{elapsed:.1f}"])
            sys.stdout.flush()
            if args.partition_out:
                write_partitioning(Path(args.partition_out.format(algo=algo, P=num_parts)), part)

    if args.manifest_out:
        write_manifest(Path(args.manifest_out), {
            "command": "partition", "version": __version__, "data": args.data, **opts,
            "p": ",".join(map(str, ps)), "data_sha256": file_digest(args.data),
            "vocab_sha256": file_digest(opts["vocab"]),
            **{f"time_{k}": (round(v, 6) if isinstance(v, float) else v) for k, v in timings.items()},
        })
    return 0


def write_partitioning(path: Path, part) -> None:
    """Row-group id per document line, then column-group id per word line."""
    with open(path, "w") as fh:
        fh.write(f"# P={part.num_parts} rows={part.shape[0]} cols={part.shape[1]}\n")
        np.savetxt(fh, part.row_groups(), fmt="%d")
        np.savetxt(fh, part.col_groups(), fmt="%d")


# -- train -----------------------------------------------------------------

COUNT_FILES = {"doc_topic": "doc_topic.txt", "topic_word": "topic_word.txt", "topic_timestamp": "topic_timestamp.txt"}


def write_counts(path: Path, name: str, matrix: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {name} {matrix.shape[0]} {matrix.shape[1]}\n")
        np.savetxt(fh, matrix, fmt="%d")


def read_counts(path: Path, name: str) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "#" or header[1] != name:
            raise ValueError(f"{path}: bad count dump header")
        try:
            rows, cols = int(header[2]), int(header[3])
        except ValueError:
            raise ValueError(f"{path}: bad count dump header") from None
        body = fh.read()
    data = np.loadtxt(io.StringIO(body), dtype=np.int64, ndmin=2) if body.strip() else np.zeros((0, cols), np.int64)
    if data.shape != (rows, cols):
        raise ValueError(f"{path}: expected {rows}x{cols} counts, found {data.shape[0]}x{data.shape[1]}")
    return data


def cmd_train(args: argparse.Namespace) -> int:
    types = {"topics": int, "alpha": float, "beta": float, "gamma": float, "ts_length": int, "iterations": int,
             "seed": int, "repeats": int, "eval_every": int}
    opts = _resolve(args, TRAIN_DEFAULTS, types)
    if opts["mode"] == "bot" and opts["timestamps"] is None:
        raise UsageError("--mode bot requires --timestamps")
    if opts["mode"] == "lda" and opts["timestamps"] is not None:
        raise UsageError("--timestamps is only used with --mode bot")
    if opts["p"] is None and os.environ.get(THREADS_ENV):
        opts["p"] = os.environ[THREADS_ENV]
    num_parts = None if opts["p"] in (None, "") else _p_list(opts["p"])
    if num_parts is not None and len(num_parts) != 1:
        raise UsageError("train takes a single --p")
    num_parts = None if num_parts is None else num_parts[0]
    if opts["algo"] not in ALGORITHMS:
        raise UsageError(f"unknown algorithm {opts['algo']!r}")
    try:
        config = ModelConfig(opts["topics"], opts["alpha"], opts["beta"], opts["gamma"], opts["iterations"],
                             opts["seed"], opts["mode"])
    except ValueError as e:
        raise UsageError(str(e)) from None

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    t = time.perf_counter()
    corpus = _load_corpus(args.data, opts["vocab"])
    timestamps = None
    if opts["timestamps"] is not None:
        if not Path(opts["timestamps"]).is_file():
            raise FileNotFoundError(f"no such file: {opts['timestamps']}")
        timestamps = read_timestamps(opts["timestamps"], corpus, opts["ts_length"])
    timings["load"] = time.perf_counter() - t

    partitioning = bot_partitioning = None
    eta = bot_eta = None
    if num_parts is not None:
        t = time.perf_counter()
        pconf = PartitionerConfig(num_parts, opts["repeats"], opts["seed"])
        partitioning, rep = partition(build_workload(corpus), opts["algo"], pconf)
        eta = rep.eta
        if timestamps is not None:
            bot_partitioning, brep = partition(build_bot_workload(timestamps, corpus.doc_count), opts["algo"],
                                               pconf, row_partitioning=partitioning)
            bot_eta = brep.eta
        timings["partition"] = time.perf_counter() - t

    result = train(corpus, config, timestamps, partitioning, bot_partitioning, workers=num_parts,
                   eval_every=opts["eval_every"])
    timings.update(result.timings)

    t = time.perf_counter()
    with open(out / "trace.csv", "w") as fh:
        fh.write("iteration,perplexity\n")
        for it, perp in result.trace:
            fh.write(f"{it},{perp!r}\n")
    state = result.state
    write_counts(out / COUNT_FILES["doc_topic"], "doc_topic", state.doc_topic)
    write_counts(out / COUNT_FILES["topic_word"], "topic_word", state.topic_word)
    if state.bot:
        write_counts(out / COUNT_FILES["topic_timestamp"], "topic_timestamp", state.topic_timestamp)
    timings["write"] = time.perf_counter() - t

    write_manifest(out / "manifest.txt", {
        "command": "train", "version": __version__, "data": args.data, **opts,
        "p": "" if num_parts is None else num_parts,
        "data_sha256": file_digest(args.data), "vocab_sha256": file_digest(opts["vocab"]),
        "timestamps_sha256": file_digest(opts["timestamps"]),
        "timestamp_values": "" if timestamps is None else " ".join(map(str, timestamps.raw_values)),
        "eta": "" if eta is None else repr(eta), "bot_eta": "" if bot_eta is None else repr(bot_eta),
        "final_perplexity": repr(result.trace[-1][1]),
        **{f"time_{k}_s": round(v, 6) for k, v in timings.items()},
    })
    print(f"{out}: final perplexity {result.trace[-1][1]:.4f} after {config.iterations} iterations")
    return 0


# -- report ----------------------------------------------------------------

def _smoothed(counts: np.ndarray, prior: float) -> np.ndarray:
    c = counts.astype(np.float64) + prior
    return c / c.sum(axis=1, keepdims=True)


def cmd_report(args: argparse.Namespace) -> int:
    run = Path(args.run)
    manifest_path = run / "manifest.txt"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no manifest in {run}: {manifest_path}")
    manifest = read_manifest(manifest_path)
    tw_path = run / COUNT_FILES["topic_word"]
    if not tw_path.is_file():
        raise FileNotFoundError(f"missing count dump: {tw_path}")
    phi = _smoothed(read_counts(tw_path, "topic_word"), float(manifest["beta"]))
    vocab = None
    vocab_path = args.vocab or manifest.get("vocab") or None
    if vocab_path and Path(vocab_path).is_file():
        with open(vocab_path) as fh:
            vocab = [line.rstrip("\r\n") for line in fh]
    estimates = TopicEstimates(np.empty((0, phi.shape[0])), phi)

    pi = None
    if manifest.get("mode") == "bot":
        ts_path = run / COUNT_FILES["topic_timestamp"]
        if not ts_path.is_file():
            raise FileNotFoundError(f"missing count dump: {ts_path}")
        pi = _smoothed(read_counts(ts_path, "topic_timestamp"), float(manifest["gamma"]))
        labels = manifest.get("timestamp_values", "").split() or [str(t) for t in range(pi.shape[1])]

    out = sys.stdout
    for k in range(phi.shape[0]):
        words = top_words(estimates, k, args.top)
        shown = ", ".join(f"{vocab[w] if vocab and w < len(vocab) else w}:{p:.4f}" for w, p in words)
        out.write(f"topic {k}: {shown}\n")
        if pi is not None:
            out.write(f"  timeline {k}: " + " ".join(f"{lab}:{v:.4f}" for lab, v in zip(labels, pi[k])) + "\n")

    trace_path = run / "trace.csv"
    if trace_path.is_file():
        trace = np.loadtxt(trace_path, delimiter=",", skiprows=1, ndmin=2)
        out.write(f"perplexity: initial {trace[0, 1]:.4f}  final {trace[-1, 1]:.4f}  "
                  f"min {trace[:, 1].min():.4f} over {int(trace[-1, 0])} iterations\n")
    return 0


# -- synth -----------------------------------------------------------------

def cmd_synth(args: argparse.Namespace) -> int:
    corpus = generate_synthetic(args.docs, args.vocab_size, args.mean_len, args.zipf, args.seed)
    with open(args.out, "w") as fh:
        write_uci_bow(corpus, fh)
    if args.years_out:
        years = generate_years(corpus.doc_count, args.first_year, args.last_year, args.seed)
        with open(args.years_out, "w") as fh:
            write_timestamps(years, fh)
    print(f"{args.out}: {corpus!r}")
    return 0


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="partlda", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="sweep partitioning algorithms and print eta as CSV")
    p.add_argument("--data", help="UCI docword file (optionally .gz)")
    p.add_argument("--vocab")
    p.add_argument("--algo", help="baseline, a1, a2, a3, a comma list, or 'all' (default)")
    p.add_argument("--p", action="append", help="number of processes; repeatable or comma separated")
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--partition-out", help="write group ids; may contain {algo} and {P}")
    p.add_argument("--manifest", help="reuse parameters from a manifest")
    p.add_argument("--manifest-out")
    p.set_defaults(func=cmd_partition)

    t = sub.add_parser("train", help="train LDA or BoT, sequentially or partition-parallel")
    t.add_argument("--data")
    t.add_argument("--vocab")
    t.add_argument("--timestamps", help="docID<TAB>year file (BoT)")
    t.add_argument("--mode", choices=("lda", "bot"))
    t.add_argument("--topics", "-K", type=int)
    t.add_argument("--alpha", type=float)
    t.add_argument("--beta", type=float)
    t.add_argument("--gamma", type=float)
    t.add_argument("--ts-length", "--L", dest="ts_length", type=int, help="timestamp array length (default 16)")
    t.add_argument("--iterations", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--algo", choices=ALGORITHMS)
    t.add_argument("--p", help=f"parallel processes (default: ${THREADS_ENV}, else sequential)")
    t.add_argument("--repeats", type=int)
    t.add_argument("--eval-every", type=int)
    t.add_argument("--manifest")
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("report", help="top words, BoT timelines and perplexity summary of a run")
    r.add_argument("--run", required=True, help="output directory of 'train'")
    r.add_argument("--top", type=int, default=10)
    r.add_argument("--vocab")
    r.set_defaults(func=cmd_report)

    s = sub.add_parser("synth", help="write a synthetic Zipfian corpus in UCI format")
    s.add_argument("--docs", type=int, default=500)
    s.add_argument("--vocab-size", type=int, default=1000)
    s.add_argument("--mean-len", type=int, default=50)
    s.add_argument("--zipf", type=float, default=1.1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--years-out")
    s.add_argument("--first-year", type=int, default=1951)
    s.add_argument("--last-year", type=int, default=2010)
    s.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"partlda: error: {e}", file=sys.stderr)
        return 2
    except (OSError, CorpusError, ValueError) as e:
        print(f"partlda: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
