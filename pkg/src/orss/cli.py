"""Command-line entry point: ``orss {generate,sample,verify,bench}``.

Exit codes: 0 ok / certificate passed, 1 certificate failed, 2 usage or
input error. Machine-readable output goes to stdout (one JSON line, or CSV
for ``bench``); human summaries go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation
from .samplers import ALGORITHMS, make_sampler, run_sampler
from .streams import (
    GraphStreamSpec,
    RowWriter,
    gen_doubling_cliques,
    gen_gaussian,
    permute_stream,
    read_rows,
    read_weighted_rows,
    write_rows,
)
from .verify import bss_count_comparator, certify

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
GENERATORS = ("gaussian", "cliques", "permute")
BENCH_FIELDS = ("seed", "algorithm", "kept", "passed", "sum_scores", "bound")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    algorithm: str = "online"
    eps: float = 0.5
    delta: float = 0.1
    seed: int = 0
    input: str | None = None
    output: str | None = None
    kept: str | None = None
    batch_size: int | None = None
    sketch_dim: int | None = None
    trials: int = 1
    generator: str | None = None
    n: int | None = None
    d: int | None = None
    N: int | None = None
    fmt: str | None = None

    def validate(self) -> None:
        if self.command == "generate":
            if not (self.eps > 0 and self.delta > 0):
                raise UsageError("--eps and --delta must be positive")
        elif not 0 < self.eps < 1:
            raise UsageError(f"--eps must lie in (0, 1), got {self.eps}")
        if not self.delta > 0:
            raise UsageError(f"--delta must be positive, got {self.delta}")
        if self.trials < 1:
            raise UsageError(f"--trials must be >= 1, got {self.trials}")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _need(value, flag: str):
    if value is None:
        raise UsageError(f"missing required option {flag}")
    return value


def _generated_stream(cfg: RunConfig):
    gen = _need(cfg.generator, "--gen")
    if gen == "gaussian":
        n, d = _need(cfg.n, "--n"), _need(cfg.d, "--d")
        if n < 0 or d < 1:
            raise UsageError("gaussian generator needs --n >= 0 and --d >= 1")
        return gen_gaussian(n, d, cfg.seed)
    if gen == "cliques":
        spec = GraphStreamSpec.for_accuracy(
            _need(cfg.d, "--d"), _need(cfg.N, "--N"), cfg.eps, cfg.delta
        )
        try:
            return gen_doubling_cliques(spec)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if gen == "permute":
        return permute_stream(read_rows(_need(cfg.input, "--in"), cfg.fmt), cfg.seed)
    raise UsageError(f"unknown generator {gen!r}")


def _input_stream(cfg: RunConfig):
    if cfg.generator is not None:
        return _generated_stream(cfg)
    return read_rows(_need(cfg.input, "--in or --gen"), cfg.fmt)


def cmd_generate(cfg: RunConfig) -> int:
    stream = _generated_stream(cfg)
    count = write_rows(_need(cfg.output, "--out"), stream, fmt=cfg.fmt)
    _log(f"wrote {count} rows of dimension {stream.d} to {cfg.output}")
    return EXIT_OK


def cmd_sample(cfg: RunConfig) -> int:
    stream = _input_stream(cfg)
    out_path = cfg.output
    writer = RowWriter(out_path, stream.d, fmt=cfg.fmt, weighted=True) if out_path else None
    sink = writer.write if writer else (lambda row, w: None)
    try:
        if cfg.algorithm == "offline" or cfg.batch_size is not None:
            stats = run_sampler(
                cfg.algorithm, stream, cfg.eps, cfg.delta, seed=cfg.seed,
                batch_size=cfg.batch_size, sketch_dim=cfg.sketch_dim, sink=sink,
            ).stats
        else:
            sampler = make_sampler(cfg.algorithm, stream.d, cfg.eps, cfg.delta, seed=cfg.seed, sink=sink)
            for row in stream:
                sampler.step(row)
            stats = sampler.finish()
    finally:
        if writer:
            writer.close()
    print(json.dumps(stats.as_dict()))
    _log(f"{cfg.algorithm}: kept {stats.kept} of {stats.n} rows (d={stats.d}) in {stats.seconds:.3f}s")
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    a = read_rows(_need(cfg.input, "--in"), cfg.fmt).to_array()
    kept, _ = read_weighted_rows(_need(cfg.kept, "--kept"), cfg.fmt)
    cert = certify(a, kept, cfg.eps, cfg.delta)
    print(json.dumps(cert.as_dict()))
    verdict = "PASS" if cert.passed else "FAIL"
    _log(f"{verdict}: eigenvalues in [{cert.min_eig:.6f}, {cert.max_eig:.6f}], "
         f"target [{1 - cfg.eps:g}, {1 + cfg.eps:g}]")
    return EXIT_OK if cert.passed else EXIT_FAIL


def _bench_trial(args) -> dict:
    algorithm, a, eps, delta, seed, batch_size, sketch_dim = args
    run = run_sampler(algorithm, a, eps, delta, seed=seed, batch_size=batch_size, sketch_dim=sketch_dim)
    cert = certify(a, run.rows, eps, delta)
    return {
        "seed": seed,
        "algorithm": algorithm,
        "kept": run.stats.kept,
        "passed": int(cert.passed),
        "sum_scores": run.stats.sum_scores,
        "bound": cert.bound_rows,
    }


def bench_threads() -> int:
    try:
        return max(1, int(os.environ.get("ORSS_THREADS", "1")))
    except ValueError:
        return 1


def cmd_bench(cfg: RunConfig) -> int:
    a = _input_stream(cfg).to_array()
    if a.shape[0] == 0:
        raise UsageError("bench needs a non-empty input stream")
    jobs = [
        (cfg.algorithm, a, cfg.eps, cfg.delta, cfg.seed + t, cfg.batch_size, cfg.sketch_dim)
        for t in range(cfg.trials)
    ]
    workers = min(bench_threads(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_trial, jobs))
    else:
        rows = [_bench_trial(job) for job in jobs]
    if cfg.algorithm == "bss":
        comparator = bss_count_comparator(a, cfg.eps, cfg.delta)
        for r in rows:
            r["bound"] = comparator

    fh = open(cfg.output, "w", newline="") if cfg.output else sys.stdout
    try:
        writer = csv.DictWriter(fh, fieldnames=BENCH_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if cfg.output:
            fh.close()
    passed = sum(r["passed"] for r in rows)
    mean = np.mean([r["kept"] for r in rows])
    _log(f"{cfg.algorithm}: {passed}/{len(rows)} certified, mean kept {mean:.1f}")
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "sample": cmd_sample,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orss", description="Online row sampling experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--eps", type=float, default=0.5)
    common.add_argument("--delta", type=float, default=0.1)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--in", dest="input")
    common.add_argument("--out", dest="output")
    common.add_argument("--format", dest="fmt", choices=("text", "csv", "bin"),
                        help="row file format (default: by extension, .bin is binary)")

    gen = argparse.ArgumentParser(add_help=False)
    gen.add_argument("--gen", dest="generator", choices=GENERATORS)
    gen.add_argument("--n", type=int)
    gen.add_argument("--d", type=int)
    gen.add_argument("--N", type=int, help="number of complete-graph copies")

    algo = argparse.ArgumentParser(add_help=False)
    algo.add_argument("--algo", dest="algorithm", choices=ALGORITHMS, default="online")
    algo.add_argument("--batch", dest="batch_size", type=int)
    algo.add_argument("--sketch-dim", dest="sketch_dim", type=int)

    sub.add_parser("generate", parents=[common, gen], help="write a row stream file")
    sub.add_parser("sample", parents=[common, gen, algo], help="sample a stream online")
    p = sub.add_parser("verify", parents=[common], help="certify a kept-row file")
    p.add_argument("--kept", required=True, help="kept-row file written by 'sample'")
    p = sub.add_parser("bench", parents=[common, gen, algo], help="repeat sampling over seeds, CSV out")
    p.add_argument("--trials", type=int, default=1)
    return parser


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(**vars(ns))
    try:
        cfg.validate()
        return COMMANDS[cfg.command](cfg)
    except (UsageError, OSError, ValueError) as exc:
        _log(f"orss {cfg.command}: error: {exc}")
        return EXIT_USAGE
    except InvariantViolation as exc:
        _log(f"orss {cfg.command}: internal invariant violated: {exc}")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
