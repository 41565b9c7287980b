"""Command-line front end: ``solve``, ``generate`` and ``bench``.

Exit codes: 0 success, 1 usage error, 2 I/O or input-file error, 3 instance
not supported by the requested engine.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import BENCH_MODES, REFERENCE_MODES, run_bench, solve, warmup, write_speedups
from .errors import ConfigError, ParseError, UnsupportedInstanceError
from .instance_io import GeneratorSpec, generate_taixxa, read_qaplib, write_qaplib
from .parallel import BACKENDS, default_workers

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_UNSUPPORTED = 3

SOLVE_MODES = ("scratch", "delta", "delta-seq", "delta-par", "auto")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    try:
        value = int(float(text)) if "e" in text.lower() else int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _int_list(text: str) -> list[int]:
    return [_positive(t) for t in text.split(",") if t]


def _seed_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def _gen_spec(text: str) -> GeneratorSpec:
    """Parse ``n=50,seed=1[,max=100]``."""
    fields = {}
    for part in text.split(","):
        key, sep, value = part.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected key=value, got {part!r}")
        fields[key.strip()] = value.strip()
    unknown = set(fields) - {"n", "seed", "max", "max_value"}
    if unknown or "n" not in fields:
        raise argparse.ArgumentTypeError(f"--gen takes n=..,seed=..,max=.. (got {text!r})")
    try:
        return GeneratorSpec(
            n=int(fields["n"]),
            seed=int(fields.get("seed", 0)),
            max_value=int(fields.get("max", fields.get("max_value", 100))),
        )
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _mode_list(text: str, workers: int) -> list[tuple[str, int]]:
    """``delta-seq,delta-par:4,scratch`` -> [(mode, workers), ...]."""
    out = []
    for item in text.split(","):
        mode, _, w = item.partition(":")
        if mode not in BENCH_MODES:
            raise UsageError(f"unknown bench mode {mode!r}; choose from {BENCH_MODES}")
        if w and mode != "delta-par":
            raise UsageError(f"only delta-par takes a worker count, got {item!r}")
        try:
            out.append((mode, int(w) if w else (workers if mode == "delta-par" else 1)))
        except ValueError:
            raise UsageError(f"bad worker count in {item!r}") from None
        if out[-1][1] < 1:
            raise UsageError(f"worker count must be >= 1 in {item!r}")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qap-anneal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="anneal one instance and print a JSON report")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--instance", type=Path, help="QAPLIB file")
    src.add_argument("--gen", type=_gen_spec, metavar="n=N,seed=S[,max=M]")
    p.add_argument("--iters", type=_positive, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=SOLVE_MODES, default="delta-seq")
    p.add_argument("--workers", type=_positive, default=None)
    p.add_argument("--backend", choices=BACKENDS, default="forkjoin")
    p.add_argument("--t0", type=float, default=None)
    p.add_argument("--tf", type=float, default=None)

    g = sub.add_parser("generate", help="write a random symmetric instance in QAPLIB format")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--max-value", type=_positive, default=100)
    g.add_argument("-o", "--output", type=Path, required=True)

    b = sub.add_parser("bench", help="run an experiment grid and emit CSV")
    b.add_argument("--sizes", type=_int_list, required=True, help="e.g. 50,100")
    b.add_argument("--iters", type=_int_list, required=True, help="e.g. 1e3,1e4,1e5")
    b.add_argument("--seeds", type=_seed_list, default=[1])
    b.add_argument("--modes", default="delta-seq,delta-par",
                   help="comma list of scratch, delta-seq, delta-par[:W]")
    b.add_argument("--workers", type=_positive, default=None,
                   help="default W for delta-par entries without :W")
    b.add_argument("--reference", choices=REFERENCE_MODES, default="delta-seq")
    b.add_argument("--instance-seed", type=int, default=0)
    b.add_argument("--max-value", type=_positive, default=100)
    b.add_argument("--jobs", type=_positive, default=1, help="run cells in this many processes")
    b.add_argument("-o", "--out", type=Path, default=None, help="CSV path (default stdout)")
    b.add_argument("--speedup-out", type=Path, default=None,
                   help="speedup CSV path (default <out>_speedup.csv, or stdout after the data)")
    return parser


def cmd_solve(args) -> int:
    workers = args.workers or default_workers()
    if args.instance is not None:
        try:
            instance = read_qaplib(args.instance)
        except OSError as exc:
            print(f"error: cannot read {args.instance}: {exc.strerror or exc}", file=sys.stderr)
            return EXIT_IO
        except ParseError as exc:
            print(f"error: {args.instance}: {exc}", file=sys.stderr)
            return EXIT_IO
    else:
        instance = generate_taixxa(args.gen)
    mode = "delta-seq" if args.mode == "delta" else args.mode
    kw = {"t0": args.t0, "tf": args.tf}
    if mode == "delta-par":
        kw["backend"] = args.backend
    warmup()
    try:
        stats = solve(instance, args.iters, args.seed, mode, workers, **kw)
    except UnsupportedInstanceError as exc:
        print(f"error: {exc} (instance is symmetric={instance.symmetric}, "
              f"zero_diagonal={instance.zero_diagonal})", file=sys.stderr)
        return EXIT_UNSUPPORTED
    report = {
        "n": instance.n,
        "iters": args.iters,
        "mode": mode,
        "workers": workers if mode == "delta-par" else 1,
        "best_cost": stats.best_cost,
        "best_perm": stats.best_perm.tolist(),
        "acceptance_rate": stats.acceptance_rate,
        "wall_time": stats.wall_time,
    }
    print(json.dumps(report))
    return 0


def cmd_generate(args) -> int:
    if args.n < 2:
        raise UsageError(f"--n must be at least 2, got {args.n}")
    instance = generate_taixxa(GeneratorSpec(args.n, args.seed, args.max_value))
    try:
        args.output.write_text(write_qaplib(instance))
    except OSError as exc:
        print(f"error: cannot write {args.output}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    print(args.output)
    return 0


def cmd_bench(args) -> int:
    workers = args.workers or default_workers()
    modes = _mode_list(args.modes, workers)
    if args.reference not in {m for m, _ in modes}:
        modes.insert(0, (args.reference, 1))
    grid = dict(
        sizes=args.sizes, iters_grid=args.iters, modes=modes, seeds=args.seeds,
        reference=args.reference, instance_seed=args.instance_seed,
        max_value=args.max_value, jobs=args.jobs,
    )
    if args.out is None:
        if args.speedup_out is not None:
            try:
                with open(args.speedup_out, "w", newline="") as sp:
                    run_bench(out=sys.stdout, speedup_out=sp, **grid)
            except OSError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_IO
            return 0
        _, ups = run_bench(out=sys.stdout, **grid)
        sys.stdout.write("\n")
        write_speedups(ups, sys.stdout)
        return 0
    speedup_path = args.speedup_out or args.out.with_name(args.out.stem + "_speedup.csv")
    try:
        with open(args.out, "w", newline="") as out, open(speedup_path, "w", newline="") as sp:
            run_bench(out=out, speedup_out=sp, **grid)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print(args.out)
    print(speedup_path)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {"solve": cmd_solve, "generate": cmd_generate, "bench": cmd_bench}[args.command]
    try:
        return handler(args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"qap-anneal: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
