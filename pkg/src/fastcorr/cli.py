"""fastcorr command line: synth, apply, stream, classify, bench."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import bench_sweep, rows_to_csv
from .classify import classify_signal
from .cost import CostPolicy
from .errors import InputError, InvariantError
from .execute import evaluate_plan, verify_equivalence
from .files import atomic_write, read_matrix_csv, read_signal, read_vector
from .plan import plan_cost, plan_from_json, plan_to_json, synthesize_plan
from .quantize import QuantizedMatrix, normalize_rows
from .stream import StreamState

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    # usage mistakes are input errors, not internal ones
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _threshold(text: str) -> float:
    v = float(text)
    if not -1.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"threshold must lie in [-1, 1], got {v}")
    return v


def _non_negative(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {v}")
    return v


def parse_sizes(text: str) -> list[tuple[int, int]]:
    sizes = []
    for item in text.split(","):
        item = item.strip().replace("×", "x").replace("X", "x")
        try:
            k, m = (int(p) for p in item.split("x"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad size {item!r}; expected KxM") from None
        if k < 1 or m < 1:
            raise argparse.ArgumentTypeError(f"bad size {item!r}; K and m must be >= 1")
        sizes.append((k, m))
    return sizes


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("digit counts must be >= 0")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fastcorr", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def policy_flags(sp):
        sp.add_argument("--count-shifts-as-mults", action="store_true",
                        help="fold shift counts into multiply counts")
        sp.add_argument("--cse-passes", type=_non_negative, default=64)

    s = sub.add_parser("synth", help="matrix CSV -> plan JSON")
    s.add_argument("--matrix", required=True)
    s.add_argument("--out", default="-")
    s.add_argument("--base", type=int, choices=(2, 10), default=10)
    s.add_argument("--digits", type=_non_negative, required=True)
    s.add_argument("--no-normalize", action="store_true", help="quantize rows as given")
    s.add_argument("--verify-trials", type=_non_negative, default=20)
    s.add_argument("--seed", type=int, default=0)
    policy_flags(s)

    a = sub.add_parser("apply", help="plan + one vector -> correlation vector CSV")
    a.add_argument("--plan", required=True)
    a.add_argument("--vector", "--signal", dest="vector", required=True)
    a.add_argument("--format", choices=("csv", "f64"), default="csv")
    a.add_argument("--out", default="-")

    st = sub.add_parser("stream", help="plan + signal -> per-window correlations")
    st.add_argument("--plan", required=True)
    st.add_argument("--signal", required=True)
    st.add_argument("--format", choices=("csv", "f64"), default="csv")
    st.add_argument("--out", default="-")
    st.add_argument("--normalized", action="store_true",
                    help="emit normalized correlations instead of raw products")
    st.add_argument("--report", choices=("windows", "summary", "both"), default="windows")

    c = sub.add_parser("classify", help="plan + signal -> detected events CSV")
    c.add_argument("--plan", required=True)
    c.add_argument("--signal", required=True)
    c.add_argument("--format", choices=("csv", "f64"), default="csv")
    c.add_argument("--threshold", type=_threshold, required=True)
    c.add_argument("--refractory", type=_non_negative, default=None,
                   help="steps to suppress after an event (default: window length)")
    c.add_argument("--out", default="-")
    c.add_argument("--log", action="store_true", help="human-readable event log on stderr")

    b = sub.add_parser("bench", help="operation-count sweep -> CSV")
    b.add_argument("--sizes", type=parse_sizes, required=True)
    b.add_argument("--digits", type=_int_list, default=[1])
    b.add_argument("--base", type=int, choices=(2, 10), default=10)
    b.add_argument("--trials", type=_non_negative, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--signal-length", type=_non_negative, default=128)
    b.add_argument("--workers", type=_non_negative, default=1)
    b.add_argument("--out", default="-")
    policy_flags(b)
    return p


def _policy(args) -> CostPolicy:
    return CostPolicy(args.count_shifts_as_mults, args.cse_passes)


def _load_plan(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc})") from exc
    try:
        return plan_from_json(text)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _fmt(v) -> str:
    return repr(float(v))


def cmd_synth(args) -> int:
    rows = read_matrix_csv(args.matrix)
    real = [[float(v) for v in row] for row in rows]
    if args.no_normalize:
        matrix = QuantizedMatrix.from_real(rows, args.digits, args.base)
    else:
        matrix = QuantizedMatrix.from_real(normalize_rows(real).tolist(), args.digits, args.base)
    policy = _policy(args)
    plan = synthesize_plan(matrix, policy)
    report = verify_equivalence(plan, matrix, args.verify_trials, args.seed)
    if not report.passed:
        raise InvariantError(f"synthesized plan disagrees with direct product: {report}")
    atomic_write(args.out, plan_to_json(plan, policy))
    tally = plan_cost(plan, policy)
    stream = sys.stderr if args.out == "-" else sys.stdout
    print(f"K={plan.K} m={plan.m} base={plan.base} D={plan.digits} "
          f"multiplies={tally.multiplies} adds={tally.adds} shifts={tally.shifts} "
          f"direct_multiplies={plan.K * plan.m} direct_adds={plan.K * (plan.m - 1)}", file=stream)
    return EXIT_OK


def _window_header(K: int) -> str:
    return ",".join(["step"] + [f"c_{k + 1}" for k in range(K)]) + "\n"


def cmd_apply(args) -> int:
    plan = _load_plan(args.plan)
    x = read_vector(args.vector, args.format)
    if len(x) != plan.m:
        raise InputError(f"{args.vector}: vector has {len(x)} values, plan expects {plan.m}")
    res = evaluate_plan(plan, x)
    line = ",".join([str(plan.m - 1)] + [_fmt(v) for v in res.values]) + "\n"
    atomic_write(args.out, _window_header(plan.K) + line)
    return EXIT_OK


def _summary_text(summary) -> str:
    steady = summary.steady_per_step
    overall = summary.per_step
    lines = [
        f"windows={summary.windows}",
        f"warmup_windows={summary.warmup_windows}",
        f"first_window_mults={summary.first_window.multiplies}",
        f"first_window_adds={summary.first_window.adds}",
        f"mults_per_step={overall['multiplies']!r}",
        f"adds_per_step={overall['adds']!r}",
        f"shifts_per_step={overall['shifts']!r}",
        f"cache_hits_per_step={overall['cache_hits']!r}",
        f"steady_mults_per_step={steady['multiplies']!r}",
        f"steady_adds_per_step={steady['adds']!r}",
        f"steady_cache_hit_rate={summary.steady_cache_hit_rate!r}",
        f"normalization_mults={summary.normalization.multiplies}",
        f"normalization_adds={summary.normalization.adds}",
        f"normalization_divisions={summary.normalization.divisions}",
    ]
    return "\n".join(lines) + "\n"


def cmd_stream(args) -> int:
    plan = _load_plan(args.plan)
    signal = read_signal(args.signal, args.format)
    state = StreamState(plan)
    parts = [_window_header(plan.K)] if args.report != "summary" else []
    for out in state.extend(signal):
        if args.report == "summary":
            continue
        if args.normalized:
            vals = out.correlations if out.correlations is not None else [float("nan")] * plan.K
        else:
            vals = out.values
        parts.append(",".join([str(out.step)] + [_fmt(v) for v in vals]) + "\n")
    if state.samples_seen < plan.m:
        raise InputError(f"{args.signal}: signal has {state.samples_seen} samples, window needs {plan.m}")
    summary = _summary_text(state.summary())
    if args.report == "summary":
        atomic_write(args.out, summary)
    else:
        atomic_write(args.out, "".join(parts))
        if args.report == "both":
            sys.stderr.write(summary)
    return EXIT_OK


def cmd_classify(args) -> int:
    plan = _load_plan(args.plan)
    signal = read_signal(args.signal, args.format)
    events = classify_signal(plan, signal, args.threshold, args.refractory)
    lines = ["step,template,correlation,distance\n"]
    for e in events:
        lines.append(f"{e.step},{e.template},{_fmt(e.correlation)},{_fmt(e.distance)}\n")
        if args.log:
            print(f"step {e.step}: template {e.template} (c={e.correlation:.6f}, d={e.distance:.6f})",
                  file=sys.stderr)
    atomic_write(args.out, "".join(lines))
    return EXIT_OK


def cmd_bench(args) -> int:
    rows = bench_sweep(args.sizes, args.digits, args.trials, args.seed, args.base,
                       args.signal_length, _policy(args), args.workers)
    atomic_write(args.out, rows_to_csv(rows))
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "apply": cmd_apply, "stream": cmd_stream,
            "classify": cmd_classify, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"fastcorr: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InvariantError as exc:
        print(f"fastcorr: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
