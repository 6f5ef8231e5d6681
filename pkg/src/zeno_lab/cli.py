"""``zeno-lab`` command-line interface.

Exit codes: 0 success, 1 numerical failure, 2 usage error (bad flags,
unknown model or parameter, malformed config, unwritable output).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import classify as cls
from . import core, dfs, pulsed
from .errors import ModelError, ZenoLabError
from .linalg import herm_eig
from .models import CATALOGUE, MODEL_NAMES, ModelSpec, build_model, excitation_sectors

PROG = "zeno-lab"


class UsageError(Exception):
    """Raised for problems the user must fix on the command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# parsing helpers


def _float_list(text):
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _int_list(text):
    values = _float_list(text)
    if any(v != int(v) for v in values):
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}")
    return [int(v) for v in values]


def _window(text):
    values = _float_list(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError("window must be 'lo,hi'")
    return tuple(values)


def read_config(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    entries = []
    for number, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise UsageError(f"{path}:{number}: expected 'key = value', got {raw!r}")
        entries.append((key, value))
    return entries


def _common(parser):
    g = parser.add_argument_group("common options")
    g.add_argument("--model", help="catalogue model name (see 'zeno-lab models')")
    g.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="model parameter (repeatable)")
    g.add_argument("--config", help="file of 'key = value' lines; explicit flags take precedence")
    g.add_argument("--out", help="output file (default: standard output)")
    g.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    g.add_argument("--jobs", type=int, help="worker threads for sweeps (env ZENO_LAB_JOBS)")
    g.add_argument("--emit-plot-script", metavar="PATH", help="also write a gnuplot script for the output")


def _grid(parser):
    parser.add_argument("--t-max", type=float, required=False, help="end of the time grid")
    parser.add_argument("--dt", type=float, default=0.01, help="grid spacing")
    parser.add_argument("--psi0", default="0", help="initial basis state (index or label)")


def build_parser():
    parser = _Parser(prog=PROG, description="Numerical laboratory for quantum Zeno dynamics.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    sub.add_parser("models", help="list catalogue models and their parameters")
    p = sub.add_parser("simulate", help="survival probability on a time grid")
    _common(p)
    _grid(p)
    p.add_argument("--protocol", choices=("continuous", "zeno_limit"), default="continuous")

    p = sub.add_parser("sweep-k", help="survival curves for several couplings K")
    _common(p)
    _grid(p)
    p.add_argument("--k-values", type=_float_list, required=False)

    p = sub.add_parser("pulsed", help="pulsed measurement protocols")
    _common(p)
    p.add_argument("--psi0", default="0")
    p.add_argument("--t", type=float, default=1.0, help="total protocol time")
    p.add_argument("--n-values", type=_int_list, default=[1, 4, 16, 64, 256])
    p.add_argument("--protocol", choices=("selective", "nonselective"), default="selective")

    p = sub.add_parser("zeno-limit", help="distance between exact and Zeno-limit propagators")
    _common(p)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--k-values", type=_float_list, default=[25.0, 50.0, 100.0, 200.0])
    p.add_argument("--envelope", action="store_true", help="also report the sup over [0, t]")

    p = sub.add_parser("classify", help="QZE/IZE classification against the uncoupled evolution")
    _common(p)
    _grid(p)
    p.add_argument("--mode", choices=("intervals", "rates"), default="intervals")
    p.add_argument("--tol", type=float, default=None, help="inequality (intervals) or rate tolerance")
    p.add_argument("--window", type=_window, help="fit window 'lo,hi' for --mode rates")

    p = sub.add_parser("dfs", help="decoherence-free subspace of the cavity model")
    _common(p)
    p.add_argument("--imag-tol", type=float, default=1e-8)

    p = sub.add_parser("perturb", help="perturbative spectrum of H_meas + lam*H")
    _common(p)
    p.add_argument("--lam", type=float, default=0.01)
    p.add_argument("--order", type=int, choices=(1, 2), default=2)
    return parser


def _expand_config(parser, argv):
    """Insert config entries as flags ahead of the explicit ones (flags win)."""
    if not argv:
        return argv
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv[1:])
    if not known.config:
        return argv
    subparser = None
    for action in parser._subparsers._group_actions:
        subparser = action.choices.get(argv[0])
    if subparser is None:
        return argv
    injected = []
    for key, value in read_config(known.config):
        flag = "--" + key.replace("_", "-")
        if flag in ("--config", "--param"):
            raise UsageError(f"config key {key!r} is not allowed")
        if flag in subparser._option_string_actions:
            action = subparser._option_string_actions[flag]
            if action.nargs == 0:
                if value.lower() in ("1", "true", "yes"):
                    injected.append(flag)
                continue
            injected += [flag, value]
        else:
            injected += ["--param", f"{key}={value}"]
    return [argv[0]] + injected + list(argv[1:])


def _params(args):
    params = {}
    for item in args.param:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"--param expects KEY=VALUE, got {item!r}")
        params[key.strip().lower()] = value.strip()
    return params


def _model(args):
    if not args.model:
        raise UsageError(f"{args.command}: --model is required")
    if args.model not in CATALOGUE:
        raise UsageError(f"unknown model {args.model!r}; choose from {', '.join(MODEL_NAMES)}")
    try:
        return build_model(ModelSpec(args.model, _params(args)))
    except ModelError as exc:
        raise UsageError(str(exc)) from None


def _state(pair, which):
    try:
        index = int(which)
    except ValueError:
        label = which if which.startswith("|") else f"|{which}>"
        if label not in pair.basis_labels:
            raise UsageError(f"unknown basis state {which!r} for model {pair.name}") from None
        index = pair.basis_labels.index(label)
    if not 0 <= index < pair.dim:
        raise UsageError(f"basis index {index} out of range for model {pair.name} (dim {pair.dim})")
    return pair.basis_state(index)


def _times(args):
    if args.t_max is None:
        raise UsageError(f"{args.command}: --t-max is required")
    if not args.t_max > 0 or not args.dt > 0:
        raise UsageError("--t-max and --dt must be positive")
    n = int(math.floor(args.t_max / args.dt + 1e-9))
    return args.dt * np.arange(n + 1)


def _jobs(args):
    if args.jobs is not None:
        if args.jobs < 1:
            raise UsageError("--jobs must be positive")
        return args.jobs
    env = os.environ.get("ZENO_LAB_JOBS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise UsageError(f"ZENO_LAB_JOBS must be an integer, got {env!r}") from None
        if value < 1:
            raise UsageError("ZENO_LAB_JOBS must be positive")
        return value
    return os.cpu_count() or 1


def _parallel_map(fn, items, jobs):
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _increasing(values, flag):
    if any(v <= 0 for v in values) or any(b <= a for a, b in zip(values, values[1:])):
        raise UsageError(f"{flag} values must be positive and increasing")


# ---------------------------------------------------------------------------
# output


def _fmt(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.17g}"


class Table:
    """Rows plus header metadata, written as CSV or json-lines."""

    def __init__(self, command, pair, options, columns):
        self.command = command
        self.pair = pair
        self.options = options
        self.columns = list(columns)
        self.rows = []

    def add(self, *values):
        self.rows.append(values)

    def _header_items(self):
        items = [("command", self.command)]
        if self.pair is not None:
            items.append(("model", self.pair.name))
            items += [(f"param.{k}", self.pair.params[k]) for k in sorted(self.pair.params)]
        items += [(k, self.options[k]) for k in sorted(self.options)]
        return items

    def render(self, fmt):
        out = []
        if fmt == "csv":
            for key, value in self._header_items():
                text = _fmt(value) if isinstance(value, (int, float, np.number)) else str(value)
                out.append(f"# {key} = {text}")
            out.append("# columns: " + ",".join(self.columns))
            for row in self.rows:
                out.append(",".join(_fmt(v) for v in row))
        else:
            header = {k: _json_value(v) for k, v in self._header_items()}
            header["columns"] = self.columns
            out.append(json.dumps({"header": header}, sort_keys=True))
            for row in self.rows:
                out.append(json.dumps({c: _json_value(v) for c, v in zip(self.columns, row)}))
        return "\n".join(out) + "\n"


def _json_value(v):
    if isinstance(v, (bool, str)):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return str(v)


def _open_output(path):
    if path is None:
        return None
    try:
        return open(path, "w", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise UsageError(f"cannot write output file {path}: {exc.strerror}") from None


def _plot_script(path, data_path, columns):
    source = data_path if data_path else "data.csv"
    lines = [
        "# gnuplot script generated by zeno-lab",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        f"set xlabel '{columns[0]}'",
        "set key outside",
    ]
    series = [f"'{source}' using 1:{i + 1} with lines title '{c}'" for i, c in enumerate(columns) if i > 0]
    lines.append("plot " + ", \\\n     ".join(series))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise UsageError(f"cannot write plot script {path}: {exc.strerror}") from None


def _emit(args, table, stream):
    text = table.render(args.format)
    if stream is None:
        sys.stdout.write(text)
    else:
        stream.write(text)
        stream.close()
    if args.emit_plot_script:
        _plot_script(args.emit_plot_script, args.out, table.columns)


# ---------------------------------------------------------------------------
# commands


def cmd_models(args):
    for name in MODEL_NAMES:
        entry = CATALOGUE[name]
        optional = ", ".join(f"{k}={_fmt(v)}" for k, v in entry.defaults.items())
        line = f"{name:22s} required: {', '.join(entry.required)}"
        if optional:
            line += f"; optional: {optional}"
        print(f"{line}  -- {entry.summary}")
    return 0


def _partition_or_none(pair):
    return core.spectral_partition(pair.H_meas) if pair.hermitian_meas else None


def _sector_columns(partition):
    return [f"p[eta={_fmt(round(eta, 12) + 0.0)}]" for eta in partition.etas]


def cmd_simulate(args, ctx):
    pair = ctx["pair"]
    times = _times(args)
    psi = _state(pair, args.psi0)
    partition = _partition_or_none(pair)
    ctx["op"] = "evolve"
    if args.protocol == "zeno_limit":
        if partition is None:
            raise UsageError("zeno_limit protocol needs a Hermitian H_meas")
        ctx["op"] = "zeno_hamiltonian"
        total = core.zeno_hamiltonian(pair, partition)
    else:
        total = pair.total()
    traj = core.evolve(total, psi, times, partition=partition)
    columns = ["t", "survival"] + (_sector_columns(partition) if partition else [])
    table = Table("simulate", pair, _options(args, "t_max", "dt", "psi0", "protocol"), columns)
    for i, t in enumerate(traj.times):
        extra = list(traj.subspace_probs[i]) if partition else []
        table.add(t, traj.survival[i], *extra)
    return table


def _options(args, *names):
    return {n: getattr(args, n) for n in names if getattr(args, n) is not None}


def cmd_sweep_k(args, ctx):
    pair = ctx["pair"]
    if not args.k_values:
        raise UsageError("sweep-k: --k-values is required")
    _increasing(args.k_values, "--k-values")
    times = _times(args)
    psi = _state(pair, args.psi0)
    ctx["op"] = "evolve"
    trajs = _parallel_map(lambda K: core.evolve(pair.total(K), psi, times), args.k_values, _jobs(args))
    opts = _options(args, "t_max", "dt", "psi0")
    opts["k_values"] = ",".join(_fmt(k) for k in args.k_values)
    table = Table("sweep-k", pair, opts, ["t"] + [f"survival[k={_fmt(k)}]" for k in args.k_values])
    for i, t in enumerate(times):
        table.add(t, *(tr.survival[i] for tr in trajs))
    return table


def cmd_pulsed(args, ctx):
    pair = ctx["pair"]
    if any(n < 1 for n in args.n_values):
        raise UsageError("--n-values must be positive integers")
    psi = _state(pair, args.psi0)
    opts = _options(args, "t", "psi0", "protocol")
    opts["n_values"] = ",".join(str(n) for n in args.n_values)
    jobs = _jobs(args)
    if args.protocol == "selective":
        ctx["op"] = "pulsed_selective"
        P = np.outer(psi, psi.conj())
        results = _parallel_map(lambda N: pulsed.pulsed_selective(pair.H, P, psi, N, args.t), args.n_values, jobs)
        table = Table("pulsed", pair, opts, ["t", "N", "tau", "survival", "gamma_eff"])
        for r in results:
            table.add(args.t, r.N, r.tau, r.survival, r.gamma_eff)
        return table
    ctx["op"] = "pulsed_nonselective"
    partition = _partition_or_none(pair)
    if partition is None:
        raise UsageError("nonselective protocol needs a Hermitian H_meas")
    rho0 = np.outer(psi, psi.conj())
    results = _parallel_map(
        lambda N: pulsed.pulsed_nonselective(pair.H, partition, rho0, N, args.t), args.n_values, jobs
    )
    columns = ["t", "N"] + _sector_columns(partition) + ["trace", "purity"]
    table = Table("pulsed", pair, opts, columns)
    for N, (rho, probs) in zip(args.n_values, results):
        table.add(args.t, N, *probs, np.real(np.trace(rho)), np.real(np.trace(rho @ rho)))
    return table


def cmd_zeno_limit(args, ctx):
    pair = ctx["pair"]
    _increasing(args.k_values, "--k-values")
    ctx["op"] = "spectral_partition"
    partition = core.spectral_partition(pair.H_meas)
    jobs = _jobs(args)

    def one(K):
        row = [
            core.zeno_limit_distance(pair, partition, [K], args.t)[0],
            core.intertwining_defect(pair, partition, [K], args.t)[0],
        ]
        if args.envelope:
            row.append(core.zeno_limit_envelope(pair, partition, [K], args.t)[0])
        return row

    ctx["op"] = "zeno_limit_distance"
    rows = _parallel_map(one, args.k_values, jobs)
    opts = _options(args, "t")
    opts["k_values"] = ",".join(_fmt(k) for k in args.k_values)
    columns = ["t", "K", "distance", "defect"] + (["envelope"] if args.envelope else [])
    table = Table("zeno-limit", pair, opts, columns)
    for K, row in zip(args.k_values, rows):
        table.add(args.t, K, *row)
    return table


def cmd_classify(args, ctx):
    pair = ctx["pair"]
    psi = _state(pair, args.psi0)
    if args.t_max is None and args.mode == "intervals":
        ctx["op"] = "poincare_time"
        args.t_max = cls.poincare_time(pair.H, psi)
        if not math.isfinite(args.t_max):
            raise UsageError("no recurrence in the uncoupled evolution; pass --t-max")
    times = _times(args)
    ctx["op"] = "evolve"
    p_K = core.evolve(pair.total(), psi, times)
    p_0 = core.evolve(pair.total(0.0), psi, times)
    opts = _options(args, "t_max", "dt", "psi0", "mode")
    if args.mode == "intervals":
        ctx["op"] = "classify_intervals"
        tp = cls.poincare_time(pair.H, psi)
        tp = min(tp, times[-1]) if math.isfinite(tp) else times[-1]
        result = cls.classify_intervals(p_K, p_0, args.tol if args.tol else 1e-9, poincare_time=tp)
        lines = [f"verdict: {result.verdict}", f"poincare_time: {_fmt(result.poincare_time)}"]
        lines += [f"interval: {_fmt(a)} {_fmt(b)} {k}" for a, b, k in result.intervals]
    else:
        if args.window is None:
            raise UsageError("classify --mode rates needs --window lo,hi")
        ctx["op"] = "fit_effective_rate"
        # a frozen state fits a slope of order -1e-6; rates are nonnegative
        gamma = max(0.0, cls.fit_effective_rate(p_0, args.window))
        gamma_eff = max(0.0, cls.fit_effective_rate(p_K, args.window))
        result = cls.rate_classification(gamma, gamma_eff, args.tol if args.tol else 0.05)
        lines = [f"verdict: {result.verdict}", f"gamma: {_fmt(gamma)}", f"gamma_eff: {_fmt(gamma_eff)}"]
    print("\n".join(lines))
    table = Table("classify", pair, opts, ["t", "survival_k", "survival_0"])
    for i, t in enumerate(times):
        table.add(t, p_K.survival[i], p_0.survival[i])
    ctx["print_table"] = False
    return table


def cmd_dfs(args, ctx):
    pair = ctx["pair"]
    if pair.name != "cavity":
        raise UsageError("dfs works on the cavity model")
    ctx["op"] = "dfs_report"
    report = dfs.dfs_report(pair, excitation_sectors(pair), args.imag_tol)
    lines = [f"dimension: {report.dimension}"]
    lines += [f"sector N={n}: kernel dimension {k}" for n, k in report.per_sector]
    lines += ["basis:"] + [f"  {label}" for label in report.labels]
    lines += [f"flagged: N={n} eta={_fmt(eta)} dim={d}" for n, eta, d in report.flagged]
    text = "\n".join(lines) + "\n"
    if args.out:
        stream = _open_output(args.out)
        stream.write(text)
        stream.close()
    else:
        sys.stdout.write(text)
    return None


def cmd_perturb(args, ctx):
    pair = ctx["pair"]
    ctx["op"] = "perturbative_spectrum"
    spec = core.perturbative_spectrum(pair, args.lam, args.order)
    ctx["op"] = "herm_eig"
    exact = herm_eig(pair.H_meas + args.lam * pair.H).eigenvalues
    predicted = spec.predicted
    order = np.argsort(predicted, kind="stable")
    columns = ["index", "eta", "eta1"] + (["eta2"] if args.order == 2 else []) + ["predicted", "exact", "error"]
    table = Table("perturb", pair, _options(args, "lam", "order"), columns)
    for rank, j in enumerate(order):
        terms = spec.eta_expansions[j]
        table.add(rank, *terms, predicted[j], exact[rank], abs(predicted[j] - exact[rank]))
    return table


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep-k": cmd_sweep_k,
    "pulsed": cmd_pulsed,
    "zeno-limit": cmd_zeno_limit,
    "classify": cmd_classify,
    "dfs": cmd_dfs,
    "perturb": cmd_perturb,
}


def run(argv=None) -> int:
    """Execute one command; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    ctx = {"op": "setup", "pair": None}
    try:
        argv = _expand_config(parser, argv)
        args = parser.parse_args(argv)
        if args.command == "models":
            return cmd_models(args)
        ctx["pair"] = _model(args)
        stream = _open_output(args.out) if args.command != "dfs" else None
        table = COMMANDS[args.command](args, ctx)
        if table is not None:
            if stream is None and ctx.get("print_table") is False:
                return 0
            _emit(args, table, stream)
        return 0
    except UsageError as exc:
        print(f"{PROG}: usage error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    except (ZenoLabError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        model = ctx["pair"].name if ctx["pair"] is not None else "?"
        print(f"{PROG}: error: {ctx['op']} failed for model {model}: {exc}", file=sys.stderr)
        return 1


def main(argv=None):
    sys.exit(run(argv))
