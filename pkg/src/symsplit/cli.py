"""Command-line front end: run experiments, emit figure and order tables.

Subcommands
    run     integrate one configuration and write a trace CSV
    figure  reproduce one of the five benchmark figures as CSV series
    order   measure convergence orders and write orders.csv
    sweep   run a scheme x tau grid concurrently, one trace per entry

Exit codes: 0 success, 1 configuration error, 2 implicit solve divergence
(the partial trace is kept, with a ``# truncated`` footer), 3 measured
order outside tolerance (``order`` command only).

All CSVs start with a ``#`` metadata block (scheme, tau, potential, code
version, config hash) and use 17-significant-digit floats, so identical
configurations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__, fastpath
from .hamiltonian import (
    Harmonic,
    MassMatrix,
    PhasePoint,
    Quadratic,
    Quartic,
    hamiltonian,
)
from .integrators import NewtonDiverged, SchemeConfig, integrate
from .verification import measure_convergence_order, measure_period, quartic_period

TRACE_COLUMNS = "step,time,{q},{p},H,scaledH,newton_iters,newton_residual"

# caption windows in units of the scheme's own measured period
FIGURE_WINDOWS = {
    1: (15.5, 16.0),
    2: (15.5, 16.0),
    3: (256.0, 256.5),
    4: (4103.5, 4104.0),
    5: (262717.5, 262718.0),
}
FIGURE_SCHEMES = {
    1: ["baseline_kmk", "corrected_kmk:4", "corrected_kmk:6", "corrected_kmk:8"],
    2: ["baseline_kmk"],
    3: ["corrected_kmk:4"],
    4: ["corrected_kmk:6"],
    5: ["corrected_kmk:8"],
}
DEFAULT_TAUS = (0.2, 0.1, 0.05)

SCHEME_USAGE = (
    "schemes are baseline_kmk, baseline_mkm, corrected_kmk:{2|4|6|8} "
    "(plain corrected_kmk means order 8), exact_quadratic"
)


class ConfigError(ValueError):
    """Bad configuration; reported on stderr with exit code 1."""


class _UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; 2 is taken, so reroute
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}error: {message}")


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(part) for part in text.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse vector {text!r}; expected comma-separated floats")


def _parse_window(text: str):
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"window must look like START:END, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"window bounds must be numbers, got {text!r}")
    if hi < lo:
        raise ConfigError("window end before start")
    return lo, hi


def _load_matrix(path: str) -> np.ndarray:
    """Dense text format: first line N, then N rows of N entries."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"matrix file not found: {path}")
    lines = p.read_text().split("\n")
    try:
        n = int(lines[0].strip())
    except (ValueError, IndexError):
        raise ConfigError(f"{path}: first line must be the matrix size N")
    try:
        mat = np.loadtxt(lines[1:], ndmin=2)
    except ValueError as err:
        raise ConfigError(f"{path}: {err}")
    if mat.shape != (n, n):
        raise ConfigError(f"{path}: expected {n}x{n} entries, got {mat.shape}")
    return mat


def parse_scheme(label: str):
    """'corrected_kmk:6' -> (variant, order); plain corrected_kmk is order 8."""
    name, sep, suffix = label.partition(":")
    if name in ("baseline_kmk", "baseline_mkm", "exact_quadratic"):
        if sep:
            raise ConfigError(f"{name} does not take an order; {SCHEME_USAGE}")
        return name, 2
    if name == "corrected_kmk":
        if not sep:
            return name, 8
        try:
            order = int(suffix)
        except ValueError:
            raise ConfigError(f"bad order {suffix!r} in {label!r}; {SCHEME_USAGE}")
        if order not in (2, 4, 6, 8):
            raise ConfigError(f"bad order {suffix!r} in {label!r}; {SCHEME_USAGE}")
        return name, order
    raise ConfigError(f"unknown scheme {label!r}; {SCHEME_USAGE}")


def scheme_label(variant: str, order: int) -> str:
    return f"{variant}{order}" if variant == "corrected_kmk" else variant


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully merged run configuration (flags over config file)."""

    potential: str = "quartic"
    omega: float | None = None
    k_file: str | None = None
    m_file: str | None = None
    scheme: str = "corrected_kmk:8"
    tau: float = 0.05
    q0: np.ndarray | None = None
    p0: np.ndarray | None = None
    periods: float | None = None
    t_final: float | None = None
    window: tuple | None = None
    newton_tol: float = 1e-13
    newton_max_iter: int = 25

    def build(self):
        variant, order = parse_scheme(self.scheme)
        try:
            cfg = SchemeConfig(variant, self.tau, order=order,
                               newton_tol=self.newton_tol,
                               newton_max_iter=self.newton_max_iter)
        except ValueError as err:
            raise ConfigError(str(err))
        potential, default_x0, kdim = self._potential()
        x0 = self._initial_state(default_x0, kdim)
        mass = self._mass(x0.dim)
        return x0, cfg, potential, mass

    def _potential(self):
        name = self.potential
        if name == "quartic":
            if self.omega is not None:
                raise ConfigError("omega only applies to the harmonic potential")
            return Quartic(), (np.array([0.0]), np.array([1.0])), None
        if name == "harmonic":
            try:
                pot = Harmonic(1.0 if self.omega is None else self.omega)
            except ValueError as err:
                raise ConfigError(str(err))
            return pot, (np.array([1.0]), np.array([0.0])), None
        if name == "quadratic":
            if self.k_file is None:
                raise ConfigError("quadratic potential needs --k-file")
            k = _load_matrix(self.k_file)
            try:
                pot = Quadratic(k)
            except ValueError as err:
                raise ConfigError(str(err))
            return pot, None, k.shape[0]
        raise ConfigError(
            f"unknown potential {name!r}; choose from quartic, harmonic, quadratic"
        )

    def _initial_state(self, default_x0, kdim):
        if (self.q0 is None) != (self.p0 is None):
            raise ConfigError("give both --q0 and --p0 or neither")
        if self.q0 is None:
            if default_x0 is None:
                raise ConfigError("quadratic potential needs explicit --q0 and --p0")
            q, p = default_x0
        else:
            q, p = self.q0, self.p0
        try:
            x0 = PhasePoint(q, p)
        except ValueError as err:
            raise ConfigError(str(err))
        if kdim is not None and x0.dim != kdim:
            raise ConfigError(
                f"initial state has dimension {x0.dim}, stiffness is {kdim}x{kdim}"
            )
        return x0

    def _mass(self, dim):
        if self.m_file is None:
            return MassMatrix.identity(dim)
        m = _load_matrix(self.m_file)
        if m.shape[0] != dim:
            raise ConfigError(f"mass is {m.shape[0]}x{m.shape[1]}, state dimension {dim}")
        try:
            return MassMatrix(m)
        except ValueError as err:
            raise ConfigError(str(err))

    def duration(self, potential) -> float:
        if (self.periods is None) == (self.t_final is None):
            raise ConfigError("set exactly one of --periods / --t-final")
        if self.t_final is not None:
            if self.t_final <= 0:
                raise ConfigError("t-final must be positive")
            return self.t_final
        if self.periods <= 0:
            raise ConfigError("periods must be positive")
        if self.potential == "quartic":
            base = quartic_period()
        elif self.potential == "harmonic":
            base = 2.0 * math.pi / potential.omega
        else:
            raise ConfigError("a quadratic potential has no single period; use --t-final")
        return self.periods * base

    def describe(self):
        """Stable key/value pairs for the metadata block and config hash."""
        pairs = [
            ("scheme", self.scheme),
            ("tau", _fmt(self.tau)),
            ("potential", self.potential),
        ]
        if self.omega is not None:
            pairs.append(("omega", _fmt(self.omega)))
        for key, path in (("k_matrix", self.k_file), ("m_matrix", self.m_file)):
            if path is not None:
                digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()[:12]
                pairs.append((key, digest))
        if self.q0 is not None:
            pairs.append(("q0", ",".join(_fmt(v) for v in self.q0)))
            pairs.append(("p0", ",".join(_fmt(v) for v in self.p0)))
        if self.periods is not None:
            pairs.append(("periods", _fmt(self.periods)))
        if self.t_final is not None:
            pairs.append(("t_final", _fmt(self.t_final)))
        if self.window is not None:
            pairs.append(("window", f"{_fmt(self.window[0])}:{_fmt(self.window[1])}"))
        pairs.append(("newton_tol", _fmt(self.newton_tol)))
        pairs.append(("newton_max_iter", str(self.newton_max_iter)))
        return pairs


def config_hash(pairs) -> str:
    blob = "\n".join(f"{k}={v}" for k, v in pairs)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def read_config_file(path: str) -> dict:
    """key = value lines; '#' comments and blank lines ignored."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    known = {
        "potential", "omega", "k_file", "m_file", "scheme", "tau", "q0", "p0",
        "periods", "t_final", "window", "newton_tol", "newton_max_iter", "out",
    }
    values = {}
    for lineno, raw in enumerate(p.read_text().split("\n"), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value.strip()
    return values


_FLOAT_KEYS = ("omega", "tau", "periods", "t_final", "newton_tol")


def merge_config(args, file_values: dict) -> tuple:
    """Flags win over file values; returns (ExperimentConfig, out value)."""

    def pick(key):
        flag = getattr(args, key, None)
        return flag if flag is not None else file_values.get(key)

    raw = {key: pick(key) for key in (
        "potential", "omega", "k_file", "m_file", "scheme", "tau", "q0", "p0",
        "periods", "t_final", "window", "newton_tol", "newton_max_iter",
    )}
    for key in _FLOAT_KEYS:
        if isinstance(raw[key], str):
            try:
                raw[key] = float(raw[key])
            except ValueError:
                raise ConfigError(f"{key} must be a number, got {raw[key]!r}")
    if isinstance(raw["newton_max_iter"], str):
        try:
            raw["newton_max_iter"] = int(raw["newton_max_iter"])
        except ValueError:
            raise ConfigError(f"newton_max_iter must be an integer")
    for key in ("q0", "p0"):
        if isinstance(raw[key], str):
            raw[key] = _parse_vector(raw[key])
    if isinstance(raw["window"], str):
        raw["window"] = _parse_window(raw["window"])
    defaults = {"potential": "quartic", "scheme": "corrected_kmk:8", "tau": 0.05,
                "newton_tol": 1e-13, "newton_max_iter": 25}
    for key, value in defaults.items():
        if raw[key] is None:
            raw[key] = value
    if raw["periods"] is None and raw["t_final"] is None:
        raw["periods"] = 16.0
    out = getattr(args, "out", None)
    if out is None:
        out = file_values.get("out")
    return ExperimentConfig(**raw), out


def default_out_dir() -> Path:
    return Path(os.environ.get("SYMSPLIT_OUT", "."))


def _trace_rows(x0, cfg, potential, mass, n_steps, first, last):
    """Rows (step, t, q, p, H, scaled, iters, res) for first <= step <= last.

    Returns (rows, failure); failure is None or (failed_step, residual) when
    the implicit solve diverged, in which case rows hold the surviving
    prefix of the requested window.
    """
    tau = cfg.tau
    m = cfg.scheme_order
    h0 = hamiltonian(x0, potential, mass)
    rows = []
    if first == 0:
        rows.append((0, 0.0, x0.q, x0.p, h0, 0.0, 0, 0.0))
    lo = max(first, 1)
    if fastpath.eligible(cfg, potential, mass, x0.dim):
        run = fastpath.fast_run(x0, cfg, potential, mass, n_steps,
                                rec_range=(lo, last + 1))
        for k in range(len(run.rec_h)):
            step_no = lo + k
            scaled = (run.rec_h[k] - h0) / tau**m
            rows.append((step_no, step_no * tau, np.array([run.rec_q[k]]),
                         np.array([run.rec_p[k]]), run.rec_h[k], scaled,
                         int(run.rec_iters[k]), float(run.rec_res[k])))
        failure = None
        if run.failed_step is not None:
            failure = (run.failed_step, run.residual)
        return rows, failure

    def observer(i, t, x, report):
        if lo <= i <= last:
            h = hamiltonian(x, potential, mass)
            rows.append((i, t, x.q, x.p, h, (h - h0) / tau**m,
                         report.newton_iterations, report.newton_residual))

    try:
        integrate(x0, cfg, potential, mass, n_steps, observer=observer)
    except NewtonDiverged as err:
        return rows, (err.step_index, err.residual)
    return rows, None


def write_trace(path: Path, meta, dim: int, rows, truncated=None) -> None:
    qcols = ",".join(f"q{i}" for i in range(dim))
    pcols = ",".join(f"p{i}" for i in range(dim))
    lines = [f"# symsplit {__version__}"]
    lines.extend(f"# {key}: {value}" for key, value in meta)
    lines.append(f"# config_hash: {config_hash(meta)}")
    lines.append(TRACE_COLUMNS.format(q=qcols, p=pcols))
    for step_no, t, q, p, h, scaled, iters, res in rows:
        fields = [str(step_no), _fmt(t)]
        fields.extend(_fmt(v) for v in q)
        fields.extend(_fmt(v) for v in p)
        fields.extend((_fmt(h), _fmt(scaled), str(iters), _fmt(res)))
        lines.append(",".join(fields))
    if truncated is not None:
        step_no, residual = truncated
        lines.append(f"# truncated: implicit solve diverged at step {step_no}, "
                     f"residual {residual:.3e}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")


def execute_run(exp: ExperimentConfig, out_path: Path, extra_meta=()) -> int:
    x0, cfg, potential, mass = exp.build()
    t_final = exp.duration(potential)
    n_steps = math.ceil(t_final / cfg.tau - 1e-9)
    if exp.window is None:
        first, last = 0, n_steps
    else:
        lo, hi = exp.window
        eps = 1e-9 * cfg.tau
        first = max(0, math.ceil((lo - eps) / cfg.tau))
        last = min(n_steps, math.floor((hi + eps) / cfg.tau))
    try:
        rows, failure = _trace_rows(x0, cfg, potential, mass, n_steps, first, last)
    except ValueError as err:
        raise ConfigError(str(err))
    meta = list(extra_meta) + exp.describe() + [("steps", str(n_steps))]
    write_trace(out_path, meta, x0.dim, rows, truncated=failure)
    if failure is not None:
        step_no, residual = failure
        sys.stderr.write(
            f"implicit solve diverged at step {step_no} (residual {residual:.3e}); "
            f"partial trace kept in {out_path}\n"
        )
        return 2
    return 0


def cmd_run(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    exp, out = merge_config(args, file_values)
    out_path = Path(out) if out else default_out_dir() / "trace.csv"
    if out_path.is_dir():
        out_path = out_path / "trace.csv"
    return execute_run(exp, out_path)


def cmd_figure(args) -> int:
    n = args.number
    if n == 5 and not args.long:
        sys.stderr.write(
            "figure 5 spans 262718 periods (about 3e7 steps at tau=0.05); "
            "pass --long to confirm the run\n"
        )
        return 1
    taus = args.tau_list if args.tau_list else list(DEFAULT_TAUS)
    out_dir = Path(args.out) if args.out else default_out_dir()
    lo, hi = FIGURE_WINDOWS[n]
    worst = 0
    for label in FIGURE_SCHEMES[n]:
        variant, order = parse_scheme(label)
        for tau in taus:
            if n == 1 and variant == "baseline_kmk" and abs(tau - 0.2) < 1e-12:
                # the source figure drops this series as off-scale
                continue
            cfg = SchemeConfig(variant, tau, order=order)
            x0 = PhasePoint([0.0], [1.0])
            period = measure_period(x0, cfg, Quartic(), MassMatrix.identity(1),
                                    8.0 * quartic_period())
            exp = ExperimentConfig(scheme=label, tau=tau, t_final=hi * period,
                                   window=(lo * period, hi * period))
            name = f"fig{n}_{scheme_label(variant, order)}_tau{tau:g}.csv"
            extra = [("figure", str(n)),
                     ("window_periods", f"{_fmt(lo)}:{_fmt(hi)}"),
                     ("measured_period", _fmt(period))]
            worst = max(worst, execute_run(exp, out_dir / name, extra_meta=extra))
    return worst


def cmd_order(args) -> int:
    labels = args.schemes.split(",") if args.schemes else [
        "baseline_kmk", "corrected_kmk:4", "corrected_kmk:6", "corrected_kmk:8",
    ]
    tau_pair = _parse_pair(args.tau_pair) if args.tau_pair else (0.2, 0.1)
    t_final = args.t_final if args.t_final is not None else 5.0
    out_dir = Path(args.out) if args.out else default_out_dir()
    x0 = PhasePoint([0.0], [1.0])
    potential = Quartic()
    mass = MassMatrix.identity(1)
    rows = []
    all_good = True
    for label in labels:
        variant, order = parse_scheme(label)
        if variant == "exact_quadratic":
            raise ConfigError("exact_quadratic has no convergence order to measure")
        try:
            report = measure_convergence_order(
                x0, potential, mass, variant, order, tau_pair, t_final)
        except ValueError as err:
            raise ConfigError(str(err))
        nominal = order if variant == "corrected_kmk" else 2
        ok = abs(report.measured_order - nominal) <= 0.8
        all_good = all_good and ok
        rows.append((scheme_label(variant, order), report))
        print(f"{scheme_label(variant, order)}: measured order "
              f"{report.measured_order:.3f} (nominal {nominal})"
              f"{'' if ok else '  MISMATCH'}")
    meta = [
        ("scheme", ",".join(label for label, _ in rows)),
        ("tau", f"{_fmt(tau_pair[0])}:{_fmt(tau_pair[1])}"),
        ("potential", "quartic"),
        ("t_final", _fmt(t_final)),
    ]
    lines = [f"# symsplit {__version__}"]
    lines.extend(f"# {key}: {value}" for key, value in meta)
    lines.append(f"# config_hash: {config_hash(meta)}")
    lines.append("scheme,tau_coarse,tau_fine,error_norm,measured_order")
    for label, report in rows:
        lines.append(",".join((
            label, _fmt(report.tau_coarse), _fmt(report.tau_fine),
            _fmt(report.error_fine), _fmt(report.measured_order),
        )))
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "orders.csv").write_text("\n".join(lines) + "\n")
    return 0 if all_good else 3


def _parse_pair(text: str):
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"tau pair must look like COARSE:FINE, got {text!r}")
    try:
        coarse, fine = float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError(f"tau pair bounds must be numbers, got {text!r}")
    if not coarse > fine > 0:
        raise ConfigError("tau pair must be COARSE:FINE with coarse > fine > 0")
    return coarse, fine


def _sweep_entry(payload):
    exp, out_path = payload
    try:
        return execute_run(exp, Path(out_path)), str(out_path)
    except ConfigError as err:
        sys.stderr.write(f"error: {err}\n")
        return 1, str(out_path)


def cmd_sweep(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    base, out = merge_config(args, file_values)
    labels = args.schemes.split(",") if args.schemes else [
        "baseline_kmk", "corrected_kmk:4", "corrected_kmk:6", "corrected_kmk:8",
    ]
    taus = args.tau_list if args.tau_list else list(DEFAULT_TAUS)
    out_dir = Path(out) if out else default_out_dir()
    jobs = args.jobs if args.jobs else (os.cpu_count() or 1)
    entries = []
    for label in labels:
        variant, order = parse_scheme(label)  # validate before spawning
        for tau in taus:
            exp = replace(base, scheme=label, tau=tau)
            name = f"sweep_{scheme_label(variant, order)}_tau{tau:g}.csv"
            entries.append((exp, str(out_dir / name)))
    if jobs == 1:
        results = [_sweep_entry(entry) for entry in entries]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_entry, entries))
    codes = [code for code, _ in results]
    for (code, path) in results:
        print(f"{'ok' if code == 0 else f'exit {code}'}: {path}")
    if 1 in codes:
        return 1
    if 2 in codes:
        return 2
    return 0


def _tau_list(text: str):
    try:
        return [float(part) for part in text.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse tau list {text!r}")


def build_parser() -> _Parser:
    parser = _Parser(prog="symsplit",
                     description="corrected splitting schemes for separable "
                                 "Hamiltonian systems")
    parser.add_argument("--version", action="version",
                        version=f"symsplit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_physics(p):
        p.add_argument("--potential", choices=("quartic", "harmonic", "quadratic"))
        p.add_argument("--omega", type=float, help="harmonic frequency")
        p.add_argument("--k-file", help="stiffness matrix file (N header + rows)")
        p.add_argument("--m-file", help="mass matrix file (same format)")
        p.add_argument("--scheme", help=SCHEME_USAGE)
        p.add_argument("--order", type=int,
                       help="shorthand: --scheme corrected_kmk --order N")
        p.add_argument("--tau", type=float, help="timestep")
        p.add_argument("--q0", type=_parse_vector, help="comma-separated")
        p.add_argument("--p0", type=_parse_vector, help="comma-separated")
        p.add_argument("--periods", type=float, help="duration in periods")
        p.add_argument("--t-final", type=float, help="duration in time units")
        p.add_argument("--window", type=_parse_window,
                       help="record only times in START:END")
        p.add_argument("--newton-tol", type=float)
        p.add_argument("--newton-max-iter", type=int)
        p.add_argument("--config", help="key = value file; flags win")
        p.add_argument("--out", help="output file (run) or directory")

    run_p = sub.add_parser("run", help="integrate once and write trace.csv")
    add_physics(run_p)
    run_p.set_defaults(handler=cmd_run)

    fig_p = sub.add_parser("figure", help="reproduce a benchmark figure")
    fig_p.add_argument("number", type=int, choices=(1, 2, 3, 4, 5))
    fig_p.add_argument("--tau-list", type=_tau_list, help="comma-separated")
    fig_p.add_argument("--out", help="output directory")
    fig_p.add_argument("--long", action="store_true",
                       help="allow the 262718-period figure 5 run")
    fig_p.set_defaults(handler=cmd_figure)

    ord_p = sub.add_parser("order", help="measure convergence orders")
    ord_p.add_argument("--schemes", help="comma-separated scheme labels")
    ord_p.add_argument("--tau-pair", help="COARSE:FINE, default 0.2:0.1")
    ord_p.add_argument("--t-final", type=float, help="default 5.0")
    ord_p.add_argument("--out", help="output directory")
    ord_p.set_defaults(handler=cmd_order)

    sweep_p = sub.add_parser("sweep", help="scheme x tau grid, one CSV each")
    add_physics(sweep_p)
    sweep_p.add_argument("--schemes", help="comma-separated scheme labels")
    sweep_p.add_argument("--tau-list", type=_tau_list, help="comma-separated")
    sweep_p.add_argument("--jobs", type=int, help="parallel workers")
    sweep_p.set_defaults(handler=cmd_sweep)
    return parser


def _apply_order_shorthand(args) -> None:
    order = getattr(args, "order", None)
    if order is None:
        return
    scheme = getattr(args, "scheme", None)
    if scheme is not None and not scheme.startswith("corrected_kmk"):
        raise ConfigError(f"--order does not apply to {scheme!r}")
    args.scheme = f"corrected_kmk:{order}"


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_order_shorthand(args)
        return args.handler(args)
    except ConfigError as err:
        sys.stderr.write(f"error: {err}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
