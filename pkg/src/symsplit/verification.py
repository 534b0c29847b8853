"""Verification tooling: references, orders, periods, symplecticity.

Everything here treats an integrator as a black-box map so the checks stay
independent of the scheme internals they are probing: reference solutions
come from step-halving until two refinements agree, convergence orders
from error ratios on matched final times, symplecticity from a finite
difference Jacobian of the one-step map, and periods from interpolated
zero crossings of the position signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fastpath
from .hamiltonian import MassMatrix, PhasePoint, Potential, hamiltonian
from .integrators import SchemeConfig, integrate, step

__all__ = [
    "EnergyTrace",
    "OrderReport",
    "quartic_period",
    "reference_solution",
    "energy_error_trace",
    "energy_deviation_maxima",
    "measure_convergence_order",
    "symplecticity_defect",
    "period_estimate",
    "measure_period",
]


@dataclass(frozen=True)
class EnergyTrace:
    """Energy along a run plus the order-scaled deviation (H - H0) / tau^m."""

    times: np.ndarray
    energies: np.ndarray
    scaled: np.ndarray
    h0: float
    tau: float
    m: int

    def __post_init__(self):
        if not (len(self.times) == len(self.energies) == len(self.scaled)):
            raise ValueError("trace arrays must have equal length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


@dataclass(frozen=True)
class OrderReport:
    """Measured convergence order from one step-size pair."""

    variant: str
    order: int
    tau_coarse: float
    tau_fine: float
    error_coarse: float
    error_fine: float
    measured_order: float
    metric: str = "state"


def quartic_period() -> float:
    """Exact period of H = p^2/2 + q^4/4 at energy 1/2: 2^(1/4) B(1/4, 1/2)."""
    return 2.0 ** 0.25 * math.gamma(0.25) * math.gamma(0.5) / math.gamma(0.75)


def _final_state(x0, cfg, potential, mass, n_steps):
    if fastpath.eligible(cfg, potential, mass, x0.dim):
        run = fastpath.fast_run(x0, cfg, potential, mass, n_steps)
        run.raise_if_failed()
        return run.final
    return integrate(x0, cfg, potential, mass, n_steps)


def reference_solution(x0: PhasePoint, potential: Potential, mass: MassMatrix,
                       t_final: float, tol: float = 1e-13,
                       tau_start: float = 0.05, order: int = 8) -> PhasePoint:
    """High-accuracy final state at t_final via the order-8 scheme.

    The step count doubles until two successive refinements agree to
    ``tol`` in phase-space max-norm; the finer of the two is returned.
    ``order`` exists so cross-checks can rebuild the reference with the
    order-6 scheme; the two references agree to the acceptance tolerance.
    """
    if t_final < 0:
        raise ValueError("t_final must be non-negative")
    if t_final == 0:
        return x0

    def run(n):
        cfg = SchemeConfig("corrected_kmk", t_final / n, order=order)
        return _final_state(x0, cfg, potential, mass, n)

    n = max(1, math.ceil(t_final / tau_start))
    prev = run(n)
    for _ in range(14):
        n *= 2
        cur = run(n)
        diff = float(np.abs(cur.as_array() - prev.as_array()).max())
        if diff <= tol:
            return cur
        prev = cur
    raise RuntimeError(
        f"reference solution did not converge to {tol:g} "
        f"(last refinement moved by {diff:.3e})"
    )


def _window_steps(window, tau, n_max=None):
    t0, t1 = window
    if t1 < t0:
        raise ValueError("window end before start")
    eps = 1e-9 * tau
    i0 = max(0, math.ceil((t0 - eps) / tau))
    i1 = math.floor((t1 + eps) / tau)
    if n_max is not None:
        i1 = min(i1, n_max)
    return i0, i1


def energy_error_trace(x0: PhasePoint, cfg: SchemeConfig, potential: Potential,
                       mass: MassMatrix, window, m: int | None = None) -> EnergyTrace:
    """Energy at every step time inside [window[0], window[1]].

    The scaled column divides the deviation from the initial energy by
    tau^m, with m defaulting to the scheme's accuracy order; matching
    windows from runs at different tau should then land on one curve.
    """
    tau = cfg.tau
    if m is None:
        m = cfg.scheme_order
    h0 = hamiltonian(x0, potential, mass)
    i0, i1 = _window_steps(window, tau)
    n_steps = i1
    times = []
    energies = []
    if i0 == 0:
        times.append(0.0)
        energies.append(h0)
    first = max(i0, 1)
    if fastpath.eligible(cfg, potential, mass, x0.dim):
        run = fastpath.fast_run(x0, cfg, potential, mass, n_steps,
                                rec_range=(first, i1 + 1))
        run.raise_if_failed()
        times.extend((first + k) * tau for k in range(len(run.rec_h)))
        energies.extend(run.rec_h)
    else:
        def observer(i, t, x, report):
            if i >= first:
                times.append(t)
                energies.append(hamiltonian(x, potential, mass))

        integrate(x0, cfg, potential, mass, n_steps, observer=observer)
    times = np.asarray(times)
    energies = np.asarray(energies)
    scaled = (energies - h0) / tau**m
    return EnergyTrace(times, energies, scaled, h0, tau, m)


def energy_deviation_maxima(x0: PhasePoint, cfg: SchemeConfig,
                            potential: Potential, mass: MassMatrix,
                            n_steps: int, range_a, range_b):
    """Max |H - H0| over two step-index ranges [a0, a1), [b0, b1)."""
    if fastpath.eligible(cfg, potential, mass, x0.dim):
        run = fastpath.fast_run(x0, cfg, potential, mass, n_steps,
                                range_a=range_a, range_b=range_b)
        run.raise_if_failed()
        return run.max_a, run.max_b
    h0 = hamiltonian(x0, potential, mass)
    box = [0.0, 0.0]

    def observer(i, t, x, report):
        dev = abs(hamiltonian(x, potential, mass) - h0)
        if range_a[0] <= i < range_a[1]:
            box[0] = max(box[0], dev)
        if range_b[0] <= i < range_b[1]:
            box[1] = max(box[1], dev)

    integrate(x0, cfg, potential, mass, n_steps, observer=observer)
    return box[0], box[1]


_MEASUREMENT_FLOOR = 100 * np.finfo(float).eps


def measure_convergence_order(x0: PhasePoint, potential: Potential,
                              mass: MassMatrix, variant: str, order: int,
                              tau_pair, t_final: float,
                              metric: str = "state") -> OrderReport:
    """Measured order from errors at two step sizes against a reference.

    Step counts are rounded so both taus divide t_final exactly; the
    reported ratio uses the adjusted values.  ``metric`` is either "state"
    (phase-space max-norm at the final time) or "energy" (max energy
    deviation along the run).
    """
    if metric not in ("state", "energy"):
        raise ValueError("metric must be 'state' or 'energy'")
    tau_c, tau_f = tau_pair
    if not tau_c > tau_f > 0:
        raise ValueError("tau_pair must be (coarse, fine) with coarse > fine > 0")
    ref = reference_solution(x0, potential, mass, t_final)
    h0 = hamiltonian(x0, potential, mass)

    taus = []
    errors = []
    for tau_nominal in (tau_c, tau_f):
        n = max(1, round(t_final / tau_nominal))
        tau = t_final / n
        cfg = SchemeConfig(variant, tau, order=order if variant == "corrected_kmk" else 2)
        if metric == "state":
            x = _final_state(x0, cfg, potential, mass, n)
            err = float(np.abs(x.as_array() - ref.as_array()).max())
        else:
            dev_a, _ = energy_deviation_maxima(x0, cfg, potential, mass, n,
                                               (1, n + 1), (0, 0))
            err = dev_a
        scale = max(1.0, float(np.abs(ref.as_array()).max()), abs(h0))
        if err < _MEASUREMENT_FLOOR * scale:
            raise ValueError(
                f"error {err:.3e} at tau={tau:g} is below the measurement "
                "floor; use a coarser step pair"
            )
        taus.append(tau)
        errors.append(err)

    measured = math.log(errors[0] / errors[1]) / math.log(taus[0] / taus[1])
    return OrderReport(variant, order, taus[0], taus[1], errors[0], errors[1],
                       measured, metric)


def symplecticity_defect(x: PhasePoint, cfg: SchemeConfig, potential: Potential,
                         mass: MassMatrix, fd_step: float = 1e-6) -> float:
    """Max-norm of J^T Omega J - Omega for the one-step map Jacobian at x.

    J comes from central finite differences of the full step map, so the
    achievable floor is the solver tolerance divided by the stencil width;
    exact symplecticity shows up as a defect at that floor.
    """
    n = x.dim
    z0 = x.as_array()
    dim = 2 * n

    def flow(z):
        out, _ = step(PhasePoint(z[:n], z[n:]), cfg, potential, mass)
        return out.as_array()

    jac = np.empty((dim, dim))
    for k in range(dim):
        dz = np.zeros(dim)
        dz[k] = fd_step
        jac[:, k] = (flow(z0 + dz) - flow(z0 - dz)) / (2.0 * fd_step)
    omega = np.zeros((dim, dim))
    omega[:n, n:] = np.eye(n)
    omega[n:, :n] = -np.eye(n)
    return float(np.abs(jac.T @ omega @ jac - omega).max())


def period_estimate(times, q) -> float:
    """Mean spacing of upward zero crossings of a sampled coordinate.

    Each crossing time is refined with the cubic through the four samples
    around the sign change, so densely sampled smooth signals give many
    more digits than the sampling interval.  Needs at least two crossings.
    """
    times = np.asarray(times, dtype=float)
    q = np.asarray(q, dtype=float)
    if times.shape != q.shape or times.size < 4:
        raise ValueError("need matching arrays with at least four samples")
    crossings = []
    n = times.size
    for i in range(n - 1):
        if q[i] < 0.0 <= q[i + 1]:
            lo = max(0, min(i - 1, n - 4))
            sel = slice(lo, lo + 4)
            coeffs = np.polyfit(times[sel] - times[i], q[sel], 3)
            a, b = 0.0, times[i + 1] - times[i]
            fa = np.polyval(coeffs, a)
            for _ in range(80):
                mid = 0.5 * (a + b)
                fm = np.polyval(coeffs, mid)
                if (fa < 0) == (fm < 0):
                    a, fa = mid, fm
                else:
                    b = mid
            crossings.append(times[i] + 0.5 * (a + b))
    if len(crossings) < 2:
        raise ValueError("trajectory shows fewer than two upward zero crossings")
    return float(np.mean(np.diff(crossings)))


def measure_period(x0: PhasePoint, cfg: SchemeConfig, potential: Potential,
                   mass: MassMatrix, t_span: float) -> float:
    """Period of the scheme's own trajectory from x0, sampled every step."""
    n_steps = math.ceil(t_span / cfg.tau)
    if fastpath.eligible(cfg, potential, mass, x0.dim):
        run = fastpath.fast_run(x0, cfg, potential, mass, n_steps,
                                rec_range=(1, n_steps + 1))
        run.raise_if_failed()
        times = np.concatenate([[0.0], (1 + np.arange(len(run.rec_q))) * cfg.tau])
        qs = np.concatenate([[x0.q[0]], run.rec_q])
    else:
        times = [0.0]
        qs = [x0.q[0]]

        def observer(i, t, x, report):
            times.append(t)
            qs.append(x.q[0])

        integrate(x0, cfg, potential, mass, n_steps, observer=observer)
        times = np.asarray(times)
        qs = np.asarray(qs)
    return period_estimate(times, qs)
