"""Time-domain simulation of closed loops.

Two integrators are provided: the Dormand-Prince 5(4) embedded pair with
step-size control, and classical fixed-step RK4.  Both reject (and halve)
any step that would carry a regularized controller state outside the open
interval its exact flow is confined to; nothing is ever clamped.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .controllers import (
    Antithetic,
    ClosedLoop,
    Exponential,
    Logistic,
    StandardIntegral,
    _rhs,
    regularizer_image,
)
from .errors import DimensionMismatch, NonFiniteState, OutOfImage, StepSizeUnderflow
from .sysmodel import LtiSystem

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    t_end: float = 50.0
    method: str = "rk45"  # rk45 | rk4
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf
    dt: float = 1e-2  # fixed step for rk4
    initial_state: Optional[Sequence[float]] = None
    disturbance_schedule: tuple = ()  # ((t, d), ...), piecewise constant from t on
    reference_schedule: tuple = ()  # ((t, mu), ...)

    def __post_init__(self):
        if self.method not in ("rk45", "rk4"):
            raise ValueError("method must be 'rk45' or 'rk4'")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not (self.t_end > 0):
            raise ValueError("t_end must be positive")
        if not (self.dt > 0 and self.max_step > 0):
            raise ValueError("step sizes must be positive")
        for name in ("disturbance_schedule", "reference_schedule"):
            times = [t for t, _ in getattr(self, name)]
            if any(b < a for a, b in zip(times, times[1:])):
                raise ValueError(f"{name} must be sorted by time")


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    detail: str = ""


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    inputs: np.ndarray
    columns: list
    events: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def negativity_events(self) -> list:
        return [e for e in self.events if e.kind == "negative_state"]


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def default_initial_state(cl: ClosedLoop) -> np.ndarray:
    """Plant at the origin; controller at rest (antithetic, standard) or inside its image."""
    c = cl.controller
    if isinstance(c, (Antithetic, StandardIntegral)):
        ctrl = np.zeros(c.n_states)
    elif isinstance(c, Exponential):
        ctrl = np.array([1.0])
    elif isinstance(c, Logistic):
        ctrl = np.array([0.5 * c.beta])
    else:
        lo, hi = regularizer_image(c.kind, c.params)
        ctrl = np.array([0.0 if lo < 0 < hi else (0.5 * hi if math.isfinite(hi) else 1.0)])
    return np.concatenate([np.zeros(cl.n), ctrl])


def _segments(cfg: SimConfig, mu0: float, d0: float):
    """Split [0, t_end] at schedule events; yields (t0, t1, mu, d)."""
    marks = {0.0, cfg.t_end}
    marks.update(t for t, _ in cfg.reference_schedule if 0 < t < cfg.t_end)
    marks.update(t for t, _ in cfg.disturbance_schedule if 0 < t < cfg.t_end)
    pts = sorted(marks)

    def value_at(schedule, t, default):
        v = default
        for ts, val in schedule:
            if ts <= t:
                v = val
        return v

    for a, b in zip(pts, pts[1:]):
        yield a, b, value_at(cfg.reference_schedule, a, mu0), value_at(cfg.disturbance_schedule, a, d0)


class _Stepper:
    def __init__(self, cl: ClosedLoop, cfg: SimConfig):
        self.cl = cl
        self.cfg = cfg
        self.domain = cl.controller_domain()
        c = cl.controller
        if isinstance(c, (Antithetic, Exponential, Logistic)):
            self.watch = np.arange(cl.dim) if cl.positive_plant else np.arange(cl.n, cl.dim)
        else:
            self.watch = np.arange(cl.n) if cl.positive_plant else np.arange(0)
        self.neg_threshold = -10.0 * cfg.abs_tol
        self.events: list[Event] = []
        self._neg_flag = False

    def in_domain(self, y: np.ndarray) -> bool:
        if self.domain is None:
            return True
        i, lo, hi = self.domain
        return lo < y[i] < hi

    def check(self, t: float, y: np.ndarray):
        if not np.all(np.isfinite(y)):
            raise NonFiniteState(f"non-finite state at t={t}")
        if self.watch.size:
            neg = y[self.watch] < self.neg_threshold
            if np.any(neg):
                idx = self.watch[np.argmax(neg)]
                self.events.append(Event(t, "negative_state", f"{self.cl.state_names()[idx]}={y[idx]:.3e}"))

    def underflow(self, t, h):
        if h < 1e-14 * max(1.0, abs(t)):
            raise StepSizeUnderflow(f"step size {h:.3e} underflowed at t={t}")


def _dopri(st: _Stepper, f, t0, t1, y, h, ts, ys):
    cfg = st.cfg
    rtol, atol = cfg.rel_tol, cfg.abs_tol
    t = t0
    k1 = f(y)
    K = np.empty((7, y.size))
    while t < t1:
        h = min(h, cfg.max_step, t1 - t)
        last = t + h >= t1 - 1e-12 * max(1.0, abs(t1))
        if last:
            h = t1 - t
        K[0] = k1
        for s in range(1, 7):
            K[s] = f(y + h * (np.dot(_A[s], K[:s])))
        y_new = y + h * (_B5 @ K)
        # the 7th stage was evaluated at y_new (FSAL)
        err_vec = h * (_E @ K)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale))
        if not np.isfinite(err) or not np.all(np.isfinite(y_new)):
            h *= 0.25
            st.underflow(t, h)
            continue
        if not st.in_domain(y_new):
            h *= 0.5
            st.underflow(t, h)
            continue
        if err <= 1.0:
            t = t1 if last else t + h
            y = y_new
            k1 = K[6].copy()
            st.check(t, y)
            ts.append(t)
            ys.append(y.copy())
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h *= fac
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
            st.underflow(t, h)
    return y, h


def _rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _rk4_span(st: _Stepper, f, t, y, h):
    """One RK4 step of size h, halved recursively if the image would be left."""
    y_new = _rk4_step(f, y, h)
    if np.all(np.isfinite(y_new)) and st.in_domain(y_new):
        return y_new
    st.underflow(t, 0.5 * h)
    y_mid = _rk4_span(st, f, t, y, 0.5 * h)
    return _rk4_span(st, f, t + 0.5 * h, y_mid, 0.5 * h)


def _rk4(st: _Stepper, f, t0, t1, y, ts, ys):
    n = max(1, int(math.ceil((t1 - t0) / st.cfg.dt - 1e-9)))
    h = (t1 - t0) / n
    for i in range(n):
        y = _rk4_span(st, f, t0 + i * h, y, h)
        t = t1 if i == n - 1 else t0 + (i + 1) * h
        st.check(t, y)
        ts.append(t)
        ys.append(y.copy())
    return y


def integrate(cl: ClosedLoop, cfg: SimConfig) -> Trajectory:
    """Simulate the closed loop on ``[0, cfg.t_end]``.

    Every accepted step is recorded. Schedule changes restart the integrator
    exactly at the change time.
    """
    y = default_initial_state(cl) if cfg.initial_state is None else np.array(cfg.initial_state, dtype=float)
    if y.shape != (cl.dim,):
        raise DimensionMismatch(f"initial state must have {cl.dim} entries, got {y.shape}")
    st = _Stepper(cl, cfg)
    if st.domain is not None and not st.in_domain(y):
        i, lo, hi = st.domain
        if not (isinstance(cl.controller, (Exponential, Logistic)) and y[i] == 0.0):
            raise OutOfImage(f"initial controller state {y[i]} outside ({lo}, {hi})")
        # v = 0 is invariant (the controller stays switched off); nothing to confine
        st.domain = None
    st.check(0.0, y)
    ts, ys = [0.0], [y.copy()]
    h = None
    for t0, t1, mu, d in _segments(cfg, cl.controller.mu, cl.disturbance.d):
        if t0 > 0:
            st.events.append(Event(t0, "segment", f"mu={mu:g} d={d:g}"))

        def f(state, mu=mu, d=d):
            return _rhs(cl, state, mu, d)

        if cfg.method == "rk4":
            y = _rk4(st, f, t0, t1, y, ts, ys)
        else:
            if h is None:
                f0 = f(y)
                scale = cfg.abs_tol + cfg.rel_tol * np.abs(y)
                d0 = np.max(np.abs(y) / scale)
                d1 = np.max(np.abs(f0) / scale)
                h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
                h = min(h, 1e-2 * (t1 - t0))
            y, h = _dopri(st, f, t0, t1, y, h, ts, ys)
    states = np.array(ys)
    u = cl.controller.k * states[:, cl.n + cl.actuated_index]
    if isinstance(cl.plant, LtiSystem):
        out = states[:, : cl.n] @ cl.plant.C
    else:
        out = np.array([cl.plant.h(s[: cl.n]) for s in states])
    cols = ["t"] + cl.state_names() + ["u", "y"]
    return Trajectory(np.array(ts), states, out, u, cols, st.events)


def max_output_gap(a: Trajectory, b: Trajectory) -> float:
    """sup |y_a - y_b| over the union of both time grids (linear interpolation)."""
    grid = np.union1d(a.times, b.times)
    ya = np.interp(grid, a.times, a.outputs)
    yb = np.interp(grid, b.times, b.outputs)
    return float(np.max(np.abs(ya - yb)))


@dataclass(frozen=True)
class Comparison:
    max_output_gap: float
    antithetic: Trajectory
    standard: Trajectory


def compare_to_standard_integral(
    sys: LtiSystem,
    k: float,
    eta_large: float,
    mu: float,
    cfg: Optional[SimConfig] = None,
) -> Comparison:
    """Antithetic loop with annihilation rate ``k eta = eta_large`` against a standard integrator.

    Initial conditions match: same plant state, and ``v(0) = z1(0) - z2(0)``.
    """
    cfg = cfg or SimConfig()
    aic = ClosedLoop(sys, Antithetic.from_annihilation_rate(k, eta_large, mu))
    si = ClosedLoop(sys, StandardIntegral(mu=mu, k=k))
    x0 = np.zeros(sys.n) if cfg.initial_state is None else np.asarray(cfg.initial_state, dtype=float)
    if x0.size == aic.dim:
        a0 = x0
    elif x0.size == sys.n:
        a0 = np.concatenate([x0, [0.0, 0.0]])
    else:
        raise DimensionMismatch("initial state must cover the plant or the antithetic loop")
    s0 = np.concatenate([a0[: sys.n], [a0[sys.n] - a0[sys.n + 1]]])
    from dataclasses import replace

    ta = integrate(aic, replace(cfg, initial_state=tuple(a0)))
    tb = integrate(si, replace(cfg, initial_state=tuple(s0)))
    return Comparison(max_output_gap(ta, tb), ta, tb)


def tracking_metrics(traj: Trajectory, mu: float, band: float = 0.02) -> dict:
    """Step-response metrics against the reference ``mu``.

    settling_time_2pct is the first time after which y stays within
    ``band * |mu|`` of ``mu``; it is inf when the final sample is outside.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    y = traj.outputs
    err = np.abs(y - mu)
    tol = band * abs(mu)
    outside = np.flatnonzero(err > tol)
    if outside.size == 0:
        settle = 0.0
    elif outside[-1] == len(y) - 1:
        settle = math.inf
    else:
        settle = float(traj.times[outside[-1] + 1])
    overshoot = max(0.0, float(np.max(y) - mu)) / abs(mu) if mu else 0.0
    sse = float(err[-1])
    return {
        "settling_time_2pct": settle,
        "overshoot": overshoot,
        "steady_state_error": sse,
        "settled": bool(math.isfinite(settle)),
    }


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write ``t,x1..xn,z1[,z2],u,y`` with 12 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(traj.columns)
        for t, s, u, y in zip(traj.times, traj.states, traj.inputs, traj.outputs):
            w.writerow([f"{v:.12g}" for v in (t, *s, u, y)])
