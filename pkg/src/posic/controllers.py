"""Positive integral controllers and their closed loops.

Controller state always follows the plant state in the closed-loop vector:
``[x_1..x_n, z_1, z_2]`` for the antithetic controller and ``[x_1..x_n, v]``
for the single-state controllers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import (
    AssumptionViolated,
    DimensionMismatch,
    EquilibriumOutOfRange,
    InadmissibleDisturbance,
    NewtonDiverged,
    OutOfImage,
)
from .sysmodel import (
    LtiSystem,
    NonlinearSystem,
    _solve_A,
    dc_gain,
    is_internally_positive,
    linearize,
    steady_state_map,
)

POSITIVE = "positive_gain"
NEGATIVE = "negative_gain"
AUTO = "auto"
_SIGNS = (POSITIVE, NEGATIVE, AUTO)

Plant = Union[LtiSystem, NonlinearSystem]


def _check_positive(**values):
    for name, v in values.items():
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"{name} must be a finite positive number, got {v!r}")


@dataclass(frozen=True)
class _Controller:
    mu: float
    actuation_sign: str = POSITIVE

    def _validate_common(self):
        _check_positive(mu=self.mu)
        if self.actuation_sign not in _SIGNS:
            raise ValueError(f"actuation_sign must be one of {_SIGNS}")

    n_states = 1

    def with_sign(self, sign: str):
        from dataclasses import replace

        return replace(self, actuation_sign=sign)


@dataclass(frozen=True)
class Antithetic(_Controller):
    """``z1' = mu - k eta z1 z2``, ``z2' = y - k eta z1 z2``, ``u = k z1`` (or ``k z2``)."""

    k: float = 1.0
    eta: float = 1.0
    n_states = 2

    def __post_init__(self):
        self._validate_common()
        _check_positive(k=self.k, eta=self.eta)

    @classmethod
    def from_annihilation_rate(cls, k: float, rate: float, mu: float, **kw) -> "Antithetic":
        """Build from the parameterization whose annihilation term is ``rate * z1 z2``."""
        return cls(mu=mu, k=k, eta=rate / k, **kw)

    @property
    def k_eta(self) -> float:
        return self.k * self.eta


@dataclass(frozen=True)
class Exponential(_Controller):
    """``v' = alpha v (mu - y)``, ``u = k v``."""

    k: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        self._validate_common()
        _check_positive(k=self.k, alpha=self.alpha)


@dataclass(frozen=True)
class Logistic(_Controller):
    """``v' = (alpha/beta) v (beta - v) (mu - y)``, ``u = k v``."""

    k: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        self._validate_common()
        _check_positive(k=self.k, alpha=self.alpha, beta=self.beta)


@dataclass(frozen=True)
class StandardIntegral(_Controller):
    """``v' = mu - y``, ``u = k v``; the control input may become negative."""

    k: float = 1.0

    def __post_init__(self):
        self._validate_common()
        _check_positive(k=self.k)


@dataclass(frozen=True)
class RegularizedTable(_Controller):
    """``v' = phi'(phi^{-1}(v)) (mu - y)``, ``u = k v`` for a tabulated regularizer."""

    kind: str = "exponential"
    k: float = 1.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        self._validate_common()
        _check_positive(k=self.k)
        if self.kind not in REGULARIZERS:
            raise ValueError(f"unknown regularizer {self.kind!r}; known: {sorted(REGULARIZERS)}")


ControllerSpec = Union[Antithetic, Exponential, Logistic, StandardIntegral, RegularizedTable]


# -- regularized integrators -----------------------------------------------------------
# Each entry gives psi(v) with v' = psi(v) w, its derivative, and the open image of phi.


def _p(params, name, default=1.0):
    return float(params.get(name, default))


def _exp_psi(v, p):
    return _p(p, "alpha") * v


def _exp_dpsi(v, p):
    return _p(p, "alpha")


def _log_psi(v, p):
    a, b = _p(p, "alpha"), _p(p, "beta")
    return a / b * v * (b - v)


def _log_dpsi(v, p):
    a, b = _p(p, "alpha"), _p(p, "beta")
    return a / b * (b - 2.0 * v)


def _glog_psi(v, p):
    a, b, th = _p(p, "alpha"), _p(p, "beta"), _p(p, "theta")
    return a * th / b ** (1.0 / th) * v * (b ** (1.0 / th) - max(v, 0.0) ** (1.0 / th))


def _glog_dpsi(v, p):
    a, b, th = _p(p, "alpha"), _p(p, "beta"), _p(p, "theta")
    c = a * th / b ** (1.0 / th)
    v = max(v, 0.0)
    return c * (b ** (1.0 / th) - (1.0 + 1.0 / th) * v ** (1.0 / th))


def _tanh_psi(v, p):
    a, b = _p(p, "alpha"), _p(p, "beta")
    return a * b * (1.0 - v * v / (b * b))


def _tanh_dpsi(v, p):
    a, b = _p(p, "alpha"), _p(p, "beta")
    return -2.0 * a * v / b


def _atan_psi(v, p):
    a, b = _p(p, "alpha"), _p(p, "beta")
    return a * b / (1.0 + math.tan(v / b) ** 2)


def _atan_dpsi(v, p):
    a, b = _p(p, "alpha"), _p(p, "beta")
    return -a * math.sin(2.0 * v / b)


def _alg_psi(v, p):
    a, b = _p(p, "alpha"), _p(p, "beta")
    return a / b**2 * max(b * b - v * v, 0.0) ** 1.5


def _alg_dpsi(v, p):
    a, b = _p(p, "alpha"), _p(p, "beta")
    return -3.0 * a / b**2 * v * max(b * b - v * v, 0.0) ** 0.5


def _image(kind, p) -> tuple[float, float]:
    b = _p(p, "beta")
    return {
        "exponential": (0.0, math.inf),
        "logistic": (0.0, b),
        "generalized_logistic": (0.0, b),
        "hyperbolic": (-b, b),
        "arctangent": (-b * math.pi / 2, b * math.pi / 2),
        "algebraic": (-b, b),
    }[kind]


REGULARIZERS = {
    "exponential": (_exp_psi, _exp_dpsi),
    "logistic": (_log_psi, _log_dpsi),
    "generalized_logistic": (_glog_psi, _glog_dpsi),
    "hyperbolic": (_tanh_psi, _tanh_dpsi),
    "arctangent": (_atan_psi, _atan_dpsi),
    "algebraic": (_alg_psi, _alg_dpsi),
}


def regularizer_image(kind: str, params: dict) -> tuple[float, float]:
    return _image(kind, params)


def regularized_integrator_rhs(kind: str, params: dict, v: float, w: float) -> float:
    """Right-hand side ``v' = phi'(phi^{-1}(v)) w`` of a regularized integrator.

    ``params`` holds ``alpha``, ``beta`` and (generalized logistic only) ``theta``.
    Raises OutOfImage when ``v`` is outside the open image of the regularizer.
    """
    if kind not in REGULARIZERS:
        raise ValueError(f"unknown regularizer {kind!r}")
    lo, hi = _image(kind, params)
    if not (lo < v < hi):
        raise OutOfImage(f"v={v} outside the image ({lo}, {hi}) of the {kind} regularizer")
    return REGULARIZERS[kind][0](v, params) * w


# -- closed loop -----------------------------------------------------------------------


@dataclass(frozen=True)
class Disturbance:
    """Constant disturbance of magnitude ``d``.

    ``channel="plant"`` adds ``E d`` to the plant dynamics (E defaults to the
    plant's own E). ``channel="controller"`` adds ``d`` to the output sensed
    by the controller, i.e. it acts inside the controller dynamics.
    """

    d: float = 0.0
    E: Optional[np.ndarray] = None
    channel: str = "plant"

    def __post_init__(self):
        if self.channel not in ("plant", "controller"):
            raise ValueError("channel must be 'plant' or 'controller'")
        if self.d < 0:
            raise ValueError("disturbance magnitude must be nonnegative")


@dataclass(frozen=True)
class EquilibriumPoint:
    x_star: np.ndarray
    ctrl_star: np.ndarray
    label: str  # positive | zero | saturating
    u_star: float
    y_star: float

    @property
    def state(self) -> np.ndarray:
        return np.concatenate([self.x_star, self.ctrl_star])


class ClosedLoop:
    """A plant in feedback with one of the positive integral controllers.

    ``actuation_sign="auto"`` is resolved here: from the DC-gain sign for a
    linear plant, from the monotonicity of the steady-state map otherwise.
    """

    def __init__(self, plant: Plant, controller: ControllerSpec, disturbance: Optional[Disturbance] = None):
        self.plant = plant
        self.disturbance = disturbance if disturbance is not None else Disturbance()
        self.linear = isinstance(plant, LtiSystem)
        self.n = plant.n
        self._ssm = None
        if controller.actuation_sign == AUTO:
            controller = controller.with_sign(self._detect_sign())
        self.controller = controller
        self.dim = self.n + controller.n_states
        E = self.disturbance.E
        if E is None:
            E = plant.E if plant.E is not None else np.zeros(self.n)
        self.E = np.asarray(E, dtype=float).ravel()
        if self.E.shape != (self.n,):
            raise DimensionMismatch("disturbance direction has the wrong length")
        if self.linear:
            self._A, self._B, self._C = plant.A, plant.B, plant.C

    # sign conventions -----------------------------------------------------------------

    def _detect_sign(self) -> str:
        if self.linear:
            return POSITIVE if dc_gain(self.plant) > 0 else NEGATIVE
        return POSITIVE if self.steady_state().direction == "increasing" else NEGATIVE

    @property
    def sign(self) -> float:
        return 1.0 if self.controller.actuation_sign == POSITIVE else -1.0

    @property
    def positive_plant(self) -> bool:
        if self.linear:
            return is_internally_positive(self.plant)
        return bool(self.plant.positive)

    def steady_state(self):
        if self.linear:
            raise TypeError("steady-state map is only needed for nonlinear plants")
        if self._ssm is None:
            plant = self.plant
            d = self.disturbance
            if d.channel == "plant" and d.d > 0:
                plant = plant.with_input_disturbance(self.E, d.d)
            self._ssm = steady_state_map(plant)
        return self._ssm

    # layout -----------------------------------------------------------------------------

    @property
    def actuated_index(self) -> int:
        """Index (within the controller block) of the state driving u."""
        if isinstance(self.controller, Antithetic) and self.controller.actuation_sign == NEGATIVE:
            return 1
        return 0

    def state_names(self) -> list[str]:
        names = [f"x{i + 1}" for i in range(self.n)]
        return names + [f"z{i + 1}" for i in range(self.controller.n_states)]

    def input_of(self, state: np.ndarray) -> float:
        return self.controller.k * state[self.n + self.actuated_index]

    def output_of(self, state: np.ndarray) -> float:
        x = state[: self.n]
        if self.linear:
            return float(self._C @ x)
        return float(self.plant.h(x))

    def controller_domain(self) -> Optional[tuple[int, float, float]]:
        """(state index, lo, hi) of an open interval the exact flow never leaves."""
        c = self.controller
        if isinstance(c, Exponential):
            return self.n, 0.0, math.inf
        if isinstance(c, Logistic):
            return self.n, 0.0, c.beta
        if isinstance(c, RegularizedTable):
            lo, hi = _image(c.kind, c.params)
            return self.n, lo, hi
        return None


def _psi(ctrl, v):
    """(psi(v), psi'(v)) for single-state controllers, so that v' = psi(v) * s * e."""
    if isinstance(ctrl, Exponential):
        return ctrl.alpha * v, ctrl.alpha
    if isinstance(ctrl, Logistic):
        a, b = ctrl.alpha, ctrl.beta
        return a / b * v * (b - v), a / b * (b - 2.0 * v)
    if isinstance(ctrl, StandardIntegral):
        return 1.0, 0.0
    if isinstance(ctrl, RegularizedTable):
        psi, dpsi = REGULARIZERS[ctrl.kind]
        return psi(v, ctrl.params), dpsi(v, ctrl.params)
    raise TypeError(f"unsupported controller {type(ctrl).__name__}")


def _rhs(cl: ClosedLoop, state: np.ndarray, mu: float, d: float) -> np.ndarray:
    n = cl.n
    x = state[:n]
    c = cl.controller
    u = c.k * state[n + cl.actuated_index]
    if cl.linear:
        xdot = cl._A @ x + cl._B * u
        y = float(cl._C @ x)
    else:
        xdot = np.asarray(cl.plant.f(x, u), dtype=float)
        y = float(cl.plant.h(x))
    if cl.disturbance.channel == "plant":
        if d:
            xdot = xdot + cl.E * d
        y_meas = y
    else:
        y_meas = y + d
    out = np.empty(cl.dim)
    out[:n] = xdot
    if isinstance(c, Antithetic):
        z1, z2 = state[n], state[n + 1]
        ann = c.k * c.eta * z1 * z2
        out[n] = mu - ann
        out[n + 1] = y_meas - ann
    else:
        psi, _ = _psi(c, state[n])
        out[n] = psi * cl.sign * (mu - y_meas)
    return out


def closed_loop_rhs(
    cl: ClosedLoop,
    state,
    t: float = 0.0,
    mu: Optional[float] = None,
    d: Optional[float] = None,
) -> np.ndarray:
    """Closed-loop vector field. ``mu`` and ``d`` override the configured values."""
    state = np.asarray(state, dtype=float)
    if state.shape != (cl.dim,):
        raise DimensionMismatch(f"state must have {cl.dim} entries, got {state.shape}")
    return _rhs(
        cl,
        state,
        cl.controller.mu if mu is None else mu,
        cl.disturbance.d if d is None else d,
    )


def jacobian_at(cl: ClosedLoop, state, mu: Optional[float] = None, d: Optional[float] = None) -> np.ndarray:
    """Analytic closed-loop Jacobian at an arbitrary state."""
    state = np.asarray(state, dtype=float)
    mu = cl.controller.mu if mu is None else mu
    d = cl.disturbance.d if d is None else d
    n = cl.n
    c = cl.controller
    x = state[:n]
    u = cl.input_of(state)
    lin = cl.plant if cl.linear else linearize(cl.plant, x, u)
    J = np.zeros((cl.dim, cl.dim))
    J[:n, :n] = lin.A
    J[:n, n + cl.actuated_index] = lin.B * c.k
    y = cl.output_of(state)
    y_meas = y + (d if cl.disturbance.channel == "controller" else 0.0)
    if isinstance(c, Antithetic):
        z1, z2 = state[n], state[n + 1]
        ke = c.k * c.eta
        J[n, n] = -ke * z2
        J[n, n + 1] = -ke * z1
        J[n + 1, :n] = lin.C
        J[n + 1, n] = -ke * z2
        J[n + 1, n + 1] = -ke * z1
    else:
        psi, dpsi = _psi(c, state[n])
        J[n, :n] = -psi * cl.sign * lin.C
        J[n, n] = dpsi * cl.sign * (mu - y_meas)
    return J


def disturbance_column(cl: ClosedLoop, state) -> np.ndarray:
    """Partial derivative of the closed-loop field with respect to ``d``."""
    state = np.asarray(state, dtype=float)
    n = cl.n
    col = np.zeros(cl.dim)
    if cl.disturbance.channel == "plant":
        col[:n] = cl.E
        return col
    c = cl.controller
    if isinstance(c, Antithetic):
        col[n + 1] = 1.0
    else:
        psi, _ = _psi(c, state[n])
        col[n] = -psi * cl.sign
    return col


# -- equilibria ------------------------------------------------------------------------


def _controller_states(cl: ClosedLoop, u_star: float, mu: float) -> np.ndarray:
    c = cl.controller
    if isinstance(c, Antithetic):
        if u_star <= 0:
            raise EquilibriumOutOfRange(f"required input {u_star} is not positive")
        act = u_star / c.k
        other = mu / (c.k * c.eta * act)
        return np.array([act, other]) if cl.actuated_index == 0 else np.array([other, act])
    return np.array([u_star / c.k])


def _linear_plant_state(cl: ClosedLoop, u: float) -> np.ndarray:
    d = cl.disturbance
    dp = d.d if d.channel == "plant" else 0.0
    return -_solve_A(cl.plant, cl.plant.B * u + cl.E * dp)


def _point(cl, x, ctrl, label, u) -> EquilibriumPoint:
    x = np.asarray(x, dtype=float)
    y = float(cl.plant.C @ x) if cl.linear else float(cl.plant.h(x))
    return EquilibriumPoint(x_star=x, ctrl_star=np.asarray(ctrl, dtype=float), label=label, u_star=float(u), y_star=y)


def equilibria(cl: ClosedLoop) -> list[EquilibriumPoint]:
    """All equilibrium points of the closed loop, the set-point one last.

    Single-state positive controllers also have a zero point (and the
    logistic one a saturating point); these are returned with their labels.
    """
    c = cl.controller
    mu = c.mu
    dist = cl.disturbance
    y_target = mu - (dist.d if dist.channel == "controller" else 0.0)
    if y_target <= 0 and not isinstance(c, StandardIntegral):
        raise InadmissibleDisturbance("controller-channel disturbance exceeds the set-point")

    points: list[EquilibriumPoint] = []
    if cl.linear:
        g = dc_gain(cl.plant)
        if g == 0:
            raise AssumptionViolated("zero DC gain")
        dp = dist.d if dist.channel == "plant" else 0.0
        cAE = float(cl.plant.C @ _solve_A(cl.plant, cl.E))
        u_star = (y_target + cAE * dp) / g
        if u_star <= 0 and not isinstance(c, StandardIntegral):
            raise InadmissibleDisturbance(
                f"no nonnegative input reaches the set-point (mu + C A^-1 E d = {mu + cAE * dp:.6g})"
            )
        x_of = lambda u: _linear_plant_state(cl, u)  # noqa: E731
    else:
        ssm = cl.steady_state()
        u_star = ssm.F_inverse(y_target)
        x_of = ssm.g

    if isinstance(c, (Exponential, Logistic)):
        try:
            points.append(_point(cl, x_of(0.0), [0.0], "zero", 0.0))
        except NewtonDiverged:
            pass
    if isinstance(c, Logistic):
        v_pos = u_star / c.k
        if v_pos >= c.beta:
            raise EquilibriumOutOfRange(
                f"set-point needs v*={v_pos:.6g} >= beta={c.beta}; no positive equilibrium"
            )
        try:
            points.append(_point(cl, x_of(c.k * c.beta), [c.beta], "saturating", c.k * c.beta))
        except NewtonDiverged:
            pass
    if isinstance(c, RegularizedTable):
        lo, hi = _image(c.kind, c.params)
        if not (lo < u_star / c.k < hi):
            raise EquilibriumOutOfRange("set-point input lies outside the regularizer image")

    ctrl = _controller_states(cl, u_star, mu)
    points.append(_point(cl, x_of(u_star), ctrl, "positive", u_star))
    return points


def positive_equilibrium(cl: ClosedLoop) -> EquilibriumPoint:
    return [p for p in equilibria(cl) if p.label == "positive"][0]


def closed_loop_jacobian(cl: ClosedLoop, eq: EquilibriumPoint) -> np.ndarray:
    return jacobian_at(cl, eq.state)


def finite_difference_jacobian(cl: ClosedLoop, state, h: float = 1e-6) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    J = np.empty((cl.dim, cl.dim))
    for i in range(cl.dim):
        step = max(h, h * abs(state[i]))
        sp, sm = state.copy(), state.copy()
        sp[i] += step
        sm[i] -= step
        J[:, i] = (closed_loop_rhs(cl, sp) - closed_loop_rhs(cl, sm)) / (2 * step)
    return J
