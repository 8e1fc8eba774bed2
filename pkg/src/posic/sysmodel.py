"""Linear and nonlinear positive systems.

Linear plants are single-input single-output state-space triples (A, B, C)
with an optional disturbance direction E. Nonlinear plants carry their vector
field, output map and, when known, analytic Jacobians and steady-state maps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    AssumptionViolated,
    DimensionMismatch,
    NewtonDiverged,
    NonFiniteJacobian,
    NonMonotone,
    SingularA,
    ZeroDcGain,
)
from .poly import Polynomial

log = logging.getLogger(__name__)


def _frozen(a, shape=None) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """SISO system ``x' = A x + B u + E d``, ``y = C x``.

    B, C and E are stored as flat length-n vectors.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    E: Optional[np.ndarray] = None
    name: str = ""
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionMismatch(f"A must be square, got shape {A.shape}")
        B = np.asarray(self.B, dtype=float).ravel()
        C = np.asarray(self.C, dtype=float).ravel()
        E = np.zeros(n) if self.E is None else np.asarray(self.E, dtype=float).ravel()
        for label, v in (("B", B), ("C", C), ("E", E)):
            if v.shape != (n,):
                raise DimensionMismatch(f"{label} must have {n} entries, got {v.size}")
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "B", _frozen(B))
        object.__setattr__(self, "C", _frozen(C))
        object.__setattr__(self, "E", _frozen(E))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def with_disturbance(self, E) -> "LtiSystem":
        return LtiSystem(self.A, self.B, self.C, E, self.name, self.notes)

    def as_nonlinear(self) -> "NonlinearSystem":
        A, B, C = self.A, self.B, self.C
        return NonlinearSystem(
            dim=self.n,
            f=lambda x, u: A @ x + B * u,
            h=lambda x: float(C @ x),
            name=self.name or "linear",
            positive=is_internally_positive(self),
        )


@dataclass(frozen=True, eq=False)
class NonlinearSystem:
    """``x' = f(x, u)``, ``y = h(x)`` on the nonnegative orthant.

    ``jac_x``, ``jac_u`` and ``jac_h`` are optional analytic derivatives;
    missing ones fall back to central differences. ``steady_state`` is an
    optional closed-form solution ``u -> x`` of ``f(x, u) = 0`` used in place
    of Newton iterations. ``positive`` is a claim made by the caller (proven
    for the built-ins) and is never inferred.
    """

    dim: int
    f: Callable[[np.ndarray, float], np.ndarray]
    h: Callable[[np.ndarray], float]
    jac_x: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    jac_u: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    jac_h: Optional[Callable[[np.ndarray], np.ndarray]] = None
    steady_state: Optional[Callable[[float], np.ndarray]] = None
    x_seed: Optional[np.ndarray] = None
    u_range: tuple[float, float] = (0.0, 1.0)
    E: Optional[np.ndarray] = None
    name: str = ""
    builtin_id: Optional[str] = None
    params: dict = field(default_factory=dict)
    positive: bool = False

    @property
    def n(self) -> int:
        return self.dim

    @property
    def jacobian_mode(self) -> str:
        return "analytic" if self.jac_x is not None else "finite-difference"

    def seed(self) -> np.ndarray:
        if self.x_seed is None:
            return np.ones(self.dim)
        return np.asarray(self.x_seed, dtype=float).copy()

    def with_input_disturbance(self, E, d: float) -> "NonlinearSystem":
        """Same plant with a constant additive ``E d`` term folded into ``f``."""
        E = np.asarray(E, dtype=float).ravel()
        f0 = self.f
        return NonlinearSystem(
            dim=self.dim,
            f=lambda x, u: f0(x, u) + E * d,
            h=self.h,
            jac_x=self.jac_x,
            jac_u=self.jac_u,
            jac_h=self.jac_h,
            steady_state=None,
            x_seed=self.x_seed,
            u_range=self.u_range,
            E=E,
            name=self.name,
            builtin_id=self.builtin_id,
            params=dict(self.params),
            positive=self.positive,
        )


@dataclass(frozen=True)
class TransferFunction:
    numerator: Polynomial
    denominator: Polynomial

    def __call__(self, s):
        return self.numerator(s) / self.denominator(s)

    @property
    def dc_gain(self) -> float:
        return self.numerator.coeff(0) / self.denominator.coeff(0)

    @property
    def relative_degree(self) -> int:
        return self.denominator.degree - self.numerator.degree


@dataclass(frozen=True)
class Assumption1Report:
    hurwitz: bool
    dc_gain: float

    @property
    def holds(self) -> bool:
        return self.hurwitz and self.dc_gain != 0.0


@dataclass(frozen=True)
class SteadyStateMap:
    F: Callable[[float], float]
    F_inverse: Callable[[float], float]
    g: Callable[[float], np.ndarray]
    direction: str  # "increasing" | "decreasing"


def is_metzler(A) -> bool:
    A = np.asarray(A, dtype=float)
    off = A[~np.eye(A.shape[0], dtype=bool)]
    return bool(np.all(off >= 0.0))


def is_internally_positive(sys: LtiSystem) -> bool:
    return (
        is_metzler(sys.A)
        and bool(np.all(sys.B >= 0))
        and bool(np.all(sys.C >= 0))
        and bool(np.all(sys.E >= 0))
    )


def is_hurwitz_matrix(A, margin: float = 1e-9) -> bool:
    return bool(np.max(np.linalg.eigvals(np.asarray(A, dtype=float)).real) < -margin)


def _solve_A(sys: LtiSystem, rhs: np.ndarray) -> np.ndarray:
    try:
        cond = np.linalg.cond(sys.A)
        if not np.isfinite(cond) or cond > 1e14:
            raise np.linalg.LinAlgError
        return np.linalg.solve(sys.A, rhs)
    except np.linalg.LinAlgError:
        raise SingularA("A is singular; the DC gain is undefined") from None


def dc_gain(sys: LtiSystem) -> float:
    """``g = -C A^{-1} B``."""
    return float(-sys.C @ _solve_A(sys, sys.B))


def check_assumption1(sys: LtiSystem) -> Assumption1Report:
    hurwitz = is_hurwitz_matrix(sys.A)
    return Assumption1Report(hurwitz=hurwitz, dc_gain=dc_gain(sys))


def require_assumption1(sys: LtiSystem, positive_gain: bool = True) -> float:
    """Return the DC gain, raising when the analysis premises do not hold."""
    if not is_hurwitz_matrix(sys.A):
        raise AssumptionViolated("A is not Hurwitz")
    try:
        g = dc_gain(sys)
    except SingularA as exc:
        raise AssumptionViolated(str(exc)) from None
    if g == 0.0 or not np.isfinite(g):
        raise AssumptionViolated("zero DC gain (C A^-1 B = 0)")
    if positive_gain and g < 0:
        raise AssumptionViolated(
            "negative DC gain; flip the output sign (negative-gain actuation)"
        )
    return g


def transfer_function(sys: LtiSystem) -> TransferFunction:
    """``C (sI - A)^{-1} B`` via the Faddeev-LeVerrier recursion."""
    A, B, C = sys.A, sys.B, sys.C
    n = sys.n
    M = np.eye(n)
    den = [0.0] * (n + 1)  # descending: den[0] = 1
    den[0] = 1.0
    num_desc = []
    for k in range(1, n + 1):
        num_desc.append(float(C @ M @ B))
        AM = A @ M
        c = -np.trace(AM) / k
        den[k] = c
        M = AM + c * np.eye(n)
    num = Polynomial(num_desc[::-1])
    return TransferFunction(num, Polynomial(den[::-1]))


def normalized_transfer(sys: LtiSystem) -> TransferFunction:
    tf = transfer_function(sys)
    g = tf.dc_gain
    if g == 0.0 or not np.isfinite(g):
        raise ZeroDcGain("cannot normalize a transfer function with zero DC gain")
    return TransferFunction(tf.numerator.scale(1.0 / g), tf.denominator)


# -- nonlinear plants ------------------------------------------------------------------


def _fd_step(v: float) -> float:
    return max(1e-6, 1e-6 * abs(v))


def _jac_x(sys: NonlinearSystem, x: np.ndarray, u: float) -> np.ndarray:
    if sys.jac_x is not None:
        return np.atleast_2d(np.asarray(sys.jac_x(x, u), dtype=float))
    n = sys.dim
    J = np.empty((n, n))
    for i in range(n):
        h = _fd_step(x[i])
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        J[:, i] = (np.asarray(sys.f(xp, u)) - np.asarray(sys.f(xm, u))) / (2 * h)
    return J


def _jac_u(sys: NonlinearSystem, x: np.ndarray, u: float) -> np.ndarray:
    if sys.jac_u is not None:
        return np.asarray(sys.jac_u(x, u), dtype=float).ravel()
    h = _fd_step(u)
    return (np.asarray(sys.f(x, u + h)) - np.asarray(sys.f(x, u - h))).ravel() / (2 * h)


def _jac_h(sys: NonlinearSystem, x: np.ndarray) -> np.ndarray:
    if sys.jac_h is not None:
        return np.asarray(sys.jac_h(x), dtype=float).ravel()
    out = np.empty(sys.dim)
    for i in range(sys.dim):
        h = _fd_step(x[i])
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        out[i] = (sys.h(xp) - sys.h(xm)) / (2 * h)
    return out


def linearize(sys: NonlinearSystem | LtiSystem, x_star, u_star: float) -> LtiSystem:
    if isinstance(sys, LtiSystem):
        return sys
    x = np.asarray(x_star, dtype=float).ravel()
    A = _jac_x(sys, x, float(u_star))
    B = _jac_u(sys, x, float(u_star))
    C = _jac_h(sys, x)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B)) and np.all(np.isfinite(C))):
        raise NonFiniteJacobian(f"non-finite Jacobian at x={x}, u={u_star}")
    return LtiSystem(A, B, C, name=f"{sys.name} (linearized)")


def solve_steady_state(
    sys: NonlinearSystem,
    u: float,
    x0: Optional[np.ndarray] = None,
    tol: float = 1e-10,
    max_iter: int = 100,
) -> np.ndarray:
    """Damped Newton solve of ``f(x, u) = 0``; the step is halved until the residual drops."""
    x = sys.seed() if x0 is None else np.asarray(x0, dtype=float).copy()
    r = np.asarray(sys.f(x, u), dtype=float)
    for _ in range(max_iter):
        if np.max(np.abs(r)) < tol:
            return x
        J = _jac_x(sys, x, u)
        try:
            dx = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise NewtonDiverged(f"singular Jacobian at x={x}, u={u}") from None
        lam = 1.0
        norm0 = np.linalg.norm(r)
        while lam > 1e-12:
            x_try = x + lam * dx
            r_try = np.asarray(sys.f(x_try, u), dtype=float)
            if np.all(np.isfinite(r_try)) and np.linalg.norm(r_try) < norm0:
                break
            lam *= 0.5
        else:
            # no decrease possible: accept if already at roundoff level
            if np.max(np.abs(r)) < 1e3 * tol:
                return x
            raise NewtonDiverged(f"line search stalled at x={x}, u={u}")
        x, r = x_try, r_try
    if np.max(np.abs(r)) < tol:
        return x
    raise NewtonDiverged(f"no convergence after {max_iter} iterations (u={u})")


def steady_state_map(
    sys: NonlinearSystem,
    u_range: Optional[tuple[float, float]] = None,
    n_samples: int = 33,
) -> SteadyStateMap:
    lo, hi = sys.u_range if u_range is None else u_range
    if sys.steady_state is not None:
        g = lambda u: np.asarray(sys.steady_state(float(u)), dtype=float)  # noqa: E731
    else:
        g = lambda u: solve_steady_state(sys, float(u))  # noqa: E731

    def F(u: float) -> float:
        return float(sys.h(g(u)))

    us = np.linspace(lo, hi, n_samples)
    Fs = np.array([F(u) for u in us])
    dF = np.diff(Fs)
    if np.all(dF > 0):
        direction = "increasing"
    elif np.all(dF < 0):
        direction = "decreasing"
    else:
        raise NonMonotone(f"steady-state output is not strictly monotone on [{lo}, {hi}]")
    sgn = 1.0 if direction == "increasing" else -1.0

    def F_inverse(mu: float) -> float:
        a, b = lo, hi
        fa, fb = sgn * (F(a) - mu), sgn * (F(b) - mu)
        grow = 0
        while fb < 0 and grow < 60:
            a, fa = b, fb
            b = b + max(1.0, b - lo) * 2.0
            fb = sgn * (F(b) - mu)
            grow += 1
        if fa > 0 or fb < 0:
            raise AssumptionViolated(f"set-point {mu} is outside the attainable output range")
        while b - a > 1e-10 * max(1.0, abs(b)):
            m = 0.5 * (a + b)
            fm = sgn * (F(m) - mu)
            if fm < 0:
                a, fa = m, fm
            else:
                b, fb = m, fm
        # final secant refinement inside the bracket
        if fb != fa:
            m = a - fa * (b - a) / (fb - fa)
            if a <= m <= b:
                return float(m)
        return 0.5 * (a + b)

    return SteadyStateMap(F=F, F_inverse=F_inverse, g=g, direction=direction)


def positivity_violations(
    sys: NonlinearSystem,
    n_samples: int = 200,
    scale: float = 10.0,
    seed: int = 0,
) -> list[tuple[int, np.ndarray, float]]:
    """Sampled check that ``f_i(x, u) >= 0`` whenever ``x_i = 0`` and ``h(x) >= 0``.

    Returns the offending (coordinate, state, input) samples; the condition
    is not decidable in general, so an empty list is evidence, not proof.
    """
    rng = np.random.default_rng(seed)
    bad = []
    for _ in range(n_samples):
        x = rng.uniform(0.0, scale, sys.dim)
        u = float(rng.uniform(0.0, scale))
        if sys.h(x) < 0:
            bad.append((-1, x, u))
        for i in range(sys.dim):
            xi = x.copy()
            xi[i] = 0.0
            if np.asarray(sys.f(xi, u))[i] < -1e-12:
                bad.append((i, xi, u))
    return bad
