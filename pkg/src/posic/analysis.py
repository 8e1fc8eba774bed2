"""Stability bounds, passivity test, root loci and parameter sweeps.

The bounds on k, alpha and xi all reduce to the same question: for which
positive c does the pencil ``P0(s) + c P1(s)`` first acquire a root on the
imaginary axis?  ``_first_crossing`` answers it once, and each bound only
chooses its pencil.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from .controllers import Antithetic, ClosedLoop, Disturbance, closed_loop_jacobian, positive_equilibrium
from .errors import AssumptionViolated, EigenFailure, InadmissibleDisturbance
from .poly import (
    Polynomial,
    cluster_roots,
    jomega_split,
    poly_roots,
    positive_real_roots,
)
from .sysmodel import (
    LtiSystem,
    NonlinearSystem,
    _solve_A,
    is_hurwitz_matrix,
    linearize,
    require_assumption1,
    steady_state_map,
    transfer_function,
)

log = logging.getLogger(__name__)

MARGIN = 1e-9
INF = math.inf


# -- result types ----------------------------------------------------------------------


@dataclass(frozen=True)
class StabilityVerdict:
    max_real_part: float
    classification: str  # stable | marginal | unstable
    eigenvalues: tuple

    @property
    def stable(self) -> bool:
        return self.classification == "stable"


@dataclass(frozen=True)
class CrossingResult:
    value: float
    crossing_frequencies: tuple[float, ...]
    notes: tuple[str, ...] = ()
    validated: Optional[bool] = None


@dataclass(frozen=True)
class SprResult:
    spr: bool
    min_real_part_witness: Optional[float]


@dataclass(frozen=True)
class RejectionResult:
    rejects: bool
    singularity_residual: float


@dataclass(frozen=True)
class NonlinearBound:
    value: float
    sign: str  # positive | negative
    crossing_frequencies: tuple[float, ...] = ()
    linearization: Optional[LtiSystem] = None


@dataclass(frozen=True)
class StabilityBounds:
    k_bar_inf: float
    eta_bar_inf: float
    alpha_bar_inf: float
    xi_bar_inf: float
    crossing_frequencies: tuple[float, ...]
    spr: bool
    alpha_crossing_frequencies: tuple[float, ...] = ()
    mu: float = 1.0
    mu_bar: float = 1.0
    beta: Optional[float] = None
    notes: tuple[str, ...] = ()


@dataclass
class LocusData:
    parameter_grid: list
    branches: list  # one array of eigenvalues per grid point, columns tracked continuously
    asymptote_centroid: float
    mode: str = "eta"


@dataclass
class SweepResult:
    k_grid: np.ndarray
    eta_grid: np.ndarray
    verdicts: list  # verdicts[i][j] for (k_grid[i], eta_grid[j])
    boundary: list = field(default_factory=list)  # (eta, k) pairs where stability is lost

    @property
    def max_real_part(self) -> np.ndarray:
        return np.array([[v.max_real_part for v in row] for row in self.verdicts]).reshape(
            len(self.k_grid), len(self.eta_grid)
        )

    @property
    def stable(self) -> np.ndarray:
        return np.array([[v.stable for v in row] for row in self.verdicts], dtype=bool).reshape(
            len(self.k_grid), len(self.eta_grid)
        )


# -- eigenvalue verdicts ---------------------------------------------------------------


def local_stability(jac, margin: float = MARGIN) -> StabilityVerdict:
    J = np.asarray(jac, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ValueError("local_stability needs a square matrix")
    if not np.all(np.isfinite(J)):
        raise EigenFailure("matrix has non-finite entries")
    try:
        ev = np.linalg.eigvals(J)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from None
    m = float(np.max(ev.real)) if ev.size else -INF
    if m < -margin:
        cls = "stable"
    elif m <= margin:
        cls = "marginal"
    else:
        cls = "unstable"
    return StabilityVerdict(m, cls, tuple(complex(e) for e in ev))


def m_matrix(sys: LtiSystem, kappa: float, sign_flip: bool = False) -> np.ndarray:
    """``[[A, B kappa], [-C, 0]]``, or ``[[A, B kappa], [C, 0]]`` when ``sign_flip``."""
    n = sys.n
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = sys.A
    M[:n, n] = sys.B * kappa
    M[n, :n] = sys.C if sign_flip else -sys.C
    return M


def exponential_jacobian(sys: LtiSystem, alpha: float, mu: float, k: float = 1.0) -> np.ndarray:
    """Linearization of the exponential loop at its positive equilibrium."""
    n = sys.n
    cab = float(sys.C @ _solve_A(sys, sys.B))
    J = np.zeros((n + 1, n + 1))
    J[:n, :n] = sys.A
    J[:n, n] = sys.B * k
    J[n, :n] = alpha * sys.C * mu / (cab * k)
    return J


def logistic_worst_matrix(sys: LtiSystem, nu: float, beta: float) -> np.ndarray:
    """``[[A, B], [-nu beta C / 4, 0]]``, whose Hurwitz range in ``nu = k alpha`` defines xi."""
    return m_matrix(sys, 1.0) * np.r_[np.ones(sys.n), nu * beta / 4.0][:, None]


# -- crossing machinery ----------------------------------------------------------------


def _polish(p: Polynomial, x: float, iters: int = 3) -> float:
    dp = Polynomial([i * c for i, c in enumerate(p.coeffs)][1:] or [0.0])
    for _ in range(iters):
        d = dp(x)
        if d == 0:
            break
        step = p(x) / d
        if not math.isfinite(step) or abs(step) > 1e-3 * (1 + abs(x)):
            break
        x -= step
    return x


def _first_crossing(P0: Polynomial, P1: Polynomial) -> CrossingResult:
    """Smallest c > 0 for which ``P0 + c P1`` has a root at some ``j w``, ``w > 0``."""
    s0, s1 = jomega_split(P0), jomega_split(P1)
    det = s1.real_part * s0.imag_part - s0.real_part * s1.imag_part
    notes: list[str] = []
    if det.is_zero or det.degree < 1:
        return CrossingResult(INF, (), ("crossing determinant has no roots",))
    raw = [_polish(det, w) for w in positive_real_roots(det)]
    best = INF
    freqs: list[float] = []
    for w, mult in cluster_roots(raw):
        if mult % 2 == 0:
            notes.append(f"tangential root at w={w:.6g} (multiplicity {mult}) skipped")
            log.debug(notes[-1])
            continue
        p0, p1 = s0(w), s1(w)
        if abs(p1.real) > 1e-12 * (abs(p1) + 1e-300):
            c = -p0.real / p1.real
        elif abs(p1.imag) > 0:
            c = -p0.imag / p1.imag
        else:
            notes.append(f"spurious determinant root at w={w:.6g} discarded")
            log.debug(notes[-1])
            continue
        scale = abs(p0) + abs(c) * abs(p1) + 1e-300
        if abs(p0 + c * p1) >= 1e-6 * scale:
            notes.append(f"candidate at w={w:.6g} failed validation")
            log.debug(notes[-1])
            continue
        if c > 0:
            freqs.append(w)
            if c < best:
                best = c
    if best < INF:
        # report the crossing frequency of the infimum first
        def cval(w):
            p0, p1 = s0(w), s1(w)
            return -p0.real / p1.real if p1.real != 0 else -p0.imag / p1.imag

        freqs.sort(key=lambda w: abs(cval(w) - best))
    return CrossingResult(best, tuple(freqs), tuple(notes))


def _pencil(sys: LtiSystem):
    tf = transfer_function(sys)
    return tf.denominator.shift(1), tf.numerator, tf


def _straddles(mat_fn, value: float) -> bool:
    if not math.isfinite(value):
        return True
    return is_hurwitz_matrix(mat_fn(0.99 * value), MARGIN) and not is_hurwitz_matrix(
        mat_fn(1.01 * value), MARGIN
    )


def k_bar_inf(sys: LtiSystem) -> CrossingResult:
    """Supremal k such that ``M(k')`` is Hurwitz for every ``k'`` in ``(0, k)``."""
    require_assumption1(sys)
    P0, P1, _ = _pencil(sys)
    res = _first_crossing(P0, P1)
    ok = _straddles(lambda k: m_matrix(sys, k), res.value)
    if not ok:
        log.warning("k_bar_inf=%g not confirmed by eigenvalues at 0.99/1.01", res.value)
    return CrossingResult(res.value, res.crossing_frequencies, res.notes, ok)


def eta_bar_inf(sys: LtiSystem, mu_bar: float) -> float:
    if not mu_bar > 0:
        raise ValueError("mu_bar must be positive")
    g = require_assumption1(sys)
    k = k_bar_inf(sys).value
    return INF if math.isinf(k) else g * g * k / mu_bar


def spr_test(sys: LtiSystem) -> SprResult:
    """Frequency-domain strict positive realness test of ``C (sI - A)^{-1} B``.

    Re G(jw) |D(jw)|^2 = N_R D_R + N_I D_I is even in w, so it is examined as
    a polynomial q in x = w^2.
    """
    g = require_assumption1(sys, positive_gain=False)
    tf = transfer_function(sys)
    N, D = jomega_split(tf.numerator), jomega_split(tf.denominator)
    Q = N.real_part * D.real_part + N.imag_part * D.imag_part
    q = Q.substitute_square()
    n = sys.n

    def re_g(w):
        return float(np.real(tf(1j * w)))

    if g <= 0 or q.coeff(0) <= 0:
        return SprResult(False, 0.0)
    if q.degree >= 1:
        xs = positive_real_roots(q)
        odd = [x for x, m in cluster_roots(xs) if m % 2 == 1]
        if odd:
            dq = Polynomial([i * c for i, c in enumerate(q.coeffs)][1:])
            cands = [math.sqrt(x) for x in odd]
            if dq.degree >= 1:
                cands += [math.sqrt(x) for x in positive_real_roots(dq)]
            witness = min(cands, key=re_g)
            return SprResult(False, witness)
    # relative-degree-one limit: w^2 Re G -> lead(q) / lead(|D|^2) must be positive
    if q.degree != n - 1 or q.leading <= 0:
        return SprResult(False, INF)
    return SprResult(True, None)


def alpha_bar_inf(sys: LtiSystem, mu: float) -> CrossingResult:
    """Supremal alpha keeping the exponential loop's positive equilibrium stable."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    g = require_assumption1(sys)
    tf = transfer_function(sys)
    Nn = tf.numerator.scale(1.0 / g)
    D = tf.denominator
    Ns, Ds = jomega_split(Nn), jomega_split(D)
    Q = Ns.imag_part * Ds.imag_part + Ns.real_part * Ds.real_part
    notes: list[str] = []
    best = INF
    freqs = []
    if Q.degree >= 1:
        raw = [_polish(Q, w) for w in positive_real_roots(Q)]
        for w, mult in cluster_roots(raw):
            if mult % 2 == 0:
                notes.append(f"tangential root at w={w:.6g} skipped")
                continue
            nr, ni = Ns.real_part(w), Ns.imag_part(w)
            if abs(nr) > 1e-12 * (abs(nr) + abs(ni)):
                a = Ds.imag_part(w) * w / (mu * nr)
            elif ni != 0:
                a = -Ds.real_part(w) * w / (mu * ni)
            else:
                notes.append(f"spurious root at w={w:.6g} discarded")
                continue
            if a > 0:
                freqs.append((a, w))
                best = min(best, a)
    freqs.sort()
    ok = _straddles(lambda a: exponential_jacobian(sys, a, mu), best)
    if not ok:
        log.warning("alpha_bar_inf=%g not confirmed by eigenvalues at 0.99/1.01", best)
    return CrossingResult(best, tuple(w for _, w in freqs), tuple(notes), ok)


def xi_bar_inf(sys: LtiSystem, mu: float, beta: float) -> float:
    if not beta > 0:
        raise ValueError("beta must be positive")
    g = require_assumption1(sys)
    a = alpha_bar_inf(sys, mu).value
    return INF if math.isinf(a) else 4.0 * a * mu / (g * beta)


def _cae(sys: LtiSystem, E=None) -> float:
    E = sys.E if E is None else np.asarray(E, dtype=float).ravel()
    return float(sys.C @ _solve_A(sys, E))


def disturbance_admissible(sys: LtiSystem, d: float, mu: float, E=None) -> bool:
    """True when ``mu + C A^{-1} E d > 0``."""
    return mu + _cae(sys, E) * d > 0


def alpha_bar_disturbed(sys: LtiSystem, mu: float, d: float, E=None) -> float:
    if not disturbance_admissible(sys, d, mu, E):
        raise InadmissibleDisturbance(f"d={d} is not admissible for mu={mu}")
    a = alpha_bar_inf(sys, mu).value
    return a * mu / (mu + _cae(sys, E) * d)


def rejection_check(
    sys: Union[LtiSystem, NonlinearSystem],
    controller,
    d: float,
    channel: str = "plant",
    E=None,
    tol: float = 1e-8,
) -> RejectionResult:
    """Zero-frequency transmission-zero test for constant disturbance rejection.

    The closed-loop Jacobian is bordered by the disturbance column and the
    output row; it is singular exactly when d has no steady-state effect on y.
    """
    from .controllers import disturbance_column

    if isinstance(sys, LtiSystem) and channel == "plant" and not disturbance_admissible(
        sys, d, controller.mu, E
    ):
        raise InadmissibleDisturbance(f"d={d} is not admissible for mu={controller.mu}")
    cl = ClosedLoop(sys, controller, Disturbance(d=d, E=E, channel=channel))
    eq = positive_equilibrium(cl)
    J = closed_loop_jacobian(cl, eq)
    n = cl.dim
    col = disturbance_column(cl, eq.state)
    row = np.zeros(n)
    row[: cl.n] = sys.C if isinstance(sys, LtiSystem) else linearize(sys, eq.x_star, eq.u_star).C
    Bm = np.zeros((n + 1, n + 1))
    Bm[:n, :n] = J
    Bm[:n, n] = col
    Bm[n, :n] = row
    sv = np.linalg.svd(Bm, compute_uv=False)
    resid = float(sv[-1] / sv[0])
    return RejectionResult(resid < tol, resid)


# -- nonlinear plants ------------------------------------------------------------------


def signed_linearization(sys: NonlinearSystem, mu: float) -> tuple[LtiSystem, str]:
    """Linearization at the set-point, with the output negated for decreasing plants.

    The returned system always has positive DC gain, so the linear bounds apply.
    """
    ssm = steady_state_map(sys)
    u = ssm.F_inverse(mu)
    lin = linearize(sys, ssm.g(u), u)
    if ssm.direction == "increasing":
        return lin, "positive"
    return LtiSystem(lin.A, lin.B, -lin.C, name=lin.name), "negative"


def k_bar_nonlinear(sys: NonlinearSystem, mu: float) -> NonlinearBound:
    lin, sign = signed_linearization(sys, mu)
    res = k_bar_inf(lin)
    return NonlinearBound(res.value, sign, res.crossing_frequencies, lin)


# -- root locus ------------------------------------------------------------------------


def _track(rows: list[np.ndarray]) -> list[np.ndarray]:
    """Reorder each root set to continue the previous one (minimal total displacement)."""
    if not rows:
        return rows
    out = [np.sort_complex(rows[0])]
    for r in rows[1:]:
        prev = out[-1]
        if len(r) != len(prev):
            out.append(np.sort_complex(r))
            continue
        cost = np.abs(prev[:, None] - r[None, :])
        _, cols = linear_sum_assignment(cost)
        out.append(r[cols])
    return out


def _vieta_centroid(poles: Polynomial, zeros: Polynomial) -> float:
    """(sum of poles - sum of zeros) / (pole-zero excess)."""
    excess = poles.degree - zeros.degree
    sp = -poles.coeff(poles.degree - 1) / poles.leading
    sz = -zeros.coeff(zeros.degree - 1) / zeros.leading if zeros.degree >= 1 else 0.0
    return (sp - sz) / excess


def root_locus(sys: LtiSystem, k: float, eta_grid: Sequence[float], mu: float = 1.0) -> LocusData:
    """Closed-loop poles along ``eta`` at fixed ``k`` (antithetic loop)."""
    g = require_assumption1(sys)
    tf = transfer_function(sys)
    N, D = tf.numerator, tf.denominator
    s = Polynomial([0.0, 1.0])
    base = s * Polynomial([g * k, 1.0]) * D
    zero_poly = N.scale(k) + D.shift(1)
    rows = []
    for eta in eta_grid:
        theta = mu * eta / g
        rows.append(poly_roots(base + zero_poly.scale(theta)))
    return LocusData(list(map(float, eta_grid)), _track(rows), _vieta_centroid(base, zero_poly), "eta")


def root_locus_gain(sys: LtiSystem, eta: float, k_grid: Sequence[float], mu: float = 1.0) -> LocusData:
    """Closed-loop poles along ``k`` at fixed ``eta``."""
    g = require_assumption1(sys)
    tf = transfer_function(sys)
    N, D = tf.numerator, tf.denominator
    theta = mu * eta / g
    sD = D.shift(1)
    base = Polynomial([theta, 1.0]) * sD
    zero_poly = sD.scale(g) + N.scale(theta)
    rows = [poly_roots(base + zero_poly.scale(k)) for k in k_grid]
    return LocusData(list(map(float, k_grid)), _track(rows), _vieta_centroid(base, zero_poly), "k")


def locus_endpoints(sys: LtiSystem, k: float) -> np.ndarray:
    """Finite limits of the eta-locus as eta grows: roots of ``k N(s) + s D(s)``."""
    tf = transfer_function(sys)
    return poly_roots(tf.numerator.scale(k) + tf.denominator.shift(1))


# -- sweeps and bisection --------------------------------------------------------------


def _antithetic_verdict(sys, k: float, eta: float, mu: float) -> StabilityVerdict:
    cl = ClosedLoop(sys, Antithetic(mu=mu, k=k, eta=eta, actuation_sign="auto"))
    return local_stability(closed_loop_jacobian(cl, positive_equilibrium(cl)))


def _boundary(k_grid, eta_grid, mrp: np.ndarray) -> list[tuple[float, float]]:
    out = []
    for j, eta in enumerate(eta_grid):
        col = mrp[:, j]
        for i in range(len(k_grid) - 1):
            a, b = col[i], col[i + 1]
            if a < -MARGIN and b >= -MARGIN:
                # linear interpolation of the zero crossing of max Re
                t = a / (a - b) if a != b else 0.0
                out.append((float(eta), float(k_grid[i] + t * (k_grid[i + 1] - k_grid[i]))))
                break
    return out


def bifurcation_sweep(
    sys: Union[LtiSystem, NonlinearSystem],
    k_grid: Sequence[float],
    eta_grid: Sequence[float],
    mu: float,
    workers: Optional[int] = None,
) -> SweepResult:
    """Stability verdict of the antithetic loop on every (k, eta) cell."""
    k_grid = np.asarray(k_grid, dtype=float)
    eta_grid = np.asarray(eta_grid, dtype=float)
    cells = [(i, j) for i in range(len(k_grid)) for j in range(len(eta_grid))]

    def run(ij):
        i, j = ij
        return _antithetic_verdict(sys, k_grid[i], eta_grid[j], mu)

    if workers and workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            flat = list(ex.map(run, cells))
    else:
        flat = [run(c) for c in cells]
    verdicts = [flat[i * len(eta_grid) : (i + 1) * len(eta_grid)] for i in range(len(k_grid))]
    res = SweepResult(k_grid, eta_grid, verdicts)
    if len(k_grid) and len(eta_grid):
        res.boundary = _boundary(k_grid, eta_grid, res.max_real_part)
    return res


def k_bar_local(
    sys: Union[LtiSystem, NonlinearSystem],
    mu: float,
    eta: float,
    k_start: float = 1e-3,
    tol: float = 1e-10,
    k_max: float = 1e8,
) -> float:
    """Stability threshold in k of the antithetic loop at fixed (mu, eta), by bisection.

    Returns +inf if no loss of stability is found below ``k_max``.
    """

    def stable(k):
        return _antithetic_verdict(sys, k, eta, mu).stable

    lo = k_start
    if not stable(lo):
        raise AssumptionViolated(f"closed loop is not stable at the starting gain k={lo}")
    hi = 2.0 * lo
    while stable(hi):
        lo, hi = hi, 2.0 * hi
        if hi > k_max:
            return INF
    while hi - lo > tol * max(1.0, hi):
        m = 0.5 * (lo + hi)
        if stable(m):
            lo = m
        else:
            hi = m
    return 0.5 * (lo + hi)


def compute_bounds(sys: LtiSystem, mu: float, mu_bar: float, beta: Optional[float] = None) -> StabilityBounds:
    g = require_assumption1(sys)
    kr = k_bar_inf(sys)
    ar = alpha_bar_inf(sys, mu)
    k = kr.value
    a = ar.value
    eta = INF if math.isinf(k) else g * g * k / mu_bar
    xi = INF if beta is None or math.isinf(a) else 4.0 * a * mu / (g * beta)
    if beta is None:
        xi = math.nan
    spr = spr_test(sys).spr
    notes = list(kr.notes) + list(ar.notes) + list(sys.notes)
    if spr != math.isinf(k):
        notes.append("SPR verdict and k_bar_inf disagree")
        log.warning(notes[-1])
    return StabilityBounds(
        k_bar_inf=k,
        eta_bar_inf=eta,
        alpha_bar_inf=a,
        xi_bar_inf=xi,
        crossing_frequencies=kr.crossing_frequencies,
        spr=spr,
        alpha_crossing_frequencies=ar.crossing_frequencies,
        mu=mu,
        mu_bar=mu_bar,
        beta=beta,
        notes=tuple(notes),
    )


__all__ = [
    "CrossingResult",
    "LocusData",
    "NonlinearBound",
    "RejectionResult",
    "SprResult",
    "StabilityBounds",
    "StabilityVerdict",
    "SweepResult",
    "alpha_bar_disturbed",
    "alpha_bar_inf",
    "bifurcation_sweep",
    "compute_bounds",
    "disturbance_admissible",
    "eta_bar_inf",
    "exponential_jacobian",
    "k_bar_inf",
    "k_bar_local",
    "k_bar_nonlinear",
    "local_stability",
    "locus_endpoints",
    "logistic_worst_matrix",
    "m_matrix",
    "rejection_check",
    "root_locus",
    "root_locus_gain",
    "signed_linearization",
    "spr_test",
    "xi_bar_inf",
]
