"""Doubly periodic single-species solver: constrained minimization plus a
numerical mountain pass for the second solution.

Working variables: the substitution U = u0/2 + (u+v)/2, V = u0/2 + (u-v)/2
turns the original pair (U, V) into smooth unknowns (u, v), decomposed into
mean-zero parts and constants, u = u' + c1, v = v' + c2.  On the admissible
set (two integral inequalities) the constants solve a pair of quadratic
constraint equations with a unique consistent root, found here by bracketed
bisection refined with safeguarded Newton.  The first solution minimizes the
reduced functional J over the admissible set; the second is a mountain-pass
saddle of the full functional I, located by relaxing the maximal-energy node
of a discretized path and then descending the saddle-branch reduced energy,
whose plain minimum is that saddle.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.fft import fftn, ifftn
from scipy.sparse.linalg import LinearOperator, minres

from .background import BackgroundTorus, VortexSet, torus_background, vortex_node_mask
from .errors import (
    AdmissibilityError,
    BoundaryTrappingError,
    ConfigError,
    InfeasibleError,
    MountainPassCollapseError,
    NonConvergenceError,
)
from .fields import (
    GridDomain,
    _k2,
    dirichlet_inner_values,
    integrate_values,
    laplacian_values,
    torus_shifted_inverse,
)
from .minimize import minimize_lbfgs, newton_polish
from .model import ModelParams

EXP_CLAMP = 50.0


# ---------------------------------------------------------------------------
# scalar structure: gamma, feasibility, constraint coefficients
# ---------------------------------------------------------------------------


def gamma(params: ModelParams) -> float:
    """Coupling asymmetry (beta - alpha)/(beta + alpha), in (0, 1)."""
    if not params.beta > params.alpha > 0:
        raise ConfigError("gamma requires beta > alpha > 0")
    return (params.beta - params.alpha) / (params.beta + params.alpha)


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    margin: float  # alpha*beta*|Omega| - 8*pi*n, either sign


def feasibility(params: ModelParams, n: int, area: float) -> Feasibility:
    """Necessary existence condition alpha*beta*|Omega| >= 8*pi*n."""
    if n < 0 or area <= 0:
        raise ConfigError("need n >= 0 and a positive cell area")
    margin = params.alpha * params.beta * area - 8.0 * math.pi * n
    return Feasibility(margin >= 0.0, margin)


@dataclass(frozen=True)
class ConstraintCoeffs:
    q1: float
    q2: float
    gamma: float


def _exp_clip(x: np.ndarray) -> np.ndarray:
    return np.exp(np.minimum(x, EXP_CLAMP))


@dataclass(frozen=True)
class StateIntegrals:
    """The five quadratures the constraint algebra is built from."""

    e1: float  # ∫ e^{2u0+2u'}
    e2: float  # ∫ e^{2v'}
    j1: float  # ∫ e^{u0+u'}
    j2: float  # ∫ e^{v'}
    g: float   # ∫ e^{u0+u'+v'}


def state_integrals(u_prime: np.ndarray, v_prime: np.ndarray,
                    bg: BackgroundTorus) -> StateIntegrals:
    dom = bg.domain
    eu = _exp_clip(bg.u0 + u_prime)
    ev = _exp_clip(v_prime)
    return StateIntegrals(
        e1=integrate_values(eu * eu, dom),
        e2=integrate_values(ev * ev, dom),
        j1=integrate_values(eu, dom),
        j2=integrate_values(ev, dom),
        g=integrate_values(eu * ev, dom),
    )


def constraint_coeffs(u_prime: np.ndarray, v_prime: np.ndarray,
                      c1: float, c2: float, bg: BackgroundTorus,
                      params: ModelParams) -> ConstraintCoeffs:
    """Q1 (needs e^{c2}) and Q2 (needs e^{c1}) of the constraint quadratics."""
    gam = gamma(params)
    s = state_integrals(u_prime, v_prime, bg)
    q1 = (1.0 - gam) * s.j1 + gam * math.exp(c2) * s.g
    q2 = (1.0 - gam) * s.j2 + gam * math.exp(c1) * s.g
    return ConstraintCoeffs(q1, q2, gam)


def admissibility_margins(u_prime: np.ndarray, v_prime: np.ndarray,
                          bg: BackgroundTorus, params: ModelParams) -> Tuple[float, float]:
    """Left-minus-right of the two admissibility inequalities (>= 0 inside)."""
    gam = gamma(params)
    s = state_integrals(u_prime, v_prime, bg)
    ab = params.alpha * params.beta
    thr = 8.0 * math.pi * bg.n / ((1.0 - gam) ** 2 * ab)
    return (s.j1**2 - thr * s.e1, s.j2**2 - gam * thr * s.e2)


def admissible(u_prime: np.ndarray, v_prime: np.ndarray, bg: BackgroundTorus,
               params: ModelParams) -> bool:
    m1, m2 = admissibility_margins(u_prime, v_prime, bg, params)
    return m1 >= 0.0 and m2 >= 0.0


# ---------------------------------------------------------------------------
# constants from the constraints: the scalar root problem
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CSolve:
    c1: float
    c2: float
    root: float          # X0 = e^{c1}
    residual_1: float    # relative residual of the first constraint quadratic
    residual_2: float
    iterations: int


class _CMaps:
    """g1, g2 and F(X) = X - g1(g2(X)) for a fixed admissible state."""

    def __init__(self, s: StateIntegrals, gam: float, n: int, alphabeta: float):
        self.s = s
        self.gam = gam
        self.d1 = 8.0 * math.pi * n / alphabeta * s.e1
        self.d2 = 8.0 * self.gam * math.pi * n / alphabeta * s.e2
        self.n = n
        self.ab = alphabeta

    def _branch(self, q: float, d: float, e: float, sign: float) -> float:
        disc = q * q - d
        if disc < 0.0:
            if disc < -1e-10 * q * q:
                raise AdmissibilityError(
                    "constraint discriminant went negative mid-iteration",
                    constraint="discriminant")
            disc = 0.0
        return (q + sign * math.sqrt(disc)) / (2.0 * e)

    def q1(self, x2: float) -> float:
        return (1.0 - self.gam) * self.s.j1 + self.gam * x2 * self.s.g

    def q2(self, x1: float) -> float:
        return (1.0 - self.gam) * self.s.j2 + self.gam * x1 * self.s.g

    def g1(self, x2: float, sign: float = 1.0) -> float:
        return self._branch(self.q1(x2), self.d1, self.s.e1, sign)

    def g2(self, x1: float, sign: float = 1.0) -> float:
        return self._branch(self.q2(x1), self.d2, self.s.e2, sign)

    def f(self, x: float) -> float:
        return x - self.g1(self.g2(x))

    def f_prime(self, x: float) -> float:
        x2 = self.g2(x)
        q2 = self.q2(x)
        q1 = self.q1(x2)
        dg2 = self.gam * self.s.g * x2 / math.sqrt(max(q2 * q2 - self.d2, 1e-300))
        dg1 = self.gam * self.s.g * self.g1(x2) / math.sqrt(max(q1 * q1 - self.d1, 1e-300))
        return 1.0 - dg1 * dg2


def _cmaps(u_prime: np.ndarray, v_prime: np.ndarray, bg: BackgroundTorus,
           params: ModelParams) -> _CMaps:
    if not admissible(u_prime, v_prime, bg, params):
        m1, m2 = admissibility_margins(u_prime, v_prime, bg, params)
        which = "first" if m1 < 0 else "second"
        raise AdmissibilityError(
            f"state violates the {which} admissibility inequality "
            f"(margins {m1:.3e}, {m2:.3e})", constraint=which)
    return _CMaps(state_integrals(u_prime, v_prime, bg), gamma(params), bg.n,
                  params.alpha * params.beta)


def _solve_c_branch(maps: _CMaps, saddle: bool) -> Tuple[float, float, float, int]:
    """Root of the branch fixed-point equation; returns (c1, c2, X0, iters).

    saddle=False: X = g1(g2(X)) with both upper roots (the constrained
    minimizer's constants; F(X)/X strictly increasing makes the root unique).
    saddle=True: lower root for the first constraint, upper for the second --
    the index-1 combination whose c1-curvature is negative.
    """
    sign1 = -1.0 if saddle else 1.0

    def f(x: float) -> float:
        return x - maps.g1(maps.g2(x), sign=sign1)

    if saddle:
        if maps.n == 0 or maps.d1 <= 0.0:
            raise AdmissibilityError(
                "the saddle branch needs a positive vortex number")
        x_hi = _solve_c_branch(maps, saddle=False)[2]
        x_lo = 1e-300
        if f(x_hi) < 0.0:
            raise AdmissibilityError("saddle branch root not bracketed")
        lo, hi = x_lo, x_hi
        it = 0
    else:
        x_lo = 0.5 * (1.0 - maps.gam) * maps.s.j1 / maps.s.e1
        it = 0
        while f(x_lo) > 0.0 and x_lo > 1e-300:
            x_lo *= 0.5
            it += 1
            if it > 600:
                raise AdmissibilityError(
                    "failed to bracket the constraint root from below")
        x_hi = max(2.0 * x_lo, 1.0)
        while f(x_hi) < 0.0:
            x_hi *= 2.0
            it += 1
            if it > 700:
                raise AdmissibilityError(
                    "failed to bracket the constraint root from above")
        lo, hi = x_lo, x_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
        if hi - lo <= 1e-16 * hi:
            break
    x = 0.5 * (lo + hi)
    x2 = maps.g2(x)
    return math.log(x), math.log(x2), x, it


def solve_c(u_prime: np.ndarray, v_prime: np.ndarray, bg: BackgroundTorus,
            params: ModelParams, method: str = "newton") -> CSolve:
    """Solve the two constraint quadratics for (c1, c2).

    Bracketed bisection on F(X) = X - g1(g2(X)) (X = e^{c1}), optionally
    refined by safeguarded Newton using the closed-form branch derivatives.
    F(X)/X is strictly increasing, so the bracket is certain once F changes
    sign.
    """
    if method not in ("newton", "bisection"):
        raise ConfigError(f"unknown root method {method!r}")
    maps = _cmaps(u_prime, v_prime, bg, params)
    c1, c2, x, it = _solve_c_branch(maps, saddle=False)
    if method == "newton":
        lo, hi = x * (1.0 - 1e-12), x * (1.0 + 1e-12)
        while maps.f(lo) > 0.0:
            lo *= 1.0 - 1e-9
        while maps.f(hi) < 0.0:
            hi *= 1.0 + 1e-9
        for _ in range(60):
            fx = maps.f(x)
            dfx = maps.f_prime(x)
            if dfx <= 0.0:
                break
            x_new = x - fx / dfx
            if not (lo <= x_new <= hi):
                x_new = 0.5 * (lo + hi)
            if maps.f(x_new) < 0.0:
                lo = x_new
            else:
                hi = x_new
            it += 1
            if abs(x_new - x) <= 1e-16 * x:
                x = x_new
                break
            x = x_new
        c1 = math.log(x)
        c2 = math.log(maps.g2(x))
    x2 = math.exp(c2)
    r1, r2 = constraint_residuals(maps, x, x2)
    return CSolve(c1, c2, x, r1, r2, it)


def constraint_residuals(maps: _CMaps, x1: float, x2: float) -> Tuple[float, float]:
    """Relative residuals of the two constraint quadratics at (e^c1, e^c2)."""
    s, gam = maps.s, maps.gam
    q1 = maps.q1(x2)
    q2 = maps.q2(x1)
    t1 = (x1 * x1 * s.e1, -x1 * q1, 2.0 * math.pi * maps.n / maps.ab)
    t2 = (x2 * x2 * s.e2, -x2 * q2, 2.0 * gam * math.pi * maps.n / maps.ab)
    r1 = abs(sum(t1)) / max(max(abs(v) for v in t1), 1e-300)
    r2 = abs(sum(t2)) / max(max(abs(v) for v in t2), 1e-300)
    return r1, r2


# ---------------------------------------------------------------------------
# the functional, its gradient, Hessian action and vacuum preconditioner
# ---------------------------------------------------------------------------


class TorusOperator:
    """Discrete functional I on full fields (u, v) = (u'+c1, v'+c2)."""

    def __init__(self, bg: BackgroundTorus, params: ModelParams):
        params.require_torus_mode()
        self.bg = bg
        self.params = params
        self.domain = bg.domain
        p = params
        self.a = 0.5 * (1.0 / p.alpha + 1.0 / p.beta)
        self.b = 0.5 * (1.0 / p.alpha - 1.0 / p.beta)
        self.source = 4.0 * math.pi * bg.n / self.domain.area
        self.clamp_hit = False

    def _pr(self, u: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        eu = self.bg.u0 + u
        if np.max(eu) > EXP_CLAMP or np.max(v) > EXP_CLAMP:
            self.clamp_hit = True
        return _exp_clip(eu), _exp_clip(v)

    def energy(self, u: np.ndarray, v: np.ndarray) -> float:
        p, dom = self.params, self.domain
        P, R = self._pr(u, v)
        val = self.a * 0.5 * (dirichlet_inner_values(u, u, dom)
                              + dirichlet_inner_values(v, v, dom))
        val += self.b * dirichlet_inner_values(u, v, dom)
        val += p.alpha * integrate_values((P + R - 2.0) ** 2, dom)
        val += p.beta * integrate_values((P - R) ** 2, dom)
        val += self.source * (2.0 * self.a) * integrate_values(u, dom)
        val += self.source * (2.0 * self.b) * integrate_values(v, dom)
        return float(val)

    def gradient(self, u: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        p, dom = self.params, self.domain
        P, R = self._pr(u, v)
        lap_u = laplacian_values(u, dom)
        lap_v = laplacian_values(v, dom)
        common = 2.0 * p.alpha * (P + R - 2.0)
        diff = 2.0 * p.beta * (P - R)
        gu = -self.a * lap_u - self.b * lap_v + (common + diff) * P \
            + self.source * 2.0 * self.a
        gv = -self.b * lap_u - self.a * lap_v + (common - diff) * R \
            + self.source * 2.0 * self.b
        return gu, gv

    def hess_vec(self, u: np.ndarray, v: np.ndarray, du: np.ndarray,
                 dv: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        p, dom = self.params, self.domain
        P, R = self._pr(u, v)
        huu = (2.0 * p.alpha * (2.0 * P + R - 2.0) + 2.0 * p.beta * (2.0 * P - R)) * P
        hvv = (2.0 * p.alpha * (P + 2.0 * R - 2.0) - 2.0 * p.beta * (P - 2.0 * R)) * R
        huv = 2.0 * (p.alpha - p.beta) * P * R
        hu = -self.a * laplacian_values(du, dom) - self.b * laplacian_values(dv, dom) \
            + huu * du + huv * dv
        hv = -self.b * laplacian_values(du, dom) - self.a * laplacian_values(dv, dom) \
            + huv * du + hvv * dv
        return hu, hv

    # -- flat interface ---------------------------------------------------
    def pack(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        return np.concatenate([u.ravel(), v.ravel()])

    def unpack(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        n = self.domain.n1 * self.domain.n2
        return (x[:n].reshape(self.domain.shape), x[n:].reshape(self.domain.shape))

    def fun_grad_flat(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        u, v = self.unpack(x)
        gu, gv = self.gradient(u, v)
        return self.energy(u, v), self.pack(gu, gv) * self.domain.cell_area

    def grad_flat(self, x: np.ndarray) -> np.ndarray:
        u, v = self.unpack(x)
        gu, gv = self.gradient(u, v)
        return self.pack(gu, gv) * self.domain.cell_area

    def hess_vec_flat(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        u, v = self.unpack(x)
        du, dv = self.unpack(w)
        hu, hv = self.hess_vec(u, v, du, dv)
        return self.pack(hu, hv) * self.domain.cell_area

    def precond_flat(self, w: np.ndarray) -> np.ndarray:
        """Exact inverse of the vacuum Hessian, 2x2 per Fourier mode."""
        p = self.params
        du, dv = self.unpack(w)
        k2 = _k2(self.domain)
        aa = self.a * k2 + 2.0 * (p.alpha + p.beta)
        bb = self.b * k2 + 2.0 * (p.alpha - p.beta)
        det = aa * aa - bb * bb
        uh = fftn(du)
        vh = fftn(dv)
        ou = np.real(ifftn((aa * uh - bb * vh) / det))
        ov = np.real(ifftn((aa * vh - bb * uh) / det))
        return self.pack(ou, ov) / self.domain.cell_area


def torus_energy_I(u: np.ndarray, v: np.ndarray, bg: BackgroundTorus,
                   params: ModelParams) -> float:
    """Value of the full functional at full fields (u, v)."""
    return TorusOperator(bg, params).energy(u, v)


def torus_gradient_I(u: np.ndarray, v: np.ndarray, bg: BackgroundTorus,
                     params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    """Pointwise L2-gradient pair of the full functional."""
    return TorusOperator(bg, params).gradient(u, v)


def pde_residual_fourth_torus(u: np.ndarray, v: np.ndarray, bg: BackgroundTorus,
                              params: ModelParams,
                              exclude: Optional[np.ndarray] = None) -> float:
    """Residual of the transformed system under an independent 4th-order stencil.

    Measures the discretization error of the converged fields rather than the
    solver's closure; vortex patches are excluded (the background dip is only
    C^1-resolved there).
    """
    from .fields import laplacian4_values

    op = TorusOperator(bg, params)
    p = params
    P, R = op._pr(u, v)
    common = 2.0 * p.alpha * (P + R - 2.0)
    diff = 2.0 * p.beta * (P - R)
    l4u = laplacian4_values(u, op.domain)
    l4v = laplacian4_values(v, op.domain)
    res_u = op.a * l4u + op.b * l4v - (common + diff) * P - op.source * 2.0 * op.a
    res_v = op.b * l4u + op.a * l4v - (common - diff) * R - op.source * 2.0 * op.b
    res = np.maximum(np.abs(res_u), np.abs(res_v))
    if exclude is not None:
        res = res[~exclude]
    return float(np.max(res))


# ---------------------------------------------------------------------------
# reduced functionals: constants eliminated through a constraint branch
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TorusState:
    """Mean-zero pair plus the constants solving the constraint equations."""

    domain: GridDomain
    u_prime: np.ndarray
    v_prime: np.ndarray
    c1: float
    c2: float

    @property
    def u(self) -> np.ndarray:
        return self.u_prime + self.c1

    @property
    def v(self) -> np.ndarray:
        return self.v_prime + self.c2

    @staticmethod
    def from_full(u: np.ndarray, v: np.ndarray, domain: GridDomain) -> "TorusState":
        c1 = float(np.mean(u))
        c2 = float(np.mean(v))
        return TorusState(domain, u - c1, v - c2, c1, c2)


def reconstruct_original(state: TorusState, bg: BackgroundTorus) -> Tuple[np.ndarray, np.ndarray]:
    """Original amplitudes: U = u0/2 + (u+v)/2 and V = u0/2 + (u-v)/2."""
    u, v = state.u, state.v
    big_u = 0.5 * bg.u0 + 0.5 * (u + v)
    big_v = 0.5 * bg.u0 + 0.5 * (u - v)
    return big_u, big_v


def w12_norm(du: np.ndarray, dv: np.ndarray, domain: GridDomain) -> float:
    """Sobolev norm of a field pair: sqrt(||.||_2^2 + ||grad .||_2^2)."""
    val = integrate_values(du * du + dv * dv, domain)
    val += dirichlet_inner_values(du, du, domain)
    val += dirichlet_inner_values(dv, dv, domain)
    return math.sqrt(val)


def _project0(arr: np.ndarray) -> np.ndarray:
    return arr - arr.mean()


class _BranchReduced:
    """Energy over mean-zero pairs with constants pinned to a constraint branch.

    saddle=False eliminates (c1, c2) through the upper/upper roots (the
    reduced functional of the constrained minimization); saddle=True through
    the lower/upper combination, turning the mountain-pass saddle of the full
    functional into a plain minimum of the reduced one.  Gradients need no
    chain-rule terms: the constraint equations are exactly stationarity of
    the energy in the constants, on every branch.
    """

    def __init__(self, op: TorusOperator, saddle: bool = False):
        self.op = op
        self.bg = op.bg
        self.params = op.params
        self.saddle = saddle
        self.last_c: Optional[Tuple[float, float]] = None

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        u, v = self.op.unpack(x)
        return _project0(u), _project0(v)

    def constants(self, up: np.ndarray, vp: np.ndarray) -> Tuple[float, float]:
        maps = _cmaps(up, vp, self.bg, self.params)
        c1, c2, _, _ = _solve_c_branch(maps, saddle=self.saddle)
        return c1, c2

    def feasible(self, x: np.ndarray) -> bool:
        up, vp = self.split(x)
        if not admissible(up, vp, self.bg, self.params):
            return False
        if self.saddle:
            try:
                self.constants(up, vp)
            except AdmissibilityError:
                return False
        return True

    def lift(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        up, vp = self.split(x)
        c1, c2 = self.constants(up, vp)
        self.last_c = (c1, c2)
        return up + c1, vp + c2

    def fun_grad(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        u, v = self.lift(x)
        val = self.op.energy(u, v)
        gu, gv = self.op.gradient(u, v)
        g = self.op.pack(_project0(gu), _project0(gv)) * self.op.domain.cell_area
        return val, g

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.fun_grad(x)[1]

    def _c_hessian(self, up: np.ndarray, vp: np.ndarray, c1: float,
                   c2: float) -> np.ndarray:
        p = self.params
        gam = gamma(p)
        s = state_integrals(up, vp, self.bg)
        x1, x2 = math.exp(c1), math.exp(c2)
        q1 = (1.0 - gam) * s.j1 + gam * x2 * s.g
        q2 = (1.0 - gam) * s.j2 + gam * x1 * s.g
        scale = 2.0 * (p.alpha + p.beta)
        h11 = scale * (2.0 * x1 * x1 * s.e1 - x1 * q1)
        h22 = scale * (2.0 * x2 * x2 * s.e2 - x2 * q2)
        h12 = scale * gam * x1 * x2 * s.g
        return np.array([[h11, h12], [h12, h22]])

    def hess_vec(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Schur-reduced second variation via implicit differentiation."""
        up, vp = self.split(x)
        c1, c2 = self.constants(up, vp)
        u, v = up + c1, vp + c2
        du, dv = self.op.unpack(w)
        hu, hv = self.op.hess_vec(u, v, du, dv)
        rhs = -np.array([integrate_values(hu, self.op.domain),
                         integrate_values(hv, self.op.domain)])
        hc = self._c_hessian(up, vp, c1, c2)
        det = hc[0, 0] * hc[1, 1] - hc[0, 1] * hc[1, 0]
        if abs(det) < 1e-14 * (abs(hc[0, 0] * hc[1, 1]) + 1.0):
            dc = np.zeros(2)
        else:
            dc = np.linalg.solve(hc, rhs)
        hu2, hv2 = self.op.hess_vec(u, v, du + dc[0], dv + dc[1])
        return self.op.pack(_project0(hu2), _project0(hv2)) * self.op.domain.cell_area


# ---------------------------------------------------------------------------
# seeding: the screened scalar problem
# ---------------------------------------------------------------------------


def tarantello_init(params: ModelParams, bg: BackgroundTorus,
                    lam_t: Optional[float] = None, tol: float = 1e-9,
                    max_iter: int = 80) -> np.ndarray:
    """Solve Δw = lam_t e^{u0+w}(e^{u0+w}-1) + 8πn/|Ω| by damped Newton.

    Starts from w = -u0 and converges to the screened ('large') solution with
    u0 + w < 0; its mean-zero part seeds the constrained minimization.
    """
    if lam_t is None:
        lam_t = 4.0 * params.alpha * params.beta
    if lam_t <= 0:
        raise ConfigError("lam_t must be positive")
    dom = bg.domain
    if bg.n == 0:
        return np.zeros(dom.shape)
    w = -bg.u0.copy()
    size = dom.n1 * dom.n2

    def resid(wv: np.ndarray) -> np.ndarray:
        e = _exp_clip(bg.u0 + wv)
        return laplacian_values(wv, dom) - lam_t * e * (e - 1.0) \
            - 8.0 * math.pi * bg.n / dom.area

    def precond(vec: np.ndarray) -> np.ndarray:
        return torus_shifted_inverse(vec.reshape(dom.shape), dom, 1.0, lam_t).ravel()

    r = resid(w)
    for _ in range(max_iter):
        rnorm = float(np.max(np.abs(r)))
        if rnorm <= tol:
            return w
        e = _exp_clip(bg.u0 + w)
        q = lam_t * e * (2.0 * e - 1.0)

        def matvec(vec: np.ndarray) -> np.ndarray:
            f = vec.reshape(dom.shape)
            return (laplacian_values(f, dom) - q * f).ravel()

        op = LinearOperator((size, size), matvec=matvec)
        pre = LinearOperator((size, size), matvec=precond)
        try:
            delta, _ = minres(op, -r.ravel(), rtol=1e-10, maxiter=600, M=pre)
        except TypeError:
            delta, _ = minres(op, -r.ravel(), tol=1e-10, maxiter=600, M=pre)
        delta = delta.reshape(dom.shape)
        t = 1.0
        base = float(np.linalg.norm(r))
        while t >= 1e-10:
            w_try = w + t * delta
            r_try = resid(w_try)
            if float(np.linalg.norm(r_try)) < (1.0 - 1e-4 * t) * base:
                w, r = w_try, r_try
                break
            t *= 0.5
        else:
            raise NonConvergenceError(
                "screened seed Newton stalled; try a larger lam_t",
                grad_norm=rnorm)
    raise NonConvergenceError(
        f"screened seed did not reach residual {tol:g}; try a larger lam_t",
        grad_norm=float(np.max(np.abs(r))))


def reduced_energy_J(u_prime: np.ndarray, v_prime: np.ndarray, bg: BackgroundTorus,
                     params: ModelParams) -> float:
    """Closed-form reduced energy after eliminating the constants.

    Agrees with torus_energy_I(u'+c1, v'+c2) to the root-solve residual.
    """
    p = params
    dom = bg.domain
    cs = solve_c(u_prime, v_prime, bg, params)
    s = state_integrals(u_prime, v_prime, bg)
    a = 0.5 * (1.0 / p.alpha + 1.0 / p.beta)
    b = 0.5 * (1.0 / p.alpha - 1.0 / p.beta)
    val = a * 0.5 * (dirichlet_inner_values(u_prime, u_prime, dom)
                     + dirichlet_inner_values(v_prime, v_prime, dom))
    val += b * dirichlet_inner_values(u_prime, v_prime, dom)
    val += 2.0 * p.alpha * ((dom.area - math.exp(cs.c1) * s.j1)
                            + (dom.area - math.exp(cs.c2) * s.j2))
    val -= 4.0 * math.pi * bg.n / p.alpha
    val += 4.0 * math.pi * bg.n * (2.0 * a) * cs.c1
    val += 4.0 * math.pi * bg.n * (2.0 * b) * cs.c2
    return float(val)


# ---------------------------------------------------------------------------
# first solution: constrained minimization of J
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TorusSolveOpts:
    tol: float = 1e-8
    max_iter: int = 4000
    history: int = 12
    seed: str = "zero"            # or "tarantello"
    lam_t: Optional[float] = None
    lbfgs_tol_factor: float = 1e4
    path_nodes: int = 17
    separation: float = 1e-3
    mp_max_relax: int = 60
    endpoint_margin: float = 1.0
    probe_radius: float = 1e-2
    probe_seed: int = 0


def minimize_torus(params: ModelParams, vortices: VortexSet, domain: GridDomain,
                   opts: TorusSolveOpts = TorusSolveOpts()):
    """Constrained first solution on the torus.

    Descends the reduced energy over mean-zero pairs (steps leaving the
    admissible set are rejected with halved length), then polishes the full
    pair (constants included) with Newton/MINRES until the gradient max-norm
    meets opts.tol.
    """
    params.require_torus_mode()
    if domain.kind != "torus":
        raise ConfigError("torus solve requires a torus domain")
    t0 = time.perf_counter()
    bg = torus_background(vortices, domain)
    feas = feasibility(params, bg.n, domain.area)
    if not feas.feasible:
        raise InfeasibleError(
            f"necessary condition fails: alpha*beta*|Omega| - 8*pi*n = {feas.margin:.6g} < 0",
            margin=feas.margin)
    op = TorusOperator(bg, params)
    red = _BranchReduced(op, saddle=False)

    if opts.seed == "zero":
        up0 = np.zeros(domain.shape)
        vp0 = np.zeros(domain.shape)
    elif opts.seed == "tarantello":
        w = tarantello_init(params, bg, opts.lam_t)
        up0 = _project0(w)
        vp0 = np.zeros(domain.shape)
    else:
        raise ConfigError(f"unknown seed {opts.seed!r}")
    if not admissible(up0, vp0, bg, params):
        m1, m2 = admissibility_margins(up0, vp0, bg, params)
        raise AdmissibilityError(
            f"the {opts.seed} seed is outside the admissible set "
            f"(margins {m1:.3e}, {m2:.3e}); try the other seed or larger lam_t",
            constraint="first" if m1 < 0 else "second")

    x0 = op.pack(up0, vp0)
    tol_flat = opts.tol * domain.cell_area
    handover = tol_flat * opts.lbfgs_tol_factor
    res = minimize_lbfgs(red.fun_grad, x0, precond=op.precond_flat,
                         feasible=red.feasible, tol_inf=max(handover, tol_flat),
                         max_iter=opts.max_iter, history=opts.history)
    if res.boundary_trapped and not res.converged:
        raise BoundaryTrappingError(
            "descent step length underflowed at the admissible-set boundary; "
            "alpha is likely below the existence threshold for this vortex number")
    energies = list(res.energies)
    up, vp = red.split(res.x)
    cs = solve_c(up, vp, bg, params)
    x_full = op.pack(up + cs.c1, vp + cs.c2)
    pol = newton_polish(op.grad_flat, op.hess_vec_flat, x_full,
                        precond=op.precond_flat, tol_inf=tol_flat)
    grad_inf = float(np.max(np.abs(pol.g))) / domain.cell_area
    u, v = op.unpack(pol.x)
    state = TorusState.from_full(u, v, domain)
    if grad_inf > opts.tol:
        raise NonConvergenceError(
            f"torus solve stalled at gradient max-norm {grad_inf:.3e} "
            f"(target {opts.tol:.3e})", state=state, grad_norm=grad_inf)
    if not admissible(state.u_prime, state.v_prime, bg, params):
        raise AdmissibilityError("polished solution left the admissible set")
    cs_final = solve_c(state.u_prime, state.v_prime, bg, params)
    energies.append(op.energy(u, v))
    info = {
        "bg": bg,
        "operator": op,
        "feasibility": feas,
        "energy_I": op.energy(u, v),
        "energy_J": reduced_energy_J(state.u_prime, state.v_prime, bg, params),
        "grad_inf": grad_inf,
        "iterations": res.iterations,
        "energies": energies,
        "c_solve": cs_final,
        "c1": state.c1,
        "c2": state.c2,
        "wall_time": time.perf_counter() - t0,
        "clamp_hit": op.clamp_hit,
        "vortex_mask": vortex_node_mask(vortices, domain),
        "seed": opts.seed,
    }
    return state, info


# ---------------------------------------------------------------------------
# second solution: discretized mountain pass
# ---------------------------------------------------------------------------


def mountain_pass(params: ModelParams, first: TorusState, opts: TorusSolveOpts,
                  bg: Optional[BackgroundTorus] = None,
                  vortices: Optional[VortexSet] = None):
    """Second critical point via a discretized mountain-pass search.

    A path of opts.path_nodes states joins the first solution to a far
    endpoint (u1 + c_tilde, v1), with c_tilde fixed by the affine upper bound
    for constant shifts so the endpoint sits more than one unit below the
    first solution's energy.  The maximal-energy node is relaxed by
    preconditioned descent steps kept above its neighbors; the near-saddle
    node is then driven to the critical point by descending the saddle-branch
    reduced energy (whose plain minimum is the mountain-pass saddle of the
    full functional) with a final curvature-aware Newton polish.
    """
    if bg is None:
        if vortices is None:
            raise ConfigError("mountain_pass needs the background or the vortex set")
        bg = torus_background(vortices, first.domain)
    if bg.n == 0:
        raise MountainPassCollapseError(
            "no second solution without vortices: the functional has a unique critical point")
    params.require_torus_mode()
    t0 = time.perf_counter()
    op = TorusOperator(bg, params)
    dom = op.domain
    p = params
    u1, v1 = first.u, first.v
    x1 = op.pack(u1, v1)
    e_first = op.energy(u1, v1)

    # local-minimality probe on a sphere around the first solution
    rng = np.random.default_rng(opts.probe_seed)
    probe_min = np.inf
    for _ in range(8):
        du = rng.standard_normal(dom.shape)
        dv = rng.standard_normal(dom.shape)
        scale = opts.probe_radius / w12_norm(du, dv, dom)
        probe_min = min(probe_min, op.energy(u1 + scale * du, v1 + scale * dv))
    probe_margin = probe_min - e_first

    # endpoint from the affine bound for constant shifts
    slope = 4.0 * math.pi * bg.n * (1.0 / p.alpha + 1.0 / p.beta)
    c_tilde = -((4.0 * p.alpha + p.beta) * dom.area + 1.0 + opts.endpoint_margin) / slope
    e_end = op.energy(u1 + c_tilde, v1)
    while e_end > e_first - 1.0:
        c_tilde *= 2.0
        e_end = op.energy(u1 + c_tilde, v1)

    # initial path: geometric spacing in the shift, threaded through the
    # saddle-branch constants so the barrier region is resolved
    saddle = _BranchReduced(op, saddle=True)
    maps1 = _cmaps(first.u_prime, first.v_prime, bg, params)
    c1s, c2s, _, _ = _solve_c_branch(maps1, saddle=True)
    x_barrier = op.pack(first.u_prime + c1s, first.v_prime + c2s)
    shift_saddle = c1s - first.c1
    nodes: List[np.ndarray] = [x1.copy()]
    n_nodes = max(opts.path_nodes, 5)
    start = 0.25
    ratio = (abs(c_tilde) / start) ** (1.0 / (n_nodes - 2))
    inserted = False
    for j in range(n_nodes - 1):
        s = -start * ratio**j
        if not inserted and s <= shift_saddle:
            nodes.append(x_barrier.copy())
            inserted = True
        nodes.append(op.pack(u1 + s, v1))
    if not inserted:
        nodes.insert(len(nodes) // 2, x_barrier.copy())
    nodes[-1] = op.pack(u1 + c_tilde, v1)

    def node_energy(x: np.ndarray) -> float:
        uu, vv = op.unpack(x)
        return op.energy(uu, vv)

    energies = [node_energy(x) for x in nodes]
    relax_trace: List[float] = []
    mp_tol_flat = 1e-3 * dom.cell_area * max(1.0, p.alpha)
    for _ in range(opts.mp_max_relax):
        j_max = 1 + int(np.argmax(energies[1:-1]))
        x_max = nodes[j_max]
        g = op.grad_flat(x_max)
        relax_trace.append(energies[j_max])
        if float(np.max(np.abs(g))) <= mp_tol_flat:
            break
        d = -op.precond_flat(g)
        floor = max(energies[j_max - 1], energies[j_max + 1])
        t = 1.0
        accepted = False
        while t >= 1e-10:
            x_try = x_max + t * d
            e_try = node_energy(x_try)
            if np.isfinite(e_try) and e_try < energies[j_max] and e_try >= floor:
                nodes[j_max] = x_try
                energies[j_max] = e_try
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break

    # descend the saddle-branch reduced energy from the path's max node
    j_max = 1 + int(np.argmax(energies[1:-1]))
    x_seed = nodes[j_max]
    if not saddle.feasible(x_seed):
        x_seed = x_barrier
    res = minimize_lbfgs(saddle.fun_grad, x_seed, precond=op.precond_flat,
                         feasible=saddle.feasible,
                         tol_inf=max(opts.tol, 1e-6) * dom.cell_area * 100.0,
                         max_iter=opts.max_iter, history=opts.history)
    pol = newton_polish(saddle.grad, saddle.hess_vec, res.x,
                        precond=op.precond_flat, tol_inf=opts.tol * dom.cell_area,
                        max_iter=120)
    u2, v2 = saddle.lift(pol.x)
    gu, gv = op.gradient(u2, v2)
    grad_inf = max(float(np.max(np.abs(gu))), float(np.max(np.abs(gv))))
    if grad_inf > opts.tol:
        raise NonConvergenceError(
            f"mountain-pass polish stalled at gradient max-norm {grad_inf:.3e}",
            grad_norm=grad_inf)
    second = TorusState.from_full(u2, v2, dom)
    sep = w12_norm(u2 - u1, v2 - v1, dom)
    if sep < opts.separation:
        raise MountainPassCollapseError(
            f"path collapsed onto the first solution (separation {sep:.3e} < "
            f"{opts.separation:g}): no second solution found at these parameters")
    e_second = op.energy(u2, v2)
    cs = solve_c(second.u_prime, second.v_prime, bg, params)
    info = {
        "bg": bg,
        "operator": op,
        "energy_I": e_second,
        "energy_first": e_first,
        "grad_inf": grad_inf,
        "separation": sep,
        "probe_margin": probe_margin,
        "c_tilde": c_tilde,
        "endpoint_energy": e_end,
        "relax_trace": relax_trace,
        "path_len": len(nodes),
        "c_solve": cs,
        "c1": second.c1,
        "c2": second.c2,
        "wall_time": time.perf_counter() - t0,
        "clamp_hit": op.clamp_hit,
    }
    return second, info
