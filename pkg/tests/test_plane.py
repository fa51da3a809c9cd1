import numpy as np
import pytest

from csvortex.background import VortexSet, plane_background, vortex_node_mask
from csvortex.diagnostics import quantized_integrals_plane
from csvortex.errors import DomainError, NonConvergenceError
from csvortex.fields import GridDomain, box_dirichlet_ring, integrate_values
from csvortex.model import ModelParams
from csvortex.plane import (
    PlaneOperator,
    PlaneSolveOpts,
    PlaneState,
    pde_residual_fourth,
    pde_residual_same_op,
    plane_energy,
    plane_gradient,
    solve_plane,
)

from conftest import smooth_random


def random_state(dom, rng, species, amp=0.1):
    return PlaneState(dom, smooth_random(dom, rng, amp),
                      tuple(smooth_random(dom, rng, amp) for _ in range(species)))


def oracle_energy(state, bg, params):
    """Independent term-by-term quadrature of the functional."""
    dom = bg.domain
    m = params.species
    a, b = params.alpha, params.beta
    S = bg.u0_grid_sum
    total = (m / a) * box_dirichlet_ring(
        state.f, _ring_of(-sum(bg.u0_pad)), state.f, _ring_of(-sum(bg.u0_pad)), dom)
    sum_terms = np.zeros(dom.shape)
    for i in range(m):
        ring_i = _ring_of(-bg.u0_pad[i])
        total += (1.0 / b) * box_dirichlet_ring(state.f_i[i], ring_i,
                                                state.f_i[i], ring_i, dom)
        A = np.exp(S + bg.u0_grid[i] + state.f + state.f_i[i])
        B = np.exp(S - bg.u0_grid[i] + state.f - state.f_i[i])
        sum_terms = sum_terms + (A + B - 2.0)
        total += b * integrate_values((A - B) ** 2, dom)
        total += integrate_values((2.0 * m / a) * state.f * bg.h[i]
                                  + (2.0 / b) * state.f_i[i] * bg.h[i], dom)
    total += (a / m) * integrate_values(sum_terms**2, dom)
    return total


def _ring_of(padded):
    ring = padded.copy()
    ring[1:-1, 1:-1] = 0.0
    return ring


@pytest.fixture
def small_setup(rng):
    dom = GridDomain.box(6.0, 32)
    vs = VortexSet((((0.5, 0.3, 1),), ((-0.8, 0.2, 1), (0.9, -1.1, 1))))
    params = ModelParams(alpha=1.3, beta=0.8, species=2, lambda_bg=2.0)
    bg = plane_background(vs, params.lambda_bg, dom)
    return dom, vs, params, bg


class TestPlaneEnergy:
    def test_zero_everything(self):
        dom = GridDomain.box(6.0, 32)
        params = ModelParams(alpha=1.0, beta=1.0, species=1)
        bg = plane_background(VortexSet((tuple(),)), 10.0, dom)
        st = PlaneState.zero(dom, 1)
        assert plane_energy(st, bg, params) == 0.0

    def test_zero_state_one_vortex_positive(self):
        dom = GridDomain.box(8.0, 32)
        params = ModelParams(alpha=1.0, beta=1.0, species=1, lambda_bg=10.0)
        bg = plane_background(VortexSet.single([(0.0, 0.0)]), 10.0, dom)
        assert plane_energy(PlaneState.zero(dom, 1), bg, params) > 0.0

    def test_term_by_term_oracle(self, small_setup, rng):
        dom, _, params, bg = small_setup
        st = random_state(dom, rng, 2)
        direct = plane_energy(st, bg, params)
        ref = oracle_energy(st, bg, params)
        assert direct == pytest.approx(ref, rel=1e-12)


class TestPlaneGradient:
    def test_central_differences(self, small_setup, rng):
        dom, _, params, bg = small_setup
        op = PlaneOperator(bg, params)
        x = random_state(dom, rng, 2).pack()
        _, g = op.fun_grad_flat(x)
        worst = 0.0
        for _ in range(10):
            d = rng.standard_normal(x.size)
            d /= np.linalg.norm(d)
            t = 1e-5
            fd = (op.fun_grad_flat(x + t * d)[0] - op.fun_grad_flat(x - t * d)[0]) / (2 * t)
            an = float(g @ d)
            worst = max(worst, abs(fd - an) / max(abs(an), 1e-30))
        assert worst <= 1e-6

    def test_zero_vortex_zero_state_gradient(self):
        dom = GridDomain.box(6.0, 32)
        params = ModelParams(alpha=1.0, beta=1.0, species=1)
        bg = plane_background(VortexSet((tuple(),)), 10.0, dom)
        g = plane_gradient(PlaneState.zero(dom, 1), bg, params)
        assert np.max(np.abs(g.pack())) == 0.0

    def test_hessian_vector_consistency(self, small_setup, rng):
        dom, _, params, bg = small_setup
        op = PlaneOperator(bg, params)
        x = random_state(dom, rng, 2).pack()
        d = rng.standard_normal(x.size)
        d /= np.linalg.norm(d)
        t = 1e-6
        fd = (op.grad_flat(x + t * d) - op.grad_flat(x - t * d)) / (2 * t)
        hv = op.hess_vec_flat(x, d)
        assert np.max(np.abs(fd - hv)) <= 1e-6 * np.max(np.abs(hv))


@pytest.fixture(scope="module")
def solved_small():
    dom = GridDomain.box(8.0, 64)
    params = ModelParams(alpha=1.0, beta=1.0, species=1, lambda_bg=2.0)
    vs = VortexSet.single([(0.0, 0.0)])
    state, info = solve_plane(params, vs, dom, PlaneSolveOpts(tol=1e-10))
    return dom, params, vs, state, info


class TestSolvePlane:
    def test_zero_vortices_returns_zero(self):
        dom = GridDomain.box(6.0, 32)
        params = ModelParams(alpha=1.0, beta=1.0, species=1)
        state, info = solve_plane(params, VortexSet((tuple(),)), dom)
        assert np.max(np.abs(state.pack())) == 0.0
        assert info["energy"] == 0.0
        quant = quantized_integrals_plane(info["u"], info["u_list"], params, dom, (0,))
        assert all(abs(q.computed) < 1e-12 for q in quant)

    def test_converged_gradient(self, solved_small):
        _, _, _, state, info = solved_small
        assert info["grad_inf"] <= 1e-10

    def test_energy_strictly_decreasing(self, solved_small):
        info = solved_small[4]
        es = info["energies"]
        assert all(e2 < e1 + 1e-12 for e1, e2 in zip(es, es[1:]))

    def test_quantized_integrals(self, solved_small):
        # truncation tail is O(e^{-2 alpha L}) ~ 1e-5 on this small box
        dom, params, vs, state, info = solved_small
        quant = quantized_integrals_plane(info["u"], info["u_list"], params, dom,
                                          vs.counts)
        for q in quant:
            assert q.rel_error < 1e-4

    def test_negativity_off_vortex(self, solved_small):
        dom, params, vs, state, info = solved_small
        mask = info["vortex_mask"]
        u, u_list = info["u"], info["u_list"]
        assert u[~mask].max() <= 1e-12
        assert u_list[0][~mask].max() <= 1e-12
        # genuinely negative where the signal is above round-off
        X, Y = dom.coords()
        core = (np.hypot(X, Y) < 0.5 * dom.extent1) & ~mask
        assert u[core].max() < -1e-12

    def test_dihedral_symmetry(self, solved_small):
        u = solved_small[4]["u"]
        defect = max(np.max(np.abs(u - u[::-1, :])),
                     np.max(np.abs(u - u[:, ::-1])),
                     np.max(np.abs(u - u.T)))
        assert defect < 1e-6

    def test_pde_residuals(self, solved_small):
        _, _, _, state, info = solved_small
        op = info["operator"]
        assert pde_residual_same_op(state, op) <= 10 * 1e-10
        assert pde_residual_fourth(state, op, exclude=info["vortex_mask"]) < 1.0

    def test_zero_vortex_residual_is_roundoff(self):
        dom = GridDomain.box(6.0, 32)
        params = ModelParams(alpha=1.0, beta=1.0, species=1)
        state, info = solve_plane(params, VortexSet((tuple(),)), dom)
        assert pde_residual_same_op(state, info["operator"]) == 0.0

    @pytest.mark.slow
    def test_decay_slope_truncation_independent(self):
        # doubling the box at fixed parameters moves the fitted slope by < 2%
        # (same physical annulus [5, 8] on both boxes)
        from csvortex.diagnostics import decay_fit

        params = ModelParams(alpha=1.0, beta=1.0, species=1, lambda_bg=10.0)
        vs = VortexSet.single([(0.0, 0.0)])
        slopes = []
        for L, n, annulus in ((10.0, 256, (0.5, 0.8)), (20.0, 512, (0.25, 0.4))):
            dom = GridDomain.box(L, n)
            _, info = solve_plane(params, vs, dom, PlaneSolveOpts(tol=1e-11))
            fit = decay_fit(info["u"], info["u_list"], params, dom,
                            annulus=annulus)
            slopes.append(fit.slope)
        assert abs(slopes[1] - slopes[0]) / abs(slopes[0]) < 0.02

    def test_lambda_independence(self):
        dom = GridDomain.box(8.0, 64)
        vs = VortexSet.single([(0.0, 0.0)])
        us = []
        for lam in (5.0, 20.0):
            params = ModelParams(alpha=1.0, beta=1.0, species=1, lambda_bg=lam)
            _, info = solve_plane(params, vs, dom, PlaneSolveOpts(tol=1e-10))
            us.append(info["u"])
        mask = vortex_node_mask(vs, dom)
        assert np.max(np.abs(us[0] - us[1])[~mask]) < 1e-4

    def test_vortex_near_boundary_rejected(self):
        dom = GridDomain.box(6.0, 32)
        params = ModelParams(alpha=1.0, beta=1.0, species=1)
        with pytest.raises(DomainError):
            solve_plane(params, VortexSet.single([(5.5, 0.0)]), dom)

    def test_nonconvergence_carries_state(self):
        dom = GridDomain.box(6.0, 32)
        params = ModelParams(alpha=1.0, beta=1.0, species=1, lambda_bg=2.0)
        vs = VortexSet.single([(0.0, 0.0)])
        with pytest.raises(NonConvergenceError) as err:
            solve_plane(params, vs, dom,
                        PlaneSolveOpts(tol=1e-14, max_iter=1,
                                       use_newton_polish=False))
        assert err.value.state is not None
        assert err.value.grad_norm > 0

    def test_species_mismatch(self):
        dom = GridDomain.box(6.0, 32)
        params = ModelParams(alpha=1.0, beta=1.0, species=2)
        with pytest.raises(DomainError):
            solve_plane(params, VortexSet.single([(0.0, 0.0)]), dom)
