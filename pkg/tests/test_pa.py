"""Power-allocation solver tests.

Oracles: bisection for the capped-simplex projection, variational
inequalities for both prox operators, and exhaustive grids for small
whole-solver instances.
"""

import numpy as np
import pytest

from xlwpt.geometry import ArrayGeometry, UserPosition, build_channel_set
from xlwpt.pa import (
    PAConfig,
    SolverFault,
    build_quadratic,
    dinkelbach_phi,
    dr_solve,
    pa_solve,
    project_feasible,
    prox_consumption,
    prox_neg_harvest,
    quadratic_sup,
)
from xlwpt.power import AllocationState, PowerConfig, consumed_power, harvested_power, hpe


def make_channels(n_sub=2, n_users=2, seed=0, nx=4, ny=2):
    geom = ArrayGeometry(n_sub=n_sub, nx=nx, ny=ny, d=0.05, wavelength=0.1,
                         element_size=0.025, boresight_exp=2)
    rng = np.random.default_rng(seed)
    users = [UserPosition(x=rng.uniform(-0.3, 0.3), y=rng.uniform(-0.1, 0.1),
                          z=rng.uniform(0.4, 1.0)) for _ in range(n_users)]
    return geom, build_channel_set(geom, users)


def capped_simplex_oracle(v, cap, tol=1e-13):
    """Projection of v onto {x >= 0, sum x <= cap} by bisection on the shift."""
    x0 = np.maximum(v, 0.0)
    if x0.sum() <= cap:
        return x0
    lo, hi = 0.0, np.max(v)
    for _ in range(200):
        tau = 0.5 * (lo + hi)
        s = np.maximum(v - tau, 0.0).sum()
        if s > cap:
            lo = tau
        else:
            hi = tau
        if hi - lo < tol:
            break
    return np.maximum(v - 0.5 * (lo + hi), 0.0)


class TestProjection:
    @pytest.mark.parametrize("seed", range(20))
    def test_row_projection_matches_bisection(self, seed):
        rng = np.random.default_rng(seed)
        v = rng.normal(0.5, 1.0, size=(1, 5))
        cap = rng.uniform(0.2, 2.0)
        got = project_feasible(v, cap, 10 * cap, np.array([True]))
        want = capped_simplex_oracle(v[0], cap)
        np.testing.assert_allclose(got[0], want, atol=1e-9)

    def test_feasible_point_unchanged(self):
        v = np.array([[0.1, 0.2], [0.0, 0.3]])
        got = project_feasible(v, 0.5, 1.0, np.array([True, True]))
        np.testing.assert_allclose(got, v)

    def test_inactive_rows_zeroed(self):
        v = np.full((2, 2), 0.1)
        got = project_feasible(v, 0.5, 1.0, np.array([True, False]))
        assert np.all(got[1] == 0.0)
        np.testing.assert_allclose(got[0], v[0])

    def test_negative_entries_clamped(self):
        got = project_feasible(np.array([[-0.4, 0.1]]), 1.0, 1.0,
                               np.array([True]))
        np.testing.assert_allclose(got, [[0.0, 0.1]])

    def test_total_budget_enforced(self):
        v = np.full((3, 1), 0.4)
        got = project_feasible(v, 0.5, 0.6, np.ones(3, bool))
        assert got.sum() <= 0.6 + 1e-12
        assert np.all(got >= 0)

    @pytest.mark.parametrize("seed", range(10))
    def test_output_always_feasible(self, seed):
        rng = np.random.default_rng(100 + seed)
        v = rng.normal(0, 1, size=(4, 3))
        active = rng.integers(0, 2, 4).astype(bool)
        active[0] = True
        got = project_feasible(v, 0.3, 0.8, active)
        assert np.all(got >= 0)
        assert np.all(got.sum(axis=1) <= 0.3 + 1e-12)
        assert got.sum() <= 0.8 + 1e-12
        assert np.all(got[~active] == 0.0)


class TestQuadraticForm:
    def test_harvest_equals_quadratic(self):
        # I(omega) written as the per-user quadratic form in q = sqrt(omega)
        _, ch = make_channels(n_sub=3, n_users=2, seed=4)
        rng = np.random.default_rng(4)
        a_tilde = rng.uniform(0.2, 1.0, 3)
        omega = rng.uniform(0, 0.2, size=(3, 2))
        quad = build_quadratic(ch, a_tilde)
        q = np.sqrt(omega)
        val = float(np.einsum("sm,mst,tm->", q, quad, q))
        alloc = AllocationState(omega=omega, a=np.ones(3, int), a_tilde=a_tilde)
        assert val == pytest.approx(harvested_power(ch, alloc, True), rel=1e-10)

    def test_matrices_symmetric_psd(self):
        _, ch = make_channels(n_sub=3, n_users=2, seed=5)
        quad = build_quadratic(ch, np.ones(3))
        for a in quad:
            np.testing.assert_allclose(a, a.T, atol=1e-14)
            assert np.min(np.linalg.eigvalsh(a)) > -1e-12

    def test_sup_matches_rayleigh_oracle(self):
        _, ch = make_channels(n_sub=4, n_users=2, seed=6)
        quad = build_quadratic(ch, np.ones(4))
        sup = quadratic_sup(quad)
        rng = np.random.default_rng(6)
        best = 0.0
        for a in quad:
            # power iteration as an independent largest-eigenvalue oracle
            x = rng.normal(size=4)
            for _ in range(500):
                x = a @ x
                x /= np.linalg.norm(x)
            best = max(best, float(x @ a @ x))
        assert sup == pytest.approx(best, rel=1e-8)

    def test_zero_activation_kills_rows(self):
        _, ch = make_channels(n_sub=2, n_users=1, seed=1)
        quad = build_quadratic(ch, np.array([1.0, 0.0]))
        assert np.all(quad[:, 1, :] == 0.0)
        assert np.all(quad[:, :, 1] == 0.0)


class TestDinkelbachPhi:
    def test_definition(self):
        _, ch = make_channels(seed=2)
        rng = np.random.default_rng(2)
        omega = rng.uniform(0, 0.2, size=(2, 2))
        a_tilde = np.array([1.0, 0.6])
        cfg = PowerConfig()
        alloc = AllocationState(omega=omega.copy(), a=[1, 1], a_tilde=a_tilde)
        want = (harvested_power(ch, alloc, True)
                - 0.003 * consumed_power(alloc, cfg, 2, ch.n_elements, True))
        assert dinkelbach_phi(ch, omega, a_tilde, 0.003, cfg) == pytest.approx(
            want, rel=1e-12)

    def test_zero_lambda_is_harvest(self):
        _, ch = make_channels(seed=3)
        omega = np.full((2, 2), 0.05)
        a_tilde = np.ones(2)
        alloc = AllocationState(omega=omega.copy(), a=[1, 1], a_tilde=a_tilde)
        assert dinkelbach_phi(ch, omega, a_tilde, 0.0, PowerConfig()) == \
            pytest.approx(harvested_power(ch, alloc, True))


class TestProxConsumption:
    @pytest.mark.parametrize("seed", range(10))
    def test_variational_inequality(self, seed):
        # x = prox iff (w - x) . (x - (z - gamma lam c)) >= 0 for all feasible w
        rng = np.random.default_rng(seed)
        cfg = PowerConfig()
        n_elements = 8
        a_tilde = np.array([1.0, 0.5])
        z = rng.normal(0.2, 0.3, size=(2, 2))
        lam, gamma = 0.004, 3.0
        x = prox_consumption(z, lam, gamma, cfg, a_tilde, n_elements)
        p_sub = cfg.p_sub(n_elements)
        p_total = cfg.p_total(2, n_elements)
        target = z - gamma * lam * (a_tilde / cfg.varsigma)[:, None]
        for _ in range(60):
            w = rng.uniform(0, p_sub / 2, size=(2, 2))
            w = project_feasible(w, p_sub, p_total, a_tilde > 0)
            assert np.sum((w - x) * (x - target)) >= -1e-9

    def test_grid_refinement_oracle(self):
        # one active row, two users: sweep the objective on refined grids
        cfg = PowerConfig()
        n_elements = 4          # p_sub = 0.2 W
        a_tilde = np.array([1.0])
        z = np.array([[0.18, 0.12]])
        lam, gamma = 0.02, 2.5
        x = prox_consumption(z, lam, gamma, cfg, a_tilde, n_elements)

        def objective(w):
            pc_var = w.sum() / cfg.varsigma
            return gamma * lam * pc_var + 0.5 * np.sum((w - z) ** 2)

        lo = np.zeros(2)
        hi = np.full(2, cfg.p_sub(n_elements))
        best = None
        for _ in range(6):
            g1 = np.linspace(lo[0], hi[0], 41)
            g2 = np.linspace(lo[1], hi[1], 41)
            vals = []
            for w1 in g1:
                for w2 in g2:
                    if w1 + w2 <= cfg.p_sub(n_elements) + 1e-12:
                        vals.append((objective(np.array([w1, w2])), w1, w2))
            best = min(vals)
            span1 = (g1[1] - g1[0]) * 2
            span2 = (g2[1] - g2[0]) * 2
            lo = np.array([max(0, best[1] - span1), max(0, best[2] - span2)])
            hi = np.array([best[1] + span1, best[2] + span2])
        assert objective(x[0]) <= best[0] + 1e-10
        np.testing.assert_allclose(x[0], [best[1], best[2]], atol=1e-6)


class TestProxNegHarvest:
    def test_stationarity_in_q_space(self):
        # the returned q zeroes the gradient of -gamma q^T A q + ||q - q0||^2/2
        _, ch = make_channels(n_sub=2, n_users=2, seed=8)
        a_tilde = np.ones(2)
        quad = build_quadratic(ch, a_tilde)
        gamma = 0.2 / quadratic_sup(quad)
        v = np.full((2, 2), 0.05)
        out = prox_neg_harvest(v, gamma, ch, a_tilde)
        q = np.sqrt(out)
        q0 = np.sqrt(v)
        grad = q - q0 - 2.0 * gamma * np.einsum("mst,tm->sm", quad, q)
        np.testing.assert_allclose(grad, 0.0, atol=1e-10)

    def test_grid_refinement_oracle_single_entry(self):
        # scalar case: minimize -gamma A q^2 + (q - q0)^2 / 2 over q
        _, ch = make_channels(n_sub=1, n_users=1, seed=9)
        a_tilde = np.ones(1)
        quad = build_quadratic(ch, a_tilde)
        A = float(quad[0, 0, 0])
        gamma = 0.3 / A
        v = np.array([[0.09]])
        out = prox_neg_harvest(v, gamma, ch, a_tilde)
        q0 = 0.3

        def obj(q):
            return -gamma * A * q**2 + 0.5 * (q - q0) ** 2

        lo, hi = 0.0, 5.0 * q0
        for _ in range(8):
            grid = np.linspace(lo, hi, 201)
            i = int(np.argmin([obj(q) for q in grid]))
            step = grid[1] - grid[0]
            lo, hi = max(0.0, grid[i] - 2 * step), grid[i] + 2 * step
        q_star = 0.5 * (lo + hi)
        assert np.sqrt(out[0, 0]) == pytest.approx(q_star, abs=1e-6)

    def test_expansive_step_autoshrinks(self):
        # a step with 2 gamma lam_max >= 1 must not blow up or go negative
        _, ch = make_channels(n_sub=2, n_users=1, seed=10)
        a_tilde = np.ones(2)
        lam_max = quadratic_sup(build_quadratic(ch, a_tilde))
        out = prox_neg_harvest(np.full((2, 1), 0.1), 10.0 / lam_max, ch, a_tilde)
        assert np.all(np.isfinite(out))
        assert np.all(out >= 0)


class TestDRSolve:
    def test_single_pair_closed_form(self):
        # S = M = 1: phi is linear in omega, optimum sits at a budget corner
        _, ch = make_channels(n_sub=1, n_users=1, seed=11)
        cfg = PowerConfig()
        pa_cfg = PAConfig()
        A = float(build_quadratic(ch, np.ones(1))[0, 0, 0])
        p_sub = cfg.p_sub(ch.n_elements)
        for lam in (0.0, A * cfg.varsigma * 0.5, A * cfg.varsigma * 2.0):
            omega, info = dr_solve(ch, np.ones(1), lam, pa_cfg, cfg)
            want = p_sub if A - lam / cfg.varsigma > 0 else 0.0
            assert omega[0, 0] == pytest.approx(want, abs=1e-6)
            assert info["dr_residual"] <= pa_cfg.dr_residual_tol

    @pytest.mark.parametrize("seed", range(4))
    def test_two_user_grid_oracle(self, seed):
        # S = 1, M = 2: exhaustive refined grid over the triangle
        _, ch = make_channels(n_sub=1, n_users=2, seed=20 + seed)
        cfg = PowerConfig()
        pa_cfg = PAConfig()
        quad = build_quadratic(ch, np.ones(1))
        p_sub = cfg.p_sub(ch.n_elements)
        lam = 1e-3 * (1 + seed)

        def phi(w):
            q = np.sqrt(w)
            return (float(np.einsum("sm,mst,tm->", q, quad, q))
                    - lam * w.sum() / cfg.varsigma)

        omega, info = dr_solve(ch, np.ones(1), lam, pa_cfg, cfg)
        lo = np.zeros(2)
        hi = np.full(2, p_sub)
        best = (-np.inf, None)
        for _ in range(7):
            g1 = np.linspace(lo[0], hi[0], 61)
            g2 = np.linspace(lo[1], hi[1], 61)
            for w1 in g1:
                for w2 in g2:
                    if w1 + w2 <= p_sub + 1e-12:
                        val = phi(np.array([[w1, w2]]))
                        if val > best[0]:
                            best = (val, (w1, w2))
            s1, s2 = (g1[1] - g1[0]) * 2, (g2[1] - g2[0]) * 2
            lo = np.array([max(0, best[1][0] - s1), max(0, best[1][1] - s2)])
            hi = np.array([min(p_sub, best[1][0] + s1), min(p_sub, best[1][1] + s2)])
        assert phi(omega) >= best[0] - 1e-8 * max(1.0, abs(best[0]))

    def test_never_below_start(self):
        _, ch = make_channels(n_sub=3, n_users=2, seed=13)
        cfg = PowerConfig()
        pa_cfg = PAConfig()
        a_tilde = np.array([1.0, 0.4, 0.7])
        start = np.full((3, 2), cfg.p_sub(ch.n_elements) / 2)
        lam = 0.005
        omega, info = dr_solve(ch, a_tilde, lam, pa_cfg, cfg, omega0=start)
        phi_start = dinkelbach_phi(
            ch, project_feasible(start, cfg.p_sub(ch.n_elements),
                                 cfg.p_total(3, ch.n_elements), a_tilde > 0),
            a_tilde, lam, cfg)
        assert info["phi"] >= phi_start - 1e-12

    def test_output_feasible(self):
        _, ch = make_channels(n_sub=3, n_users=2, seed=14)
        cfg = PowerConfig()
        omega, _ = dr_solve(ch, np.array([1.0, 0.0, 0.8]), 0.002, PAConfig(), cfg)
        p_sub = cfg.p_sub(ch.n_elements)
        assert np.all(omega >= -1e-9)
        assert np.all(omega.sum(axis=1) <= p_sub + 1e-9)
        assert np.all(omega[1] == 0.0)


class TestPASolve:
    def test_lambda_trace_monotone_and_converged(self):
        _, ch = make_channels(n_sub=3, n_users=2, seed=15)
        cfg = PowerConfig()
        omega, trace = pa_solve(ch, np.ones(3), PAConfig(), cfg)
        lams = trace.lambda_trace
        assert trace.converged
        assert all(b >= a - 1e-12 for a, b in zip(lams, lams[1:]))
        assert trace.states[-1].residual <= 1e-7
        assert all(s.dr_residual <= 1e-6 for s in trace.states)

    def test_matches_hpe_grid_oracle_single_pair(self):
        # S = M = 1: HPE maximum located by brute scalar scan
        _, ch = make_channels(n_sub=1, n_users=1, seed=16)
        cfg = PowerConfig()
        omega, trace = pa_solve(ch, np.ones(1), PAConfig(), cfg)
        A = float(build_quadratic(ch, np.ones(1))[0, 0, 0])
        p_sub = cfg.p_sub(ch.n_elements)
        fixed = 2 * cfg.p_syn + ch.n_elements * cfg.p_ct + cfg.p_cr
        grid = np.linspace(0, p_sub, 10001)
        ratios = A * grid / (grid / cfg.varsigma + fixed)
        best = float(np.max(ratios))
        got = trace.lambda_trace[-1]
        assert got >= best * (1 - 1e-6)

    def test_matches_hpe_grid_oracle_two_modules(self):
        # S = 2, M = 1 at fine grid resolution
        _, ch = make_channels(n_sub=2, n_users=1, seed=17)
        cfg = PowerConfig()
        omega, trace = pa_solve(ch, np.ones(2), PAConfig(), cfg)
        quad = build_quadratic(ch, np.ones(2))
        p_sub = cfg.p_sub(ch.n_elements)
        fixed = 2 * (2 * cfg.p_syn + ch.n_elements * cfg.p_ct) + cfg.p_cr
        g = np.linspace(0, p_sub, 301)
        best = 0.0
        for w1 in g:
            q = np.sqrt(np.stack([np.full_like(g, w1), g]))
            num = np.einsum("sm,st,tm->m", q, quad[0], q)
            den = (w1 + g) / cfg.varsigma + fixed
            best = max(best, float(np.max(num / den)))
        assert trace.lambda_trace[-1] >= best * (1 - 1e-4)

    def test_warm_start_never_hurts(self):
        _, ch = make_channels(n_sub=3, n_users=2, seed=18)
        cfg = PowerConfig()
        omega_cold, trace_cold = pa_solve(ch, np.ones(3), PAConfig(), cfg)
        omega_warm, trace_warm = pa_solve(ch, np.ones(3), PAConfig(), cfg,
                                          omega0=omega_cold)
        assert trace_warm.lambda_trace[-1] >= trace_cold.lambda_trace[-1] - 1e-10

    def test_all_inactive_rejected(self):
        _, ch = make_channels(seed=19)
        with pytest.raises(ValueError):
            pa_solve(ch, np.zeros(2), PAConfig(), PowerConfig())

    def test_output_feasible_and_matches_hpe(self):
        _, ch = make_channels(n_sub=3, n_users=2, seed=21)
        cfg = PowerConfig()
        a_tilde = np.array([1.0, 0.5, 0.25])
        omega, trace = pa_solve(ch, a_tilde, PAConfig(), cfg)
        alloc = AllocationState(omega=omega, a=(a_tilde > 0).astype(int),
                                a_tilde=a_tilde)
        alloc.validate(cfg, ch.n_elements)
        assert trace.lambda_trace[-1] == pytest.approx(
            hpe(ch, alloc, cfg, use_parameterized=True), rel=1e-9)

    def test_bad_config_rejected(self):
        with pytest.raises(ValueError):
            PAConfig(epsilon=0.0)
        with pytest.raises(ValueError):
            PAConfig(gamma=-1.0)
        with pytest.raises(ValueError):
            PAConfig(max_outer=0)
