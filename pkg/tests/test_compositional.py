import numpy as np
import pytest
from scipy import stats

from compdlm.compositional import (
    CompSpec,
    CompState,
    _update_cniw,
    comp_evolve,
    comp_filter_run,
    comp_forecast_k_step,
    comp_forecast_mc,
    comp_update_c_only,
    comp_update_full,
)
from compdlm.errors import DegenerateDofError, InputError, PartitionError
from compdlm.matvar import CniwParams, niw_to_cniw
from compdlm.mvdlm import ModelSpec, NiwState, evolve, forecast_one_step, update


def random_spd(rng, dim, ridge=1.0):
    a = rng.normal(size=(dim, dim))
    return a @ a.T + ridge * np.eye(dim)


def make_setup(q=4, qc=2, delta=0.8, beta=0.95, seed=2):
    rng = np.random.default_rng(seed)
    base = ModelSpec.damped_trend(q, r=0.95, delta=delta, beta=beta)
    spec = CompSpec.matched(base, qc)
    full = NiwState(M=rng.normal(size=(2, q)) * 0.2, C=5 * np.eye(2), n=10.0, D=np.eye(q))
    return spec, full, CompState.from_niw(full, qc), rng


def assert_states_match(comp: CompState, full: NiwState, qc: int, tol=1e-8):
    mapped = niw_to_cniw(full.M, full.C, full.n, full.D, qc)
    assert np.max(np.abs(comp.e.Z - mapped.Z)) < tol
    assert np.max(np.abs(comp.e.C_e - mapped.C_e)) < tol
    assert abs(comp.e.s_e - mapped.s_e) < tol
    assert np.max(np.abs(comp.e.H - mapped.H)) < tol
    assert np.max(np.abs(comp.c.M - full.M[:, :qc])) < tol
    assert np.max(np.abs(comp.c.C - full.C)) < tol
    assert abs(comp.c.n - full.n) < tol
    assert np.max(np.abs(comp.c.D - full.D[:qc, :qc])) < tol


class TestCompSpec:
    def test_partition_must_cover_q(self):
        base = ModelSpec.damped_trend(4)
        with pytest.raises(PartitionError):
            CompSpec(base=base, qc=1, qe=2, delta_e=0.8, beta_e=0.95)

    def test_degenerate_blocks_rejected(self):
        base = ModelSpec.damped_trend(4)
        with pytest.raises(PartitionError):
            CompSpec(base=base, qc=0, qe=4, delta_e=0.8, beta_e=0.95)
        with pytest.raises(PartitionError):
            CompSpec(base=base, qc=4, qe=0, delta_e=0.8, beta_e=0.95)

    def test_from_niw_margin(self):
        _, full, comp, _ = make_setup()
        np.testing.assert_array_equal(comp.c.M, full.M[:, :2])
        np.testing.assert_array_equal(comp.c.D, full.D[:2, :2])
        assert comp.e.s_e == full.n + 2


class TestCompEvolve:
    def test_matches_evolved_niw_in_reduction_mode(self):
        spec, full, comp, _ = make_setup()
        evolved_full = evolve(full, spec.base)
        evolved_comp = comp_evolve(comp, spec)
        assert_states_match(evolved_comp, evolved_full, spec.qc, tol=1e-12)

    def test_no_discount_identity(self):
        rng = np.random.default_rng(4)
        base = ModelSpec(p=2, q=3, F=[1, 0], G=np.eye(2), delta=1.0, beta=1.0)
        spec = CompSpec(base=base, qc=1, qe=2, delta_e=1.0, beta_e=1.0)
        e = CniwParams(Z=rng.normal(size=(2, 3)), C_e=random_spd(rng, 2), s_e=9.0,
                       H=random_spd(rng, 3), qc=1)
        comp = CompState(
            c=NiwState(M=rng.normal(size=(2, 1)), C=e.C_e, n=6.0, D=random_spd(rng, 1)),
            e=e,
        )
        prior = comp_evolve(comp, spec)
        np.testing.assert_array_equal(prior.e.Z, e.Z)
        np.testing.assert_allclose(prior.e.C_e, e.C_e)
        assert prior.e.s_e == e.s_e
        np.testing.assert_array_equal(prior.e.H, e.H)

    def test_conditional_dof_deflation_uses_psi_dimension(self):
        # s_e* = beta_e s_e - (1 - beta_e)(qe - 1): the deflation for the
        # qe-dimensional Psi_e, the unique choice consistent with the
        # reduction s_e = n + qc along a standard-MVDLM trajectory.
        spec, _, comp, _ = make_setup(q=4, qc=2)  # s_e = 12, qe = 2
        prior = comp_evolve(comp, spec)
        assert prior.e.s_e == pytest.approx(0.95 * 12.0 - 0.05 * 1.0)  # 11.35

    def test_degenerate_dof_error(self):
        spec, _, comp, _ = make_setup()
        bad = CompSpec(base=spec.base, qc=2, qe=2, delta_e=0.9, beta_e=0.01)
        state = CompState(c=comp.c, e=CniwParams(Z=comp.e.Z, C_e=comp.e.C_e,
                                                 s_e=0.005, H=comp.e.H, qc=2))
        with pytest.raises(DegenerateDofError):
            comp_evolve(state, bad)


class TestCompUpdateFull:
    def test_reduction_trajectory(self):
        spec, full, comp, rng = make_setup()
        data = rng.normal(size=(10, 4)).cumsum(axis=0) * 0.3
        full_state = full
        comp_state = comp
        for y in data:
            full_state = update(evolve(full_state, spec.base), spec.base.F, y)
            comp_state = comp_update_full(comp_evolve(comp_state, spec), spec.base.F, y)
            assert_states_match(comp_state, full_state, spec.qc)

    def test_zero_innovation_keeps_location(self):
        spec, _, comp, _ = make_setup()
        prior = comp_evolve(comp, spec)
        y = prior.e.Z.T @ spec.base.F
        post = comp_update_full(prior, spec.base.F, y)
        np.testing.assert_allclose(post.e.Z, prior.e.Z)
        np.testing.assert_allclose(post.e.H, prior.e.H, atol=1e-14)
        assert post.e.s_e == pytest.approx(prior.e.s_e + 1)
        assert np.trace(post.e.C_e) < np.trace(prior.e.C_e)

    def test_hand_worked_update(self):
        e = CniwParams(Z=np.zeros((1, 2)), C_e=[[1.0]], s_e=2.0, H=np.eye(2), qc=1)
        c = NiwState(M=np.zeros((1, 1)), C=[[1.0]], n=3.0, D=[[1.0]])
        prior = CompState(c=c, e=e)
        post = comp_update_full(prior, [1.0], [1.0, 1.0])
        np.testing.assert_allclose(post.e.Z, [[0.5, 0.5]])
        assert post.e.C_e[0, 0] == pytest.approx(0.5)
        assert post.e.s_e == pytest.approx(3.0)
        np.testing.assert_allclose(post.e.H, np.eye(2) + 0.5)

    def test_permutation_equivariance(self):
        # Relabeling experimental series permutes Z_e columns and H_e blocks.
        rng = np.random.default_rng(9)
        q, qc = 5, 2
        base = ModelSpec.damped_trend(q)
        spec = CompSpec.matched(base, qc)
        full = NiwState(M=rng.normal(size=(2, q)), C=5 * np.eye(2), n=10.0,
                        D=random_spd(rng, q))
        state = CompState.from_niw(full, qc)
        perm = np.array([0, 1, 4, 2, 3])  # identity on controls, rotate experimentals
        y = rng.normal(size=q)

        permuted_full = NiwState(M=full.M[:, perm], C=full.C, n=full.n,
                                 D=full.D[np.ix_(perm, perm)])
        permuted_state = CompState.from_niw(permuted_full, qc)

        post = comp_update_full(comp_evolve(state, spec), base.F, y)
        post_perm = comp_update_full(comp_evolve(permuted_state, spec), base.F, y[perm])
        np.testing.assert_allclose(post_perm.e.Z, post.e.Z[:, perm], atol=1e-12)
        np.testing.assert_allclose(post_perm.e.H, post.e.H[np.ix_(perm, perm)], atol=1e-12)

    def test_posteriors_stay_spd(self):
        spec, _, comp, rng = make_setup()
        state = comp
        for _ in range(30):
            state = comp_update_full(comp_evolve(state, spec), spec.base.F,
                                     rng.normal(size=4) * 2.0)
            np.linalg.cholesky(state.e.H)
            np.linalg.cholesky(state.e.C_e)
            np.linalg.cholesky(state.c.C)
            np.linalg.cholesky(state.c.D)


class TestCompUpdateCOnly:
    def test_e_branch_untouched(self):
        spec, _, comp, rng = make_setup()
        prior = comp_evolve(comp, spec)
        post = comp_update_c_only(prior, spec.base.F, rng.normal(size=2))
        assert post.e is prior.e
        np.testing.assert_array_equal(post.e.Z, prior.e.Z)
        np.testing.assert_array_equal(post.e.H, prior.e.H)

    def test_c_margin_matches_plain_update(self):
        spec, _, comp, rng = make_setup()
        prior = comp_evolve(comp, spec)
        y_c = rng.normal(size=2)
        post = comp_update_c_only(prior, spec.base.F, y_c)
        oracle = update(prior.c, spec.base.F, y_c)
        np.testing.assert_allclose(post.c.M, oracle.M)
        np.testing.assert_allclose(post.c.C, oracle.C)
        np.testing.assert_allclose(post.c.D, oracle.D)
        assert post.c.n == oracle.n

    def test_zero_error_case(self):
        spec, _, comp, _ = make_setup()
        prior = comp_evolve(comp, spec)
        y_c = prior.c.M.T @ spec.base.F
        post = comp_update_c_only(prior, spec.base.F, y_c)
        np.testing.assert_allclose(post.c.M, prior.c.M)
        np.testing.assert_allclose(post.c.D, prior.c.D, atol=1e-14)


class TestForecastMc:
    def test_reduction_moments_match_analytic_t(self):
        spec, full, comp, rng = make_setup()
        data = rng.normal(size=(15, 4)).cumsum(axis=0) * 0.2
        full_state = full
        comp_state = comp
        for y in data:
            full_state = update(evolve(full_state, spec.base), spec.base.F, y)
            comp_state = comp_update_full(comp_evolve(comp_state, spec), spec.base.F, y)
        fc = forecast_one_step(evolve(full_state, spec.base), spec.base.F)
        draws = comp_forecast_mc(comp_evolve(comp_state, spec), spec.base.F, 60_000,
                                 np.random.default_rng(100))
        se = draws.std(axis=0) / np.sqrt(draws.shape[0])
        assert np.all(np.abs(draws.mean(axis=0) - fc.mean()) < 3 * se)
        cov = np.cov(draws.T)
        target = fc.cov()
        cov_se = np.sqrt((np.outer(np.diag(target), np.diag(target)) + target**2)
                         / draws.shape[0])
        assert np.all(np.abs(cov - target) < 6 * cov_se)

    def test_block_diagonal_h_decouples_location(self):
        # With H block-diagonal (Gamma mean 0) the marginal mean of y_e is
        # F'Z_e regardless of the control-margin location.
        rng = np.random.default_rng(14)
        h = np.eye(3)
        h[0, 0] = 2.0
        e = CniwParams(Z=np.array([[0.5, 1.5, -1.0], [0.0, 0.1, 0.2]]),
                       C_e=0.5 * np.eye(2), s_e=10.0, H=h, qc=1)
        c = NiwState(M=np.array([[3.0], [0.4]]), C=0.5 * np.eye(2), n=12.0, D=[[0.8]])
        prior = CompState(c=c, e=e)
        f_vec = np.array([1.0, 0.5])
        draws = comp_forecast_mc(prior, f_vec, 50_000, rng)
        target = e.Z_e.T @ f_vec
        se = draws[:, 1:].std(axis=0) / np.sqrt(draws.shape[0])
        assert np.all(np.abs(draws[:, 1:].mean(axis=0) - target) < 3 * se)

    def test_single_draw_shape(self):
        spec, _, comp, _ = make_setup()
        draws = comp_forecast_mc(comp_evolve(comp, spec), spec.base.F, 1,
                                 np.random.default_rng(0))
        assert draws.shape == (1, 4)


class TestForecastKStep:
    def test_first_horizon_matches_one_step(self):
        spec, _, comp, _ = make_setup()
        prior = comp_evolve(comp, spec)
        one = comp_forecast_mc(prior, spec.base.F, 40_000, np.random.default_rng(7))
        multi = comp_forecast_k_step(prior, spec, 3, 40_000, np.random.default_rng(8))
        se = np.hypot(one.std(axis=0), multi[0].std(axis=0)) / np.sqrt(one.shape[0])
        assert np.all(np.abs(one.mean(axis=0) - multi[0].mean(axis=0)) < 3 * se)

    def test_horizon_means_follow_damped_recursion(self):
        spec, _, comp, rng = make_setup(seed=21)
        state = comp
        for _ in range(20):
            state = comp_update_full(comp_evolve(state, spec), spec.base.F,
                                     rng.normal(size=4) * 0.1 + 1.0)
        prior = comp_evolve(state, spec)
        k = 6
        draws = comp_forecast_k_step(prior, spec, k, 60_000, np.random.default_rng(9))
        g, f_vec = spec.base.G, spec.base.F
        mean_matrix = np.hstack([prior.c.M, prior.e.Z_e])
        for h in range(k):
            target = mean_matrix.T @ np.linalg.matrix_power(g, h).T @ f_vec
            se = draws[h].std(axis=0) / np.sqrt(draws.shape[1])
            assert np.all(np.abs(draws[h].mean(axis=0) - target) < 4 * se)

    def test_unit_discounts_mean_constant_over_horizon(self):
        rng = np.random.default_rng(30)
        base = ModelSpec(p=1, q=2, F=[1.0], G=np.eye(1), delta=1.0, beta=1.0)
        spec = CompSpec(base=base, qc=1, qe=1, delta_e=1.0, beta_e=1.0)
        full = NiwState(M=np.array([[2.0, -1.0]]), C=[[0.2]], n=20.0, D=0.1 * np.eye(2))
        prior = comp_evolve(CompState.from_niw(full, 1), spec)
        draws = comp_forecast_k_step(prior, spec, 5, 50_000, rng)
        means = draws.mean(axis=1)
        se = draws.std(axis=1).max() / np.sqrt(draws.shape[1])
        assert np.all(np.abs(means - full.M.reshape(1, 2)) < 4 * se)

    def test_redraw_policy_agrees_in_mean(self):
        spec, _, comp, _ = make_setup()
        prior = comp_evolve(comp, spec)
        fixed = comp_forecast_k_step(prior, spec, 4, 30_000, np.random.default_rng(1))
        redraw = comp_forecast_k_step(prior, spec, 4, 30_000, np.random.default_rng(2),
                                      vol_policy="redraw")
        assert np.all(np.isfinite(redraw))
        for h in range(4):
            se = np.hypot(fixed[h].std(axis=0), redraw[h].std(axis=0)) / np.sqrt(30_000)
            assert np.all(np.abs(fixed[h].mean(axis=0) - redraw[h].mean(axis=0)) < 4 * se)

    def test_bad_horizon_rejected(self):
        spec, _, comp, _ = make_setup()
        with pytest.raises(InputError):
            comp_forecast_k_step(comp_evolve(comp, spec), spec, 0, 10,
                                 np.random.default_rng(0))


class TestConjugacyGrid:
    def test_posterior_density_matches_prior_times_likelihood(self):
        # Brute-force check of the conjugate update on a p=1, q=2, qc=1 grid.
        from gridtools import cniw_grid_logpdf, spot_check_grid

        prior = CniwParams(Z=np.array([[0.3, -0.2]]), C_e=[[0.8]], s_e=3.0,
                           H=np.array([[1.0, 0.3], [0.3, 0.9]]), qc=1)
        f_scalar = 1.0
        theta_c = 0.1
        y = np.array([0.4, -0.3])
        post = _update_cniw(prior, np.array([f_scalar]), y)

        theta_grid = np.linspace(-2.5, 2.0, 40)
        gamma_grid = np.linspace(-2.5, 2.5, 40)
        psi_grid = np.linspace(0.02, 4.0, 40)

        log_prior = cniw_grid_logpdf(prior, theta_c, theta_grid, gamma_grid, psi_grid)
        log_post = cniw_grid_logpdf(post, theta_c, theta_grid, gamma_grid, psi_grid)
        rng = np.random.default_rng(17)
        spot_check_grid(prior, theta_c, theta_grid, gamma_grid, psi_grid, log_prior, rng)
        spot_check_grid(post, theta_c, theta_grid, gamma_grid, psi_grid, log_post, rng)

        resid_c = y[0] - f_scalar * theta_c
        mean_e = (f_scalar * theta_grid[:, None, None]
                  + resid_c * gamma_grid[None, :, None])
        log_lik = stats.norm.logpdf(y[1], loc=mean_e,
                                    scale=np.sqrt(psi_grid)[None, None, :])
        log_num = log_prior + log_lik

        num = np.exp(log_num - log_num.max())
        ref = np.exp(log_post - log_post.max())
        num /= num.sum()
        ref /= ref.sum()
        mask = ref > 1e-8 * ref.max()
        rel = np.abs(num[mask] - ref[mask]) / ref[mask]
        assert rel.max() < 1e-3


class TestFilterRunHelper:
    def test_matches_stepwise_filtering(self):
        spec, _, comp, rng = make_setup()
        data = rng.normal(size=(5, 4))
        steps = comp_filter_run(spec, comp, data)
        state = comp
        for step, y in zip(steps, data):
            prior = comp_evolve(state, spec)
            state = comp_update_full(prior, spec.base.F, y)
            np.testing.assert_array_equal(step.posterior.e.Z, state.e.Z)
        assert len(steps) == 5
