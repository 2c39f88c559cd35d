import numpy as np
import pytest

from proxident.identification import (
    analyze_trace,
    enlarged_bound_l1,
    enlarged_bound_sampled,
    identification_time_estimate,
    qc_check,
    report_text,
    safe_screen_l1,
)
from proxident.manifolds import SparsityPattern, pattern_leq
from proxident.problems import (
    gen_lowrank_matrix_problem,
    gen_qc_lasso,
)
from proxident.prox import Regularizer
from proxident.solvers import SolverConfig, run_pg


def P(*bits):
    return SparsityPattern(list(bits))


class TestAnalyzeTrace:
    def test_constant_trace(self):
        rep = analyze_trace([P(0, 1), P(0, 1), P(0, 1)])
        assert rep.first_stable_iter == 0
        assert rep.oscillation_count == 0
        assert rep.monotone

    def test_one_change(self):
        rep = analyze_trace([P(1, 1), P(0, 1), P(0, 1)])
        assert rep.first_stable_iter == 1
        assert rep.oscillation_count == 1
        assert rep.pattern_final == P(0, 1)

    def test_oscillation(self):
        rep = analyze_trace([P(0, 1), P(1, 1), P(0, 1), P(0, 1)])
        assert rep.oscillation_count == 2
        assert rep.first_stable_iter == 2
        assert not rep.monotone

    def test_oscillation_zero_iff_constant(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            pats = [P(*rng.integers(0, 2, size=3)) for _ in range(6)]
            rep = analyze_trace(pats)
            constant = all(p == pats[0] for p in pats)
            assert (rep.oscillation_count == 0) == constant

    def test_empty_trace(self):
        with pytest.raises(ValueError):
            analyze_trace([])

    def test_report_text_schema(self):
        text = report_text(analyze_trace([P(0, 1)]))
        assert text.startswith("first_stable_iter=0\n")
        assert "pattern_hash=" in text


class TestEnlargedBound:
    def test_closed_form_example(self):
        got = enlarged_bound_l1(np.array([0.5, 2.0]), 1.0, 0.2)
        assert got == P(0, 1)

    def test_eps_zero_is_prox_pattern(self):
        rng = np.random.default_rng(1)
        u = rng.standard_normal(10)
        reg = Regularizer.l1(10, 0.8)
        assert enlarged_bound_l1(u, 0.7 * 0.8, 0.0) == reg.prox(u, 0.7).pattern

    def test_huge_eps_all_ones(self):
        u = np.array([0.1, -0.2, 3.0])
        got = enlarged_bound_l1(u, 1.0, 1.0 + 3.0 + 0.1)
        assert got == P(1, 1, 1)

    def test_sampled_below_closed_form(self):
        rng = np.random.default_rng(2)
        for seed in range(5):
            u = rng.standard_normal(8)
            reg = Regularizer.l1(8, 1.0)
            eps = rng.uniform(0.1, 1.0)
            sampled = enlarged_bound_sampled(reg, u, 0.9, eps, n_samples=200,
                                             seed=seed)
            closed = enlarged_bound_l1(u, 0.9, eps)
            assert pattern_leq(sampled, closed)

    def test_sampled_eps_zero(self):
        reg = Regularizer.l1(5, 1.0)
        u = np.array([0.1, 2.0, -3.0, 0.0, 0.5])
        got = enlarged_bound_sampled(reg, u, 1.0, 0.0, n_samples=10)
        assert got == reg.prox(u, 1.0).pattern

    def test_nuclear_wellposed_small_eps(self):
        p = gen_lowrank_matrix_problem(seed=3)
        got = enlarged_bound_sampled(p.reg, p.ustar, p.cert_gamma, eps=1e-3,
                                     n_samples=100, seed=0)
        expected = p.reg.prox(p.ustar, p.cert_gamma).pattern
        assert got == expected
        assert p.reg.collection.structure_count(got) == 4


class TestQCCheck:
    def _stub_problem(self, xstar, ustar, lam=1.0, gamma=1.0):
        from proxident.problems import CompositeProblem, least_squares_oracle

        n = len(xstar)
        return CompositeProblem(
            least_squares_oracle(np.eye(n), np.zeros(n)),
            Regularizer.l1(n, lam),
            xstar=np.array(xstar), ustar=np.array(ustar), cert_gamma=gamma,
        )

    def test_closed_form_true_case(self):
        p = self._stub_problem([0.0, 1.0], [0.5, 2.0])
        assert qc_check(p, 0.3)

    def test_boundary_never_qualifies(self):
        p = self._stub_problem([0.0, 1.0], [1.0, 2.5])
        for eps in (1e-8, 1e-3, 0.1):
            assert not qc_check(p, eps)

    def test_generator_margin(self):
        for seed in range(5):
            p = gen_qc_lasso(n=12, s=3, delta=0.5, seed=seed)
            eps = p.delta * p.reg.lam * p.cert_gamma / 2
            assert qc_check(p, eps)

    def test_degenerate_generator_fails(self):
        p = gen_qc_lasso(n=12, s=3, delta=0.5, seed=1, degenerate=True)
        assert not qc_check(p, 1e-6)

    def test_sampled_fallback_nuclear(self):
        p = gen_lowrank_matrix_problem(seed=4)
        assert qc_check(p, 1e-3, n_samples=50)
        pd = gen_lowrank_matrix_problem(seed=4, degenerate=True)
        # near-threshold singular values flip under tiny perturbations
        assert not qc_check(pd, 0.2, n_samples=200)

    def test_needs_ground_truth(self):
        from proxident.problems import gen_lasso

        with pytest.raises(ValueError):
            qc_check(gen_lasso(10, 5, seed=0), 0.1)


class TestScreening:
    def test_examples(self):
        assert safe_screen_l1(np.array([0.3, 2.0]), 0.5, 1.0) == {0}
        assert safe_screen_l1(np.array([0.3, 2.0]), 0.8, 1.0) == set()

    def test_zero_radius_is_prox_zero_set(self):
        rng = np.random.default_rng(5)
        center = rng.standard_normal(12)
        reg = Regularizer.l1(12, 1.0)
        screened = safe_screen_l1(center, 0.0, 0.9)
        prox_zero = set(np.flatnonzero(reg.prox(center, 0.9).point == 0).tolist())
        assert screened == prox_zero

    def test_soundness_on_certified_instances(self):
        # a ball around ustar that provably contains it screens only true zeros
        for seed in range(100):
            p = gen_qc_lasso(n=15, s=4, delta=0.5, seed=seed)
            step = p.cert_gamma * p.reg.lam
            rho = 0.25 * p.delta * step
            rng = np.random.default_rng(seed)
            direction = rng.standard_normal(15)
            center = p.ustar + (rho * 0.9 / np.linalg.norm(direction)) * direction
            for i in safe_screen_l1(center, rho, step):
                assert p.xstar[i] == 0.0


class TestTimeEstimate:
    def test_inverse(self):
        assert identification_time_estimate(100.0, 1.0) == 100
        assert identification_time_estimate(1.0, 1e9) == 1

    def test_linear(self):
        assert identification_time_estimate(1.0, 0.25, kind="linear", rho=0.5) == 2

    def test_validation(self):
        with pytest.raises(ValueError):
            identification_time_estimate(1.0, 0.0)
        with pytest.raises(ValueError):
            identification_time_estimate(0.0, 1.0)
        with pytest.raises(ValueError):
            identification_time_estimate(1.0, 0.5, kind="linear", rho=1.5)
        with pytest.raises(ValueError):
            identification_time_estimate(1.0, 0.5, kind="sublinear")


class TestSandwich:
    def test_theorem_bounds_along_pg_trace(self):
        p = gen_qc_lasso(n=15, s=4, delta=0.5, seed=6)
        pt, log = run_pg(p, SolverConfig(stop_tol=1e-12, keep_u=True))
        star_pattern = p.reg.prox(p.ustar, p.cert_gamma).pattern
        rep = analyze_trace(log)
        step = log.gamma * p.reg.lam
        assert pt.pattern == star_pattern
        for idx, record in enumerate(log):
            eps = float(np.linalg.norm(record.u - p.ustar))
            outer = enlarged_bound_l1(p.ustar, step, eps)
            assert pattern_leq(record.pattern, outer)
            if idx >= rep.first_stable_iter:
                assert pattern_leq(star_pattern, record.pattern)
