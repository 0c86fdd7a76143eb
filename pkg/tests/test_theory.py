import numpy as np
import pytest
import scipy.sparse as sp

from sgfcf import G2NConfig, dense_svd, g2n_normalize, graph_from_matrix
from sgfcf.theory import (
    LgcnFitInstance,
    TheoryReport,
    check_approx_sharpness,
    check_eigenvalue_bounds,
    check_lgcn_expressiveness,
    check_rating_symmetry,
    check_sgf_svd_equivalence,
    check_spectral_symmetry,
    random_bipartite_graph,
    run_all_checks,
    sample_lgcn_instance,
    write_report_json,
)


class TestGenerator:
    def test_no_isolated_nodes(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            R = random_bipartite_graph(rng, 40, 30)
            assert (np.asarray(R.sum(axis=1)).ravel() > 0).all()
            assert (np.asarray(R.sum(axis=0)).ravel() > 0).all()

    def test_binary_and_shaped(self):
        rng = np.random.default_rng(1)
        R = random_bipartite_graph(rng, 25, 35, target_edges=120)
        assert R.shape == (25, 35)
        assert set(np.unique(R.data)) == {1.0}

    def test_deterministic_given_generator_state(self):
        a = random_bipartite_graph(np.random.default_rng(7), 20, 20)
        b = random_bipartite_graph(np.random.default_rng(7), 20, 20)
        assert (a != b).nnz == 0

    def test_degree_skew(self):
        # power-law sampling should produce a heavy tail: max degree well
        # above the mean
        rng = np.random.default_rng(2)
        R = random_bipartite_graph(rng, 300, 200, target_edges=2000)
        degrees = np.asarray(R.sum(axis=1)).ravel()
        assert degrees.max() > 4 * degrees.mean()


class TestSpectralSymmetry:
    def test_passes(self):
        report = check_spectral_symmetry(trials=20, seed=3)
        assert report.passed
        assert report.max_abs_error <= 1e-8
        assert report.instances_run == 20

    def test_two_node_case(self):
        # 1x1 weighted matrix: adjacency eigenvalues are exactly +-w
        w = 0.83
        norm = g2n_normalize(graph_from_matrix(sp.csr_matrix(np.array([[1.0]]))), G2NConfig(alpha=0.44, epsilon=-0.25))
        from sgfcf import assemble_adjacency

        A = assemble_adjacency(norm)
        eigenvalues = np.sort(np.linalg.eigvalsh(A))
        w = norm.values[0, 0]
        assert np.allclose(eigenvalues, [-w, w])


class TestRatingSymmetry:
    def test_passes(self):
        report = check_rating_symmetry(trials=10, seed=4)
        assert report.passed
        assert report.instances_run > 0

    def test_full_positive_band_equals_pq(self):
        # K = number of positive frequencies: both constructions equal P Q^T
        rng = np.random.default_rng(5)
        R = random_bipartite_graph(rng, 8, 8, target_edges=28)
        norm = g2n_normalize(graph_from_matrix(R), G2NConfig())
        from sgfcf import assemble_adjacency
        from sgfcf.theory import _rating_from_eigenvectors

        A = assemble_adjacency(norm)
        eigenvalues, V = np.linalg.eigh(A)
        order = np.argsort(eigenvalues)[::-1]
        V = V[:, order]
        spec = dense_svd(norm)
        K = len(spec)
        low = _rating_from_eigenvectors(V[:, :K], 8)
        assert np.abs(low - spec.P @ spec.Q.T).max() < 1e-8


class TestApproxSharpness:
    def test_passes(self):
        report = check_approx_sharpness(trials=30, seed=6)
        assert report.passed
        assert report.details["smallest_margin"] > 0

    def test_worked_example(self):
        # sigma = [1,.8,.6,.4] vs [1,.8,.3,.2], K=2: 1.64/1.77 > 1.64/2.16
        base = np.array([1.0, 0.8, 0.6, 0.4])
        sharp = np.array([1.0, 0.8, 0.3, 0.2])
        appro_sharp = np.square(sharp[:2]).sum() / np.square(sharp).sum()
        appro_base = np.square(base[:2]).sum() / np.square(base).sum()
        assert appro_sharp == pytest.approx(1.64 / 1.77)
        assert appro_base == pytest.approx(1.64 / 2.16)
        assert appro_sharp > appro_base

    def test_identical_spectra_are_boundary(self):
        sigma = np.array([1.0, 0.5, 0.25])
        a = np.square(sigma[:2]).sum() / np.square(sigma).sum()
        assert a == pytest.approx(a)  # equality, excluded from the strict claim


class TestEigenvalueBounds:
    def test_passes(self):
        report = check_eigenvalue_bounds(trials=6, seed=7)
        assert report.passed
        assert report.max_abs_error == 0.0

    def test_regular_graph_collapse(self):
        # 2-regular bipartite ring: bounds collapse to equality
        n = 6
        R = sp.csr_matrix(np.roll(np.eye(n), 1, axis=1) + np.eye(n))
        graph = graph_from_matrix(R)
        base = np.linalg.svd(
            g2n_normalize(graph, G2NConfig()).values.toarray(), compute_uv=False
        )
        alpha, epsilon = 3.0, -0.3
        tilted = np.linalg.svd(
            g2n_normalize(graph, G2NConfig(alpha=alpha, epsilon=epsilon)).values.toarray(),
            compute_uv=False,
        )
        factor = 2.0 * (2.0 + alpha) ** (2 * epsilon)
        assert np.allclose(tilted, factor * base, rtol=1e-12)

    def test_reference_point_is_identity(self):
        rng = np.random.default_rng(8)
        R = random_bipartite_graph(rng, 12, 9)
        norm = g2n_normalize(graph_from_matrix(R), G2NConfig(alpha=0.0, epsilon=-0.5))
        sigma_a = np.linalg.svd(norm.values.toarray(), compute_uv=False)
        sigma_b = np.linalg.svd(norm.values.toarray(), compute_uv=False)
        assert np.allclose(sigma_a, sigma_b)


class TestLgcnExpressiveness:
    def test_passes(self):
        report = check_lgcn_expressiveness(instances=10, seed=9)
        assert report.passed
        assert report.details["max_reconstruction_error"] <= 1e-6
        assert report.details["shared_filter_failure_rate"] >= 0.95

    def test_single_dimension_exact(self):
        # d = 1: one filter suffices and the shared fit is the per-dim fit
        rng = np.random.default_rng(10)
        inst = sample_lgcn_instance(rng, d=1)
        VE = inst.V.T @ inst.E
        VO = inst.V.T @ inst.O_target
        y = (VE * VO).sum(axis=1) / (VE * VE).sum(axis=1)
        shared = inst.V @ (y[:, None] * VE)
        assert np.abs(shared - inst.O_target).max() < 1e-6

    def test_instance_invariants(self):
        rng = np.random.default_rng(11)
        inst = sample_lgcn_instance(rng)
        assert isinstance(inst, LgcnFitInstance)
        assert inst.n <= 17
        assert 1 <= inst.d <= 4
        assert inst.min_gap >= 1e-3
        assert inst.B.shape == (inst.n, inst.n)
        # B is the eigenvalue Vandermonde
        assert np.allclose(inst.B[:, 0], 1.0)
        assert np.allclose(inst.B[:, 1], inst.eigenvalues)


class TestSgfSvdEquivalence:
    def test_passes(self):
        report = check_sgf_svd_equivalence(L=6, trials=8, seed=12)
        assert report.passed
        assert report.max_abs_error <= 1e-8

    def test_first_power_is_normalized_matrix(self):
        # L=1: user-item block of I + A is the normalized matrix itself,
        # and psi = 1, omega = sigma
        rng = np.random.default_rng(13)
        R = random_bipartite_graph(rng, 9, 7)
        norm = g2n_normalize(graph_from_matrix(R), G2NConfig())
        from sgfcf import assemble_adjacency

        A = assemble_adjacency(norm)
        total = np.eye(A.shape[0]) + A
        block = total[:9, 9:]
        assert np.allclose(block, norm.values.toarray())
        spec = dense_svd(norm)
        assert np.abs(spec.P @ np.diag(spec.sigma) @ spec.Q.T - block).max() < 1e-10

    def test_zero_order_block_is_zero(self):
        report = check_sgf_svd_equivalence(L=0, trials=3, seed=14)
        assert report.passed  # omega = 0 makes both sides vanish


class TestRunner:
    def test_all_checks_pass_and_are_deterministic(self):
        reports_a = run_all_checks(seed=21)
        reports_b = run_all_checks(seed=21)
        assert all(r.passed for r in reports_a)
        for a, b in zip(reports_a, reports_b):
            assert a == b

    def test_report_contract(self):
        report = check_spectral_symmetry(trials=3, seed=15)
        assert isinstance(report, TheoryReport)
        assert report.passed == (report.max_abs_error <= report.tolerance)

    def test_report_json(self, tmp_path):
        import json

        report = check_spectral_symmetry(trials=2, seed=16)
        path = tmp_path / "report.json"
        write_report_json(report, str(path))
        payload = json.loads(path.read_text())
        assert payload["check_name"] == "spectral_symmetry"
        assert payload["passed"] is True
        assert set(payload) == {
            "check_name", "instances_run", "max_abs_error", "tolerance", "passed", "details",
        }
