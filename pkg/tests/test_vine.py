import itertools

import numpy as np
import pytest
from scipy import special, stats

from gpvine import bicop, synth_sample, vine
from gpvine.bicop import CopulaParam
from gpvine.empirics import PseudoSample
from gpvine.errors import DomainError, FitError, SizeError, StateError, UnsupportedOperation
from gpvine.gpcond import GPConfig
from gpvine.vine import (ConstantCopula, Estimator, GPCopula, IndependentCopula, RVineStructure,
                         VineConfig, VineEdge, build_structure, evaluate, h_propagate,
                         independent_model, log_density, prim_maximum_spanning_tree, tau_surface)

from conftest import gaussian_copula_sample

CORR3 = np.array([[1.0, 0.6, 0.3], [0.6, 1.0, 0.5], [0.3, 0.5, 1.0]])
FAST_GP = VineConfig(gp=GPConfig(n_pseudo=10, max_evals=8))


def random_corr(d, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(d, d + 2))
    S = A @ A.T
    s = np.sqrt(np.diag(S))
    return S / np.outer(s, s)


def gaussian_copula_logpdf(u, corr):
    """Analytic log density of a Gaussian copula: MVN density over the product of margins."""
    x = special.ndtri(u)
    joint = stats.multivariate_normal(np.zeros(len(corr)), corr).logpdf(x)
    return joint - stats.norm.logpdf(x).sum(axis=1)


def forced_weight(table):
    """Edge weights keyed by label; everything else gets zero."""
    def weight(conditioned, conditioning, x, y):
        return table.get((conditioned, conditioning), 0.0)
    return weight


def synthetic_on_copula_scale(n, seed):
    x, y, z = synth_sample(n, seed).values.T
    return np.c_[special.ndtr(x), special.ndtr(y), (z + 6) / 12]


class TestStructure:
    def test_two_dimensions(self):
        s, _ = build_structure(gaussian_copula_sample(50, CORR3[:2, :2], 0))
        assert s.truncation_level == 1 and len(s.trees[0]) == 1
        e = s.trees[0][0]
        assert e.conditioned == (0, 1) and e.conditioning == ()

    def test_forced_four_dimensional_factorization(self):
        u = gaussian_copula_sample(200, random_corr(4, 1), 1)
        w = forced_weight({((0, 2), ()): 3.0, ((1, 2), ()): 3.0, ((2, 3), ()): 3.0,
                           ((0, 1), (2,)): 2.0, ((0, 3), (2,)): 2.0})
        s, _ = build_structure(u, weight=w)
        assert s.factorization() == ["1,3", "2,3", "3,4", "1,2|3", "1,4|3", "2,4|1,3"]

    @pytest.mark.parametrize("d", [2, 3, 4, 5, 6])
    def test_edge_count(self, d):
        s, _ = build_structure(gaussian_copula_sample(80, random_corr(d, d), d))
        assert len(list(s.edges())) == d * (d - 1) // 2

    @pytest.mark.parametrize("seed", range(6))
    def test_structural_invariants(self, seed):
        d = 3 + seed % 4
        s, _ = build_structure(gaussian_copula_sample(100, random_corr(d, seed), seed))
        prev_nodes = [frozenset({j}) for j in range(d)]
        for i, tree in enumerate(s.trees, start=1):
            assert len(tree) == d - i
            for e in tree:
                N = set(e.constraint)
                assert len(e.conditioned) == 2 and len(N) == i + 1
                if i == 1:
                    assert e.conditioning == () and set(e.conditioned) == N
                else:
                    p, q = s.trees[i - 2][e.parents[0]], s.trees[i - 2][e.parents[1]]
                    Np, Nq = set(p.constraint), set(q.constraint)
                    assert set(p.parents) & set(q.parents)  # proximity
                    assert set(e.conditioned) == Np ^ Nq
                    assert set(e.conditioning) == Np & Nq
                    assert N == Np | Nq
            # spanning tree: d - i edges joining d - i + 1 nodes without a cycle
            parent = list(range(len(prev_nodes)))

            def root(a):
                while parent[a] != a:
                    a = parent[a]
                return a
            for e in tree:
                ra, rb = root(e.parents[0]), root(e.parents[1])
                assert ra != rb
                parent[ra] = rb
            prev_nodes = [frozenset(e.constraint) for e in tree]

    def test_max_trees_range(self):
        u = gaussian_copula_sample(30, CORR3, 0)
        for bad in (0, 3):
            with pytest.raises(DomainError):
                build_structure(u, bad)
        with pytest.raises(DomainError):
            build_structure(u[:, :1])

    def test_find_labels(self):
        s, _ = build_structure(gaussian_copula_sample(100, CORR3, 0))
        e = s.trees[1][0]
        assert s.find(e.label()) is e
        assert s.find(e.label().replace(",", "")) is e
        assert s.find(e.label(["A", "B", "C"]), ["A", "B", "C"]) is e
        with pytest.raises(DomainError):
            s.find("1,1")

    def test_edge_validation(self):
        with pytest.raises(DomainError):
            VineEdge((0, 1), (2,), 1, (0, 1))


class TestPrim:
    @pytest.mark.parametrize("k", [2, 3, 4, 5, 6, 7])
    def test_matches_brute_force(self, k):
        rng = np.random.default_rng(k)
        W = rng.uniform(size=(k, k))
        W = np.round((W + W.T) / 2, 2)  # rounding creates ties
        all_edges = list(itertools.combinations(range(k), 2))
        best = -np.inf
        for subset in itertools.combinations(all_edges, k - 1):
            parent = list(range(k))

            def root(a):
                while parent[a] != a:
                    a = parent[a]
                return a
            ok = True
            for p, q in subset:
                rp, rq = root(p), root(q)
                if rp == rq:
                    ok = False
                    break
                parent[rp] = rq
            if ok:
                best = max(best, sum(W[p, q] for p, q in subset))
        tree = prim_maximum_spanning_tree(W)
        assert len(tree) == k - 1
        assert sum(W[p, q] for p, q in tree) == pytest.approx(best, abs=1e-12)

    def test_disconnected(self):
        W = np.full((3, 3), -np.inf)
        W[0, 1] = W[1, 0] = 1.0
        with pytest.raises(FitError):
            prim_maximum_spanning_tree(W)

    def test_tie_break_is_deterministic(self):
        W = np.ones((4, 4))
        assert prim_maximum_spanning_tree(W) == [(0, 1), (0, 2), (0, 3)]


class TestPropagation:
    def test_independent_parent(self):
        u = np.array([0.1, 0.5, 0.9])
        np.testing.assert_array_equal(h_propagate(IndependentCopula(), u, [0.3, 0.6, 0.2]), u)

    def test_zero_correlation(self):
        u = np.array([0.1, 0.5, 0.9])
        c = ConstantCopula(CopulaParam("gaussian", 0.0, 0.0))
        np.testing.assert_allclose(h_propagate(c, u, [0.3, 0.6, 0.2]), u, atol=1e-15)

    def test_symmetric_point(self):
        c = ConstantCopula(CopulaParam("gaussian", 0.8, bicop.theta_to_tau("gaussian", 0.8)))
        assert h_propagate(c, 0.5, 0.5)[0] == pytest.approx(0.5, abs=1e-15)

    def test_clamped(self):
        c = ConstantCopula(CopulaParam("gaussian", 0.99, bicop.theta_to_tau("gaussian", 0.99)))
        out = h_propagate(c, [1e-12, 1 - 1e-12], [0.9, 0.1])
        assert out[0] == vine.H_EPS and out[1] == 1 - vine.H_EPS

    def test_unfitted(self):
        with pytest.raises(StateError):
            h_propagate(None, [0.5], [0.5])

    def test_length_mismatch(self):
        with pytest.raises(SizeError):
            h_propagate(IndependentCopula(), [0.5, 0.4], [0.5])


class TestFit:
    def test_tree_one_identical_across_estimators(self):
        u = synthetic_on_copula_scale(120, 0)
        test = synthetic_on_copula_scale(300, 1)
        a = vine.fit(u, "svine", 1)
        b = vine.fit(u, "gpvine", 1, FAST_GP)
        assert evaluate(a, test) == evaluate(b, test)

    def test_svine_recovers_gaussian_parameters(self):
        u = gaussian_copula_sample(500, CORR3, 2)
        m = vine.fit(u, "svine")
        # partial correlations are the true parameters of conditional edges
        P = np.linalg.inv(CORR3)
        for e in m.structure.trees[0]:
            i, j = e.conditioned
            assert e.copula.param.theta == pytest.approx(CORR3[i, j], abs=0.1)
        e = m.structure.trees[1][0]
        i, j = e.conditioned
        k = e.conditioning[0]
        partial = (CORR3[i, j] - CORR3[i, k] * CORR3[j, k]) / np.sqrt(
            (1 - CORR3[i, k] ** 2) * (1 - CORR3[j, k] ** 2))
        assert e.copula.param.theta == pytest.approx(partial, abs=0.1)
        assert partial == pytest.approx(-P[i, j] / np.sqrt(P[i, i] * P[j, j]))

    def test_gpvine_conditional_edge(self):
        u = synthetic_on_copula_scale(100, 0)
        m = vine.fit(u, "gpvine", config=FAST_GP)
        e = m.structure.trees[1][0]
        assert isinstance(e.copula, GPCopula)
        assert e.copula.model.training_inputs.shape == (100, 1)
        assert m.diagnostics["edges"][e.label(m.column_names)]["kind"] == "gp"

    def test_mllvine_tree_limit(self):
        with pytest.raises(DomainError):
            vine.fit(gaussian_copula_sample(50, random_corr(4, 0), 0), "mllvine", 3)

    def test_mllvine_fits(self):
        m = vine.fit(synthetic_on_copula_scale(80, 3), "mllvine")
        e = m.structure.trees[1][0]
        assert e.copula.kind == "mll" and e.copula.model.bandwidth > 0

    def test_edge_error_carries_label(self):
        def failing(edge, x, y, z):
            if edge.level == 2:
                raise FitError("boom")
            return ConstantCopula(bicop.fit_theta_mle(np.c_[x, y]))
        with pytest.raises(FitError) as info:
            build_structure(PseudoSample(gaussian_copula_sample(60, CORR3, 0), ["a", "b", "c"]),
                            fit_edge=failing)
        assert "|" in info.value.edge and info.value.edge in str(info.value)

    def test_deterministic(self):
        u = synthetic_on_copula_scale(80, 5)
        a = vine.fit(u, "gpvine", config=FAST_GP)
        b = vine.fit(u, "gpvine", config=FAST_GP)
        assert a.structure.factorization() == b.structure.factorization()
        np.testing.assert_allclose(log_density(a, u), log_density(b, u), rtol=0, atol=1e-12)

    def test_diagnostics(self):
        u = gaussian_copula_sample(100, CORR3, 0)
        m = vine.fit(u, "svine")
        ll = m.diagnostics["train_loglik_per_tree"]
        assert len(ll) == 2 and ll[-1] == pytest.approx(evaluate(m, u)[0], abs=1e-12)


class TestDensity:
    def test_independent_model(self):
        m = independent_model(3)
        u = gaussian_copula_sample(20, CORR3, 0)
        np.testing.assert_array_equal(log_density(m, u), np.zeros(20))
        assert evaluate(m, u) == (0.0, 0.0)

    def test_two_dimensional_matches_pair_density(self):
        u = gaussian_copula_sample(100, CORR3[:2, :2], 3)
        m = vine.fit(u)
        theta = m.structure.trees[0][0].copula.param.theta
        np.testing.assert_allclose(log_density(m, u), bicop.gaussian_logpdf(u[:, 0], u[:, 1], theta),
                                   rtol=1e-14)

    def test_analytic_gaussian_oracle(self):
        train = gaussian_copula_sample(1000, CORR3, 10)
        test = gaussian_copula_sample(2000, CORR3, 11)
        m = vine.fit(train)
        assert evaluate(m, test)[0] == pytest.approx(
            np.mean(gaussian_copula_logpdf(test, CORR3)), abs=0.05)

    def test_integrates_to_one(self):
        m = vine.fit(gaussian_copula_sample(300, CORR3, 4))
        # Gauss-Legendre on normal scores in [-7, 7]; the tails beyond hold < 1e-11 mass
        t, w = np.polynomial.legendre.leggauss(48)
        x = 7.0 * t
        w = 7.0 * w * stats.norm.pdf(x)
        g = np.meshgrid(x, x, x, indexing="ij")
        pts = special.ndtr(np.column_stack([a.ravel() for a in g]))
        W = np.einsum("i,j,k->ijk", w, w, w).ravel()
        assert np.sum(W * np.exp(log_density(m, pts))) == pytest.approx(1.0, abs=5e-3)

    def test_dimension_mismatch(self):
        m = vine.fit(gaussian_copula_sample(50, CORR3, 0))
        with pytest.raises(SizeError):
            log_density(m, np.full((3, 2), 0.5))

    def test_train_dominates_independence(self):
        for seed in range(3):
            u = gaussian_copula_sample(60, random_corr(4, seed), seed)
            assert evaluate(vine.fit(u), u)[0] >= evaluate(independent_model(4), u)[0]

    def test_truncation_monotone_on_training_data(self):
        u = gaussian_copula_sample(150, random_corr(5, 7), 7)
        m = vine.fit(u)
        ll = [evaluate(m, u, k)[0] for k in range(1, 5)]
        assert all(b >= a - 1e-9 for a, b in zip(ll, ll[1:]))

    def test_unfitted_edge(self):
        s = RVineStructure(2, [[VineEdge((0, 1), (), 1, (0, 1))]])
        with pytest.raises(StateError):
            log_density(vine.VineModel(s, Estimator.SVINE, ["a", "b"]), np.full((2, 2), 0.5))


@pytest.fixture(scope="module")
def z_centred_gpvine():
    """GP vine on the synthetic task with the first tree forced to X-Z, Y-Z."""
    u = synthetic_on_copula_scale(300, 0)
    w = forced_weight({((0, 2), ()): 1.0, ((1, 2), ()): 1.0})
    fitter = vine._edge_fitter(Estimator.GPVINE, VineConfig())
    s, _ = build_structure(PseudoSample(u, ["X", "Y", "Z"]), weight=w, fit_edge=fitter)
    return vine.VineModel(s, Estimator.GPVINE, ["X", "Y", "Z"])


class TestTauSurface:
    def test_row_counts(self, z_centred_gpvine):
        assert len(tau_surface(z_centred_gpvine, "X,Y|Z", [0.5])) == 1
        surf = tau_surface(z_centred_gpvine, "1,2|3", np.linspace(0.01, 0.99, 17))
        assert len(surf) == 17 and surf.z.shape == (17, 1) and np.all(surf.tau_sd >= 0)

    def test_constant_edge_unsupported(self, z_centred_gpvine):
        with pytest.raises(UnsupportedOperation):
            tau_surface(z_centred_gpvine, "X,Z", [0.5])

    def test_sign_pattern(self, z_centred_gpvine):
        g = np.linspace(0.01, 0.99, 99)
        truth = 2 / np.pi * np.arcsin(0.75 * np.sin(12 * g - 6))
        est = tau_surface(z_centred_gpvine, "X,Y|Z", g).tau_mean
        strong = np.abs(truth) > 0.3
        assert np.all(np.sign(est[strong]) == np.sign(truth[strong]))

    def test_two_dimensional_grid(self):
        u = gaussian_copula_sample(60, random_corr(4, 2), 2)
        m = vine.fit(u, "gpvine", 3, FAST_GP)
        e = m.structure.trees[2][0]
        grid = np.array([[a, b] for a in np.linspace(0.1, 0.9, 4) for b in np.linspace(0.1, 0.9, 3)])
        assert len(tau_surface(m, e.label(), grid)) == 12
        with pytest.raises(SizeError):
            tau_surface(m, e.label(), np.zeros((3, 3)))
