import itertools
import math

import numpy as np
import pytest

import csmci
from csmci import IsingParams, MONOMIAL, Region, TargetFunction
from csmci.errors import (
    ConfigurationError,
    EnumerationLimitError,
    UnsupportedAlphabetError,
)
from csmci.graphs import boundary_region
from csmci.model import enumerate_patterns, exact_log_partition, state_space

from conftest import random_small_graph


def naive_partition(p: IsingParams) -> float:
    """Independent oracle: direct sum of exp(-E) over itertools.product states."""
    z = 0.0
    for vals in itertools.product(p.alphabet, repeat=p.graph.n):
        z += math.exp(-csmci.energy(p, np.array(vals)))
    return z


def naive_expectation(p: IsingParams, t: Region) -> float:
    num, z = 0.0, 0.0
    for vals in itertools.product(p.alphabet, repeat=p.graph.n):
        w = math.exp(-csmci.energy(p, np.array(vals)))
        z += w
        num += w * math.prod(vals[v] for v in t.members)
    return num / z


class TestEnergy:
    def test_single_vertex(self, single_vertex):
        p = IsingParams(single_vertex, [1.0], [])
        assert csmci.energy(p, [1.0]) == -1.0

    def test_single_edge(self, chain2):
        p = IsingParams(chain2, [0.0, 0.0], [1.0])
        assert csmci.energy(p, [1.0, 1.0]) == -1.0

    def test_dual_path_random(self, torus45):
        rng = np.random.default_rng(0)
        p = csmci.random_params(torus45, 0.3, seed=5)
        x = rng.choice([-1.0, 1.0], torus45.n)
        # independent edge-list summation
        e = -float(np.dot(p.h, x))
        for k, (i, j) in enumerate(torus45.edges):
            e -= p.J[k] * x[i] * x[j]
        assert csmci.energy(p, x) == pytest.approx(e, abs=1e-12)

    def test_size_mismatch(self, chain2):
        p = IsingParams(chain2, [0.0, 0.0], [1.0])
        with pytest.raises(ConfigurationError):
            csmci.energy(p, [1.0])

    def test_global_flip_invariance_zero_field(self):
        rng = np.random.default_rng(3)
        g = random_small_graph(rng)
        p = IsingParams(g, np.zeros(g.n), rng.uniform(-1, 1, g.m))
        x = rng.choice([-1.0, 1.0], g.n)
        assert csmci.energy(p, x) == pytest.approx(csmci.energy(p, -x), abs=1e-12)


class TestAlphabetValidation:
    def test_empty(self, chain2):
        with pytest.raises(UnsupportedAlphabetError):
            IsingParams(chain2, [0, 0], [0.0], alphabet=())

    def test_duplicates(self, chain2):
        with pytest.raises(UnsupportedAlphabetError):
            IsingParams(chain2, [0, 0], [0.0], alphabet=(1.0, 1.0))

    def test_non_finite(self, chain2):
        with pytest.raises(UnsupportedAlphabetError):
            IsingParams(chain2, [0, 0], [0.0], alphabet=(0.0, float("inf")))


class TestConditionalDistribution:
    def test_zero_field_uniform(self, torus45):
        p = csmci.zero_params(torus45)
        table = csmci.conditional_distribution(p, Region([3]), np.ones(4))
        np.testing.assert_allclose(table, [0.5, 0.5], atol=1e-15)

    def test_single_site_closed_form(self, torus45):
        p = csmci.random_params(torus45, 0.3, seed=7)
        u = Region([9])
        bvals = np.array([1.0, -1.0, 1.0, 1.0])
        table = csmci.conditional_distribution(p, u, bvals)
        b = p.h[9]
        for j, s in zip(boundary_region(torus45, u).members, bvals):
            b += p.J[torus45.edge_id(9, j)] * s
        # P(x = +1 | s) = exp(b) / (2 cosh b); pattern order is (-1, +1)
        expected = np.array([math.exp(-b), math.exp(b)]) / (2.0 * math.cosh(b))
        np.testing.assert_allclose(table, expected, rtol=1e-14)

    def test_decoupled_pair_uniform(self):
        g = csmci.Graph(2, [(0, 1)])
        p = IsingParams(g, [0.0, 0.0], [0.0])
        table = csmci.conditional_distribution(p, Region([0, 1]), np.zeros(0))
        np.testing.assert_allclose(table, np.full(4, 0.25), atol=1e-15)

    def test_normalization_random(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            g = random_small_graph(rng)
            p = IsingParams(g, rng.uniform(-2, 2, g.n), rng.uniform(-2, 2, g.m))
            members = rng.choice(g.n, size=rng.integers(1, g.n + 1), replace=False)
            u = Region(members)
            bvals = rng.choice([-1.0, 1.0], len(boundary_region(g, u)))
            table = csmci.conditional_distribution(p, u, bvals)
            assert abs(table.sum() - 1.0) < 1e-12
            assert np.all(table >= 0)

    def test_boundary_mismatch(self, torus45):
        p = csmci.zero_params(torus45)
        with pytest.raises(ConfigurationError):
            csmci.conditional_distribution(p, Region([3]), np.ones(3))

    def test_boundary_as_mapping(self, torus45):
        p = csmci.random_params(torus45, 0.3, seed=1)
        u = Region([4])
        b = boundary_region(torus45, u)
        arr = np.array([1.0, 1.0, -1.0, 1.0])
        t1 = csmci.conditional_distribution(p, u, arr)
        t2 = csmci.conditional_distribution(p, u, dict(zip(b.members, arr)))
        np.testing.assert_array_equal(t1, t2)

    def test_enumeration_cap(self):
        g = csmci.build_torus(5, 5)
        p = csmci.zero_params(g)
        with pytest.raises(EnumerationLimitError):
            # 25-vertex sum region exceeds the cap
            csmci.conditional_distribution(p, Region(g.vertices), np.zeros(0))


class TestExactOracle:
    def test_zero_field_mean_is_zero(self, torus23):
        p = IsingParams(torus23, np.zeros(6), np.random.default_rng(0).uniform(-1, 1, 9))
        assert csmci.exact_expectation(p, MONOMIAL, Region([2])) == pytest.approx(0.0, abs=1e-12)

    def test_single_vertex_tanh(self, single_vertex):
        p = IsingParams(single_vertex, [0.5], [])
        assert csmci.exact_expectation(p, MONOMIAL, Region([0])) == pytest.approx(
            math.tanh(0.5), abs=1e-12
        )

    def test_two_vertex_pair_moment(self, chain2):
        p = IsingParams(chain2, [0.0, 0.0], [0.5])
        assert csmci.exact_expectation(p, MONOMIAL, Region([0, 1])) == pytest.approx(
            math.tanh(0.5), abs=1e-12
        )

    def test_partition_closed_forms(self, single_vertex, chain2):
        assert csmci.exact_partition(IsingParams(single_vertex, [0.0], [])) == pytest.approx(2.0)
        assert csmci.exact_partition(IsingParams(single_vertex, [1.0], [])) == pytest.approx(
            2.0 * math.cosh(1.0)
        )
        assert csmci.exact_partition(IsingParams(chain2, [0, 0], [1.0])) == pytest.approx(
            4.0 * math.cosh(1.0)
        )

    def test_partition_matches_naive_sum(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            g = random_small_graph(rng, n_max=7)
            p = IsingParams(g, rng.uniform(-1, 1, g.n), rng.uniform(-1, 1, g.m))
            z = csmci.exact_partition(p)
            assert z == pytest.approx(naive_partition(p), rel=1e-9)

    def test_expectation_matches_naive_sum(self):
        rng = np.random.default_rng(43)
        for _ in range(5):
            g = random_small_graph(rng, n_max=6)
            p = IsingParams(g, rng.uniform(-1, 1, g.n), rng.uniform(-1, 1, g.m))
            t = Region(rng.choice(g.n, size=2, replace=False))
            assert csmci.exact_expectation(p, MONOMIAL, t) == pytest.approx(
                naive_expectation(p, t), abs=1e-10
            )

    def test_enumeration_cap(self):
        g = csmci.build_torus(3, 7)  # 21 vertices
        p = csmci.zero_params(g)
        with pytest.raises(EnumerationLimitError):
            csmci.exact_partition(p)

    def test_moments_match_expectations(self, torus23):
        p = csmci.random_params(torus23, 0.3, seed=9)
        mom = csmci.exact_moments(p)
        for v in torus23.vertices:
            assert mom.means[v] == pytest.approx(
                csmci.exact_expectation(p, MONOMIAL, Region([v])), abs=1e-12
            )
        for k, (i, j) in enumerate(torus23.edges):
            assert mom.pair_means[k] == pytest.approx(
                csmci.exact_expectation(p, MONOMIAL, Region([i, j])), abs=1e-12
            )


def brute_conditional(p: IsingParams, u: Region, rest: dict) -> np.ndarray:
    """P(x_U | x_{V\\U}) straight from the energy, conditioning on everything."""
    weights = []
    for pat in itertools.product(p.alphabet, repeat=len(u)):
        full = np.zeros(p.graph.n)
        for v, val in rest.items():
            full[v] = val
        for v, val in zip(u.members, pat):
            full[v] = val
        weights.append(math.exp(-csmci.energy(p, full)))
    w = np.array(weights)
    return w / w.sum()


class TestMarkovProperties:
    def test_spatial_markov(self):
        # conditioning on the boundary equals conditioning on the full exterior
        rng = np.random.default_rng(17)
        for _ in range(10):
            g = random_small_graph(rng, n_max=7)
            p = IsingParams(g, rng.uniform(-1, 1, g.n), rng.uniform(-1, 1, g.m))
            size = rng.integers(1, max(2, g.n - 1))
            u = Region(rng.choice(g.n, size=size, replace=False))
            rest_vertices = [v for v in g.vertices if v not in u]
            rest = {v: float(rng.choice([-1.0, 1.0])) for v in rest_vertices}
            b = boundary_region(g, u)
            table = csmci.conditional_distribution(p, u, np.array([rest[v] for v in b.members]))
            np.testing.assert_allclose(table, brute_conditional(p, u, rest), atol=1e-10)

    def test_marginal_consistency(self):
        # averaging the conditional over the exact boundary marginal gives E[f]
        rng = np.random.default_rng(23)
        for _ in range(10):
            g = random_small_graph(rng, n_max=7)
            p = IsingParams(g, rng.uniform(-1, 1, g.n), rng.uniform(-1, 1, g.m))
            t = Region([int(rng.integers(0, g.n))])
            u = t.union(Region(rng.choice(g.n, size=rng.integers(0, 2), replace=False)))
            b = boundary_region(g, u)
            dist = state_space(g, p.alphabet).distribution(p.h, p.J)
            bmarg = dist.marginal(b)
            pats_u = enumerate_patterns(p.alphabet, len(u))
            f_u = MONOMIAL.evaluate(pats_u[:, [u.members.index(v) for v in t.members]])
            total = 0.0
            for bpat, pb in zip(enumerate_patterns(p.alphabet, len(b)), bmarg):
                table = csmci.conditional_distribution(p, u, bpat)
                total += pb * float(table @ f_u)
            assert total == pytest.approx(csmci.exact_expectation(p, MONOMIAL, t), abs=1e-10)


class TestGeneralAlphabet:
    def test_single_vertex_binary01(self):
        g = csmci.Graph(1, [])
        p = IsingParams(g, [0.7], [], alphabet=(0.0, 1.0))
        expected = math.exp(0.7) / (1.0 + math.exp(0.7))
        assert csmci.exact_expectation(p, MONOMIAL, Region([0])) == pytest.approx(expected)

    def test_three_letter_alphabet_normalizes(self, chain2):
        p = IsingParams(chain2, [0.3, -0.2], [0.4], alphabet=(-1.0, 0.0, 1.0))
        table = csmci.conditional_distribution(p, Region([0]), np.array([1.0]))
        assert abs(table.sum() - 1.0) < 1e-12
        assert csmci.exact_partition(p) == pytest.approx(naive_partition(p), rel=1e-9)


class TestTargetFunction:
    def test_table_matches_monomial(self):
        pats = enumerate_patterns((-1.0, 1.0), 2)
        table = TargetFunction.from_table(pats.prod(axis=1))
        np.testing.assert_array_equal(
            table.evaluate(pats, (-1.0, 1.0)), MONOMIAL.evaluate(pats)
        )

    def test_table_needs_alphabet(self):
        f = TargetFunction.from_table([1.0, 2.0])
        with pytest.raises(ValueError):
            f.evaluate(np.array([[1.0]]))

    def test_table_expectation(self, single_vertex):
        p = IsingParams(single_vertex, [0.5], [])
        f = TargetFunction.from_table([0.0, 1.0])  # indicator of +1
        expected = math.exp(0.5) / (2.0 * math.cosh(0.5))
        assert csmci.exact_expectation(p, f, Region([0])) == pytest.approx(expected)


class TestModelIO:
    def test_round_trip(self, tmp_path, torus45):
        p = csmci.random_params(torus45, 0.3, seed=12)
        path = tmp_path / "model.txt"
        csmci.save_model(p, path)
        q = csmci.load_model(path)
        np.testing.assert_array_equal(p.h, q.h)
        np.testing.assert_array_equal(p.J, q.J)
        assert q.alphabet == p.alphabet

    def test_round_trip_onto_lattice_graph(self, tmp_path, torus45):
        p = csmci.random_params(torus45, 0.3, seed=12)
        path = tmp_path / "model.txt"
        csmci.save_model(p, path)
        q = csmci.load_model(path, graph=torus45)
        assert q.graph is torus45
        np.testing.assert_array_equal(p.J, q.J)

    def test_graph_mismatch(self, tmp_path, torus45, torus23):
        p = csmci.random_params(torus45, 0.3, seed=12)
        path = tmp_path / "model.txt"
        csmci.save_model(p, path)
        with pytest.raises(ValueError):
            csmci.load_model(path, graph=torus23)

    def test_random_params_deterministic_and_bounded(self, torus45):
        p1 = csmci.random_params(torus45, 0.3, seed=99)
        p2 = csmci.random_params(torus45, 0.3, seed=99)
        np.testing.assert_array_equal(p1.h, p2.h)
        np.testing.assert_array_equal(p1.J, p2.J)
        assert np.all(np.abs(p1.h) <= 0.3) and np.all(np.abs(p1.J) <= 0.3)
        z = csmci.random_params(torus45, 0.3, seed=99, zero_field=True)
        assert np.all(z.h == 0.0)
