import math

import numpy as np
import pytest

import csmci
from csmci import EstimatorSpec, IsingParams, MONOMIAL, Region, SampleSet
from csmci.errors import EmptySampleError, EnumerationLimitError, InvalidRegionError
from csmci.estimators import (
    conditional_expectation,
    mci_estimate,
    smci_estimate,
    template_spec,
)
from csmci.gls import exact_covariance
from csmci.graphs import boundary_region
from csmci.sampling import draw_exact_sample_set, draw_sample_set


class TestSpecValidation:
    def test_target_inside_sum_region(self):
        with pytest.raises(InvalidRegionError):
            EstimatorSpec(Region([0, 1]), Region([1, 2]))

    def test_empty_target(self):
        with pytest.raises(InvalidRegionError):
            EstimatorSpec(Region([]), Region([1]))

    def test_cap(self, torus45):
        p = csmci.zero_params(csmci.build_torus(5, 5))
        spec = EstimatorSpec(Region([0]), Region(range(25)))
        s = SampleSet(np.ones((2, 25)))
        with pytest.raises(EnumerationLimitError):
            smci_estimate(p, spec, s)


class TestMci:
    def test_constant_points(self):
        s = SampleSet(np.ones((5, 3)))
        assert mci_estimate(MONOMIAL, Region([1]), s) == 1.0

    def test_cancellation(self):
        s = SampleSet(np.array([[1.0, 1.0], [-1.0, 1.0]]))
        assert mci_estimate(MONOMIAL, Region([0]), s) == 0.0

    def test_factorized_tanh(self, torus45):
        h = np.linspace(-0.8, 0.8, torus45.n)
        p = IsingParams(torus45, h, np.zeros(torus45.m))
        n_pts = 4000
        s = draw_sample_set(p, n_pts, 1, 3)
        for v in (0, 7, 19):
            est = mci_estimate(MONOMIAL, Region([v]), s)
            se = math.sqrt((1 - math.tanh(h[v]) ** 2) / n_pts)
            assert abs(est - math.tanh(h[v])) < 4.0 * se + 1e-9

    def test_target_outside(self):
        s = SampleSet(np.ones((2, 3)))
        with pytest.raises(InvalidRegionError):
            mci_estimate(MONOMIAL, Region([5]), s)


class TestConditionalExpectation:
    def test_one_smci_tanh(self, torus45):
        p = csmci.random_params(torus45, 0.4, seed=5)
        spec = EstimatorSpec(Region([9]), Region([9]))
        bvals = np.array([1.0, -1.0, -1.0, 1.0])
        b = p.h[9]
        for j, sv in zip(boundary_region(torus45, Region([9])).members, bvals):
            b += p.J[torus45.edge_id(9, j)] * sv
        assert conditional_expectation(p, spec, bvals) == pytest.approx(math.tanh(b), rel=1e-13)

    def test_symmetric_conditional_is_zero(self, torus45):
        p = csmci.zero_params(torus45)
        spec = EstimatorSpec(Region([3]), Region([3]))
        assert conditional_expectation(p, spec, np.array([1.0, 1.0, -1.0, 1.0])) == pytest.approx(
            0.0, abs=1e-15
        )

    def test_exhausted_connectivity_gives_exact(self, chain2):
        p = IsingParams(chain2, [0.2, -0.3], [0.5])
        spec = EstimatorSpec(Region([0]), Region([0, 1]))  # boundary is empty
        val = conditional_expectation(p, spec, np.zeros(0))
        assert val == pytest.approx(csmci.exact_expectation(p, MONOMIAL, Region([0])), abs=1e-12)


class TestSmciEstimate:
    def test_sum_region_whole_graph_is_exact(self, torus23):
        p = csmci.random_params(torus23, 0.3, seed=1)
        spec = EstimatorSpec(Region([2]), Region(torus23.vertices))
        s = draw_sample_set(p, 20, 1, 0)
        trace = smci_estimate(p, spec, s)
        exact = csmci.exact_expectation(p, MONOMIAL, Region([2]))
        assert trace.boundary_empty
        np.testing.assert_allclose(trace.values, exact, atol=1e-12)
        assert float(np.var(trace.values)) == pytest.approx(0.0, abs=1e-24)

    def test_single_vertex_model_no_boundary(self, single_vertex):
        p = IsingParams(single_vertex, [0.7], [])
        spec = EstimatorSpec(Region([0]), Region([0]))
        s = SampleSet(np.array([[1.0], [-1.0], [1.0]]))
        trace = smci_estimate(p, spec, s)
        assert trace.mean == pytest.approx(math.tanh(0.7), rel=1e-13)

    def test_values_match_conditional_expectation(self, torus45):
        p = csmci.random_params(torus45, 0.3, seed=2)
        s = draw_sample_set(p, 50, 2, 4)
        for kind in ("I", "II", "III"):
            spec = template_spec(torus45, Region([7]), kind)
            b = boundary_region(torus45, spec.sum_region)
            trace = smci_estimate(p, spec, s)
            for mu in range(10):
                ref = conditional_expectation(p, spec, s.points[mu, list(b.members)])
                assert trace.values[mu] == pytest.approx(ref, abs=1e-12)

    def test_pair_target_trace(self, torus45):
        p = csmci.random_params(torus45, 0.3, seed=3)
        i, j = torus45.edges[5]
        s = draw_sample_set(p, 30, 2, 8)
        for kind in ("I", "II", "III"):
            spec = template_spec(torus45, Region([i, j]), kind)
            trace = smci_estimate(p, spec, s)
            b = boundary_region(torus45, spec.sum_region)
            ref = conditional_expectation(p, spec, s.points[0, list(b.members)])
            assert trace.values[0] == pytest.approx(ref, abs=1e-12)

    def test_mean_is_average(self, torus45):
        p = csmci.random_params(torus45, 0.3, seed=2)
        s = draw_sample_set(p, 100, 2, 4)
        trace = smci_estimate(p, template_spec(torus45, Region([0]), "I"), s)
        assert trace.mean == pytest.approx(float(trace.values.mean()), abs=1e-12)

    def test_memoization_bit_identical(self, torus45):
        p = csmci.random_params(torus45, 0.5, seed=6)
        s = draw_sample_set(p, 400, 2, 9)
        for kind in ("I", "II", "III"):
            spec = template_spec(torus45, Region([11]), kind)
            with_memo = smci_estimate(p, spec, s, memoize=True)
            without = smci_estimate(p, spec, s, memoize=False)
            assert np.array_equal(with_memo.values, without.values)

    def test_closed_form_matches_generic(self, torus45):
        p = csmci.random_params(torus45, 0.6, seed=7)
        s = draw_sample_set(p, 200, 2, 10)
        spec = template_spec(torus45, Region([4]), "III")  # 1-SMCI
        fast = smci_estimate(p, spec, s, closed_form=True)
        generic = smci_estimate(p, spec, s, closed_form=False)
        np.testing.assert_allclose(fast.values, generic.values, rtol=1e-13, atol=1e-15)

    def test_empty_sample_guard(self, torus45):
        p = csmci.zero_params(torus45)
        s = SampleSet(np.ones((3, 7)))  # wrong width
        with pytest.raises(EmptySampleError):
            smci_estimate(p, template_spec(torus45, Region([0]), "I"), s)

    def test_unbiased_against_oracle(self, torus45):
        # spec example: big-N template-I estimate lands within 4 trace SEs
        p = csmci.random_params(torus45, 0.3, seed=20)
        s = draw_sample_set(p, 10000, 50, 21)
        spec = template_spec(torus45, Region([5]), "I")
        trace = smci_estimate(p, spec, s)
        exact = csmci.exact_expectation(p, MONOMIAL, Region([5]))
        se = float(trace.values.std(ddof=1)) / math.sqrt(len(trace))
        assert abs(trace.mean - exact) < 4.0 * se


class TestStatisticalUnbiasedness:
    def test_over_many_sample_sets(self, torus23):
        # spec invariant: >= 500 independent sample sets on a small model
        p = csmci.random_params(torus23, 0.3, seed=30)
        t = Region([1])
        exact = csmci.exact_expectation(p, MONOMIAL, t)
        means = []
        for trial in range(500):
            s = draw_exact_sample_set(p, 50, 1000 + trial)
            means.append(smci_estimate(p, template_spec(torus23, t, "I"), s).mean)
        means = np.asarray(means)
        se = means.std(ddof=1) / math.sqrt(len(means))
        assert abs(means.mean() - exact) < 4.0 * se


@pytest.fixture(scope="module")
def ordering_params(torus45):
    return csmci.random_params(torus45, 0.3, seed=40)


class TestVarianceOrdering:
    """Exact estimator variances from enumeration follow the theory."""

    def exact_var(self, p, spec):
        return float(exact_covariance(p, [spec], 1).entries[0, 0])

    def test_nested_regions_reduce_variance(self, torus45, ordering_params):
        p = ordering_params
        t = Region([8])
        ladder = {k: template_spec(torus45, t, k) for k in ("I", "II", "III", "IV", "V", "VI", "VII")}
        inclusions = [("III", "I"), ("III", "II"), ("IV", "I"), ("V", "I"), ("VI", "II"), ("VII", "II")]
        for small, big in inclusions:
            assert ladder[small].sum_region.issubset(ladder[big].sum_region)
            assert self.exact_var(p, ladder[big]) <= self.exact_var(p, ladder[small]) + 1e-12

    def test_smci_beats_mci(self, torus45, ordering_params):
        p = ordering_params
        for v in (0, 9, 17):
            t = Region([v])
            mean = csmci.exact_expectation(p, MONOMIAL, t)
            var_f = 1.0 - mean**2  # Var of a +-1 spin
            var_smci = self.exact_var(p, template_spec(torus45, t, "III"))
            assert var_smci <= var_f + 1e-12
