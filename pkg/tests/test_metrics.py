import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rankedshapes.core import balanced_fmatrix, code_to_fmatrix, enumerate_shapes, unbalanced_fmatrix
from rankedshapes.metrics import (
    DimensionError,
    HeteroGenealogy,
    RankedGenealogy,
    align_heterochronous,
    d_genealogy,
    d_hetero,
    d_shape,
    pairwise_distance_matrix,
    weight_matrix,
)

from conftest import codes
from hetero_corpus import corpus, pair_distance


def test_extremes_n5():
    U, B = unbalanced_fmatrix(5), balanced_fmatrix(5)
    assert d_shape(U, B, 1) == 3
    assert d_shape(U, B, 2) == pytest.approx(math.sqrt(3), abs=1e-15)
    assert d_shape(U, U, 2) == 0


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        d_shape(unbalanced_fmatrix(4), unbalanced_fmatrix(5))


@pytest.mark.parametrize("p", [1, 2])
@pytest.mark.parametrize("n", [4, 5, 6])
def test_metric_axioms(n, p):
    shapes = enumerate_shapes(n)
    D = pairwise_distance_matrix(shapes, p)
    m = len(shapes)
    assert np.array_equal(D, D.T)
    off = D + np.eye(m)
    assert np.all(off > 0)
    for a, b, c in itertools.product(range(m), repeat=3):
        assert D[a, c] <= D[a, b] + D[b, c] + 1e-12


class TestWeights:
    def test_example(self):
        assert weight_matrix((3, 2, 1)).tolist() == [[1, 0, 0], [2, 1, 0], [3, 2, 1]]

    def test_single(self):
        assert weight_matrix((1.0,)).tolist() == [[1.0]]

    def test_non_monotone(self):
        with pytest.raises(ValueError):
            RankedGenealogy((1, 2, 3), (3.0, 3.5, 1.0))


class TestGenealogy:
    def test_identical(self):
        G = RankedGenealogy((1, 2, 2), (3.0, 2.0, 1.0))
        assert d_genealogy(G, G) == 0

    def test_time_scaling_p1(self):
        G = RankedGenealogy((1, 2, 3, 2), (4.0, 3.0, 1.5, 0.5))
        H = G.scaled(2.0)
        F = G.fmatrix.dense()
        W = weight_matrix(G.times)
        assert d_genealogy(G, H, 1) == pytest.approx((F * W).sum())

    def test_elementwise_oracle(self):
        G = RankedGenealogy((1, 2, 2), (3.0, 2.0, 0.5))
        H = RankedGenealogy((1, 2, 3), (4.0, 1.0, 0.25))
        u1, u2 = (3.0, 2.0, 0.5, 0.0), (4.0, 1.0, 0.25, 0.0)
        F1, F2 = G.fmatrix, H.fmatrix
        total = 0.0
        for i in range(1, 4):
            for j in range(1, i + 1):
                a = F1[i, j] * (u1[j - 1] - u1[i])
                b = F2[i, j] * (u2[j - 1] - u2[i])
                total += (a - b) ** 2
        assert d_genealogy(G, H) == pytest.approx(math.sqrt(total), rel=1e-14)

    @given(codes(min_n=3, max_n=8), codes(min_n=3, max_n=8), st.floats(0.1, 10))
    @settings(max_examples=60, deadline=None)
    def test_scaling_property(self, t1, t2, lam):
        if len(t1) != len(t2):
            return
        n = len(t1) + 1
        u = tuple(float(n - k) for k in range(1, n))
        v = tuple(float(n - k) ** 1.5 for k in range(1, n))
        G, H = RankedGenealogy(t1, u), RankedGenealogy(t2, v)
        assert d_genealogy(G.scaled(lam), H.scaled(lam)) == pytest.approx(lam * d_genealogy(G, H), rel=1e-9, abs=1e-9)


class TestHetero:
    def test_identical_zero(self):
        for G in corpus():
            assert d_hetero(G, G) == 0

    def test_isochronous_degenerates(self):
        G = RankedGenealogy((1, 2, 3, 2), (4.0, 3.0, 1.5, 0.5))
        H = RankedGenealogy((1, 2, 2, 3), (5.0, 2.0, 1.0, 0.2))
        hG, hH = HeteroGenealogy.from_isochronous(G), HeteroGenealogy.from_isochronous(H)
        assert hG.is_isochronous()
        assert np.array_equal(hG.fmatrix(), G.fmatrix.dense())
        assert d_hetero(hG, hH) == pytest.approx(d_genealogy(G, H), rel=1e-14)

    def test_padding_counts(self):
        trees = corpus()
        aligned = align_heterochronous(trees[:2])
        assert len({A.F.shape for A in aligned}) == 1
        # tree 0 has one sampling event after coalescence 2 and tree 1 none: both get one slot there
        assert aligned[0].kinds[:3] == ("c", "c", "s")
        assert aligned[1].kinds[:3] == ("c", "c", "a")

    @pytest.mark.parametrize("p", [1, 2])
    @pytest.mark.parametrize("weighted", [True, False])
    def test_pair_insertion_oracle(self, p, weighted):
        trees = corpus()
        joint = align_heterochronous(trees)
        for a, b in itertools.combinations(range(len(trees)), 2):
            oracle = pair_distance(trees[a], trees[b], p, weighted)
            assert d_hetero(trees[a], trees[b], p, weighted=weighted) == pytest.approx(oracle, rel=1e-12, abs=1e-12)
            ctx = d_hetero(trees[a], trees[b], p, weighted=weighted, context=joint, indices=(a, b))
            assert ctx == pytest.approx(oracle, rel=1e-12, abs=1e-12)

    def test_reduction(self):
        trees = corpus()
        for G, A in zip(trees, align_heterochronous(trees)):
            F, W = A.reduced()
            assert np.array_equal(F, G.fmatrix())
            assert np.allclose(W, np.tril(np.subtract.outer(G.event_times[1:], G.event_times[:-1]) * -1))

    def test_triangle_within_alignment(self):
        trees = corpus()
        D = pairwise_distance_matrix(trees, 2)
        m = len(trees)
        for a, b, c in itertools.product(range(m), repeat=3):
            assert D[a, c] <= D[a, b] + D[b, c] + 1e-9

    def test_mismatched_leaves(self):
        G = corpus()[0]
        H = HeteroGenealogy.from_isochronous(RankedGenealogy((1, 2, 3, 2), (4.0, 3.0, 1.5, 0.5)))
        with pytest.raises(DimensionError):
            d_hetero(G, H)


class TestPairwise:
    def test_identical(self):
        F = code_to_fmatrix((1, 2, 3))
        assert pairwise_distance_matrix([F, F]).tolist() == [[0, 0], [0, 0]]

    def test_empty(self):
        assert pairwise_distance_matrix([]).shape == (0, 0)

    def test_d1_entrywise(self):
        shapes = enumerate_shapes(5)
        D = pairwise_distance_matrix(shapes, 1)
        for a, b in itertools.product(range(5), repeat=2):
            assert D[a, b] == sum(abs(x - y) for x, y in zip(shapes[a].flat, shapes[b].flat))

    def test_parallel_matches(self, rng):
        from rankedshapes.models import sample_yule

        sample = [code_to_fmatrix(sample_yule(9, rng)) for _ in range(600)]
        serial = pairwise_distance_matrix(sample, 2)
        threaded = pairwise_distance_matrix(sample, 2, parallel=True, workers=3)
        assert np.array_equal(serial, threaded)

    def test_heterogeneous(self):
        with pytest.raises((TypeError, DimensionError)):
            pairwise_distance_matrix([unbalanced_fmatrix(4), unbalanced_fmatrix(5)])
        with pytest.raises(TypeError):
            pairwise_distance_matrix([unbalanced_fmatrix(4), RankedGenealogy((1, 2, 3), (3.0, 2.0, 1.0))])

    @pytest.mark.parametrize("n", range(4, 8))
    @pytest.mark.parametrize("p", [1, 2])
    def test_extremal_pair_attains_diameter(self, n, p):
        shapes = enumerate_shapes(n)
        D = pairwise_distance_matrix(shapes, p)
        assert d_shape(unbalanced_fmatrix(n), balanced_fmatrix(n), p) == pytest.approx(D.max(), rel=1e-14)
        top = {frozenset((shapes[a], shapes[b])) for a, b in np.argwhere(np.isclose(D, D.max(), rtol=1e-12))}
        extreme = frozenset((unbalanced_fmatrix(n), balanced_fmatrix(n)))
        if n == 5:
            # a second pair ties with the extremes at n = 5
            tie = frozenset((code_to_fmatrix((1, 2, 2, 4)), code_to_fmatrix((1, 2, 3, 3))))
            assert top == {extreme, tie}
        else:
            assert top == {extreme}
