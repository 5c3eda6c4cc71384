import datetime
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from rankedshapes.core import balanced_fmatrix, code_to_fmatrix, enumerate_codes
from rankedshapes.formats import (
    FormatError,
    coordinates_csv,
    format_corpus,
    format_fmatrix,
    matrix_csv,
    parse_corpus,
    parse_fmatrix,
    read_labelled_matrix_csv,
    read_matrix_csv,
)
from rankedshapes.mds import classical_mds
from rankedshapes.metrics import HeteroGenealogy, RankedGenealogy, pairwise_distance_matrix
from rankedshapes.models import constant_popsize, sample_coalescent_genealogy, sample_yule
from rankedshapes.newick import (
    AmbiguousTimesError,
    NewickError,
    emit_newick,
    parse_newick,
    read_newick_trees,
    split_newick,
    to_newick,
    to_ranked,
)

from conftest import codes
from hetero_corpus import corpus


class TestParser:
    def test_small(self):
        tree = parse_newick("((:1,:1):1,:2);")
        assert tree.n == 3
        times = tree.node_times()
        assert times[id(tree.root)] == 2

    def test_labels_comments_quotes(self):
        tree = parse_newick("[c]('a b':1.5,(b[x]:0.5,'it''s':0.5):1)root;")
        assert [v.label for v in tree.leaves()] == ["a b", "b", "it's"]
        assert tree.root.label == "root"

    @pytest.mark.parametrize(
        "text, offset",
        [
            ("(a,b,c);", 4),
            ("((a,b);", 6),
            ("((a,b));", 6),
            ("(a:x,b);", 3),
            ("(a,b)", 5),
            ("(a,b);x", 6),
        ],
    )
    def test_errors_carry_offsets(self, text, offset):
        with pytest.raises(NewickError) as err:
            parse_newick(text)
        assert err.value.offset == offset

    def test_trifurcation_message(self):
        with pytest.raises(NewickError, match="binary"):
            parse_newick("(a,b,c);")

    def test_byte_offsets(self):
        with pytest.raises(NewickError) as err:
            parse_newick("(é:1,b:y);")
        assert err.value.offset == len("(é:1,b:".encode())

    @settings(max_examples=300, deadline=None)
    @given(st.text(alphabet="(),:;[]'ab01.|-é \n", max_size=40))
    def test_totality(self, text):
        try:
            parse_newick(text)
        except NewickError as e:
            assert 0 <= e.offset <= len(text.encode())
        except ValueError:
            pytest.fail("non-positional rejection")

    def test_dates(self):
        tree = parse_newick("(a|2020-03-01:1,b|2020-03-05:1);")
        assert [v.date for v in tree.leaves()] == [datetime.date(2020, 3, 1), datetime.date(2020, 3, 5)]
        with pytest.raises(NewickError):
            parse_newick("(a|2020-13-01:1,b:1);")
        assert parse_newick("(a|x:1,b:1);", date_delimiter=None).leaves()[0].label == "a|x"

    def test_split(self):
        assert split_newick("(a,b);\n('x;y',c);") == ["(a,b);", "('x;y',c);"]


class TestRanking:
    def test_caterpillar(self):
        G = to_ranked(parse_newick("((((a:1,b:1):1,c:2):1,d:3):1,e:4);"))
        assert G.code == (1, 2, 3, 4) and G.times == (4, 3, 2, 1)

    def test_balanced_n4(self):
        G = to_ranked(parse_newick("((a:1,b:1):2,(c:2,d:2):1);"))
        assert G.code == (1, 2, 2)
        assert G.fmatrix == balanced_fmatrix(4)

    def test_two_tip_dates(self):
        # c and d sampled 1.5 before a and b, with the (a, b) coalescence in between
        G = to_ranked(parse_newick("((a:1,b:1):2.5,(c:1,d:1):1);"))
        assert isinstance(G, HeteroGenealogy)
        blocks = [len(list(g)) for s, g in itertools.groupby(G.code.sigma) if s == 0]
        assert blocks == [2, 2]
        assert G.code.sigma == (1, 1, 0, 0, 1, 0, 0)
        assert G.node_times == (3.5, 2.5, 1.5, 1.5, 1.0, 0.0, 0.0)

    def test_ambiguous(self):
        with pytest.raises(AmbiguousTimesError):
            to_ranked(parse_newick("((a:1,b:1):1,(c:1,d:1):1);"))

    @settings(max_examples=50, deadline=None)
    @given(codes(3, 10), st.randoms(use_true_random=False))
    def test_label_invariance(self, code, rnd):
        G = RankedGenealogy(code, tuple(float(len(code) - k) for k in range(len(code))))
        tree = parse_newick(to_newick(G))
        leaves = tree.leaves()
        names = [f"x{k}" for k in range(len(leaves))]
        base = None
        for _ in range(3):
            rnd.shuffle(names)
            for v, name in zip(leaves, names):
                v.label = name
            out = to_ranked(parse_newick(emit_newick(tree)))
            base = base or out
            assert out.code == base.code == code

    def test_hetero_roundtrip(self):
        for G in corpus():
            back = to_ranked(parse_newick(to_newick(G)))
            if G.is_isochronous():
                back = HeteroGenealogy.from_isochronous(back)
            assert isinstance(back, HeteroGenealogy)
            assert np.allclose(back.node_times, G.node_times)
            assert np.array_equal(back.fmatrix(), G.fmatrix())

    def test_round_trip_100_tips(self):
        G = sample_coalescent_genealogy(100, constant_popsize(), np.random.default_rng(5))
        text = to_newick(G)
        tree = parse_newick(text)
        assert emit_newick(tree) == text
        # the last coalescence can sit closer to the tips than the default 1e-6 * height
        with pytest.raises(AmbiguousTimesError):
            to_ranked(tree)
        back = to_ranked(parse_newick(emit_newick(tree)), rel_tol=1e-12)
        assert back.code == G.code
        assert np.allclose(back.times, G.times, rtol=1e-12)

    def test_shape_emission(self):
        assert to_newick((1, 2)) == "((:1,:1):1,:2);"
        assert to_ranked(parse_newick(to_newick((1, 2, 3, 2)))).code == (1, 2, 3, 2)

    def test_multi_tree_file(self):
        text = "\n".join(to_newick(t) for t in enumerate_codes(5))
        assert [to_ranked(t).code for t in read_newick_trees(text)] == enumerate_codes(5)


class TestFormats:
    @settings(max_examples=50, deadline=None)
    @given(codes(2, 10))
    def test_fmatrix_roundtrip(self, code):
        F = code_to_fmatrix(code)
        assert parse_fmatrix(format_fmatrix(F)) == F

    def test_fmatrix_text(self):
        assert format_fmatrix(code_to_fmatrix((1, 2, 3, 4))) == "n 5\n2\n1 3\n1 2 4\n1 2 3 5\n"

    @pytest.mark.parametrize(
        "text", ["", "n 4\n2\n1 3\n", "n 3\n2\n1 x\n", "n 3\n2\n1 3 0\n", "n 3\n2\n2 3\n", "4\n2\n1 3\n"]
    )
    def test_fmatrix_rejects(self, text):
        with pytest.raises(FormatError):
            parse_fmatrix(text)

    def test_corpus_roundtrip(self):
        objs = [code_to_fmatrix((1, 2, 2, 3)), RankedGenealogy((1, 2, 3), (3.5, 2.0, 0.25))] + corpus()
        back = parse_corpus(format_corpus(objs) + "# trailing comment\n\n")
        assert back[0] == objs[0]
        assert back[1] == objs[1]
        for a, b in zip(back[2:], objs[2:]):
            assert a.code == b.code and a.node_times == b.node_times

    @pytest.mark.parametrize("line", ["1 2 x", "1 3 3", "t=1 2 ; 1 1 0", "1 2 | 3 4 5", "t=1 2 2 ; sigma=1 1 0 0 0"])
    def test_corpus_rejects(self, line):
        with pytest.raises(FormatError) as err:
            parse_corpus("1 2 2\n" + line + "\n")
        assert err.value.line == 2

    def test_matrix_csv(self):
        D = np.array([[0.0, 1.5], [1.5, 0.0]])
        text = matrix_csv(D, ["a", "b"])
        assert text == "a,b\n0.0,1.5\n1.5,0.0\n"
        header, back = read_labelled_matrix_csv(text)
        assert header == ["a", "b"] and np.array_equal(back, D)
        assert np.array_equal(read_matrix_csv(matrix_csv(D)), D)
        with pytest.raises(FormatError):
            read_matrix_csv("1,2\n3\n")

    def test_coordinates_csv(self):
        assert coordinates_csv(["p", "q"], np.array([[1.0], [-1.0]])) == "id,dim1\np,1.0\nq,-1.0\n"


class TestMds:
    def test_two_points(self):
        emb = classical_mds(np.array([[0, 3.0], [3.0, 0]]), 1)
        assert sorted(emb.coordinates[:, 0]) == pytest.approx([-1.5, 1.5])
        assert emb.explained == pytest.approx(1)

    def test_line(self):
        x = np.arange(6.0)
        D = np.abs(x[:, None] - x[None, :])
        emb = classical_mds(D, 2)
        assert emb.eigenvalues[1] == pytest.approx(0, abs=1e-9)
        assert np.allclose(emb.coordinates[:, 1], 0, atol=1e-7)
        assert np.allclose(np.abs(emb.coordinates[:, 0] - emb.coordinates[0, 0]), x)
        assert np.all(np.diff(emb.eigenvalues) <= 1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_euclidean_reconstruction(self, seed):
        P = np.random.default_rng(seed).normal(size=(12, 4))
        D = np.linalg.norm(P[:, None] - P[None, :], axis=2)
        emb = classical_mds(D, 4)
        X = emb.coordinates
        assert np.allclose(np.linalg.norm(X[:, None] - X[None, :], axis=2), D, atol=1e-8)
        assert np.allclose(X.mean(axis=0), 0, atol=1e-10)

    def test_yule_spearman(self):
        rng = np.random.default_rng(9)
        sample = [code_to_fmatrix(sample_yule(9, rng)) for _ in range(200)]
        D = pairwise_distance_matrix(sample, 2)
        emb = classical_mds(D, 2)
        X = emb.coordinates
        E = np.linalg.norm(X[:, None] - X[None, :], axis=2)
        iu = np.triu_indices(len(D), 1)
        assert 0 < emb.explained <= 1
        assert stats.spearmanr(D[iu], E[iu]).statistic > 0.8

    def test_deterministic_signs(self):
        P = np.random.default_rng(1).normal(size=(8, 2))
        D = np.linalg.norm(P[:, None] - P[None, :], axis=2)
        assert np.array_equal(classical_mds(D, 2).coordinates, classical_mds(D.copy(), 2).coordinates)

    @pytest.mark.parametrize(
        "D", [np.array([[0, 1.0], [2.0, 0]]), np.array([[1.0, 1], [1, 0]]), np.zeros((2, 3)), np.zeros((0, 0))]
    )
    def test_rejects(self, D):
        with pytest.raises(ValueError):
            classical_mds(D, 1)
