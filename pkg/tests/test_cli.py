import subprocess
import sys

import numpy as np
import pytest

from rankedshapes import cli
from rankedshapes.core import code_to_fmatrix, enumerate_codes
from rankedshapes.formats import parse_corpus, parse_fmatrix, read_labelled_matrix_csv
from rankedshapes.models import yule_pmf


@pytest.fixture
def run(capsys):
    def go(*argv):
        status = cli.main([str(a) for a in argv])
        out = capsys.readouterr()
        return status, out.out, out.err

    return go


@pytest.fixture
def corpus_file(tmp_path, run):
    path = tmp_path / "c.txt"
    assert run("sample", "--model", "yule", "--n", 6, "--m", 30, "--seed", 4, "--out", path)[0] == 0
    return path


def section(text, name):
    lines = text.splitlines()
    k = lines.index(f"# {name}")
    out = []
    for ln in lines[k + 1 :]:
        if ln.startswith("# "):
            break
        out.append(ln)
    return "\n".join(out)


class TestExamples:
    def test_enumerate(self, run):
        status, out, _ = run("enumerate", "--n", 5)
        assert status == 0 and len(out.splitlines()) == 5
        assert [tuple(map(int, ln.split())) for ln in out.splitlines()] == enumerate_codes(5)

    def test_enumerate_fmatrix(self, run):
        status, out, _ = run("enumerate", "--n", 4, "--fmatrix")
        assert status == 0 and out.count("n 4") == 2

    def test_moments(self, run):
        status, out, _ = run("moments", "--n", 6)
        rows = [ln.split() for ln in out.splitlines()[1:]]
        assert float(rows[3][1]) == 1.5

    def test_exact_vs_sa(self, run):
        a = run("mean", "--model", "yule", "--n", 5, "--method", "exact")
        b = run("mean", "--model", "yule", "--n", 5, "--method", "sa", "--seed", 7)
        assert a[0] == b[0] == 0
        assert section(a[1], "code") == section(b[1], "code") == "1 2 3 2"
        assert parse_fmatrix(section(a[1], "fmatrix")) == code_to_fmatrix((1, 2, 3, 2))


class TestSubcommands:
    def test_sample_models(self, run, tmp_path):
        for model in ("yule", "bf:-0.5", "bf:inf", "coalescent:constant", "coalescent:exponential", "coalescent:logistic"):
            status, out, err = run("sample", "--model", model, "--n", 5, "--m", 3, "--seed", 1)
            assert status == 0, err
            assert len(parse_corpus(out)) == 3

    def test_distance_pair_and_matrix(self, run, tmp_path):
        (tmp_path / "a.txt").write_text("1 2 3 4\n")
        (tmp_path / "b.txt").write_text("1 2 2 3\n")
        status, out, _ = run("distance", tmp_path / "a.txt", tmp_path / "b.txt", "--metric", "d1")
        assert status == 0 and float(out) == 3
        status, out, _ = run("distance", tmp_path / "a.txt", tmp_path / "b.txt", "--matrix")
        header, D = read_labelled_matrix_csv(out)
        assert header == ["a.txt:1", "b.txt:1"]
        assert D[0, 1] == pytest.approx(np.sqrt(3))

    def test_distance_modes(self, run, tmp_path):
        f = tmp_path / "g.txt"
        f.write_text("1 2 3 | 3 2 1\n1 2 2 | 4 2 1\n")
        assert run("distance", f, "--mode", "genealogy")[0] == 0
        assert run("distance", f, "--mode", "hetero")[0] == 0
        h = tmp_path / "h.txt"
        h.write_text("t=1 2 2 3 3 4 4 ; sigma=1 1 0 1 0 0 0 | 6 4 3.5 1 0.5 0 0\n")
        assert run("distance", h, "--mode", "shape")[0] == 1
        assert run("distance", h, f, "--mode", "hetero")[0] == 0

    def test_mean_genealogy(self, run, tmp_path):
        f = tmp_path / "g.txt"
        f.write_text("1 2 3 | 3 2 1\n1 2 3 | 5 4 1\n")
        status, out, _ = run("mean", f)
        assert status == 0
        assert section(out, "times") == "4.0 3.0 1.0"

    def test_mean_trace(self, run, corpus_file, tmp_path):
        trace = tmp_path / "t.csv"
        status, _, _ = run("mean", corpus_file, "--method", "sa", "--seed", 1, "--iters", 50, "--chains", 1, "--trace", trace)
        assert status == 0
        assert len(trace.read_text().splitlines()) == 51

    def test_dispersion(self, run, corpus_file):
        for cmd in (["variance"], ["entropy"], ["ball", "--level", 0.9], ["order"], ["medoid"], ["ball", "--level", 0.5, "--center", "kingman"]):
            status, out, err = run(*cmd, corpus_file)
            assert status == 0, err
            assert out

    def test_medoid_identifier(self, run, tmp_path):
        f = tmp_path / "m.txt"
        f.write_text("1 2 3 4\n1 2 3 2\n1 2 2 3\n")
        assert run("medoid", f)[1] == "m.txt:2\t1 2 3 2\n"

    def test_entropy_model(self, run):
        pmf = {t: yule_pmf(t) for t in enumerate_codes(5)}
        expected = -sum(p * np.log(p) for p in pmf.values())
        assert float(run("entropy", "--model", "yule", "--n", 5)[1]) == pytest.approx(expected)

    def test_mds(self, run, corpus_file, tmp_path):
        status, out, err = run("mds", corpus_file, "--k", 3)
        assert status == 0 and "explained fraction" in err
        lines = out.splitlines()
        assert lines[0] == "id,dim1,dim2,dim3" and len(lines) == 31
        d = tmp_path / "d.csv"
        run("distance", corpus_file, "--out", d)
        assert run("mds", "--matrix", d, "--k", 3)[1] == out

    def test_newick_input(self, run, tmp_path):
        f = tmp_path / "t.nwk"
        f.write_text("((((a:1,b:1):1,c:2):1,d:3):1,e:4);\n((a:1,b:1):2,(c:2.5,(d:0.5,e:0.5):2):0.5);\n")
        status, out, _ = run("distance", f, "--mode", "genealogy")
        assert status == 0 and float(out) > 0


class TestErrors:
    @pytest.mark.parametrize(
        "argv",
        [
            ["bogus"],
            ["enumerate", "--n", "5", "--unknown"],
            ["sample", "--model", "yule", "--n", "5", "--m", "2"],
            ["mean", "--model", "yule", "--n", "5", "--method", "sa"],
            ["distance", "/nonexistent/file"],
            ["mean", "--schedule", "exp:1", "--model", "yule", "--n", "5", "--method", "sa", "--seed", "1"],
            ["sample", "--model", "bf:abc", "--n", "5", "--m", "2", "--seed", "1"],
            ["mds"],
        ],
    )
    def test_user_errors(self, run, argv):
        status, out, err = run(*argv)
        assert status == 1 and err.startswith("error")

    def test_malformed_file(self, run, tmp_path):
        f = tmp_path / "bad.txt"
        f.write_text("1 2 2\n1 3 3\n")
        status, _, err = run("distance", f)
        assert status == 1 and "line 2" in err
        g = tmp_path / "bad.nwk"
        g.write_text("(a,b,c);")
        status, _, err = run("distance", g)
        assert status == 1 and "offset" in err

    def test_internal_error(self, run, monkeypatch):
        def boom(args):
            raise RuntimeError("boom")

        monkeypatch.setattr(cli, "cmd_enumerate", boom)
        status, _, err = run("enumerate", "--n", 3)
        assert status == 2 and "internal error" in err


def test_module_entry_point_deterministic(tmp_path):
    def once(name):
        out = tmp_path / name
        subprocess.run(
            [sys.executable, "-m", "rankedshapes", "sample", "--model", "bf:2", "--n", "8", "--m", "20", "--seed", "9", "--out", str(out)],
            check=True,
        )
        return out.read_bytes()

    assert once("a.txt") == once("b.txt")
