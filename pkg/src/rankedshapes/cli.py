"""
Command-line interface.

Exit status: 0 on success, 1 for bad input or usage, 2 for internal errors.
Every randomised subcommand requires ``--seed``; identical arguments give
byte-identical output.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import formats
from .core import code_to_fmatrix, enumerate_codes, enumerate_shapes, fmatrix_to_code
from .frechet import (
    CoolingSchedule,
    SAConfig,
    frechet_mean_exact,
    frechet_mean_genealogy,
    frechet_mean_sa,
    frechet_variance,
    medoid_index,
)
from .mds import classical_mds
from .metrics import HeteroGenealogy, RankedGenealogy, pairwise_distance_matrix
from .models import (
    blum_francois_pmf,
    builtin_popsize,
    kingman_mean,
    kingman_var,
    sample_blum_francois,
    sample_coalescent_times,
)
from .newick import read_newick_trees, to_newick, to_ranked
from .order import credible_ball, entropy, histogram_csv, kingman_reference, ordered_histogram, signed_distance


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# Input helpers


def _parse_model(text: str):
    if text == "yule":
        return "bf", 0.0
    if text.startswith("bf:"):
        try:
            return "bf", float(text[3:])
        except ValueError:
            raise UsageError(f"bad beta in model {text!r}") from None
    if text.startswith("coalescent:"):
        return "coalescent", text.split(":", 1)[1]
    raise UsageError(f"unknown model {text!r} (use yule, bf:BETA or coalescent:POP)")


def load_trees(paths, *, date_delimiter="|", rel_tol=1e-6, ids: list | None = None) -> list:
    """Trees from corpus or Newick files; ``ids`` collects ``file:index`` names."""
    trees = []
    for path in paths:
        start = len(trees)
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise UsageError(f"cannot read {path}: {e.strerror}") from None
        if text.lstrip().startswith("("):
            trees += [to_ranked(t, rel_tol=rel_tol) for t in read_newick_trees(text, date_delimiter=date_delimiter)]
        else:
            try:
                trees += formats.parse_corpus(text)
            except formats.FormatError as e:
                raise UsageError(f"{path}: {e}") from None
        if ids is not None:
            ids += [f"{Path(path).name}:{k}" for k in range(1, len(trees) - start + 1)]
    if not trees:
        raise UsageError("no trees in input")
    return trees


def _shapes(trees):
    return [t.fmatrix if isinstance(t, RankedGenealogy) else t for t in trees]


def _distribution(args):
    """``(sample, pmf)`` from input files or from ``--model`` / ``--n``."""
    if getattr(args, "model", None):
        kind, beta = _parse_model(args.model)
        if kind != "bf":
            raise UsageError("only yule or bf:BETA define a shape pmf")
        if not args.n:
            raise UsageError("--model needs --n")
        return None, {t: blum_francois_pmf(t, beta) for t in enumerate_codes(args.n)}
    if not args.files:
        raise UsageError("give input files or --model with --n")
    trees = load_trees(args.files, date_delimiter=args.date_delimiter)
    if any(isinstance(t, HeteroGenealogy) for t in trees):
        raise UsageError("this command works on isochronous shapes")
    return _shapes(trees), None


def _emit(args, text: str):
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _metric(args) -> int:
    return {"d1": 1, "d2": 2}[args.metric]


def _require_seed(args):
    if args.seed is None:
        raise UsageError("this command is randomised; --seed is required")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_sample(args):
    _require_seed(args)
    kind, param = _parse_model(args.model)
    rng = np.random.default_rng(args.seed)
    out = []
    for _ in range(args.m):
        if kind == "bf":
            out.append(sample_blum_francois(args.n, param, rng))
        else:
            try:
                pop = builtin_popsize(param)
            except ValueError as e:
                raise UsageError(str(e)) from None
            code = sample_blum_francois(args.n, 0.0, rng)
            out.append(RankedGenealogy(code, sample_coalescent_times(args.n, pop, rng)))
    _emit(args, formats.format_corpus(out))


def cmd_distance(args):
    ids: list[str] = []
    trees = load_trees(args.files, date_delimiter=args.date_delimiter, ids=ids)
    p = _metric(args)
    if args.mode == "shape":
        trees = _shapes(trees)
        if any(isinstance(t, HeteroGenealogy) for t in trees):
            raise UsageError("heterochronous trees need --mode hetero")
    elif args.mode == "genealogy":
        if not all(isinstance(t, RankedGenealogy) for t in trees):
            raise UsageError("--mode genealogy needs isochronous genealogies with times")
    else:
        if not all(isinstance(t, (RankedGenealogy, HeteroGenealogy)) for t in trees):
            raise UsageError("--mode hetero needs genealogies with times")
        trees = [HeteroGenealogy.from_isochronous(t) if isinstance(t, RankedGenealogy) else t for t in trees]
    D = pairwise_distance_matrix(trees, p, weighted=not args.unweighted, parallel=args.workers > 1, workers=args.workers)
    if len(trees) == 2 and not args.matrix:
        _emit(args, formats.fmt_number(D[0, 1]) + "\n")
    else:
        _emit(args, formats.matrix_csv(D, header=ids))


def _schedule(args) -> CoolingSchedule:
    try:
        return CoolingSchedule.parse(args.schedule)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _mean_report(code, F, newick, extra="") -> str:
    return f"# code\n{formats.format_code(code)}\n{extra}# fmatrix\n{formats.format_fmatrix(F)}# newick\n{newick}\n"


def cmd_mean(args):
    p = _metric(args)
    if args.method == "sa":
        _require_seed(args)
    if args.files and not args.model:
        trees = load_trees(args.files, date_delimiter=args.date_delimiter)
        if all(isinstance(t, (RankedGenealogy, HeteroGenealogy)) for t in trees):
            if p != 2:
                raise UsageError("genealogy means are defined for d2")
            config = SAConfig(_schedule(args), args.iters, args.chains)
            G = frechet_mean_genealogy(
                trees,
                times=args.times,
                method=args.method,
                config=config,
                seed=args.seed or 0,
                align=args.align,
                topology=args.topology,
            )
            if isinstance(G, RankedGenealogy):
                _emit(args, _mean_report(G.code, G.fmatrix, to_newick(G), f"# times\n{' '.join(formats.fmt_number(u) for u in G.times)}\n"))
            else:
                line = formats.format_tree(G)
                _emit(args, f"# hetero\n{line}\n# fmatrix\n{formats.format_fmatrix(G.fmatrix())}# newick\n{to_newick(G)}\n")
            return
    sample, pmf = _distribution(args)
    if args.method == "exact":
        res = frechet_mean_exact(p=p, sample=sample, pmf=pmf)
        F = res.mean
        extra = f"# energy {formats.fmt_number(res.energy)}\n"
        if len(res.means) > 1:
            extra += f"# tied minimisers {len(res.means)}\n"
    else:
        res = frechet_mean_sa(
            p=p, sample=sample, pmf=pmf, schedule=_schedule(args), iterations=args.iters, seed=args.seed, chains=args.chains
        )
        F = res.fmatrix
        extra = f"# energy {formats.fmt_number(res.energy)}\n"
        if args.trace:
            Path(args.trace).write_text(res.trace_csv(), encoding="utf-8")
    code = fmatrix_to_code(F)
    _emit(args, _mean_report(code, F, to_newick(code), extra))


def _mean_shape(args, sample, pmf, p):
    if args.method == "exact":
        return frechet_mean_exact(p=p, sample=sample, pmf=pmf).mean
    _require_seed(args)
    return frechet_mean_sa(p=p, sample=sample, pmf=pmf, schedule=_schedule(args), iterations=args.iters, seed=args.seed, chains=args.chains).fmatrix


def cmd_variance(args):
    p = _metric(args)
    sample, pmf = _distribution(args)
    mean = _mean_shape(args, sample, pmf, p)
    _emit(args, formats.fmt_number(frechet_variance(sample, mean, pmf=pmf, p=p)) + "\n")


def cmd_medoid(args):
    ids: list[str] = []
    trees = load_trees(args.files, date_delimiter=args.date_delimiter, ids=ids)
    if args.shape:
        trees = _shapes(trees)
    k = medoid_index(trees, _metric(args))
    _emit(args, f"{ids[k]}\t{formats.format_tree(trees[k])}\n")


def cmd_entropy(args):
    sample, pmf = _distribution(args)
    if pmf is None:
        counts: dict = {}
        for F in sample:
            counts[F] = counts.get(F, 0) + 1
        probs = np.array(list(counts.values()), dtype=float) / len(sample)
    else:
        probs = np.array(list(pmf.values()))
        probs = probs / probs.sum()
    _emit(args, formats.fmt_number(entropy(probs)) + "\n")


def _reference(args, n, sample, pmf, p, which):
    if which == "kingman":
        return kingman_reference(n)
    if which == "mean":
        return _mean_shape(args, sample, pmf, p)
    try:
        text = Path(which).read_text(encoding="utf-8")
    except OSError as e:
        raise UsageError(f"cannot read {which}: {e.strerror}") from None
    if text.lstrip().startswith("n "):
        return formats.parse_fmatrix(text)
    trees = _shapes(formats.parse_corpus(text))
    if len(trees) != 1:
        raise UsageError("reference file must hold exactly one tree")
    return trees[0]


def _n_of(sample, pmf):
    return sample[0].n if sample else code_to_fmatrix(next(iter(pmf))).n


def cmd_ball(args):
    p = _metric(args)
    sample, pmf = _distribution(args)
    center = _reference(args, _n_of(sample, pmf), sample, pmf, p, args.center)
    b = credible_ball(sample, center, args.level, pmf=pmf, p=p)
    rows = [
        ["center", formats.format_code(fmatrix_to_code(b.center))],
        ["radius", formats.fmt_number(b.radius)],
        ["level", formats.fmt_number(b.level)],
        ["mass", formats.fmt_number(b.mass)],
        ["members", str(len(b.members))],
    ]
    rows += [["boundary", formats.format_code(c), formats.fmt_number(signed_distance(F, b.center, p))] for c, F in zip(b.boundary_codes, b.boundary)]
    _emit(args, "".join(",".join(r) + "\n" for r in rows))


def cmd_order(args):
    p = _metric(args)
    sample, pmf = _distribution(args)
    ref = _reference(args, _n_of(sample, pmf), sample, pmf, p, args.ref)
    _emit(args, histogram_csv(ordered_histogram(sample, ref, pmf=pmf, p=p)))


def cmd_enumerate(args):
    if args.fmatrix:
        _emit(args, "".join(formats.format_fmatrix(F) for F in enumerate_shapes(args.n)))
    else:
        _emit(args, "".join(formats.format_code(t) + "\n" for t in enumerate_codes(args.n)))


def cmd_moments(args):
    n = args.n
    text = formats.format_fmatrix(kingman_mean(n))
    if args.variance:
        V = np.zeros((n - 1, n - 1))
        for i in range(1, n):
            for j in range(1, i + 1):
                V[i - 1, j - 1] = kingman_var(n, i, j)
        text += formats.format_fmatrix(V)
    _emit(args, text)


def cmd_mds(args):
    if args.matrix:
        try:
            ids, D = formats.read_labelled_matrix_csv(Path(args.matrix).read_text(encoding="utf-8"))
        except OSError as e:
            raise UsageError(f"cannot read {args.matrix}: {e.strerror}") from None
        ids = ids or [str(k) for k in range(1, len(D) + 1)]
    else:
        ids = []
        trees = load_trees(args.files, date_delimiter=args.date_delimiter, ids=ids)
        if args.mode == "shape":
            trees = _shapes(trees)
        elif args.mode == "hetero":
            trees = [HeteroGenealogy.from_isochronous(t) if isinstance(t, RankedGenealogy) else t for t in trees]
        D = pairwise_distance_matrix(trees, _metric(args))
    emb = classical_mds(D, args.k)
    _emit(args, formats.coordinates_csv(ids, emb.coordinates))
    sys.stderr.write(f"explained fraction {formats.fmt_number(emb.explained)}\n")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rankedshapes", description="Statistics on ranked tree shapes and genealogies.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, model=False, nargs="+"):
        p.add_argument("files", nargs="*" if model else nargs, help="corpus or Newick files")
        if model:
            p.add_argument("--model", help="yule or bf:BETA (pmf over all shapes with --n leaves)")
            p.add_argument("--n", type=int)
        p.add_argument("--out", help="write output here instead of stdout")
        p.add_argument("--date-delimiter", default="|")

    def metric(p):
        p.add_argument("--metric", choices=["d1", "d2"], default="d2")

    def search(p):
        p.add_argument("--method", choices=["exact", "sa"], default="exact")
        p.add_argument("--seed", type=int)
        p.add_argument("--schedule", default="exp:1000:0.9995", help="kind:R0:alpha with kind exp, lin or log")
        p.add_argument("--iters", type=int, default=50_000)
        p.add_argument("--chains", type=int, default=4)

    p = sub.add_parser("sample", help="draw a tree corpus")
    p.add_argument("--model", required=True, help="yule, bf:BETA or coalescent:{constant,exponential,logistic}")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("distance", help="pairwise distances")
    common(p)
    metric(p)
    p.add_argument("--mode", choices=["shape", "genealogy", "hetero"], default="shape")
    p.add_argument("--unweighted", action="store_true", help="hetero mode: compare F instead of F*W")
    p.add_argument("--matrix", action="store_true", help="always print the full matrix")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser("mean", help="Fréchet mean")
    common(p, model=True)
    metric(p)
    search(p)
    p.add_argument("--times", choices=["mean", "median"], default="mean")
    p.add_argument("--topology", choices=["shape", "joint"], default="shape")
    p.add_argument("--align", action="store_true", help="heterochronous input: keep the most common sigma")
    p.add_argument("--trace", help="write the annealing trace CSV here")
    p.set_defaults(func=cmd_mean)

    p = sub.add_parser("variance", help="Fréchet variance")
    common(p, model=True)
    metric(p)
    search(p)
    p.set_defaults(func=cmd_variance)

    p = sub.add_parser("medoid", help="in-sample Fréchet mean")
    common(p)
    metric(p)
    p.add_argument("--shape", action="store_true", help="ignore branching times")
    p.set_defaults(func=cmd_medoid)

    p = sub.add_parser("entropy", help="Shannon entropy of the shape distribution")
    common(p, model=True)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("ball", help="credible ball")
    common(p, model=True)
    metric(p)
    search(p)
    p.add_argument("--level", type=float, required=True)
    p.add_argument("--center", default="mean", help="mean, kingman or a file")
    p.set_defaults(func=cmd_ball)

    p = sub.add_parser("order", help="histogram in signed-distance order")
    common(p, model=True)
    metric(p)
    search(p)
    p.add_argument("--ref", default="kingman", help="kingman or a file")
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("enumerate", help="list all ranked shapes")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--fmatrix", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("moments", help="Kingman mean F-matrix")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--variance", action="store_true", help="also print the variance matrix")
    p.add_argument("--out")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("mds", help="classical MDS coordinates")
    common(p, nargs="*")
    metric(p)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--mode", choices=["shape", "genealogy", "hetero"], default="shape")
    p.add_argument("--matrix", help="distance matrix CSV instead of tree files")
    p.set_defaults(func=cmd_mds)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "mds" and not args.matrix and not args.files:
            raise UsageError("mds needs tree files or --matrix")
        args.func(args)
        return 0
    except UsageError as e:
        sys.stderr.write(f"error: {e}\n")
        return 1
    except (ValueError, KeyError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 1
    except Exception as e:
        sys.stderr.write(f"internal error: {type(e).__name__}: {e}\n")
        return 2
