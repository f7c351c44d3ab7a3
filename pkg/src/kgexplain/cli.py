"""Command-line entry point: ``kgexplain <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 feature-cap
abort. Failures print one line ``error: <CODE>: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import ConfigError
from .dataset import DataError, LabeledDataset, NodeCriteria, balance_weights, load_labels, make_folds
from .evaluation import AnnotationTable, cross_validate, fit_final, kappa_report, robustness_suite
from .graph import CanonicalGraph, LoadConfig, NTriplesError, canonicalize, load_graph
from .mining import DOMAIN_FILTERS, DomainRegistry, FeatureCapExceeded, FeatureMatrix, MiningParams, mine_features
from .reporting import (
    agreement_markdown, agreement_ratios, load_iri_list, load_lexicon, metrics_markdown, postprocess_rules,
    render_features, review_markdown, rules_markdown,
)
from .ripper import RipperParams, RuleSet
from .tree import DecisionTree, adaboost_select

log = logging.getLogger("kgexplain")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CAP = 0, 2, 3, 4


# --------------------------------------------------------------------------
# helpers


def _dump(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _header(args: argparse.Namespace, extra: dict | None = None) -> dict:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    head = {"tool": "kgexplain", "version": __version__, "command": args.command, "args": resolved}
    if extra:
        head.update(extra)
    return head


def _require(path: str | None, flag: str) -> Path:
    if path is None:
        raise ConfigError(f"{flag} is required")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"{flag}: {path} does not exist")
    return p


def _load_config(args) -> LoadConfig:
    return LoadConfig.from_file(_require(args.config, "--config")) if args.config else LoadConfig()


def _load_canonical(args) -> CanonicalGraph:
    cfg = _load_config(args)
    g = load_graph(_require(args.graph, "--graph"), cfg)
    return canonicalize(g, cfg.equivalence_predicates)


def _mining_params(args) -> MiningParams:
    return MiningParams(
        k=args.k, t=args.t, deg=args.deg, s_min=args.smin, s_max=args.smax, undirected=args.undirected,
        b_predicates=frozenset(args.blacklist_predicates), b_exp_types=frozenset(args.blacklist_exp_types),
        b_gen_types=frozenset(args.blacklist_gen_types), m=args.domain_filter, feature_cap=args.feature_cap,
        threads=args.threads,
    )


def _registry(args) -> DomainRegistry | None:
    return DomainRegistry.from_file(_require(args.domain_registry, "--domain-registry")) if args.domain_registry else None


def _resolve_roots(g: CanonicalGraph, ds: LabeledDataset) -> list[int]:
    return [g.resolve(r) for r in ds.roots]


def _write_roots(path: Path, g: CanonicalGraph, inputs: list[str], ds: LabeledDataset) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["input_iri", "canonical_iri", "label"])
        for raw in inputs:
            canon = g.iri(g.resolve(raw)) if raw in g.index else ""
            w.writerow([raw, canon, (g.label(g.resolve(raw)) or "") if canon else ""])


def _labels_for_matrix(fm: FeatureMatrix, labels_path: Path, matrix_dir: Path) -> tuple[FeatureMatrix, LabeledDataset]:
    """Align a labels file with matrix rows through the ``roots.csv`` mapping."""
    ds = load_labels(labels_path)
    mapping = {}
    roots_csv = matrix_dir / "roots.csv"
    if roots_csv.exists():
        with open(roots_csv, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                if row["canonical_iri"]:
                    mapping[row["input_iri"]] = row["canonical_iri"]
    present = set(fm.root_iris)
    roots, labels, missing = [], [], []
    for r, y in zip(ds.roots, ds.labels.tolist()):
        c = mapping.get(r, r)
        if c in present:
            roots.append(c)
            labels.append(y)
        else:
            missing.append(r)
    if missing:
        log.warning("%d labeled roots have no matrix row", len(missing))
    if not roots:
        raise DataError("no labeled root has a matrix row")
    sub = LabeledDataset(roots, np.array(labels, dtype=np.int8), ds.provenance, missing)
    return fm.select_rows(roots), sub


def _check_classes(ds: LabeledDataset) -> None:
    if ds.n_pos == 0 or ds.n_neg == 0:
        raise DataError(f"need both classes, got {ds.n_pos} positive and {ds.n_neg} negative roots")


# --------------------------------------------------------------------------
# subcommands


def cmd_canonicalize(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    g = _load_canonical(args)
    g.write_ntriples(out / "canonical.nt", include_labels=True)
    with open(out / "members.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("member_iri\tcanonical_iri\n")
        for n in range(g.n_nodes):
            c = g.canonical(n)
            if c != n:
                fh.write(f"{g.iri(n)}\t{g.iri(c)}\n")
    _dump(out / "canonical_stats.json", {"config": _header(args), "load": g.stats.as_dict(),
                                         "canonical": g.canonical_stats.as_dict()})


def _mine(g: CanonicalGraph, ds: LabeledDataset, params: MiningParams, registry) -> FeatureMatrix:
    return mine_features(g, _resolve_roots(g, ds), params, registry)


def cmd_mine(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = _mining_params(args)
    registry = _registry(args)
    g = _load_canonical(args)
    ds = load_labels(_require(args.roots, "--roots"), g)
    with open(args.roots, encoding="utf-8", newline="") as fh:
        inputs = [row["root_iri"].strip() for row in csv.DictReader(fh) if row.get("root_iri")]
    if not ds.roots:
        raise DataError("none of the roots occur in the graph")
    header = _header(args, {"mining": params.as_dict(), "backend": kernels.BACKEND})
    _write_roots(out / "roots.csv", g, inputs, ds)
    try:
        fm = _mine(g, ds, params, registry)
    except FeatureCapExceeded as exc:
        _dump(out / "stats.json", {"schema": "kgexplain.mining-stats/1", "config": header,
                                   "params": params.as_dict(), "stats": exc.stats})
        raise
    fm.stats["unresolved_roots"] = ds.unresolved
    fm.write(out, header)


def cmd_train(args) -> None:
    out = Path(args.out)
    mdir = _require(args.matrix, "--matrix")
    fm, ds = _labels_for_matrix(FeatureMatrix.read(mdir), _require(args.labels, "--labels"), mdir)
    _check_classes(ds)
    X, y = fm.dense(), ds.labels.astype(np.int64)
    w = balance_weights(y)
    ens, selected = adaboost_select(X, y, w, args.rounds, args.min_leaf)
    desc = fm.descriptors
    sel_desc = [desc[j] for j in selected]
    cols = np.asarray(selected, dtype=np.int64)
    for learner in _learners(args.learner):
        model = fit_final(learner, X[:, cols], y, w, args.min_leaf, RipperParams(seed=args.seed))
        _dump(out / f"model_{learner}.json", {
            "schema": "kgexplain.model/1", "config": _header(args), "learner": learner,
            "selected_features": sel_desc, "boosting_rounds": len(ens.trees), "boosting_stopped": ens.stopped,
            "model": model.to_dict(sel_desc),
        })


def _learners(choice: str) -> list[str]:
    return ["cart", "ripper"] if choice == "both" else [choice]


def cmd_evaluate(args) -> None:
    out = Path(args.out)
    mdir = _require(args.matrix, "--matrix")
    fm, ds = _labels_for_matrix(FeatureMatrix.read(mdir), _require(args.labels, "--labels"), mdir)
    _check_classes(ds)
    folds = make_folds(len(ds), args.folds, args.seed)
    reports = {}
    for learner in _learners(args.learner):
        reports[learner] = cross_validate(fm.dense(), ds.labels, learner, folds, args.seed, fm.descriptors,
                                          args.rounds, args.min_leaf, threads=args.threads)
    _dump(out / "cv_report.json", {"schema": "kgexplain.cv-report/1", "config": _header(args),
                                   "n_examples": len(ds), "n_pos": ds.n_pos, "n_neg": ds.n_neg,
                                   "unmatched_labels": ds.unresolved,
                                   "reports": {k: v.to_dict() for k, v in reports.items()}})
    (out / "cv_report.md").write_text(metrics_markdown(reports), encoding="utf-8")


def cmd_robustness(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    params = _mining_params(args)
    registry = _registry(args)
    g = _load_canonical(args)
    expert = load_labels(_require(args.labels, "--labels"), g)
    _check_classes(expert)
    criteria = NodeCriteria.from_file(_require(args.criteria, "--criteria")) if args.criteria else None
    if args.random_neg > 0 and criteria is None:
        raise ConfigError("--random-neg needs --criteria")

    def build(ds: LabeledDataset):
        fm = _mine(g, ds, params, registry)
        return fm.dense(), fm.descriptors

    result = {}
    for learner in _learners(args.learner):
        rep = robustness_suite(g, expert, build, criteria, learner, args.folds, args.seed, args.random_neg,
                               args.shuffle, args.threads)
        result[learner] = rep
    _dump(out / "robustness.json", {"schema": "kgexplain.robustness/1", "config": _header(args),
                                    "mining": params.as_dict(),
                                    "criteria": criteria.as_dict() if criteria else None,
                                    "reports": {k: v.to_dict() for k, v in result.items()}})
    md = []
    for learner, rep in result.items():
        rows = {f"{learner} expert negatives": rep.baseline}
        if rep.shuffled is not None:
            rows[f"{learner} shuffled"] = rep.shuffled
        for i, r in enumerate(rep.random_runs, start=1):
            rows[f"{learner} random negatives {i}"] = r
        md.append(metrics_markdown(rows))
        if rep.overlap:
            md.append("| Present in ≥ runs | " + " | ".join(str(k) for k in rep.overlap) + " |\n|---"
                      + "|---" * len(rep.overlap) + "|\n| Features | "
                      + " | ".join(str(v) for v in rep.overlap.values()) + " |\n")
    (out / "robustness.md").write_text("\n".join(md), encoding="utf-8")


def _load_model(path: Path):
    blob = json.loads(path.read_text(encoding="utf-8"))
    m = blob["model"]
    model = RuleSet.from_dict(m) if m["type"] == "ripper" else DecisionTree.from_dict(m)
    return blob, model


def cmd_report(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    g = _load_canonical(args) if args.graph else None
    lexicon = load_lexicon(_require(args.lexicon, "--lexicon")) if args.lexicon else {}
    generic = load_iri_list(_require(args.generic_classes, "--generic-classes")) if args.generic_classes else set()
    doc = {"schema": "kgexplain.report/1", "config": _header(args)}
    if args.model:
        blob, model = _load_model(_require(args.model, "--model"))
        mdir = Path(args.matrix) if args.matrix else None
        if mdir is not None:
            fm = FeatureMatrix.read(_require(args.matrix, "--matrix"))
            by_desc = {f.descriptor: f for f in fm.features}
        else:
            raise ConfigError("--matrix is required to resolve model features")
        try:
            feats = [by_desc[d] for d in blob["selected_features"]]
        except KeyError as exc:
            raise DataError(f"model feature {exc.args[0]} missing from the matrix") from exc
        if isinstance(model, RuleSet):
            items = postprocess_rules(model, feats, generic)
            rendered = render_features([it.feature for it in items], g, lexicon)
            doc["review"] = [{"number": i + 1, "descriptor": it.feature.descriptor, "text": r.text,
                              "main_entity": r.main_entity,
                              "rules": [{"rule": k + 1, "affirmed": a} for k, a in it.occurrences]}
                             for i, (it, r) in enumerate(zip(items, rendered))]
            (out / "rules.md").write_text(rules_markdown(model, feats, g, lexicon), encoding="utf-8")
            (out / "review.md").write_text(review_markdown(items, g, lexicon), encoding="utf-8")
        else:
            used = model.used_features()
            rendered = render_features([feats[j] for j in used], g, lexicon)
            doc["review"] = [{"number": i + 1, "descriptor": r.feature.descriptor, "text": r.text,
                              "main_entity": r.main_entity} for i, r in enumerate(rendered)]
            lines = ["| # | Feature | Main entity |", "|---|---|---|"]
            lines += [f"| {i + 1} | {r.text} | {r.main_entity or ''} |" for i, r in enumerate(rendered)]
            (out / "review.md").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if args.annotations:
        tables = {}
        for spec in args.annotations:
            name, _, path = spec.rpartition("=")
            tables[name or Path(path).stem] = agreement_ratios(AnnotationTable.from_csv(_require(path, "--annotations")))
        doc["agreement"] = {k: v.to_dict() for k, v in tables.items()}
        (out / "agreement.md").write_text(agreement_markdown(tables), encoding="utf-8")
    _dump(out / "report.json", doc)


def cmd_kappa(args) -> None:
    out = Path(args.out)
    table = AnnotationTable.from_csv(_require(args.annotations[0] if args.annotations else None, "--annotations"))
    _dump(out / "kappa.json", {"schema": "kgexplain.kappa/1", "config": _header(args),
                               **kappa_report(table).to_dict()})


# --------------------------------------------------------------------------
# parser


def _add_graph(p):
    p.add_argument("--graph", help="N-Triples file (optionally gzip-compressed)")
    p.add_argument("--config", help="load configuration (predicates used for types, labels, equivalence)")


def _add_mining(p):
    p.add_argument("--k", type=int, default=3, help="maximum path length")
    p.add_argument("--t", type=int, default=3, help="maximum ontology generalization depth")
    p.add_argument("--deg", type=int, default=-1, help="hub degree cutoff, -1 for none")
    p.add_argument("--smin", type=int, default=0, help="minimum support")
    p.add_argument("--smax", type=int, default=None, help="maximum support")
    p.add_argument("--undirected", action="store_true")
    p.add_argument("--blacklist-predicates", nargs="*", default=[], metavar="IRI")
    p.add_argument("--blacklist-exp-types", nargs="*", default=[], metavar="IRI")
    p.add_argument("--blacklist-gen-types", nargs="*", default=[], metavar="IRI")
    p.add_argument("--domain-filter", default="no-check", choices=DOMAIN_FILTERS)
    p.add_argument("--domain-registry", help="category -> namespaces/classes file")
    p.add_argument("--feature-cap", type=int, default=None)


def _add_learning(p, folds: bool = True):
    p.add_argument("--learner", choices=("cart", "ripper", "both"), default="cart")
    p.add_argument("--rounds", type=int, default=10, help="maximum AdaBoost rounds")
    p.add_argument("--min-leaf", type=int, default=5)
    if folds:
        p.add_argument("--folds", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kgexplain", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("canonicalize", help="contract equivalence links")
    _add_graph(p)
    common(p)
    p.set_defaults(func=cmd_canonicalize)

    p = sub.add_parser("mine", help="mine the feature matrix for labeled roots")
    _add_graph(p)
    _add_mining(p)
    p.add_argument("--roots", help="root_iri,label CSV")
    common(p)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("train", help="select features and train a final model on all labeled roots")
    p.add_argument("--matrix", help="directory written by mine")
    p.add_argument("--labels")
    _add_learning(p, folds=False)
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="cross-validate selection + final model")
    p.add_argument("--matrix")
    p.add_argument("--labels")
    _add_learning(p)
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("robustness", help="shuffled-label and random-negative controls")
    _add_graph(p)
    _add_mining(p)
    p.add_argument("--labels")
    p.add_argument("--shuffle", action="store_true")
    p.add_argument("--random-neg", type=int, default=5)
    p.add_argument("--criteria", help="eligibility criteria for random negatives")
    _add_learning(p)
    common(p)
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("report", help="readable rule listings and agreement tables")
    _add_graph(p)
    p.add_argument("--model")
    p.add_argument("--matrix")
    p.add_argument("--lexicon")
    p.add_argument("--generic-classes")
    p.add_argument("--annotations", nargs="*", default=[], metavar="[NAME=]CSV")
    common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("kappa", help="inter-rater agreement")
    p.add_argument("--annotations", nargs=1, metavar="CSV")
    common(p)
    p.set_defaults(func=cmd_kappa)
    return ap


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except FeatureCapExceeded as exc:
        return _fail(EXIT_CAP, "RESOURCE_CAP", f"{exc} (peak {exc.stats.get('peak_features')})")
    except (DataError, NTriplesError, KeyError) as exc:
        return _fail(EXIT_DATA, "DATA", str(exc.args[0]) if isinstance(exc, KeyError) else str(exc))
    except (ConfigError, ValueError, OSError) as exc:
        return _fail(EXIT_CONFIG, "CONFIG", str(exc))
    return EXIT_OK


def _fail(code: int, tag: str, message: str) -> int:
    print(f"error: {tag}: {' '.join(message.split())}", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
