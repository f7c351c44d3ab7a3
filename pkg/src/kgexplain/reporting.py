"""Human-facing output: review listings of rule features, readable feature
renderings and expert-agreement tables."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .config import read_kv
from .dataset import DataError
from .evaluation import METRIC_NAMES, AnnotationTable
from .features import CLASS, NEIGHBOR, PATTERN, TOP_KIND, Element, Feature
from .graph import CanonicalGraph, KnowledgeGraph
from .ripper import RuleSet


def local_name(iri: str) -> str:
    """Last segment of an IRI after ``#``, ``/`` or ``:``."""
    stripped = iri.rstrip("/#")
    m = re.search(r"[^/#:]+$", stripped)
    return m.group(0) if m else iri


def load_lexicon(path: str | Path) -> dict[str, str]:
    """``predicate IRI = verb`` lines."""
    return {k.strip(): v.strip() for k, v in read_kv(path).items()}


def load_iri_list(path: str | Path) -> set[str]:
    out = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.add(line)
    return out


# --------------------------------------------------------------------------
# review listing


@dataclass
class ReviewItem:
    feature_index: int
    feature: Feature
    occurrences: list[tuple[int, bool]] = field(default_factory=list)

    @property
    def negated_only(self) -> bool:
        return all(not affirmed for _, affirmed in self.occurrences)


def is_generic(f: Feature, generic_classes: Iterable[str]) -> bool:
    """True for path patterns whose every element is top or a generic class."""
    if f.kind != PATTERN:
        return False
    generic = set(generic_classes)
    return all(e.kind == TOP_KIND or (e.kind == CLASS and e.iri in generic) for e in f.elements())


def postprocess_rules(rules: RuleSet, features: Sequence[Feature], generic_classes: Iterable[str]) -> list[ReviewItem]:
    """Distinct features of a ruleset for expert review.

    Patterns made only of top and generic classes are left out. A feature
    and its negation give a single item. ``rules`` itself is not modified.
    """
    generic = set(generic_classes)
    items: dict[int, ReviewItem] = {}
    for i, rule in enumerate(rules.rules):
        for lit in rule.literals:
            f = features[lit.feature]
            if is_generic(f, generic):
                continue
            item = items.setdefault(lit.feature, ReviewItem(lit.feature, f))
            item.occurrences.append((i, lit.affirmed))
    return list(items.values())


# --------------------------------------------------------------------------
# rendering


@dataclass
class ReadableFeature:
    feature: Feature
    text: str
    main_entity: str | None
    support: int | None = None


def _node_id(g: KnowledgeGraph, iri: str) -> int | None:
    n = g.index.get(iri)
    if n is None:
        return None
    return g.canonical(n) if isinstance(g, CanonicalGraph) else n


def display_name(g: KnowledgeGraph | None, iri: str) -> str:
    if g is not None:
        n = _node_id(g, iri)
        if n is not None:
            label = g.label(n)
            if label:
                return label
    return local_name(iri)


def _element_text(g, e: Element) -> str:
    return "" if e.kind == TOP_KIND else display_name(g, e.iri)


def translate_feature(f: Feature, g: KnowledgeGraph | None, lexicon: Mapping[str, str] | None = None,
                      negated: bool = False, support: int | None = None) -> ReadableFeature:
    """Render ``f`` with labels for entities and verbs for predicates.

    Steps read ``-[verb]-> Name`` (``<-[verb]- Name`` against the edge
    direction); top contributes no name; a neighbor reads ``~ Name``.
    """
    lexicon = lexicon or {}
    if f.kind == NEIGHBOR:
        text = f"~ {display_name(g, f.node)}"
    else:
        parts = []
        for s in f.steps:
            verb = lexicon.get(s.predicate, local_name(s.predicate))
            arrow = f"<-[{verb}]-" if s.inverse else f"-[{verb}]->"
            name = _element_text(g, s.element)
            parts.append(f"{arrow} {name}" if name else arrow)
        text = " ".join(parts)
    if negated:
        text = f"¬({text})"
    term = f.terminus()
    main = None if term.kind == TOP_KIND else term.iri
    return ReadableFeature(f, text, main, support)


def render_features(features: Sequence[Feature], g, lexicon=None, negated: Sequence[bool] | None = None,
                    supports: Sequence[int] | None = None) -> list[ReadableFeature]:
    """Render several features; colliding texts get their descriptor appended."""
    negated = negated or [False] * len(features)
    out = [translate_feature(f, g, lexicon, n, None if supports is None else supports[i])
           for i, (f, n) in enumerate(zip(features, negated))]
    seen: dict[str, list[int]] = {}
    for i, r in enumerate(out):
        seen.setdefault(r.text, []).append(i)
    for idx in seen.values():
        if len(idx) > 1:
            for i in idx:
                out[i].text = f"{out[i].text} {{{out[i].feature.descriptor}}}"
    return out


# --------------------------------------------------------------------------
# agreement


@dataclass
class AgreementTable:
    n_features: int
    n_raters: int
    counts: dict[str, int]

    KEYS = ("full_no", "at_least_1", "at_least_2", "at_least_3", "full_yes")

    @property
    def ratios(self) -> dict[str, float]:
        return {k: self.counts[k] / self.n_features for k in self.KEYS}

    def to_dict(self) -> dict:
        return {"n_features": self.n_features, "n_raters": self.n_raters, "counts": dict(self.counts),
                "ratios": self.ratios}


def agreement_ratios(table: AnnotationTable) -> AgreementTable:
    """Share of features that ``k`` raters consider possibly explanatory
    (``yes`` or ``maybe``), plus unanimous ``yes`` and unanimous ``no``."""
    raters = table.raters()
    answers = table.answers()
    features = table.features()
    if not features:
        raise DataError("annotation table is empty")
    missing = [f"{f}/{r}" for f in features for r in raters if (f, r) not in answers]
    if missing:
        raise DataError("missing answers: " + ", ".join(missing))
    counts = dict.fromkeys(AgreementTable.KEYS, 0)
    for f in features:
        got = [answers[(f, r)] for r in raters]
        possibly = sum(a in ("yes", "maybe") for a in got)
        for k in (1, 2, 3):
            counts[f"at_least_{k}"] += possibly >= k
        counts["full_yes"] += all(a == "yes" for a in got)
        counts["full_no"] += all(a == "no" for a in got)
    return AgreementTable(len(features), len(raters), counts)


# --------------------------------------------------------------------------
# markdown


def _cell(text: str) -> str:
    return text.replace("|", "\\|")


def rules_markdown(rules: RuleSet, features: Sequence[Feature], g=None, lexicon=None, title: str = "") -> str:
    lines = [f"### {title}", ""] if title else []
    lines += ["| # | Rule | Support | Nb of FP |", "|---|---|---|---|"]
    for i, rule in enumerate(rules.rules, start=1):
        lits = [translate_feature(features[l.feature], g, lexicon, not l.affirmed).text for l in rule.literals]
        body = " ∧ ".join(lits) + " ⇒ ⊕"
        lines.append(f"| {i} | {_cell(body)} | {rule.support:.2f} | {rule.false_positives:.2f} |")
    lines.append("| | default ⇒ ⊖ | | |")
    return "\n".join(lines) + "\n"


def review_markdown(items: Sequence[ReviewItem], g=None, lexicon=None, title: str = "") -> str:
    rendered = render_features([it.feature for it in items], g, lexicon)
    lines = [f"### {title}", ""] if title else []
    lines += ["| # | Feature | Main entity | Rules |", "|---|---|---|---|"]
    for n, (it, r) in enumerate(zip(items, rendered), start=1):
        rule_ids = ", ".join(f"{'' if a else '¬'}R{i + 1}" for i, a in it.occurrences)
        main = r.main_entity or ""
        lines.append(f"| {n} | {_cell(r.text)} | {_cell(main)} | {rule_ids} |")
    return "\n".join(lines) + "\n"


def agreement_markdown(tables: Mapping[str, AgreementTable]) -> str:
    lines = [
        "| Dataset | Features | Full agreement unexplanatory | ≥1 possibly explanatory "
        "| ≥2 possibly explanatory | ≥3 possibly explanatory | Full agreement explanatory |",
        "|---|---|---|---|---|---|---|",
    ]
    for name, t in tables.items():
        r = t.ratios
        cells = " | ".join(f"{r[k]:.2f} ({t.counts[k]})" for k in AgreementTable.KEYS)
        lines.append(f"| {_cell(name)} | {t.n_features} | {cells} |")
    return "\n".join(lines) + "\n"


def metrics_markdown(reports: Mapping[str, object]) -> str:
    """Side-by-side mean metrics of several CV reports."""
    lines = ["| Run | " + " | ".join(METRIC_NAMES) + " |", "|---" * (len(METRIC_NAMES) + 1) + "|"]
    for name, rep in reports.items():
        vals = [getattr(rep.mean, k) for k in METRIC_NAMES]
        lines.append(f"| {_cell(name)} | " + " | ".join("n/a" if v != v else f"{v:.2f}" for v in vals) + " |")
    return "\n".join(lines) + "\n"
