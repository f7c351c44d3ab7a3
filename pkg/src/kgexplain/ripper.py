"""RIPPER rule induction over binary features with example weights.

Rules are conjunctions of affirmed (feature present) and negated (feature
absent) literals concluding the positive class; a ruleset is an ordered
list of rules with the negative class as default.

Description lengths follow the usual RIPPER coding:

* theory bits of a rule with ``k`` literals drawn from ``n`` possible ones:
  ``0.5 * (log2(k) + k*log2(n/k) + (n-k)*log2(n/(n-k)))``
* exception bits of a ruleset covering mass ``C`` with ``fp`` false
  positives and leaving mass ``U`` with ``fn`` false negatives:
  ``log2 binom(C, fp) + log2 binom(U, fn)`` (real-valued binomials since
  masses are weighted).

``n`` is twice the number of features (each feature can appear affirmed or
negated).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels

POS, NEG = 1, 0


@dataclass(frozen=True)
class Literal:
    feature: int
    affirmed: bool = True

    def holds(self, X) -> np.ndarray:
        col = np.asarray(X)[:, self.feature] != 0
        return col if self.affirmed else ~col

    def __str__(self) -> str:
        return f"f{self.feature}" if self.affirmed else f"not f{self.feature}"


@dataclass
class Rule:
    literals: tuple[Literal, ...]
    support: float = 0.0
    false_positives: float = 0.0

    @property
    def confidence(self) -> float:
        return (self.support - self.false_positives) / self.support if self.support > 0 else 0.0

    def covers(self, X) -> np.ndarray:
        X = np.asarray(X)
        mask = np.ones(len(X), dtype=np.bool_)
        for lit in self.literals:
            mask &= lit.holds(X)
        return mask

    def features(self) -> list[int]:
        return [lit.feature for lit in self.literals]

    def __str__(self) -> str:
        return " and ".join(str(lit) for lit in self.literals) + " => pos"


@dataclass
class RuleSet:
    rules: list[Rule]
    n_features: int
    default_score: float = 0.5

    def firing(self, X) -> np.ndarray:
        """Index of the first rule covering each row, -1 for the default."""
        X = np.asarray(X)
        out = np.full(len(X), -1, dtype=np.int64)
        for i, rule in enumerate(self.rules):
            hit = (out < 0) & rule.covers(X)
            out[hit] = i
        return out

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns")
        fire = self.firing(X)
        conf = np.array([r.confidence for r in self.rules] + [self.default_score])
        return (fire >= 0).astype(np.int8), conf[fire]

    def used_features(self) -> list[int]:
        return sorted({f for r in self.rules for f in r.features()})

    def to_dict(self, descriptors: list[str] | None = None) -> dict:
        rules = []
        for r in self.rules:
            lits = []
            for lit in r.literals:
                rec = {"feature": lit.feature, "affirmed": lit.affirmed}
                if descriptors is not None:
                    rec["descriptor"] = descriptors[lit.feature]
                lits.append(rec)
            rules.append({"literals": lits, "support": r.support, "false_positives": r.false_positives})
        return {"type": "ripper", "n_features": self.n_features, "default_score": self.default_score,
                "rules": rules}

    @classmethod
    def from_dict(cls, d: dict) -> "RuleSet":
        rules = [
            Rule(tuple(Literal(int(l["feature"]), bool(l["affirmed"])) for l in r["literals"]),
                 float(r["support"]), float(r["false_positives"]))
            for r in d["rules"]
        ]
        return cls(rules, int(d["n_features"]), float(d.get("default_score", 0.5)))


def ruleset_predict(rules: RuleSet, row) -> int:
    row = np.asarray(row)
    if row.shape != (rules.n_features,):
        raise ValueError(f"row has {row.shape} entries, ruleset expects {rules.n_features}")
    labels, _ = rules.predict(row[None, :])
    return int(labels[0])


@dataclass
class RipperParams:
    min_instances: float = 5.0
    optimization_rounds: int = 2
    dl_slack_bits: float = 64.0
    prune_fraction: float = 1.0 / 3.0
    seed: int = 0


# --------------------------------------------------------------------------
# description length


def _log2_binom(n: float, k: float) -> float:
    if k <= 0 or k >= n:
        return 0.0
    return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)) / math.log(2)


def rule_theory_bits(k: int, n_literals: int) -> float:
    if k <= 0:
        return 0.0
    pr = k / n_literals
    s = k * math.log2(1 / pr)
    if k < n_literals:
        s += (n_literals - k) * math.log2(1 / (1 - pr))
    return 0.5 * (math.log2(k) + s)


def exception_bits(covered_mass: float, fp: float, uncovered_mass: float, fn: float) -> float:
    return _log2_binom(covered_mass, fp) + _log2_binom(uncovered_mass, fn)


class _Data:
    """Training data plus cached per-literal coverage."""

    def __init__(self, X, y, w):
        self.X = np.ascontiguousarray(X, dtype=np.uint8)
        self.y = np.ascontiguousarray(y, dtype=np.int64)
        self.w = np.ascontiguousarray(w, dtype=np.float64)
        self.n_literals = 2 * self.X.shape[1]
        self.all_rows = np.arange(len(self.y), dtype=np.int64)

    def covered(self, literals, rows) -> np.ndarray:
        mask = np.ones(len(rows), dtype=np.bool_)
        for lit in literals:
            col = self.X[rows, lit.feature] != 0
            mask &= col if lit.affirmed else ~col
        return rows[mask]

    def masses(self, rows) -> tuple[float, float]:
        yr = self.y[rows]
        wr = self.w[rows]
        return float(wr[yr == POS].sum()), float(wr[yr == NEG].sum())

    def ruleset_dl(self, rules: list[tuple[Literal, ...]]) -> float:
        theory = sum(rule_theory_bits(len(r), self.n_literals) for r in rules)
        covered = np.zeros(len(self.y), dtype=np.bool_)
        for r in rules:
            covered[self.covered(r, self.all_rows)] = True
        wc, wu = self.w[covered], self.w[~covered]
        yc, yu = self.y[covered], self.y[~covered]
        fp = float(wc[yc == NEG].sum())
        fn = float(wu[yu == POS].sum())
        return theory + exception_bits(float(wc.sum()), fp, float(wu.sum()), fn)


def foil_gain(p0: float, n0: float, p1, n1):
    """Weighted FOIL information gain of specializing (p0, n0) to (p1, n1)."""
    p1 = np.asarray(p1, dtype=np.float64)
    n1 = np.asarray(n1, dtype=np.float64)
    base = math.log2(p0 / (p0 + n0))
    with np.errstate(divide="ignore", invalid="ignore"):
        g = p1 * (np.log2(p1 / (p1 + n1)) - base)
    return np.where(p1 > 0, g, -np.inf)


def grow_rule(data: _Data, rows: np.ndarray, initial=()) -> tuple[tuple[Literal, ...], list[float]]:
    """Add literals greedily by FOIL gain until no negatives are covered or
    no literal has positive gain. Returns the literals and each one's gain."""
    literals = list(initial)
    gains: list[float] = []
    covered = data.covered(literals, rows)
    n_features = data.X.shape[1]
    while True:
        p0, n0 = data.masses(covered)
        if n0 <= 0 or p0 <= 0:
            break
        pos, neg, _ = kernels.feature_masses(data.X, covered, data.w, data.y)
        cand = np.concatenate([foil_gain(p0, n0, pos, neg), foil_gain(p0, n0, p0 - pos, n0 - neg)])
        for lit in literals:
            cand[lit.feature] = -np.inf
            cand[lit.feature + n_features] = -np.inf
        if cand.size == 0:
            break
        best = int(np.argmax(cand))
        if not cand[best] > 1e-12:
            break
        lit = Literal(best % n_features, best < n_features)
        literals.append(lit)
        gains.append(float(cand[best]))
        covered = data.covered([lit], covered)
    return tuple(literals), gains


def _prune_value(data: _Data, literals, rows) -> float:
    p, n = data.masses(data.covered(literals, rows))
    return (p - n) / (p + n) if p + n > 0 else -math.inf


def prune_rule(data: _Data, literals: tuple[Literal, ...], prune_rows: np.ndarray, keep: int = 1) -> tuple[Literal, ...]:
    """Keep the prefix (at least ``keep`` literals) maximizing ``(p-n)/(p+n)``
    on the prune rows; ties favour the longer prefix."""
    if len(literals) <= keep or len(prune_rows) == 0:
        return literals
    best_len, best_val = len(literals), _prune_value(data, literals, prune_rows)
    for length in range(len(literals) - 1, keep - 1, -1):
        v = _prune_value(data, literals[:length], prune_rows)
        if v > best_val:
            best_len, best_val = length, v
    return literals[:best_len]


def _prune_in_context(data: _Data, rules, i, literals, prune_rows) -> tuple[Literal, ...]:
    """Prefix of ``literals`` maximizing the weighted accuracy, on the prune
    rows, of the ruleset with rule ``i`` replaced by it."""
    if len(literals) <= 1 or len(prune_rows) == 0:
        return literals

    def accuracy(cand):
        trial = list(rules)
        trial[i] = cand
        covered = np.zeros(len(prune_rows), dtype=np.bool_)
        for r in trial:
            covered |= np.isin(prune_rows, data.covered(r, prune_rows))
        yr, wr = data.y[prune_rows], data.w[prune_rows]
        correct = np.where(covered, yr == POS, yr == NEG)
        return float(wr[correct].sum() / wr.sum())

    best_len, best_val = len(literals), accuracy(literals)
    for length in range(len(literals) - 1, 0, -1):
        v = accuracy(literals[:length])
        if v > best_val:
            best_len, best_val = length, v
    return literals[:best_len]


def _split(data: _Data, rows: np.ndarray, fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Class-stratified grow/prune split of ``rows``."""
    grow, prune = [], []
    for cls in (POS, NEG):
        part = rows[data.y[rows] == cls]
        part = part[rng.permutation(len(part))]
        cut = int(round(len(part) * fraction))
        prune.append(part[:cut])
        grow.append(part[cut:])
    return np.sort(np.concatenate(grow)), np.sort(np.concatenate(prune))


def _acceptable(data: _Data, literals, rows, params: RipperParams) -> bool:
    if not literals:
        return False
    p, n = data.masses(data.covered(literals, rows))
    return p + n >= params.min_instances and p > n


def _uncovered(data: _Data, rules, rows) -> np.ndarray:
    for r in rules:
        hit = data.covered(r, rows)
        rows = np.setdiff1d(rows, hit, assume_unique=True)
    return rows


def _grow_phase(data: _Data, rules: list, params: RipperParams, rng) -> list:
    rules = list(rules)
    remaining = _uncovered(data, rules, data.all_rows)
    dl_min = data.ruleset_dl(rules)
    while data.masses(remaining)[0] > 0:
        grow_rows, prune_rows = _split(data, remaining, params.prune_fraction, rng)
        if data.masses(grow_rows)[0] <= 0:
            break
        grown, _ = grow_rule(data, grow_rows)
        rule = prune_rule(data, grown, prune_rows)
        if not _acceptable(data, rule, remaining, params):
            break
        rules.append(rule)
        dl = data.ruleset_dl(rules)
        dl_min = min(dl_min, dl)
        remaining = np.setdiff1d(remaining, data.covered(rule, remaining), assume_unique=True)
        if dl > dl_min + params.dl_slack_bits:
            break
    return rules


def _reduce(data: _Data, rules: list) -> tuple[list, float]:
    """Delete rules, last first, whenever that lowers the total description length."""
    rules = list(rules)
    dl = data.ruleset_dl(rules)
    for i in range(len(rules) - 1, -1, -1):
        trial = rules[:i] + rules[i + 1:]
        tdl = data.ruleset_dl(trial)
        if tdl < dl:
            rules, dl = trial, tdl
    return rules, dl


def _optimize(data: _Data, rules: list, params: RipperParams, rng) -> list:
    rules = list(rules)
    for i in range(len(rules)):
        remaining = _uncovered(data, rules[:i], data.all_rows)
        if data.masses(remaining)[0] <= 0:
            break
        grow_rows, prune_rows = _split(data, remaining, params.prune_fraction, rng)
        options = [rules[i]]
        replacement, _ = grow_rule(data, grow_rows)
        replacement = _prune_in_context(data, rules, i, replacement, prune_rows)
        revision, _ = grow_rule(data, grow_rows, initial=rules[i])
        revision = _prune_in_context(data, rules, i, revision, prune_rows)
        for cand in (replacement, revision):
            if cand != rules[i] and _acceptable(data, cand, remaining, params):
                options.append(cand)
        scored = []
        for cand in options:
            trial = rules[:i] + [cand] + rules[i + 1:]
            scored.append(_reduce(data, trial)[1])
        rules[i] = options[int(np.argmin(scored))]
    return rules


def _final_rules(data: _Data, rules: list, params: RipperParams) -> list[Rule]:
    """Attach support / false-positive mass; drop rules reaching fewer than
    ``min_instances`` of weight once earlier rules have taken their share."""
    kept: list[Rule] = []
    remaining = data.all_rows
    for lits in rules:
        hit = data.covered(lits, remaining)
        p, n = data.masses(hit)
        if p + n < params.min_instances:
            continue
        kept.append(Rule(tuple(lits), p + n, n))
        remaining = np.setdiff1d(remaining, hit, assume_unique=True)
    return kept


def train_ripper(X, y, w, params: RipperParams | None = None) -> RuleSet:
    params = params or RipperParams()
    data = _Data(X, y, w)
    if len(data.y) == 0:
        raise ValueError("empty training set")
    if len(np.unique(data.y)) < 2:
        raise ValueError("RIPPER needs both classes in the training data")
    if np.any(data.w <= 0):
        raise ValueError("weights must be positive")
    rng = np.random.default_rng(params.seed)
    rules = _grow_phase(data, [], params, rng)
    rules, _ = _reduce(data, rules)
    for _ in range(params.optimization_rounds):
        rules = _optimize(data, rules, params, rng)
        rules = _grow_phase(data, rules, params, rng)
        rules, _ = _reduce(data, rules)
    p, n = data.masses(data.all_rows)
    return RuleSet(_final_rules(data, rules, params), data.X.shape[1], p / (p + n))
