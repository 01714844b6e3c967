"""Key/outcome scoring of normalization runs.

A key (set A) holds hand-made pairs ``(original, correction)`` for utterances
with at least one lexical error.  The outcome (set C) holds every produced
pair that changed the utterance, plus every pair whose original is a key
original.  B = A & C; recall = |B|/|A| and precision = |B|/|C|, both in
percent.  The same is done per token-level error category after aligning
the whitespace tokens of each pair.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import NamedTuple

from .errors import ConfigError, DataError

MISSPELLING = "misspellings"
RUN_ON = "run-ons"
SPLIT = "splits"
TOKEN_CATEGORIES = (MISSPELLING, RUN_ON, SPLIT)
CATEGORIES = ("utterances", "total") + TOKEN_CATEGORIES

MAX_GROUP = 4


class UtterancePair(NamedTuple):
    original: str
    normalized: str


class TokenPair(NamedTuple):
    """Aligned token groups; ``position`` is the first source token index."""

    source: tuple[str, ...]
    target: tuple[str, ...]
    position: int

    @property
    def source_text(self) -> str:
        return " ".join(self.source)

    @property
    def target_text(self) -> str:
        return " ".join(self.target)


def canonical(text: str) -> str:
    return " ".join(text.split())


@lru_cache(maxsize=65536)
def _edit_distance(a: str, b: str) -> int:
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def _align(src: list[str], tgt: list[str]) -> list[tuple[int, int, int, int]]:
    """Minimal-cost segmentation into 1-1, 1-n and n-1 groups.

    Group cost is the character edit distance between the joined groups.
    Ties prefer fewer non 1-1 groups, then fewer groups; among full ties
    the first candidate found (the leftmost split) is kept.
    """
    m, n = len(src), len(tgt)
    # groups up to the length difference keep every pair alignable
    cap = max(MAX_GROUP, abs(m - n) + 1)
    INF = (float("inf"),)
    best = [[INF] * (n + 1) for _ in range(m + 1)]
    back = [[None] * (n + 1) for _ in range(m + 1)]
    best[0][0] = (0, 0, 0)
    for i in range(m + 1):
        for j in range(n + 1):
            cur = best[i][j]
            if cur == INF or (i == m and j == n):
                continue
            moves = []
            if i < m and j < n:
                moves.append((1, 1))
                moves.extend((1, k) for k in range(2, min(cap, n - j) + 1))
                moves.extend((k, 1) for k in range(2, min(cap, m - i) + 1))
            for di, dj in moves:
                cost = _edit_distance(" ".join(src[i : i + di]), " ".join(tgt[j : j + dj]))
                key = (cur[0] + cost, cur[1] + ((di, dj) != (1, 1)), cur[2] + 1)
                if key < best[i + di][j + dj]:
                    best[i + di][j + dj] = key
                    back[i + di][j + dj] = (i, j)
    if best[m][n] == INF:
        raise DataError("token sequences cannot be aligned")
    groups = []
    i, j = m, n
    while (i, j) != (0, 0):
        pi, pj = back[i][j]
        groups.append((pi, i, pj, j))
        i, j = pi, pj
    groups.reverse()
    return groups


def align_token_pairs(original: str, normalized: str) -> list[TokenPair]:
    """Changed token groups between two utterances.

    Identical leading and trailing tokens are matched directly; the rest is
    aligned by :func:`_align` and identical groups are dropped.
    """
    src, tgt = original.split(), normalized.split()
    if src == tgt:
        return []
    lo = 0
    while lo < min(len(src), len(tgt)) and src[lo] == tgt[lo]:
        lo += 1
    hi = 0
    while hi < min(len(src), len(tgt)) - lo and src[-1 - hi] == tgt[-1 - hi]:
        hi += 1
    s_mid = src[lo : len(src) - hi]
    t_mid = tgt[lo : len(tgt) - hi]
    if not s_mid or not t_mid:
        # pure insertion/deletion of tokens: widen by one neighbour so that it
        # can be expressed as a merge or a split
        if lo > 0:
            lo -= 1
        else:
            hi -= 1
        s_mid = src[lo : len(src) - hi]
        t_mid = tgt[lo : len(tgt) - hi]
    out = []
    for i0, i1, j0, j1 in _align(s_mid, t_mid):
        s, t = tuple(s_mid[i0:i1]), tuple(t_mid[j0:j1])
        if s != t:
            out.append(TokenPair(s, t, lo + i0))
    return out


def decompose(pair: TokenPair) -> list[TokenPair]:
    """Split an m-to-n group (m, n > 1) into 1-1, 1-n and n-1 groups."""
    if len(pair.source) == 1 or len(pair.target) == 1:
        return [pair]
    return [
        p._replace(position=pair.position + p.position)
        for p in align_token_pairs(pair.source_text, pair.target_text)
    ]


def categorize(pair: TokenPair) -> str:
    """1-1 is a misspelling, 1-n a run-on, n-1 a split."""
    if pair.source == pair.target:
        raise DataError("identical groups carry no error")
    ns, nt = len(pair.source), len(pair.target)
    if ns == 1 and nt == 1:
        return MISSPELLING
    if ns == 1:
        return RUN_ON
    if nt == 1:
        return SPLIT
    cats = {categorize(p) for p in decompose(pair)}
    if len(cats) != 1:
        raise DataError(f"group {pair} mixes categories {sorted(cats)}; decompose it first")
    return cats.pop()


def token_errors(pair: UtterancePair) -> dict[str, set]:
    """Token-level items of one utterance pair, keyed by category."""
    out = {c: set() for c in TOKEN_CATEGORIES}
    for group in align_token_pairs(pair.original, pair.normalized):
        for p in decompose(group):
            out[categorize(p)].add((pair.original, p.position, p.source_text, p.target_text))
    return out


class EvaluationKey:
    """Hand-made (original, correction) pairs plus derived per-category keys."""

    def __init__(self, pairs):
        self.pairs: dict[str, str] = {}
        for original, corrected in pairs:
            if original in self.pairs and self.pairs[original] != corrected:
                raise DataError(f"conflicting corrections for {original!r}")
            self.pairs[original] = corrected
        self.tokens = {c: set() for c in TOKEN_CATEGORIES}
        for p in self.utterance_pairs():
            for c, items in token_errors(p).items():
                self.tokens[c] |= items

    def utterance_pairs(self) -> set[UtterancePair]:
        return {UtterancePair(o, c) for o, c in self.pairs.items()}

    def category_counts(self) -> dict[str, int]:
        counts = {c: len(self.tokens[c]) for c in TOKEN_CATEGORIES}
        counts["total"] = sum(counts.values())
        counts["utterances"] = len(self.pairs)
        return counts

    def __len__(self):
        return len(self.pairs)

    def __contains__(self, original):
        return original in self.pairs

    @classmethod
    def read(cls, path) -> "EvaluationKey":
        return cls(read_pairs(path))

    def write(self, path) -> None:
        write_pairs(sorted(self.utterance_pairs()), path)


def read_pairs(path) -> list[UtterancePair]:
    """``original<TAB>second`` per line."""
    pairs = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{n}: expected 'original<TAB>other'")
        pairs.append(UtterancePair(*parts))
    return pairs


def write_pairs(pairs, path) -> None:
    Path(path).write_text("".join(f"{o}\t{c}\n" for o, c in pairs), encoding="utf-8")


def build_outcome(pairs, key: EvaluationKey) -> set[UtterancePair]:
    """Pairs that changed the utterance, or whose original is in the key.

    Whitespace-only differences (e.g. a doubled space collapsed) do not
    count as a change.
    """
    return {
        UtterancePair(*p)
        for p in pairs
        if canonical(p[0]) != canonical(p[1]) or p[0] in key
    }


@dataclass(frozen=True)
class CategoryScore:
    a: int
    b: int
    c: int

    @property
    def recall(self) -> float | None:
        return 100.0 * self.b / self.a if self.a else None

    @property
    def precision(self) -> float | None:
        return 100.0 * self.b / self.c if self.c else None


@dataclass
class EvaluationReport:
    scores: dict[str, CategoryScore]
    title: str = ""

    def __getitem__(self, category) -> CategoryScore:
        return self.scores[category]

    def to_dict(self) -> list[dict]:
        return [
            {
                "category": c,
                "A": s.a,
                "B": s.b,
                "C": s.c,
                "recall": s.recall,
                "precision": s.precision,
            }
            for c, s in self.scores.items()
        ]

    def to_json(self) -> str:
        return json.dumps({"title": self.title, "categories": self.to_dict()}, indent=2)

    def to_tsv(self) -> str:
        def fmt(x):
            return "n/a" if x is None else f"{x:.2f}"

        lines = ["category\tA\tB\tC\trecall\tprecision"]
        for c, s in self.scores.items():
            lines.append(f"{c}\t{s.a}\t{s.b}\t{s.c}\t{fmt(s.recall)}\t{fmt(s.precision)}")
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        def pct(x):
            return "n/a" if x is None else f"{x:.0f} %"

        width = max(len(self.title), 10)
        rows = [f"{'Experiment':<{width}} | {'Performance categories':<22} | {'Recall':>7} | {'Precision':>9}"]
        rows.append("-" * len(rows[0]))
        for i, (c, s) in enumerate(self.scores.items()):
            label = self.title if i == len(self.scores) // 2 else ""
            rows.append(f"{label:<{width}} | {c:<22} | {pct(s.recall):>7} | {pct(s.precision):>9}")
        return "\n".join(rows) + "\n"


def score(outcome, key: EvaluationKey, title: str = "") -> EvaluationReport:
    """Recall and precision per category; empty denominators give ``None``."""
    C = {UtterancePair(*p) for p in outcome}
    A = key.utterance_pairs()
    scores = {"utterances": CategoryScore(len(A), len(A & C), len(C))}

    c_tokens = {cat: set() for cat in TOKEN_CATEGORIES}
    for p in C:
        for cat, items in token_errors(p).items():
            c_tokens[cat] |= items
    per = {}
    for cat in TOKEN_CATEGORIES:
        a, c = key.tokens[cat], c_tokens[cat]
        per[cat] = CategoryScore(len(a), len(a & c), len(c))
    a_tot = set().union(*key.tokens.values())
    c_tot = set().union(*c_tokens.values())
    scores["total"] = CategoryScore(len(a_tot), len(a_tot & c_tot), len(c_tot))
    scores.update(per)
    return EvaluationReport(scores, title)


def pool_reports(reports, title: str = "pooled") -> EvaluationReport:
    """Sum A, B and C over reports on disjoint test sets."""
    out = {}
    for cat in CATEGORIES:
        out[cat] = CategoryScore(
            sum(r[cat].a for r in reports),
            sum(r[cat].b for r in reports),
            sum(r[cat].c for r in reports),
        )
    return EvaluationReport(out, title)


def crossval_partitions(items, parts: int, seed: int):
    """Random division of ``items`` into ``parts`` near-equal folds.

    Returns one ``(train, test)`` pair per fold.  When ``len(items)`` is not
    divisible by ``parts`` the first folds get one extra item.  Items keep
    their original relative order within each set.
    """
    items = list(items)
    if parts < 2:
        raise ConfigError("need at least two parts for cross-validation")
    if parts > len(items):
        raise ConfigError(f"cannot split {len(items)} items into {parts} parts")
    order = list(range(len(items)))
    random.Random(seed).shuffle(order)
    size, extra = divmod(len(items), parts)
    folds, start = [], 0
    for k in range(parts):
        end = start + size + (k < extra)
        folds.append(sorted(order[start:end]))
        start = end
    out = []
    for k in range(parts):
        test = set(folds[k])
        out.append(
            (
                [items[i] for i in range(len(items)) if i not in test],
                [items[i] for i in folds[k]],
            )
        )
    return out
