"""Linguistic decoders: word-emitting HMMs that supply context to the OD.

Three kinds are supported.  ``baseline`` adds no cost at all, ``unigram``
is a single looping state emitting words with smoothed relative
frequencies, and ``biclass`` has one state per word class with smoothed
class-bigram transitions (including an utterance-end event that becomes
the exit probability) and smoothed per-class word emissions.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DataError
from .hmm import Alphabet, CountTable, Hmm, load_hmm, save_hmm, smooth_additive, to_cost
from .orthographic import Vocabulary

log = logging.getLogger(__name__)

KINDS = ("baseline", "unigram", "biclass")
DIALOGUE_MARK = "##dialogue"


class TaggedWord(NamedTuple):
    word: str
    tag: str | None = None
    line: int | None = None


Utterance = list[TaggedWord]


@dataclass
class TaggedCorpus:
    """Dialogues of utterances of (word, class) tokens."""

    dialogues: list[list[Utterance]]

    def utterances(self) -> Iterator[Utterance]:
        for d in self.dialogues:
            yield from d

    def tokens(self) -> Iterator[TaggedWord]:
        for u in self.utterances():
            yield from u

    @property
    def tagged(self) -> bool:
        return all(t.tag is not None for t in self.tokens())

    def subset(self, indices) -> "TaggedCorpus":
        return TaggedCorpus([self.dialogues[i] for i in indices])

    def __len__(self):
        return len(self.dialogues)


def utterance_text(utt: Utterance) -> str:
    return " ".join(t.word for t in utt)


def parse_corpus(text: str, source: str = "<corpus>") -> TaggedCorpus:
    dialogues: list[list[Utterance]] = []
    dialogue: list[Utterance] = []
    utt: Utterance = []

    def close_utterance():
        nonlocal utt
        if utt:
            dialogue.append(utt)
            utt = []

    def close_dialogue():
        nonlocal dialogue
        close_utterance()
        if dialogue:
            dialogues.append(dialogue)
            dialogue = []

    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip("\r")
        if line.strip() == DIALOGUE_MARK:
            close_dialogue()
        elif not line.strip():
            close_utterance()
        else:
            word, _, tag = line.partition("\t")
            word = " ".join(word.split())
            tag = tag.strip() or None
            if not word:
                raise DataError(f"{source}:{n}: empty word token")
            utt.append(TaggedWord(word, tag, n))
    close_dialogue()
    return TaggedCorpus(dialogues)


def read_corpus(path) -> TaggedCorpus:
    return parse_corpus(Path(path).read_text(encoding="utf-8"), str(path))


def format_corpus(corpus: TaggedCorpus) -> str:
    out = []
    for d, dialogue in enumerate(corpus.dialogues):
        if d:
            out.append(DIALOGUE_MARK)
        for u, utt in enumerate(dialogue):
            if u:
                out.append("")
            out.extend(t.word if t.tag is None else f"{t.word}\t{t.tag}" for t in utt)
    return "\n".join(out) + "\n"


def write_corpus(corpus: TaggedCorpus, path) -> None:
    Path(path).write_text(format_corpus(corpus), encoding="utf-8")


class ClassInventory(tuple):
    """Ordered, unique class identifiers."""

    def __new__(cls, classes):
        classes = tuple(classes)
        if len(set(classes)) != len(classes):
            raise DataError("duplicate class identifiers")
        return super().__new__(cls, classes)

    @classmethod
    def read(cls, path) -> "ClassInventory":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(l.strip() for l in lines if l.strip() and not l.startswith("#"))


def match_entries(utt: Utterance, vocabulary: Vocabulary) -> Utterance:
    """Merge runs of tokens that spell a multi-word vocabulary entry.

    Matching is greedy, longest entry first; merged tokens must share a tag.
    """
    multi = {e: len(e.split()) for e in vocabulary.multiword}
    longest = max(multi.values(), default=1)
    out = []
    i = 0
    while i < len(utt):
        for n in range(min(longest, len(utt) - i), 1, -1):
            group = utt[i : i + n]
            joined = " ".join(t.word for t in group)
            if joined in multi and len({t.tag for t in group}) == 1:
                out.append(TaggedWord(joined, group[0].tag, group[0].line))
                i += n
                break
        else:
            out.append(utt[i])
            i += 1
    return out


def corpus_vocabulary(corpus: TaggedCorpus, extra=()) -> Vocabulary:
    """Every distinct token in order of first appearance, plus ``extra`` entries."""
    seen = dict.fromkeys(t.word for t in corpus.tokens())
    for e in extra:
        seen.setdefault(" ".join(e.split()))
    return Vocabulary(seen)


@dataclass(frozen=True, eq=False)
class LinguisticDecoder:
    kind: str
    hmm: Hmm
    class_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown LD kind {self.kind!r}")
        if self.kind != "biclass" and len(self.hmm) != 1:
            raise DataError(f"{self.kind} decoder must have exactly one emitting state")
        if self.kind == "biclass" and (
            self.class_labels is None or len(self.class_labels) != len(self.hmm)
        ):
            raise DataError("biclass decoder needs one class label per state")

    @property
    def normalized(self) -> bool:
        return self.hmm.normalized

    @property
    def vocabulary(self) -> Vocabulary:
        return Vocabulary(self.hmm.alphabet.symbols)

    def word_cost(self, word: str, state: int = 0) -> float:
        return float(self.hmm.emission_costs[state, self.hmm.alphabet.index(word)])

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        save_hmm(self.hmm, d / "ld.hmm")
        meta = [f"kind\t{self.kind}"]
        if self.class_labels:
            meta.append("classes\t" + "\t".join(self.class_labels))
        (d / "ld.meta").write_text("\n".join(meta) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, directory) -> "LinguisticDecoder":
        d = Path(directory)
        if not (d / "ld.meta").exists():
            raise DataError(f"no linguistic decoder in {d}")
        meta = {}
        for line in (d / "ld.meta").read_text(encoding="utf-8").splitlines():
            key, _, rest = line.partition("\t")
            meta[key] = rest
        labels = tuple(meta["classes"].split("\t")) if "classes" in meta else None
        return cls(meta.get("kind", ""), load_hmm(d / "ld.hmm"), labels)


def _word_alphabet(vocabulary: Vocabulary) -> Alphabet:
    return Alphabet(vocabulary.entries)


def baseline_ld(vocabulary: Vocabulary) -> LinguisticDecoder:
    """Cost-free decoder: word choice rests on the OD alone."""
    if not len(vocabulary):
        raise DataError("empty vocabulary")
    v = len(vocabulary)
    hmm = Hmm(_word_alphabet(vocabulary), [0.0], [[0.0]], [0.0], np.zeros((1, v)), normalized=False)
    return LinguisticDecoder("baseline", hmm)


def _known_tokens(corpus: TaggedCorpus, vocabulary: Vocabulary):
    """Utterances re-tokenized against the vocabulary; unknown words dropped."""
    dropped = CountTable()
    out = []
    for utt in corpus.utterances():
        kept = []
        for t in match_entries(utt, vocabulary):
            if t.word in vocabulary:
                kept.append(t)
            else:
                dropped[t.word] += 1
        out.append(kept)
    if dropped:
        log.warning("ignoring %d out-of-vocabulary token(s)", dropped.total_count)
    return out


def estimate_unigram(
    corpus: TaggedCorpus, delta: float = 1e-3, vocabulary: Vocabulary | None = None
) -> LinguisticDecoder:
    """P(w) = (Count(w) + delta) / (N + delta * |V|) on a single looping state.

    The loop and exit costs are zero, so an utterance scores as the plain
    product of its word probabilities.
    """
    if not corpus.dialogues:
        raise DataError("empty training corpus")
    vocabulary = vocabulary or corpus_vocabulary(corpus)
    counts = CountTable(t.word for utt in _known_tokens(corpus, vocabulary) for t in utt)
    probs = smooth_additive(np.array([counts.count(w) for w in vocabulary], dtype=float), delta)
    hmm = Hmm(
        _word_alphabet(vocabulary), [0.0], [[0.0]], [0.0], to_cost(probs)[None, :], normalized=False
    )
    return LinguisticDecoder("unigram", hmm)


def estimate_biclass(
    corpus: TaggedCorpus,
    inventory: ClassInventory,
    delta: float = 1e-3,
    vocabulary: Vocabulary | None = None,
) -> LinguisticDecoder:
    """Class-bigram decoder with an utterance-end event as the exit.

    Transitions: (Count(c, c') + delta) / (Count(c) + delta * (|C| + 1)),
    where the extra event is the end of the utterance.  Emissions:
    (Count(c, w) + delta) / (Count(c) + delta * |V|).  Entry: smoothed
    distribution of utterance-initial classes.
    """
    if not inventory:
        raise ConfigError("biclass estimation needs a non-empty class inventory")
    if not corpus.dialogues:
        raise DataError("empty training corpus")
    vocabulary = vocabulary or corpus_vocabulary(corpus)
    cls_index = {c: i for i, c in enumerate(inventory)}
    J, V = len(inventory), len(vocabulary)

    def class_of(t: TaggedWord) -> int:
        if t.tag is None:
            raise DataError(f"line {t.line}: token {t.word!r} has no class tag")
        try:
            return cls_index[t.tag]
        except KeyError:
            raise DataError(f"line {t.line}: unknown class {t.tag!r} for {t.word!r}") from None

    init = np.zeros(J)
    trans = np.zeros((J, J + 1))
    emit = np.zeros((J, V))
    for utt in corpus.utterances():
        utt = match_entries(utt, vocabulary)
        classes = [class_of(t) for t in utt]
        if not classes:
            continue
        init[classes[0]] += 1
        for a, b in zip(classes, classes[1:] + [J]):
            trans[a, b] += 1
        for t, c in zip(utt, classes):
            if t.word in vocabulary:
                emit[c, vocabulary.index(t.word)] += 1
            else:
                log.warning("line %s: %r not in vocabulary", t.line, t.word)

    rows = np.stack([smooth_additive(r, delta) for r in trans])
    hmm = Hmm(
        _word_alphabet(vocabulary),
        to_cost(smooth_additive(init, delta)),
        to_cost(rows[:, :J]),
        to_cost(rows[:, J]),
        to_cost(np.stack([smooth_additive(r, delta) for r in emit])),
        normalized=True,
    )
    return LinguisticDecoder("biclass", hmm, tuple(inventory))


def build_ld(kind: str, corpus: TaggedCorpus | None, vocabulary: Vocabulary, delta: float = 1e-3,
             inventory: ClassInventory | None = None) -> LinguisticDecoder:
    if kind == "baseline":
        return baseline_ld(vocabulary)
    if corpus is None:
        raise ConfigError(f"{kind} decoder needs a training corpus")
    if kind == "unigram":
        return estimate_unigram(corpus, delta, vocabulary)
    if kind == "biclass":
        if inventory is None:
            raise ConfigError("biclass decoder needs a class inventory")
        return estimate_biclass(corpus, inventory, delta, vocabulary)
    raise ConfigError(f"unknown LD kind {kind!r}")
