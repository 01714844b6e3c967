"""The orthographic decoder: one character HMM per vocabulary entry.

Each entry is modelled by a left-to-right HMM over the entry prefixed with
one space, so that the inter-word gap belongs to the word that follows it.
Models are trained with Baum-Welch on a synthetic error corpus built from
keyboard-neighbour substitutions, deletions, space insertions and so on.
"""

from __future__ import annotations

import logging
import re
import string
from dataclasses import dataclass, fields
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, TrainingError
from .hmm import Alphabet, Hmm, baum_welch, load_hmm, save_hmm, smooth_additive, smooth_emissions, to_cost, to_prob

log = logging.getLogger(__name__)

BASE_SYMBOLS = " " + string.ascii_lowercase + string.digits + ".,?!-'=:;/()+%&"
QWERTY_ROWS = ("1234567890", "qwertyuiop", "asdfghjkl", "zxcvbnm")


class Vocabulary:
    """Ordered, duplicate-free list of lexical entries.

    Entries may contain single internal spaces ("saab 900"); the model string
    of an entry is the entry with one leading space.
    """

    def __init__(self, entries):
        entries = tuple(entries)
        if not entries:
            raise DataError("vocabulary is empty")
        index = {}
        for i, e in enumerate(entries):
            if not isinstance(e, str) or not e or e != " ".join(e.split()):
                raise DataError(f"bad vocabulary entry {e!r}: empty or not single-spaced")
            if e in index:
                raise DataError(f"duplicate vocabulary entry {e!r}")
            index[e] = i
        self.entries = entries
        self._index = index

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def __contains__(self, entry):
        return entry in self._index

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.entries == other.entries

    def __repr__(self):
        return f"Vocabulary({list(self.entries)!r})"

    def index(self, entry) -> int:
        try:
            return self._index[entry]
        except KeyError:
            raise DataError(f"{entry!r} is not in the vocabulary") from None

    @staticmethod
    def model_string(entry: str) -> str:
        return " " + entry

    @property
    def multiword(self) -> list[str]:
        return [e for e in self.entries if " " in e]


def read_vocabulary(path) -> Vocabulary:
    """One entry per line; a line starting with ``#`` is a comment, ``\\#`` escapes it."""
    entries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            continue
        if line.startswith("\\#"):
            line = line[1:]
        line = " ".join(line.split())
        if line and line not in entries:
            entries.append(line)
    return Vocabulary(entries)


def write_vocabulary(vocabulary: Vocabulary, path) -> None:
    lines = [("\\" + e if e.startswith("#") else e) for e in vocabulary]
    Path(path).write_text("".join(l + "\n" for l in lines), encoding="utf-8")


class KeyboardMap:
    """Left/right keyboard neighbours per character."""

    def __init__(self, neighbours: dict[str, tuple[str | None, str | None]]):
        self._pairs = dict(neighbours)

    def neighbours(self, ch: str) -> list[str]:
        left, right = self._pairs.get(ch, (None, None))
        return [c for c in (left, right) if c is not None]

    @property
    def symbols(self) -> set[str]:
        out = set(self._pairs)
        for pair in self._pairs.values():
            out.update(c for c in pair if c is not None)
        return out

    @classmethod
    def from_rows(cls, rows) -> "KeyboardMap":
        pairs = {}
        for row in rows:
            for i, ch in enumerate(row):
                left = row[i - 1] if i > 0 else None
                right = row[i + 1] if i + 1 < len(row) else None
                pairs[ch] = (left, right)
        return cls(pairs)

    @classmethod
    def qwerty(cls) -> "KeyboardMap":
        return cls.from_rows(QWERTY_ROWS)

    @classmethod
    def read(cls, path) -> "KeyboardMap":
        """Lines ``<char> <left-or-'-'> <right-or-'-'>``; ``\\s`` denotes a space."""
        pairs = {}
        for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise DataError(f"{path}:{n}: expected '<char> <left> <right>'")
            ch, left, right = (" " if p == "\\s" else p for p in parts)
            if any(len(p) != 1 for p in (ch, left, right)):
                raise DataError(f"{path}:{n}: keys must be single characters")
            pairs[ch] = (None if left == "-" else left, None if right == "-" else right)
        return cls(pairs)


@dataclass(frozen=True)
class ErrorTypeSet:
    substitution: bool = False
    deletion: bool = False
    insertion: bool = False
    transposition: bool = False
    white_space_insertion: bool = False
    double_stroke: bool = False

    @classmethod
    def parse(cls, names) -> "ErrorTypeSet":
        known = {f.name for f in fields(cls)}
        names = [n.strip().replace("-", "_") for n in names if n.strip()]
        unknown = set(names) - known
        if unknown:
            raise ConfigError(f"unknown error types: {sorted(unknown)}")
        return cls(**{n: True for n in names})

    def enabled(self) -> list[str]:
        return [f.name for f in fields(self) if getattr(self, f.name)]


DEFAULT_ERROR_TYPES = ErrorTypeSet(substitution=True, deletion=True, white_space_insertion=True)
SPECIAL_ERROR_TYPES = ErrorTypeSet(white_space_insertion=True)

_NUMERIC = re.compile(r"[+\-]?[0-9.,+\-]*[0-9][0-9.,+\-]*")


def classify_special(entry: str) -> bool:
    """Single-character entries and numbers get a space-insertion-only corpus."""
    return len(entry) == 1 or bool(_NUMERIC.fullmatch(entry))


def default_alphabet(vocabulary: Vocabulary, keyboard: KeyboardMap | None = None) -> Alphabet:
    extra = set()
    for e in vocabulary:
        extra.update(e)
    if keyboard is not None:
        extra.update(keyboard.symbols)
    extra.difference_update(BASE_SYMBOLS)
    return Alphabet(BASE_SYMBOLS + "".join(sorted(extra)))


def build_word_topology(word_string: str, alphabet: Alphabet, bias: float = 0.9) -> Hmm:
    """Untrained left-to-right model for ``word_string`` (leading space included).

    State ``k`` emits character ``k`` with probability ``bias`` and every other
    symbol uniformly.  Each state may loop (insertion), advance by one
    (match) or by two (deletion); the entry reaches the first two states and
    the exit is reached from the last two.  Rows are uniform over their arcs.
    """
    if not word_string.startswith(" "):
        raise DataError(f"model string {word_string!r} must start with a space")
    k = len(alphabet)
    if not (1.0 / k < bias < 1.0):
        raise ConfigError(f"bias must lie in (1/{k}, 1), got {bias!r}")
    L = len(word_string)

    entry = np.zeros(L)
    entry[: min(2, L)] = 1.0
    rows = np.zeros((L, L + 1))
    for s in range(L):
        for target in (s, s + 1, s + 2):
            if target < L:
                rows[s, target] = 1.0
        if s >= L - 2:
            rows[s, L] = 1.0
    emit = np.full((L, k), (1.0 - bias) / (k - 1))
    for s, ch in enumerate(word_string):
        emit[s, alphabet.index(ch)] = bias

    entry /= entry.sum()
    rows /= rows.sum(axis=1, keepdims=True)
    return Hmm.from_probabilities(alphabet, entry, rows[:, :L], rows[:, L], emit)


def generate_error_corpus(word_string: str, error_types: ErrorTypeSet, keyboard: KeyboardMap) -> list[str]:
    """Clean string followed by every single-edit variant, duplicates removed.

    Variants are produced position by position; at each position the enabled
    types are applied in the order substitution, deletion, insertion,
    transposition, white space insertion, double stroke.
    """
    if not error_types.enabled():
        raise ConfigError("at least one error type must be enabled")
    w = word_string
    L = len(w)
    out = {w: None}
    for i, ch in enumerate(w):
        head, tail = w[:i], w[i + 1 :]
        near = keyboard.neighbours(ch)
        if error_types.substitution:
            for n in near:
                out.setdefault(head + n + tail)
        if error_types.deletion and L > 1:
            out.setdefault(head + tail)
        if error_types.insertion:
            for n in near:
                out.setdefault(head + n + ch + tail)
                out.setdefault(head + ch + n + tail)
        if error_types.transposition and i < L - 1:
            out.setdefault(head + w[i + 1] + ch + w[i + 2 :])
        if error_types.white_space_insertion and i < L - 1:
            out.setdefault(head + ch + " " + tail)
        if error_types.double_stroke:
            out.setdefault(head + ch + ch + tail)
    return list(out)


@dataclass(frozen=True)
class TrainingConfig:
    bw_iterations: int = 10
    smoothing_delta: float = 1e-3
    clean_weight: int = 5
    bias: float = 0.9

    def __post_init__(self):
        if self.bw_iterations < 0:
            raise ConfigError("bw_iterations must be >= 0")
        if not self.smoothing_delta > 0:
            raise ConfigError("smoothing_delta must be > 0")
        if self.clean_weight < 1:
            raise ConfigError("clean_weight must be >= 1")


class OdSet:
    """The trained word models, indexed like the vocabulary."""

    def __init__(self, vocabulary: Vocabulary, models, special):
        models = list(models)
        special = [bool(s) for s in special]
        if len(models) != len(vocabulary) or len(special) != len(vocabulary):
            raise DataError("one model and one special flag per vocabulary entry required")
        alphabets = {m.alphabet for m in models}
        if len(alphabets) != 1:
            raise DataError("all word models must share one alphabet")
        self.vocabulary = vocabulary
        self.models = models
        self.special = special
        self.alphabet = models[0].alphabet

    def __len__(self):
        return len(self.models)

    def model(self, entry) -> Hmm:
        return self.models[self.vocabulary.index(entry)]

    @cached_property
    def stacked(self):
        """Padded cost arrays (entry, transitions, exit, emissions) over all models.

        Shapes are (M, S), (M, S, S), (M, S) and (M, S, K) with S the longest
        model; padding states are unreachable (infinite cost everywhere).
        """
        m = len(self.models)
        s = max(len(h) for h in self.models)
        k = len(self.alphabet)
        entry = np.full((m, s), np.inf)
        trans = np.full((m, s, s), np.inf)
        exit_ = np.full((m, s), np.inf)
        emit = np.full((m, s, k), np.inf)
        for i, h in enumerate(self.models):
            n = len(h)
            entry[i, :n] = h.entry_costs
            trans[i, :n, :n] = h.transition_costs
            exit_[i, :n] = h.exit_costs
            emit[i, :n] = h.emission_costs
        return entry, trans, exit_, emit

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        lines = []
        for i, (entry, h, sp) in enumerate(zip(self.vocabulary, self.models, self.special)):
            name = f"w{i:05d}.hmm"
            save_hmm(h, d / name)
            lines.append(f"{entry}\t{name}\t{int(sp)}\n")
        (d / "manifest.tsv").write_text("".join(lines), encoding="utf-8")

    @classmethod
    def load(cls, directory) -> "OdSet":
        d = Path(directory)
        manifest = d / "manifest.tsv"
        if not manifest.exists():
            raise DataError(f"no OD manifest in {d}")
        entries, models, special = [], [], []
        for n, line in enumerate(manifest.read_text(encoding="utf-8").splitlines(), 1):
            parts = line.split("\t")
            if len(parts) != 3 or parts[2] not in ("0", "1"):
                raise DataError(f"{manifest}:{n}: expected 'entry<TAB>file<TAB>0|1'")
            entries.append(parts[0])
            models.append(load_hmm(d / parts[1]))
            special.append(parts[2] == "1")
        return cls(Vocabulary(entries), models, special)


def _smooth_entry(h: Hmm, delta: float) -> Hmm:
    # floor over the topological entry arcs only (the first two states)
    allowed = min(2, len(h))
    p = to_prob(h.entry_costs)
    p[:allowed] = smooth_additive(p[:allowed], delta)
    return h.replace(entry_costs=to_cost(p))


def train_word_model(
    entry: str,
    alphabet: Alphabet,
    error_types: ErrorTypeSet = DEFAULT_ERROR_TYPES,
    keyboard: KeyboardMap | None = None,
    training: TrainingConfig = TrainingConfig(),
    special: bool | None = None,
) -> Hmm:
    keyboard = keyboard or KeyboardMap.qwerty()
    if special is None:
        special = classify_special(entry)
    word = Vocabulary.model_string(entry)
    types = SPECIAL_ERROR_TYPES if special else error_types
    corpus = generate_error_corpus(word, types, keyboard)
    corpus = [word] * (training.clean_weight - 1) + corpus
    h = build_word_topology(word, alphabet, training.bias)
    try:
        h = baum_welch(h, corpus, training.bw_iterations)
    except TrainingError as exc:
        raise TrainingError(f"training {entry!r}: {exc}") from exc
    h = smooth_emissions(h, training.smoothing_delta)
    return _smooth_entry(h, training.smoothing_delta)


def build_od(
    vocabulary: Vocabulary,
    error_types: ErrorTypeSet = DEFAULT_ERROR_TYPES,
    keyboard: KeyboardMap | None = None,
    training: TrainingConfig = TrainingConfig(),
    alphabet: Alphabet | None = None,
) -> OdSet:
    """Build and train one word model per vocabulary entry."""
    keyboard = keyboard or KeyboardMap.qwerty()
    alphabet = alphabet or default_alphabet(vocabulary, keyboard)
    models, special = [], []
    for entry in vocabulary:
        sp = classify_special(entry)
        models.append(train_word_model(entry, alphabet, error_types, keyboard, training, sp))
        special.append(sp)
    log.info("built %d word models over %d symbols", len(models), len(alphabet))
    return OdSet(vocabulary, models, special)
