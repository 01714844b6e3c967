"""Synthetic used-car dialogues and seeded typing-error injection.

The grammar is small but class-structured: six word classes (CH chat and
function words, FN make names, OH object heads, AH attribute heads, MOD
modifiers, SYM numbers and punctuation) so that a class-bigram model has
something to learn.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import ConfigError
from .evaluation import EvaluationKey
from .linguistic import TaggedCorpus, TaggedWord, utterance_text
from .orthographic import KeyboardMap, classify_special

CLASSES = ("CH", "FN", "OH", "AH", "MOD", "SYM")

SLOTS = {
    "FN": ["volvo", "saab", "ford", "audi", "toyota", "saab 900", "volvo 240"],
    "OH": ["car", "cars", "price", "model", "models", "color", "engine", "mileage"],
    "AH": ["red", "blue", "white", "cheap", "new", "old", "small", "fast"],
    "MOD": ["very", "quite", "more", "less"],
    "YEAR": ["1995", "1998", "2001"],
    "SUM": ["20000", "50000"],
}
SLOT_CLASS = {"YEAR": "SYM", "SUM": "SYM"}

PUNCT = {"?": "SYM", ",": "SYM", ".": "SYM"}

# literal words of the templates are chat/function words unless listed in PUNCT
TEMPLATES = [
    "i want a {AH} {FN}",
    "show me {FN} cars",
    "do you have any {AH} {OH} ?",
    "how much does the {FN} cost ?",
    "what {OH} does it have ?",
    "i would like a {MOD} {AH} car",
    "is there a {FN} from {YEAR} ?",
    "something cheaper than {SUM}",
    "what is the {OH} of the {FN} ?",
    "the {AH} one , please",
    "yes please",
    "no thanks",
    "ok , show me the {OH}",
    "i need a {AH} car for these {OH}",
    "do you have a {FN} with a {AH} {OH} ?",
    "how {AH} is the {FN} ?",
    "i prefer {MOD} {AH} {OH} .",
]


def _expand(template: str, rng: random.Random) -> list[TaggedWord]:
    out = []
    for tok in template.split():
        if tok.startswith("{"):
            slot = tok[1:-1]
            out.append(TaggedWord(rng.choice(SLOTS[slot]), SLOT_CLASS.get(slot, slot)))
        else:
            out.append(TaggedWord(tok, PUNCT.get(tok, "CH")))
    return out


def generate_corpus(dialogues: int = 20, utterances: int = 15, seed: int = 0) -> TaggedCorpus:
    """Tagged clean corpus of ``dialogues`` x ``utterances`` grammar sentences."""
    if dialogues < 1 or utterances < 1:
        raise ConfigError("need at least one dialogue of one utterance")
    rng = random.Random(seed)
    return TaggedCorpus(
        [[_expand(rng.choice(TEMPLATES), rng) for _ in range(utterances)] for _ in range(dialogues)]
    )


@dataclass(frozen=True)
class SyntheticErrorSpec:
    """Error rates: per letter for substitution/deletion/space insertion,
    per word boundary for run-ons (space deletion)."""

    substitution: float = 0.006
    deletion: float = 0.003
    space_insertion: float = 0.002
    run_on: float = 0.012
    seed: int = 0

    def __post_init__(self):
        for name in ("substitution", "deletion", "space_insertion", "run_on"):
            rate = getattr(self, name)
            if not 0 <= rate < 1:
                raise ConfigError(f"{name} rate must be in [0, 1), got {rate}")


def _corrupt_token(tok: str, spec: SyntheticErrorSpec, keyboard: KeyboardMap, rng) -> str:
    if classify_special(tok):
        return tok
    out = []
    for i, ch in enumerate(tok):
        if ch.isalpha():
            r = rng.random()
            if r < spec.substitution:
                out.append(rng.choice(keyboard.neighbours(ch) or [ch]))
            elif r < spec.substitution + spec.deletion and len(tok) > 1:
                pass
            else:
                out.append(ch)
        else:
            out.append(ch)
        if i < len(tok) - 1 and rng.random() < spec.space_insertion:
            out.append(" ")
    text = "".join(out).strip()
    return text or tok


def corrupt_utterance(text: str, spec: SyntheticErrorSpec, keyboard: KeyboardMap, rng) -> str:
    toks = [_corrupt_token(t, spec, keyboard, rng) for t in text.split()]
    out = toks[0]
    for t in toks[1:]:
        out += ("" if rng.random() < spec.run_on else " ") + t
    return " ".join(out.split())


@dataclass
class SyntheticCorpus:
    clean: TaggedCorpus
    noisy: list[list[str]]
    key: EvaluationKey

    @property
    def noisy_lines(self) -> list[str]:
        return [u for d in self.noisy for u in d]

    def category_counts(self) -> dict[str, int]:
        return self.key.category_counts()


def synthesize_corpus(
    clean: TaggedCorpus, spec: SyntheticErrorSpec = SyntheticErrorSpec(), keyboard: KeyboardMap | None = None
) -> SyntheticCorpus:
    """Seeded noisy copy of ``clean`` plus the key of every edited utterance.

    An edit is undone when its noisy form is already keyed with a different
    correction or equals some clean utterance, so key originals stay
    unambiguous.
    """
    keyboard = keyboard or KeyboardMap.qwerty()
    rng = random.Random(spec.seed)
    clean_texts = {utterance_text(u) for u in clean.utterances()}
    corrections: dict[str, str] = {}
    noisy = []
    for dialogue in clean.dialogues:
        lines = []
        for utt in dialogue:
            text = utterance_text(utt)
            bad = corrupt_utterance(text, spec, keyboard, rng)
            if bad != text:
                if bad in clean_texts or corrections.get(bad, text) != text:
                    bad = text
                else:
                    corrections[bad] = text
            lines.append(bad)
        noisy.append(lines)
    return SyntheticCorpus(clean, noisy, EvaluationKey(corrections.items()))
