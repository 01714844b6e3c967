"""Token passing over layered HMMs.

Isolated word recognition runs every word model independently with the
scalar :func:`step_model`.  Connected text recognition keeps one activation
per (linguistic state, word model) pair and advances all of them at once
with array operations; word boundaries are written to a chain of
:class:`WordLinkRecord` objects that is traced back at the end.

Every decoder prefixes the input with a single space, because each word
model begins with a state biased towards the space character.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError
from .hmm import Hmm

INF = math.inf


@dataclass(frozen=True)
class WordLinkRecord:
    word_id: int
    boundary_time: int
    boundary_cost: float
    predecessor: "WordLinkRecord | None" = None


@dataclass(frozen=True)
class Token:
    """Head of a partial path.  ``ld_origin`` is the linguistic state that
    emitted the word the token is currently inside."""

    cost: float = INF
    ld_origin: int | None = None
    link: WordLinkRecord | None = None

    @property
    def is_null(self) -> bool:
        return self.cost == INF


NULL_TOKEN = Token()
START_TOKEN = Token(0.0)


@dataclass
class OdActivation:
    """Token slots of one word model: entry, one per emitting state, exit."""

    model_id: int
    slots: list[Token]
    entry: Token = NULL_TOKEN
    exit: Token = NULL_TOKEN

    @classmethod
    def fresh(cls, model_id: int, n_states: int, entry: Token = NULL_TOKEN) -> "OdActivation":
        return cls(model_id, [NULL_TOKEN] * n_states, entry)

    @property
    def active(self) -> bool:
        return not (
            self.entry.is_null and self.exit.is_null and all(t.is_null for t in self.slots)
        )

    def tokens(self):
        yield self.entry
        yield from self.slots
        yield self.exit


@dataclass(frozen=True)
class BeamConfig:
    width: float = INF

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigError(f"beam width must be positive, got {self.width!r}")

    @property
    def unbounded(self) -> bool:
        return self.width == INF

    @classmethod
    def parse(cls, text) -> "BeamConfig":
        if isinstance(text, BeamConfig):
            return text
        if text is None or str(text).lower() in ("inf", "none", "unbounded"):
            return cls()
        try:
            return cls(float(text))
        except ValueError:
            raise ConfigError(f"bad beam width {text!r}") from None


def step_model(activation: OdActivation, hmm: Hmm, symbol) -> OdActivation:
    """Advance the tokens of one word model by one input symbol.

    Tokens in the entry slot and in every emitting state are copied along
    each finite transition; per target state the cheapest copy survives
    (ties go to the lower source, the entry slot counting as lowest), then
    the emission cost of ``symbol`` is added.  The exit slot is refilled
    from the new state tokens.  The entry slot is emptied.
    """
    c = hmm.alphabet.index(symbol)
    n = len(hmm)
    if len(activation.slots) != n:
        raise DataError("activation does not belong to this model")
    A, B, E, X = hmm.transition_costs, hmm.emission_costs, hmm.entry_costs, hmm.exit_costs

    best = [INF] * n
    carrier: list[Token | None] = [None] * n
    q = activation.entry
    if not q.is_null:
        for j in range(n):
            cand = q.cost + E[j]
            if cand < best[j]:
                best[j], carrier[j] = cand, q
    for i, q in enumerate(activation.slots):
        if q.is_null:
            continue
        row = A[i]
        for j in range(n):
            cand = q.cost + row[j]
            if cand < best[j]:
                best[j], carrier[j] = cand, q

    slots = []
    for j in range(n):
        cost = best[j] + B[j, c]
        if cost == INF:
            slots.append(NULL_TOKEN)
        else:
            slots.append(replace(carrier[j], cost=float(cost)))

    exit_tok = NULL_TOKEN
    for i, q in enumerate(slots):
        if q.is_null or X[i] == INF:
            continue
        cand = q.cost + X[i]
        if cand < exit_tok.cost:
            exit_tok = replace(q, cost=float(cand))
    return OdActivation(activation.model_id, slots, NULL_TOKEN, exit_tok)


def prune(activations: list[OdActivation], beam: BeamConfig) -> list[OdActivation]:
    """Null every token costlier than the best live token plus the beam width."""
    if beam.unbounded:
        return activations
    live = [t.cost for a in activations for t in a.tokens() if not t.is_null]
    if not live:
        return activations
    threshold = min(live) + beam.width

    def cut(t):
        return NULL_TOKEN if t.cost > threshold else t

    return [
        OdActivation(a.model_id, [cut(t) for t in a.slots], cut(a.entry), cut(a.exit))
        for a in activations
    ]


def _prepare(text: str) -> str:
    if not text:
        raise DataError("cannot decode an empty utterance")
    return " " + text


def recognize_isolated(od, text: str) -> list[tuple[str, float]]:
    """Score ``text`` (one word, space-prefixed internally) against every model.

    Returns ``(entry, cost)`` for each model with a finite exit cost, cheapest
    first; equal costs keep vocabulary order.
    """
    if len(od) == 0:
        raise DataError("empty vocabulary")
    seq = _prepare(text)
    od.alphabet.encode(seq)
    scored = []
    for m, hmm in enumerate(od.models):
        act = OdActivation.fresh(m, len(hmm), START_TOKEN)
        for ch in seq:
            act = step_model(act, hmm, ch)
        if not act.exit.is_null:
            scored.append((act.exit.cost, m))
    scored.sort()
    return [(od.vocabulary[m], cost) for cost, m in scored]


def backtrack(final: Token) -> list[int]:
    if final.is_null:
        raise DataError("cannot back-track a null token")
    words = []
    rec = final.link
    while rec is not None:
        words.append(rec.word_id)
        rec = rec.predecessor
    words.reverse()
    return words


@dataclass
class Decoding:
    """Outcome of connected text recognition.

    On a failed parse ``words`` is empty, ``cost`` is ``inf`` and
    ``best_partial`` holds the lowest live cost seen at the last time step
    that still had live tokens.
    """

    words: list[str]
    word_ids: list[int]
    cost: float
    final: Token
    best_partial: tuple[float, int] | None = None
    boundaries: list[int] = field(default_factory=list)

    @property
    def no_parse(self) -> bool:
        return self.final.is_null

    @property
    def text(self) -> str:
        return " ".join(self.words)


def _ld_arrays(ld, od):
    hmm = ld.hmm
    symbols = hmm.alphabet.symbols
    if set(symbols) != set(od.vocabulary.entries) or len(symbols) != len(od.vocabulary):
        raise DataError("linguistic decoder observables must be exactly the OD vocabulary")
    cols = [hmm.alphabet.index(e) for e in od.vocabulary]
    return hmm.entry_costs, hmm.transition_costs, hmm.exit_costs, hmm.emission_costs[:, cols]


def recognize_connected(ld, od, text: str, beam: BeamConfig = BeamConfig()) -> Decoding:
    """Connected text recognition with token passing.

    Per input character, live LD tokens enter the word models, paying the
    LD transition and the word emission.  Every model then takes one step.
    Tokens leaving a model return to the LD state that emitted the word,
    where only the cheapest survives and gets a word-link record.
    """
    seq = _prepare(text)
    obs = od.alphabet.encode(seq)
    E, A, X, B = od.stacked
    ldE, ldA, ldX, ldB = _ld_arrays(ld, od)
    J, M, S = ldB.shape[0], E.shape[0], E.shape[1]
    rows = np.arange(J)

    tok = np.full((J, M, S), INF)
    link = np.full((J, M, S), -1, dtype=np.intp)
    ld_tok = np.full(J, INF)
    ld_link = np.full(J, -1, dtype=np.intp)
    records: list[WordLinkRecord] = []
    final = NULL_TOKEN
    best_partial = None

    for t, c in enumerate(obs, 1):
        # LD: dispatch into word model entries
        if t == 1:
            disp = (0.0 + ldE)[:, None] + ldB
            disp_link = np.full((J, M), -1, dtype=np.intp)
        else:
            cand = ld_tok[:, None] + ldA
            src = cand.argmin(axis=0)
            disp = cand[src, rows][:, None] + ldB
            disp_link = np.broadcast_to(ld_link[src][:, None], (J, M))
        ld_tok = np.full(J, INF)
        ld_link = np.full(J, -1, dtype=np.intp)

        # OD: step model procedure, entry slot counted as source 0
        allc = np.concatenate([(disp[:, :, None] + E)[:, :, None, :], tok[:, :, :, None] + A], axis=2)
        src = allc.argmin(axis=2)
        best = np.take_along_axis(allc, src[:, :, None, :], axis=2)[:, :, 0, :]
        tok = best + B[:, :, c]
        link = np.take_along_axis(np.concatenate([disp_link[:, :, None], link], axis=2), src, axis=2)

        exc = tok + X
        ex_src = exc.argmin(axis=2)
        ex_tok = np.take_along_axis(exc, ex_src[:, :, None], axis=2)[:, :, 0]
        ex_link = np.take_along_axis(link, ex_src[:, :, None], axis=2)[:, :, 0]

        live = min(tok.min(), ex_tok.min())
        if live < INF:
            best_partial = (float(live), t)
        if not beam.unbounded and live < INF:
            threshold = live + beam.width
            tok[tok > threshold] = INF
            ex_tok[ex_tok > threshold] = INF

        # propagate exits up to their LD state; the cheapest word per state wins
        word = ex_tok.argmin(axis=1)
        cost = ex_tok[rows, word]
        for j in np.flatnonzero(cost < INF):
            pred = ex_link[j, word[j]]
            records.append(
                WordLinkRecord(
                    int(word[j]), t, float(cost[j]), records[pred] if pred >= 0 else None
                )
            )
            ld_tok[j] = cost[j]
            ld_link[j] = len(records) - 1

        # LD: refill the exit state
        xc = ld_tok + ldX
        jx = int(xc.argmin())
        if xc[jx] < INF:
            final = Token(float(xc[jx]), jx, records[ld_link[jx]])
        else:
            final = NULL_TOKEN

    if final.is_null:
        return Decoding([], [], INF, final, best_partial)
    ids = backtrack(final)
    bounds = []
    rec = final.link
    while rec is not None:
        bounds.append(rec.boundary_time)
        rec = rec.predecessor
    bounds.reverse()
    assert bounds[-1] == len(obs)
    return Decoding([od.vocabulary[i] for i in ids], ids, final.cost, final, best_partial, bounds)
