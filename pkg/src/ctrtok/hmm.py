"""Entry/exit-state HMMs in the negative-log (cost) domain.

Every probability is stored as ``-ln p``; ``inf`` marks a forbidden
transition or an impossible emission.  Emitting states are numbered from 0
here.  The non-emitting entry state is represented by ``entry_costs`` and the
absorbing exit state by ``exit_costs``, so a model with ``n`` emitting states
has ``n + 2`` states in total.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from collections.abc import Hashable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, DataError, TrainingError, UnknownSymbolError

log = logging.getLogger(__name__)

INF = math.inf
NORM_TOL = 1e-9


def to_cost(p):
    """-ln p, mapping 0 to +inf.  Works on scalars and arrays."""
    with np.errstate(divide="ignore"):
        out = -np.log(np.asarray(p, dtype=float))
    # -log(1) is -0.0; keep costs non-negative in sign as well as value
    out = out + 0.0
    return float(out) if out.ndim == 0 else out


def to_prob(c):
    """exp(-c), the inverse of :func:`to_cost`."""
    out = np.exp(-np.asarray(c, dtype=float))
    return float(out) if out.ndim == 0 else out


class Alphabet:
    """Ordered set of observation symbols.

    Symbols are usually single characters, but the linguistic decoder uses
    whole vocabulary entries as its observables, so any non-empty string
    is accepted.
    """

    def __init__(self, symbols: Iterable[Hashable]):
        symbols = tuple(symbols)
        if not symbols:
            raise ConfigError("alphabet must not be empty")
        index = {}
        for i, s in enumerate(symbols):
            if s in index:
                raise ConfigError(f"duplicate alphabet symbol {s!r}")
            index[s] = i
        self.symbols = symbols
        self._index = index

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __contains__(self, symbol):
        return symbol in self._index

    def __eq__(self, other):
        return isinstance(other, Alphabet) and self.symbols == other.symbols

    def __hash__(self):
        return hash(self.symbols)

    def __repr__(self):
        return f"Alphabet({''.join(map(str, self.symbols))!r})" if all(
            isinstance(s, str) and len(s) == 1 for s in self.symbols
        ) else f"Alphabet({list(self.symbols)!r})"

    def index(self, symbol) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise UnknownSymbolError(symbol) from None

    def encode(self, sequence: Iterable[Hashable]) -> np.ndarray:
        """Map symbols to integer indices, rejecting unknown symbols."""
        out = []
        for pos, s in enumerate(sequence):
            i = self._index.get(s)
            if i is None:
                raise UnknownSymbolError(s, pos)
            out.append(i)
        return np.asarray(out, dtype=np.intp)


def _frozen(a, shape, name):
    arr = np.array(a, dtype=float)
    if arr.shape != shape:
        raise DataError(f"{name} has shape {arr.shape}, expected {shape}")
    if np.isnan(arr).any():
        raise DataError(f"{name} contains NaN")
    if (arr < 0).any():
        raise DataError(f"{name} contains negative costs")
    arr = arr + 0.0  # fold -0.0 into 0.0
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Hmm:
    """A discrete HMM with non-emitting entry and exit states.

    Row-stochasticity is checked on construction when ``normalized`` is set:
    the entry row sums to one, each emitting row of transitions sums to one
    together with its exit probability, and each emission row sums to one.
    """

    alphabet: Alphabet
    entry_costs: np.ndarray
    transition_costs: np.ndarray
    exit_costs: np.ndarray
    emission_costs: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        n = len(np.asarray(self.entry_costs))
        if n < 1:
            raise DataError("an HMM needs at least one emitting state")
        k = len(self.alphabet)
        object.__setattr__(self, "entry_costs", _frozen(self.entry_costs, (n,), "entry_costs"))
        object.__setattr__(
            self, "transition_costs", _frozen(self.transition_costs, (n, n), "transition_costs")
        )
        object.__setattr__(self, "exit_costs", _frozen(self.exit_costs, (n,), "exit_costs"))
        object.__setattr__(
            self, "emission_costs", _frozen(self.emission_costs, (n, k), "emission_costs")
        )
        if self.normalized:
            bad = self.normalization_errors()
            if bad:
                raise DataError("HMM flagged normalized but " + "; ".join(bad))

    @classmethod
    def from_probabilities(cls, alphabet, entry, transitions, exit, emissions, normalized=True):
        if not isinstance(alphabet, Alphabet):
            alphabet = Alphabet(alphabet)
        return cls(
            alphabet,
            to_cost(entry),
            to_cost(transitions),
            to_cost(exit),
            to_cost(emissions),
            normalized=normalized,
        )

    @property
    def emitting_state_count(self) -> int:
        return len(self.entry_costs)

    def __len__(self):
        return self.emitting_state_count

    def normalization_errors(self, tol: float = NORM_TOL) -> list[str]:
        """Describe every distribution whose mass is not 1 within ``tol``."""
        errors = []
        s = to_prob(self.entry_costs).sum()
        if abs(s - 1.0) > tol:
            errors.append(f"entry row sums to {s!r}")
        rows = to_prob(self.transition_costs).sum(axis=1) + to_prob(self.exit_costs)
        for i in np.flatnonzero(np.abs(rows - 1.0) > tol):
            errors.append(f"transition row {i} (with exit) sums to {rows[i]!r}")
        em = to_prob(self.emission_costs).sum(axis=1)
        for j in np.flatnonzero(np.abs(em - 1.0) > tol):
            errors.append(f"emission row {j} sums to {em[j]!r}")
        return errors

    def replace(self, **changes) -> "Hmm":
        fields = dict(
            alphabet=self.alphabet,
            entry_costs=self.entry_costs,
            transition_costs=self.transition_costs,
            exit_costs=self.exit_costs,
            emission_costs=self.emission_costs,
            normalized=self.normalized,
        )
        fields.update(changes)
        return Hmm(**fields)

    def same_parameters(self, other: "Hmm") -> bool:
        return (
            self.alphabet == other.alphabet
            and self.normalized == other.normalized
            and np.array_equal(self.entry_costs, other.entry_costs)
            and np.array_equal(self.transition_costs, other.transition_costs)
            and np.array_equal(self.exit_costs, other.exit_costs)
            and np.array_equal(self.emission_costs, other.emission_costs)
        )


class CountTable(Counter):
    """Event counts with a running total (``N`` in the estimators)."""

    @property
    def total_count(self) -> int:
        return sum(self.values())

    def count(self, event) -> int:
        return self.get(event, 0)


# ---------------------------------------------------------------------------
# Decoding


def _encode(hmm: Hmm, sequence) -> np.ndarray:
    obs = hmm.alphabet.encode(sequence)
    if len(obs) == 0:
        raise DataError("sequence must contain at least one symbol")
    return obs


def viterbi(hmm: Hmm, sequence) -> tuple[float, list[int]]:
    """Minimum-cost entry-to-exit alignment of ``sequence``.

    The cost is accumulated left to right in the order the token passer uses
    (``cost + a_ij + b_j(c_t)``), so the two agree bit for bit.  Among
    optimal paths the lexicographically smallest state sequence is returned;
    it is recovered greedily from backward costs-to-go.  An impossible
    sequence gives ``(inf, [])``.
    """
    obs = _encode(hmm, sequence)
    A, B = hmm.transition_costs, hmm.emission_costs
    delta = (0.0 + hmm.entry_costs) + B[:, obs[0]]
    for c in obs[1:]:
        delta = (delta[:, None] + A).min(axis=0) + B[:, c]
    cost = float((delta + hmm.exit_costs).min())
    if cost == INF:
        return INF, []

    T = len(obs)
    togo = np.empty((T, len(hmm)))
    togo[T - 1] = hmm.exit_costs
    for t in range(T - 2, -1, -1):
        togo[t] = ((A + B[:, obs[t + 1]][None, :]) + togo[t + 1][None, :]).min(axis=1)
    first = (hmm.entry_costs + B[:, obs[0]]) + togo[0]
    state = int(np.flatnonzero(first == first.min())[0])
    path = [state]
    for t in range(1, T):
        step = (A[state] + B[:, obs[t]]) + togo[t]
        state = int(np.flatnonzero(step == togo[t - 1][state])[0])
        path.append(state)
    return cost, path


def path_cost(hmm: Hmm, sequence, path: Sequence[int]) -> float:
    """Cost of one explicit state path, summed left to right."""
    obs = _encode(hmm, sequence)
    if len(path) != len(obs):
        raise DataError("path and sequence lengths differ")
    cost = 0.0 + hmm.entry_costs[path[0]] + hmm.emission_costs[path[0], obs[0]]
    for t in range(1, len(obs)):
        cost = cost + hmm.transition_costs[path[t - 1], path[t]] + hmm.emission_costs[path[t], obs[t]]
    return float(cost + hmm.exit_costs[path[-1]])


def _lse(a, axis):
    with np.errstate(divide="ignore", invalid="ignore"):
        return logsumexp(a, axis=axis)


def forward_log_likelihood(hmm: Hmm, sequence) -> float:
    """Natural-log probability of ``sequence`` summed over all paths."""
    obs = _encode(hmm, sequence)
    logA = -hmm.transition_costs
    logB = -hmm.emission_costs
    alpha = -hmm.entry_costs + logB[:, obs[0]]
    for c in obs[1:]:
        alpha = _lse(alpha[:, None] + logA, axis=0) + logB[:, c]
    return float(_lse(alpha - hmm.exit_costs, axis=0))


# ---------------------------------------------------------------------------
# Training


@dataclass
class BaumWelchTrace:
    """Per-iteration bookkeeping from :func:`baum_welch_trace`.

    ``log_likelihoods[i]`` is the weighted training log-likelihood under the
    model entering iteration ``i``; the last entry scores the returned model.
    """

    log_likelihoods: list[float] = field(default_factory=list)
    skipped: list[list[int]] = field(default_factory=list)


def _group_sequences(hmm, sequences):
    """Collapse duplicates into weights and bucket by length."""
    order: dict[tuple, int] = {}
    first_index: dict[tuple, int] = {}
    for i, seq in enumerate(sequences):
        key = tuple(seq)
        if key not in order:
            order[key] = 0
            first_index[key] = i
        order[key] += 1
    groups: dict[int, list] = {}
    for key, weight in order.items():
        obs = _encode(hmm, key)
        groups.setdefault(len(obs), []).append((obs, weight, first_index[key]))
    out = []
    for length in sorted(groups):
        items = groups[length]
        out.append(
            (
                np.stack([o for o, _, _ in items]),
                np.array([w for _, w, _ in items], dtype=float),
                [i for _, _, i in items],
            )
        )
    return out


def _expectations(hmm, groups):
    n, k = hmm.emission_costs.shape
    logA = -hmm.transition_costs
    logpi = -hmm.entry_costs
    loge = -hmm.exit_costs
    emitT = -hmm.emission_costs.T  # (K, N)

    init = np.zeros(n)
    trans = np.zeros((n, n))
    exit_ = np.zeros(n)
    emit = np.zeros((k, n))
    total = 0.0
    skipped = []

    for obs, weight, idx in groups:
        T = obs.shape[1]
        logB = emitT[obs]  # (B, T, N)
        alpha = np.empty(logB.shape)
        alpha[:, 0] = logpi + logB[:, 0]
        for t in range(1, T):
            alpha[:, t] = _lse(alpha[:, t - 1, :, None] + logA, axis=1) + logB[:, t]
        ll = _lse(alpha[:, T - 1] + loge, axis=1)

        ok = np.isfinite(ll)
        skipped.extend(i for i, good in zip(idx, ok) if not good)
        if not ok.any():
            continue
        obs, weight, logB, alpha, ll = obs[ok], weight[ok], logB[ok], alpha[ok], ll[ok]

        beta = np.empty(logB.shape)
        beta[:, T - 1] = loge
        for t in range(T - 2, -1, -1):
            beta[:, t] = _lse(logA + (logB[:, t + 1] + beta[:, t + 1])[:, None, :], axis=2)

        total += float(weight @ ll)
        gamma = np.exp(alpha + beta - ll[:, None, None]) * weight[:, None, None]
        init += gamma[:, 0].sum(axis=0)
        exit_ += gamma[:, T - 1].sum(axis=0)
        for t in range(T):
            np.add.at(emit, obs[:, t], gamma[:, t])
        if T > 1:
            xi = (
                alpha[:, :-1, :, None]
                + logA
                + (logB[:, 1:] + beta[:, 1:])[:, :, None, :]
                - ll[:, None, None, None]
            )
            trans += (np.exp(xi) * weight[:, None, None, None]).sum(axis=(0, 1))
    return total, skipped, init, trans, exit_, emit.T


def _normalize_rows(counts, fallback):
    sums = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = counts / sums
    dead = sums[:, 0] <= 0
    return np.where(dead[:, None], fallback, to_cost(probs))


def baum_welch_trace(hmm: Hmm, training_sequences, iterations: int) -> tuple[Hmm, BaumWelchTrace]:
    """Baum-Welch reestimation with the exit state treated as one more column.

    The expected number of times state ``i`` is occupied at a sequence's
    final step is its exit count; it is normalized together with the
    outgoing transition counts of ``i``.  States that are never visited keep
    their previous parameters.  Sequences impossible under the current model
    are skipped for that iteration (and logged).
    """
    if iterations < 0:
        raise ConfigError("iterations must be non-negative")
    if not hmm.normalized:
        raise ConfigError("baum_welch requires a normalized HMM")
    sequences = list(training_sequences)
    if not sequences:
        raise TrainingError("no training sequences")
    groups = _group_sequences(hmm, sequences)
    trace = BaumWelchTrace()

    for _ in range(iterations):
        total, skipped, init, trans, exit_, emit = _expectations(hmm, groups)
        if len(skipped) == len(sequences) or init.sum() <= 0:
            raise TrainingError("every training sequence has zero likelihood")
        if skipped:
            log.warning("baum_welch: skipped %d impossible sequence(s)", len(skipped))
        trace.log_likelihoods.append(total)
        trace.skipped.append(skipped)

        entry = to_cost(init / init.sum())
        rows = np.concatenate([trans, exit_[:, None]], axis=1)
        old_rows = np.concatenate([hmm.transition_costs, hmm.exit_costs[:, None]], axis=1)
        rows = _normalize_rows(rows, old_rows)
        emission = _normalize_rows(emit, hmm.emission_costs)
        hmm = hmm.replace(
            entry_costs=entry,
            transition_costs=rows[:, :-1],
            exit_costs=rows[:, -1],
            emission_costs=emission,
        )

    total, skipped, *_ = _expectations(hmm, groups)
    if len(skipped) == len(sequences):
        raise TrainingError("every training sequence has zero likelihood")
    trace.log_likelihoods.append(total)
    trace.skipped.append(skipped)
    return hmm, trace


def baum_welch(hmm: Hmm, training_sequences, iterations: int) -> Hmm:
    if iterations == 0:
        return hmm
    return baum_welch_trace(hmm, training_sequences, iterations)[0]


# ---------------------------------------------------------------------------
# Smoothing


def smooth_additive(distribution, delta: float):
    """Additive smoothing: ``(w(e) + delta) / (W + delta * |E|)``.

    ``distribution`` is either a mapping from events to non-negative weights
    (counts or probabilities) or a 1-d array of weights; the result has the
    same form.
    """
    if not delta > 0:
        raise ConfigError(f"smoothing delta must be positive, got {delta!r}")
    if isinstance(distribution, Mapping):
        if not distribution:
            raise ConfigError("cannot smooth an empty event set")
        weights = np.array([float(w) for w in distribution.values()])
        smoothed = smooth_additive(weights, delta)
        return dict(zip(distribution.keys(), smoothed.tolist()))
    weights = np.asarray(distribution, dtype=float)
    if weights.ndim != 1 or weights.size == 0:
        raise ConfigError("cannot smooth an empty event set")
    if (weights < 0).any() or np.isnan(weights).any():
        raise ConfigError("smoothing weights must be non-negative")
    return (weights + delta) / (weights.sum() + delta * weights.size)


def smooth_emissions(hmm: Hmm, delta: float) -> Hmm:
    """Additively smooth every emission row (transitions untouched)."""
    probs = to_prob(hmm.emission_costs)
    smoothed = np.stack([smooth_additive(row, delta) for row in probs])
    return hmm.replace(emission_costs=to_cost(smoothed))


# ---------------------------------------------------------------------------
# Text serialization


def _escape(symbol: str) -> str:
    if not isinstance(symbol, str) or not symbol:
        raise DataError(f"cannot serialize symbol {symbol!r}")
    if "\n" in symbol:
        raise DataError("alphabet symbols may not contain newlines")
    return symbol.replace("\\", "\\\\").replace(" ", "\\s")


def _unescape(token: str) -> str:
    out = []
    it = iter(token)
    for ch in it:
        if ch != "\\":
            out.append(ch)
            continue
        nxt = next(it, None)
        if nxt == "s":
            out.append(" ")
        elif nxt == "\\":
            out.append("\\")
        else:
            raise DataError(f"bad escape in alphabet token {token!r}")
    return "".join(out)


def _fmt(x: float) -> str:
    return "inf" if x == INF else format(x, ".17g")


def _row(values) -> str:
    return " ".join(_fmt(float(v)) for v in values)


def dumps(hmm: Hmm) -> str:
    n, k = hmm.emission_costs.shape
    lines = [
        f"hmm {n} {k} {int(hmm.normalized)}",
        " ".join(_escape(s) for s in hmm.alphabet),
        _row(hmm.entry_costs),
        *(_row(r) for r in hmm.transition_costs),
        _row(hmm.exit_costs),
        *(_row(r) for r in hmm.emission_costs),
    ]
    return "\n".join(lines) + "\n"


def loads(text: str) -> Hmm:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    try:
        tag, n, k, flag = lines[0].split(" ")
        n, k = int(n), int(k)
    except (IndexError, ValueError):
        raise DataError("malformed hmm header") from None
    if tag != "hmm" or flag not in ("0", "1"):
        raise DataError("malformed hmm header")
    if len(lines) != 2 + 1 + n + 1 + n:
        raise DataError(f"expected {4 + 2 * n} lines for {n} states, got {len(lines)}")
    symbols = [_unescape(t) for t in lines[1].split(" ")]
    if len(symbols) != k:
        raise DataError(f"header declares {k} symbols, found {len(symbols)}")

    def parse(line):
        return [float(v) for v in line.split(" ")]

    entry = parse(lines[2])
    trans = [parse(l) for l in lines[3 : 3 + n]]
    exit_ = parse(lines[3 + n])
    emit = [parse(l) for l in lines[4 + n : 4 + 2 * n]]
    return Hmm(Alphabet(symbols), entry, trans, exit_, emit, normalized=flag == "1")


def save_hmm(hmm: Hmm, path) -> None:
    Path(path).write_text(dumps(hmm), encoding="utf-8")


def load_hmm(path) -> Hmm:
    return loads(Path(path).read_text(encoding="utf-8"))
