"""Independent reference computations used only by the tests.

Everything here works in the probability domain with plain loops or
exhaustive enumeration, so it shares no code path with the library.
"""

import itertools
import math

import numpy as np

from ctrtok.hmm import Alphabet, Hmm


def probs(hmm):
    p = lambda c: np.exp(-np.asarray(c, dtype=float))  # noqa: E731
    return (
        p(hmm.entry_costs),
        p(hmm.transition_costs),
        p(hmm.exit_costs),
        p(hmm.emission_costs),
    )


def path_probability(hmm, seq, path):
    pi, A, e, B = probs(hmm)
    idx = [hmm.alphabet.index(c) for c in seq]
    pr = pi[path[0]] * B[path[0], idx[0]]
    for t in range(1, len(seq)):
        pr *= A[path[t - 1], path[t]] * B[path[t], idx[t]]
    return pr * e[path[-1]]


def path_cost_sum(hmm, seq, path):
    """Cost of a path as a plain sum of its cost terms."""
    idx = [hmm.alphabet.index(c) for c in seq]
    terms = [hmm.entry_costs[path[0]], hmm.emission_costs[path[0], idx[0]]]
    for t in range(1, len(seq)):
        terms += [hmm.transition_costs[path[t - 1], path[t]], hmm.emission_costs[path[t], idx[t]]]
    terms.append(hmm.exit_costs[path[-1]])
    return math.fsum(terms)


def brute_force_viterbi(hmm, seq):
    """(min cost, lexicographically smallest optimal path) by enumeration."""
    paths = list(itertools.product(range(len(hmm)), repeat=len(seq)))
    costs = [path_cost_sum(hmm, seq, p) for p in paths]
    best = min(costs)
    if best == math.inf:
        return math.inf, []
    slack = 1e-12 * (1.0 + best)
    return best, list(next(p for p, c in zip(paths, costs) if c <= best + slack))


def brute_force_likelihood(hmm, seq):
    n = len(hmm)
    total = sum(path_probability(hmm, seq, p) for p in itertools.product(range(n), repeat=len(seq)))
    return math.log(total) if total > 0 else -math.inf


def random_hmm(rng, n_states, alphabet, density=0.7, normalized=True):
    """Random normalized HMM with some forbidden transitions and emissions."""
    k = len(alphabet)

    def row(size):
        mask = rng.random(size) < density
        if not mask.any():
            mask[rng.integers(size)] = True
        w = rng.random(size) * mask
        return w / w.sum()

    entry = row(n_states)
    full = np.stack([row(n_states + 1) for _ in range(n_states)])
    emit = np.stack([row(k) for _ in range(n_states)])
    return Hmm.from_probabilities(
        Alphabet(alphabet), entry, full[:, :-1], full[:, -1], emit, normalized=normalized
    )


def naive_baum_welch_step(hmm, seqs):
    """One textbook forward-backward reestimation in the probability domain.

    Returns (new probability tables, total log-likelihood of ``seqs`` under
    the incoming model).  Exit probability is one extra transition column.
    """
    pi, A, e, B = probs(hmm)
    n, k = B.shape
    init = np.zeros(n)
    trans = np.zeros((n, n))
    ex = np.zeros(n)
    em = np.zeros((n, k))
    total = 0.0
    for seq in seqs:
        o = [hmm.alphabet.index(c) for c in seq]
        T = len(o)
        alpha = np.zeros((T, n))
        for j in range(n):
            alpha[0, j] = pi[j] * B[j, o[0]]
        for t in range(1, T):
            for j in range(n):
                alpha[t, j] = sum(alpha[t - 1, i] * A[i, j] for i in range(n)) * B[j, o[t]]
        P = sum(alpha[T - 1, i] * e[i] for i in range(n))
        if P == 0:
            continue
        total += math.log(P)
        beta = np.zeros((T, n))
        beta[T - 1] = e
        for t in range(T - 2, -1, -1):
            for i in range(n):
                beta[t, i] = sum(A[i, j] * B[j, o[t + 1]] * beta[t + 1, j] for j in range(n))
        for t in range(T):
            for i in range(n):
                g = alpha[t, i] * beta[t, i] / P
                em[i, o[t]] += g
                if t == 0:
                    init[i] += g
                if t == T - 1:
                    ex[i] += g
                else:
                    for j in range(n):
                        trans[i, j] += alpha[t, i] * A[i, j] * B[j, o[t + 1]] * beta[t + 1, j] / P
    new_pi = init / init.sum()
    new_A, new_e, new_B = A.copy(), e.copy(), B.copy()
    for i in range(n):
        s = trans[i].sum() + ex[i]
        if s > 0:
            new_A[i] = trans[i] / s
            new_e[i] = ex[i] / s
        if em[i].sum() > 0:
            new_B[i] = em[i] / em[i].sum()
    return (new_pi, new_A, new_e, new_B), total


def chain_hmm(word, alphabet=None):
    """Deterministic left-to-right chain spelling ``word`` with probability 1."""
    alphabet = Alphabet(alphabet or sorted(set(word)))
    L = len(word)
    entry = np.zeros(L)
    entry[0] = 1.0
    trans = np.zeros((L, L))
    exit_ = np.zeros(L)
    for i in range(L - 1):
        trans[i, i + 1] = 1.0
    exit_[L - 1] = 1.0
    emit = np.zeros((L, len(alphabet)))
    for i, ch in enumerate(word):
        emit[i, alphabet.index(ch)] = 1.0
    return Hmm.from_probabilities(alphabet, entry, trans, exit_, emit)


def two_state_hmm():
    """The two-state example model over {a, b}."""
    return Hmm.from_probabilities(
        Alphabet("ab"),
        [1.0, 0.0],
        [[0.5, 0.5], [0.0, 0.5]],
        [0.0, 0.5],
        [[0.9, 0.1], [0.2, 0.8]],
    )


def composed_hmm(ld, od):
    """Flatten an LD over an OD into one character HMM.

    States are (LD state, word model, word-model state) triples.  Moving
    between two states either stays inside the word model or finishes the
    word (exit cost + LD transition + word emission + entry cost); when both
    are possible the cheaper one is kept and ``cross`` records the choice.
    """
    ldh = ld.hmm
    cols = [ldh.alphabet.index(e) for e in od.vocabulary]
    ldE, ldA, ldX = ldh.entry_costs, ldh.transition_costs, ldh.exit_costs
    ldB = ldh.emission_costs[:, cols]
    states = [
        (j, m, s) for j in range(len(ldh)) for m, h in enumerate(od.models) for s in range(len(h))
    ]
    Z = len(states)
    J_, M_, S_ = (np.array(v) for v in zip(*states))
    Ee = np.array([od.models[m].entry_costs[s] for _, m, s in states])
    Xx = np.array([od.models[m].exit_costs[s] for _, m, s in states])
    emit = np.stack([od.models[m].emission_costs[s] for _, m, s in states])

    entry = ldE[J_] + ldB[J_, M_] + Ee
    exit_ = Xx + ldX[J_]
    cross_cost = Xx[:, None] + ldA[J_][:, J_] + ldB[J_, M_][None, :] + Ee[None, :]
    intra = np.full((Z, Z), np.inf)
    same = (J_[:, None] == J_[None, :]) & (M_[:, None] == M_[None, :])
    for a in range(Z):
        for b in np.flatnonzero(same[a]):
            intra[a, b] = od.models[M_[a]].transition_costs[S_[a], S_[b]]
    cross = cross_cost < intra
    trans = np.minimum(cross_cost, intra)
    hmm = Hmm(od.alphabet, entry, trans, exit_, emit, normalized=False)
    return hmm, states, cross


def composed_decode(ld, od, text):
    """(cost, word entries) by plain Viterbi on the flattened model."""
    from ctrtok.hmm import viterbi

    hmm, states, cross = composed_hmm(ld, od)
    cost, path = viterbi(hmm, " " + text)
    if not path:
        return math.inf, []
    words = [states[path[0]][1]]
    for a, b in zip(path, path[1:]):
        if cross[a, b]:
            words.append(states[b][1])
    return cost, [od.vocabulary[m] for m in words]


def random_od(rng, n_words, max_len=5, alphabet=" abc", density=0.8):
    """An OdSet of random (not word-shaped) models sharing ``alphabet``."""
    from ctrtok.orthographic import OdSet, Vocabulary

    letters = alphabet.replace(" ", "")
    words = set()
    while len(words) < n_words:
        words.add("".join(rng.choice(list(letters), size=rng.integers(1, max_len + 1))))
    words = sorted(words)
    models = [random_hmm(rng, len(w) + 1, alphabet, density=density) for w in words]
    return OdSet(Vocabulary(words), models, [False] * len(words))


def random_ld(rng, kind, vocabulary, n_classes=2):
    from ctrtok.linguistic import LinguisticDecoder, baseline_ld

    if kind == "baseline":
        return baseline_ld(vocabulary)
    V = len(vocabulary)
    symbols = Alphabet(vocabulary.entries)
    if kind == "unigram":
        p = rng.random(V) + 0.05
        p /= p.sum()
        cost = -np.log(p)
        return LinguisticDecoder(
            "unigram", Hmm(symbols, [0.0], [[0.0]], [0.0], cost[None, :], normalized=False)
        )
    J = n_classes
    entry = rng.random(J) + 0.1
    rows = rng.random((J, J + 1)) + 0.1
    emit = rng.random((J, V)) * (rng.random((J, V)) < 0.8) + 1e-3
    hmm = Hmm.from_probabilities(
        symbols,
        entry / entry.sum(),
        (rows / rows.sum(1, keepdims=True))[:, :J],
        (rows / rows.sum(1, keepdims=True))[:, J],
        emit / emit.sum(1, keepdims=True),
    )
    return LinguisticDecoder("biclass", hmm, tuple(f"C{i}" for i in range(J)))
