"""Symbolic base dynamics.

Shift spaces on a finite alphabet (full shifts and subshifts of finite
type), enumeration of admissible words and of primitive necklaces (=
periodic orbits), Sturmian/Christoffel words, and the angle coordinates of
periodic binary words under the doubling map.

Words are plain tuples of symbols.  A necklace is the canonical
(lexicographically minimal) rotation of a primitive word and stands for a
periodic orbit together with its uniform empirical measure.  Doubling-map
angles are kept as exact rationals with denominator 2^q - 1 so that orbit
identity checks do not depend on rounding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

import numpy as np

from .budget import check_budget

Word = tuple  # tuple of int symbols


class AdmissibilityError(ValueError):
    """A word violates the transition constraints of the system."""


@dataclass(frozen=True, eq=False)
class SymbolicSystem:
    """A full shift or subshift of finite type on symbols 0..k-1.

    `transitions[i, j]` says whether symbol j may follow symbol i.  Every
    symbol must keep at least one outgoing and one incoming transition (no
    dead states).  `metric_theta` is the base of the usual word metric and
    is only used for Lipschitz error bookkeeping.
    """

    alphabet_size: int
    transitions: np.ndarray
    metric_theta: float | None = None

    def __post_init__(self):
        k = self.alphabet_size
        if k < 1:
            raise ValueError("alphabet_size must be >= 1")
        trans = np.asarray(self.transitions, dtype=bool)
        if trans.shape != (k, k):
            raise ValueError(f"transitions must be {k}x{k}")
        if not trans.any(axis=1).all():
            raise ValueError("dead state: a symbol has no outgoing transition")
        if not trans.any(axis=0).all():
            raise ValueError("dead state: a symbol has no incoming transition")
        if self.metric_theta is not None and not 0.0 < self.metric_theta < 1.0:
            raise ValueError("metric_theta must lie in (0, 1)")
        trans.setflags(write=False)
        object.__setattr__(self, "transitions", trans)

    # -- constructors ------------------------------------------------------

    @classmethod
    def full_shift(cls, k: int, metric_theta: float | None = None) -> "SymbolicSystem":
        return cls(k, np.ones((k, k), dtype=bool), metric_theta)

    @classmethod
    def from_forbidden(cls, k: int, forbidden: Iterable[Sequence[int]],
                       metric_theta: float | None = None) -> "SymbolicSystem":
        trans = np.ones((k, k), dtype=bool)
        for i, j in forbidden:
            trans[i, j] = False
        return cls(k, trans, metric_theta)

    @classmethod
    def from_json(cls, source) -> "SymbolicSystem":
        """Load from {"alphabet": k, "forbidden": [[i, j], ...]}.

        `source` may be a dict, a JSON string, or a path to a JSON file.
        """
        if isinstance(source, dict):
            doc = source
        else:
            text = str(source)
            if text.lstrip().startswith("{"):
                doc = json.loads(text)
            else:
                with open(text, "r", encoding="utf-8") as fh:
                    doc = json.load(fh)
        return cls.from_forbidden(int(doc["alphabet"]), doc.get("forbidden", ()))

    # -- predicates --------------------------------------------------------

    @property
    def is_full_shift(self) -> bool:
        return bool(self.transitions.all())

    def allowed(self, i: int, j: int) -> bool:
        return bool(self.transitions[i, j])

    def is_admissible(self, word: Sequence[int]) -> bool:
        k = self.alphabet_size
        for s in word:
            if not 0 <= s < k:
                return False
        return all(self.transitions[word[i], word[i + 1]]
                   for i in range(len(word) - 1))

    def require_admissible(self, word: Sequence[int]) -> None:
        if not self.is_admissible(word):
            raise AdmissibilityError(f"word {word!r} is not admissible")

    def __eq__(self, other):
        return (isinstance(other, SymbolicSystem)
                and self.alphabet_size == other.alphabet_size
                and np.array_equal(self.transitions, other.transitions))


def count_words(system: SymbolicSystem, n: int) -> int:
    """Exact number of admissible words of length n (python ints, no overflow)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return 1
    k = system.alphabet_size
    m = [[int(x) for x in row] for row in system.transitions]
    vec = [1] * k
    for _ in range(n - 1):
        vec = [sum(m[i][j] * vec[j] for j in range(k)) for i in range(k)]
    return sum(vec)


def words_of_length(system: SymbolicSystem, n: int) -> Iterator[Word]:
    """Yield every admissible word of length n exactly once, lexicographically."""
    if n < 0:
        raise ValueError("n must be >= 0")
    check_budget(count_words(system, n), f"words of length {n}")
    if n == 0:
        yield ()
        return
    k = system.alphabet_size
    succ = [tuple(int(j) for j in np.flatnonzero(system.transitions[i]))
            for i in range(k)]
    stack: list[int] = []

    def rec():
        if len(stack) == n:
            yield tuple(stack)
            return
        options = range(k) if not stack else succ[stack[-1]]
        for s in options:
            stack.append(s)
            yield from rec()
            stack.pop()

    yield from rec()


def word_matrix(system: SymbolicSystem, n: int) -> np.ndarray:
    """All admissible words of length n as an int8 array (count, n), lex order."""
    if n < 0:
        raise ValueError("n must be >= 0")
    count = check_budget(count_words(system, n), f"words of length {n}")
    k = system.alphabet_size
    if n == 0:
        return np.zeros((1, 0), dtype=np.int8)
    if system.is_full_shift:
        idx = np.arange(count, dtype=np.int64)
        cols = [(idx // k ** (n - 1 - i)) % k for i in range(n)]
        return np.stack(cols, axis=1).astype(np.int8)
    arr = np.arange(k, dtype=np.int8).reshape(k, 1)
    trans = system.transitions
    letters = np.arange(k, dtype=np.int8)
    for _ in range(n - 1):
        mask = trans[arr[:, -1].astype(np.intp)]           # (rows, k)
        parent = np.repeat(np.arange(arr.shape[0]), mask.sum(axis=1))
        child = np.broadcast_to(letters, mask.shape)[mask]  # row-major: lex
        arr = np.column_stack([arr[parent], child])
    return arr


class WordIndexer:
    """Lexicographic ranking of admissible words of a fixed length.

    Ranks agree with the enumeration order of `words_of_length` /
    `word_matrix`, so arrays indexed by rank line up with those
    enumerations.
    """

    def __init__(self, system: SymbolicSystem, length: int):
        self.system = system
        self.length = length
        self.count = count_words(system, length)
        k = system.alphabet_size
        trans = system.transitions.astype(np.int64)
        # suffix_counts[m][c] = admissible words of length m+1 starting at c
        counts = [np.ones(k, dtype=np.int64)]
        for _ in range(length - 1):
            counts.append(trans @ counts[-1])
        # step_rank[i][p, s]: words skipped by choosing symbol s at position
        # i after previous symbol p (row k means "no previous symbol").
        self._step = []
        for i in range(length):
            rem = counts[length - 1 - i]
            allowed = np.vstack([trans, np.ones(k, dtype=np.int64)])
            skipped = np.cumsum(allowed * rem, axis=1)
            step = np.zeros((k + 1, k), dtype=np.int64)
            step[:, 1:] = skipped[:, :-1]
            self._step.append(step)

    def rank(self, word: Sequence[int]) -> int:
        return int(self.rank_batch(np.asarray([word], dtype=np.int8))[0])

    def rank_batch(self, words: np.ndarray) -> np.ndarray:
        """Ranks of many words at once; `words` has shape (n, length)."""
        words = np.asarray(words)
        if words.shape[1] != self.length:
            raise ValueError("word length mismatch")
        n = words.shape[0]
        k = self.system.alphabet_size
        ranks = np.zeros(n, dtype=np.int64)
        prev = np.full(n, k, dtype=np.intp)
        for i in range(self.length):
            sym = words[:, i].astype(np.intp)
            ranks += self._step[i][prev, sym]
            prev = sym
        return ranks


# -- necklaces -------------------------------------------------------------


def _rotations(word: Word) -> list[Word]:
    return [word[i:] + word[:i] for i in range(len(word))]


def _is_primitive(word: Word) -> bool:
    q = len(word)
    for p in range(1, q):
        if q % p == 0 and word == word[p:] + word[:p]:
            return False
    return True


@dataclass(frozen=True, order=True)
class Necklace:
    """A primitive word in canonical (lexicographically minimal) rotation.

    Encodes the periodic orbit of the shift through the point
    (word repeated forever) and the uniform measure on that orbit.
    """

    symbols: Word

    def __post_init__(self):
        w = tuple(int(s) for s in self.symbols)
        if len(w) < 1:
            raise ValueError("necklace must have period >= 1")
        if any(s < 0 for s in w):
            raise ValueError("symbols must be nonnegative")
        if not _is_primitive(w):
            raise ValueError(f"word {w!r} is a power of a shorter word")
        if w != min(_rotations(w)):
            raise ValueError(f"word {w!r} is not the minimal rotation")
        object.__setattr__(self, "symbols", w)

    @classmethod
    def from_word(cls, word: Sequence[int]) -> "Necklace":
        """Canonicalize an arbitrary primitive word (rotates to minimal form)."""
        w = tuple(int(s) for s in word)
        if not w:
            raise ValueError("necklace must have period >= 1")
        if not _is_primitive(w):
            raise ValueError(f"word {w!r} is a power of a shorter word")
        return cls(min(_rotations(w)))

    @property
    def period(self) -> int:
        return len(self.symbols)

    def rotations(self) -> list[Word]:
        return _rotations(self.symbols)

    def repeat(self, length: int) -> Word:
        """The first `length` symbols of the periodic extension."""
        q = self.period
        reps = -(-length // q)
        return (self.symbols * reps)[:length]

    def is_cyclically_admissible(self, system: SymbolicSystem) -> bool:
        w = self.symbols
        return (system.is_admissible(w)
                and system.allowed(w[-1], w[0]))

    def __str__(self) -> str:
        if max(self.symbols) <= 9:
            return "".join(str(s) for s in self.symbols)
        return ",".join(str(s) for s in self.symbols)


def enumerate_necklaces(system: SymbolicSystem, max_period: int) -> list[Necklace]:
    """All primitive cyclically admissible necklaces of period <= max_period.

    Each necklace appears once, ordered by (period, symbols).  Brute force
    over admissible words with a primitivity/minimal-rotation filter; the
    total word count is budget-checked first.
    """
    if max_period < 1:
        raise ValueError("max_period must be >= 1")
    total = sum(count_words(system, q) for q in range(1, max_period + 1))
    check_budget(total, f"necklace enumeration to period {max_period}")
    out: list[Necklace] = []
    for q in range(1, max_period + 1):
        for w in words_of_length(system, q):
            if not system.allowed(w[-1], w[0]):
                continue
            if not _is_primitive(w):
                continue
            if w != min(_rotations(w)):
                continue
            out.append(Necklace(w))
    return out


def sturmian_word(p: int, q: int) -> Necklace:
    """Christoffel (mechanical) word of rotation number p/q.

    Symbols s_j = floor((j+1)p/q) - floor(jp/q) for j = 0..q-1, normalized
    to necklace form.  Requires gcd(p, q) = 1 and 0 <= p <= q.
    """
    if q < 1 or not 0 <= p <= q:
        raise ValueError("need 0 <= p <= q and q >= 1")
    if math.gcd(p, q) != 1:
        raise ValueError(f"rotation number {p}/{q} is not in lowest terms")
    word = tuple((j + 1) * p // q - j * p // q for j in range(q))
    return Necklace.from_word(word)


def is_sturmian(w: Necklace) -> bool:
    """Whether the necklace is the Christoffel word of its own digit frequency."""
    p, q = sum(w.symbols), w.period
    if math.gcd(p, q) != 1:
        return False
    return sturmian_word(p, q) == w


# -- doubling-map angles ---------------------------------------------------


@dataclass(frozen=True, order=True)
class CirclePoint:
    """A point e^(2*pi*i*t) on the circle, 0 <= t < 1, held as an exact rational."""

    t: Fraction = field(default=Fraction(0))

    def __post_init__(self):
        t = self.t if isinstance(self.t, Fraction) else Fraction(self.t)
        if not 0 <= t < 1:
            raise ValueError(f"angle {t} outside [0, 1)")
        object.__setattr__(self, "t", t)

    @property
    def double(self) -> float:
        return float(self.t)

    def doubled(self) -> "CirclePoint":
        return CirclePoint((2 * self.t) % 1)


def random_admissible_words(system: SymbolicSystem, length: int, count: int,
                            rng: np.random.Generator) -> np.ndarray:
    """Seeded random admissible words as an int8 array (count, length).

    First symbols are uniform; each next symbol is uniform over the allowed
    successors of the previous one.
    """
    if length < 1 or count < 1:
        raise ValueError("length and count must be >= 1")
    k = system.alphabet_size
    succ = [np.flatnonzero(system.transitions[i]) for i in range(k)]
    out = np.empty((count, length), dtype=np.int8)
    out[:, 0] = rng.integers(0, k, size=count)
    for i in range(1, length):
        for s in range(k):
            rows = np.flatnonzero(out[:, i - 1] == s)
            if rows.size:
                out[rows, i] = succ[s][rng.integers(0, len(succ[s]), size=rows.size)]
    return out


def orbit_angles(w: Necklace) -> list[CirclePoint]:
    """Doubling-map orbit of a binary necklace.

    The j-th point is the angle with binary expansion given by the j-th
    rotation of the word repeated forever: (integer value of the rotation)
    divided by 2^q - 1, reduced mod 1.  The resulting set is invariant
    under doubling.
    """
    if max(w.symbols) > 1:
        raise ValueError("orbit angles require a binary alphabet")
    q = w.period
    den = 2 ** q - 1
    out = []
    for rot in w.rotations():
        num = int("".join(str(s) for s in rot), 2) if q > 1 else rot[0]
        out.append(CirclePoint(Fraction(num, den) % 1))
    return out
