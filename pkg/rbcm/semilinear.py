"""Linear and semilinear sets, nonnegative linear systems, and unary sets.

Vectors are tuples of nonnegative ints. Semilinear sets are unions of
``constant + N{periods}`` and are never merged beyond dropping redundant
components.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from rbcm.machines import FiniteAutomaton, ResourceLimitError, minimize


logger = logging.getLogger(__name__)

__all__ = [
    "LinearSet",
    "SemilinearSet",
    "UltimatelyPeriodicSet",
    "ResourceLimitError",
    "sls_member",
    "solve_nonneg_linear",
    "unary_to_upset",
    "upset_to_dfa",
]


def _vec(values):
    return tuple(int(v) for v in values)


def _add(x, y):
    return tuple(a + b for a, b in zip(x, y))


def _generated(x, periods):
    """Whether ``x`` is an N-combination of ``periods``"""
    periods = tuple(periods)

    @lru_cache(maxsize=None)
    def reach(i, rest):
        if not any(rest):
            return True
        if i == len(periods):
            return False
        v = periods[i]
        most = min(r // p for r, p in zip(rest, v) if p > 0)
        for t in range(most, -1, -1):
            if reach(i + 1, tuple(r - t * p for r, p in zip(rest, v))):
                return True
        return False

    if any(v < 0 for v in x):
        return False
    return reach(0, tuple(x))


def _within(c, d):
    """Whether linear set ``c`` is contained in linear set ``d``"""
    return c.constant in d and all(_generated(p, d.periods) for p in c.periods)


@dataclass(frozen=True)
class LinearSet:
    """``constant + N{periods}``; zero and duplicate periods are dropped"""

    constant: tuple
    periods: tuple = ()

    def __post_init__(self):
        constant = _vec(self.constant)
        periods = tuple(sorted({_vec(p) for p in self.periods if any(p)}))
        if any(v < 0 for v in constant) or any(v < 0 for p in periods for v in p):
            raise ValueError(f"linear sets live in N^k, got {constant} + N{periods}")
        if any(len(p) != len(constant) for p in periods):
            raise ValueError(f"period dimension differs from {len(constant)}")
        object.__setattr__(self, "constant", constant)
        object.__setattr__(self, "periods", periods)

    @property
    def dimension(self):
        return len(self.constant)

    def __contains__(self, x):
        rest = tuple(a - c for a, c in zip(x, self.constant))
        return _generated(rest, self.periods)

    def __str__(self):
        c = "(" + ", ".join(map(str, self.constant)) + ")"
        if not self.periods:
            return c
        ps = ", ".join("(" + ", ".join(map(str, p)) + ")" for p in self.periods)
        return f"{c} + N{{{ps}}}"


@dataclass(frozen=True)
class SemilinearSet:
    """Finite union of linear sets of one dimension; no components is empty"""

    dimension: int
    components: tuple = ()

    def __post_init__(self):
        components = tuple(self.components)
        for c in components:
            if c.dimension != self.dimension:
                raise ValueError(
                    f"component {c} has dimension {c.dimension}, expected {self.dimension}"
                )
        object.__setattr__(self, "components", components)

    @classmethod
    def empty(cls, dimension):
        return cls(dimension, ())

    @classmethod
    def point(cls, x):
        return cls(len(x), (LinearSet(x),))

    @classmethod
    def universe(cls, dimension):
        basis = [tuple(int(i == j) for j in range(dimension)) for i in range(dimension)]
        return cls(dimension, (LinearSet((0,) * dimension, basis),))

    @property
    def is_empty(self):
        return not self.components

    def __contains__(self, x):
        return sls_member(self, x)

    def __len__(self):
        return len(self.components)

    def _check(self, other):
        if other.dimension != self.dimension:
            raise ValueError(
                f"dimension mismatch: {self.dimension} vs {other.dimension}"
            )

    def union(self, other):
        self._check(other)
        return SemilinearSet(self.dimension, self.components + other.components)

    def plus(self, other):
        """Minkowski sum"""
        self._check(other)
        return SemilinearSet(
            self.dimension,
            tuple(
                LinearSet(_add(a.constant, b.constant), a.periods + b.periods)
                for a in self.components
                for b in other.components
            ),
        )

    def star(self):
        """Closure under addition, the zero vector included"""
        zero = SemilinearSet.point((0,) * self.dimension)
        acc = zero
        for c in self.components:
            loop = SemilinearSet(
                self.dimension, (LinearSet(c.constant, c.periods + (c.constant,)),)
            )
            acc = acc.union(acc.plus(loop)).simplified()
        return acc

    def project(self, indices):
        indices = list(indices)
        return SemilinearSet(
            len(indices),
            tuple(
                LinearSet(
                    [c.constant[i] for i in indices],
                    [[p[i] for i in indices] for p in c.periods],
                )
                for c in self.components
            ),
        )

    def image(self, matrix, offset=None):
        """Image under ``x -> matrix @ x + offset`` for a nonnegative matrix"""
        matrix = np.asarray(matrix, dtype=np.int64)
        if matrix.ndim != 2 or matrix.shape[1] != self.dimension:
            raise ValueError(
                f"matrix of shape {matrix.shape} cannot map dimension {self.dimension}"
            )
        if offset is None:
            offset = np.zeros(matrix.shape[0], dtype=np.int64)
        offset = np.asarray(offset, dtype=np.int64)
        comps = []
        for c in self.components:
            constant = matrix @ np.asarray(c.constant, dtype=np.int64) + offset
            periods = [matrix @ np.asarray(p, dtype=np.int64) for p in c.periods]
            comps.append(LinearSet(constant, periods))
        return SemilinearSet(matrix.shape[0], tuple(comps))

    def simplified(self):
        """Drop redundant periods and components contained in another one"""
        comps = []
        for c in dict.fromkeys(self.components):
            periods = list(c.periods)
            for p in sorted(c.periods, key=sum, reverse=True):
                others = [q for q in periods if q != p]
                if _generated(p, others):
                    periods = others
            comps.append(LinearSet(c.constant, periods))
        comps = list(dict.fromkeys(comps))
        kept = []
        for i, c in enumerate(comps):
            # equal sets keep their first occurrence
            if any(
                j != i and _within(c, d) and (j < i or not _within(d, c))
                for j, d in enumerate(comps)
            ):
                continue
            kept.append(c)
        return SemilinearSet(self.dimension, tuple(kept))

    def __str__(self):
        if not self.components:
            return "{}"
        return " | ".join(str(c) for c in self.components)


def sls_member(s, x):
    """Exact membership of ``x`` in a semilinear set.

    Coefficients are searched depth-first per period, bounded by the
    remaining gap to ``x`` since all periods are nonnegative.
    """
    x = _vec(x)
    if len(x) != s.dimension:
        raise ValueError(f"vector {x} does not have dimension {s.dimension}")
    return any(x in c for c in s.components)


@dataclass(frozen=True)
class UltimatelyPeriodicSet:
    """Unary set: ``explicit`` below ``threshold``, then ``n % period in residues``"""

    threshold: int
    period: int
    explicit: frozenset
    residues: frozenset

    def __post_init__(self):
        object.__setattr__(self, "explicit", frozenset(self.explicit))
        object.__setattr__(self, "residues", frozenset(self.residues))
        if self.period < 1:
            raise ValueError(f"period must be positive, got {self.period}")
        if any(not 0 <= n < self.threshold for n in self.explicit):
            raise ValueError("explicit part must lie below the threshold")
        if any(not 0 <= r < self.period for r in self.residues):
            raise ValueError("residues must lie in [0, period)")

    def __contains__(self, n):
        if n < self.threshold:
            return n in self.explicit
        return n % self.period in self.residues

    @property
    def is_empty(self):
        return not self.explicit and not self.residues

    def __str__(self):
        return (
            f"{sorted(self.explicit)} below {self.threshold}, "
            f"then n mod {self.period} in {sorted(self.residues)}"
        )


def _conductor_bound(periods):
    """Beyond this offset ``N{periods}`` holds every multiple of their gcd"""
    g = math.gcd(*periods)
    lo, hi = min(periods) // g, max(periods) // g
    return g * (lo - 1) * (hi - 1)


def unary_to_upset(s):
    """Normal form of a one-dimensional semilinear set.

    The threshold covers both ``max constant + lcm`` and each component's
    conductor so the tail is periodic with the lcm of all periods; both are
    then cut down to the smallest values describing the same set.
    """
    if s.dimension != 1:
        raise ValueError(f"unary sets have dimension 1, got {s.dimension}")
    nonzero = [p[0] for c in s.components for p in c.periods]
    period = math.lcm(*nonzero) if nonzero else 1
    threshold = 0
    for c in s.components:
        base = c.constant[0]
        if c.periods:
            threshold = max(
                threshold,
                base + period,
                base + _conductor_bound([p[0] for p in c.periods]),
            )
        else:
            threshold = max(threshold, base + 1)
    explicit = {n for n in range(threshold) if sls_member(s, (n,))}
    residues = {
        n % period for n in range(threshold, threshold + period) if sls_member(s, (n,))
    }
    return _tightened(threshold, period, explicit, residues)


def _tightened(threshold, period, explicit, residues):
    """Smallest period, then smallest threshold, for the same set"""
    for d in range(1, period + 1):
        if period % d == 0 and all((r in residues) == (r % d in residues) for r in range(period)):
            residues = {r for r in residues if r < d}
            period = d
            break
    while threshold > 0 and ((threshold - 1) in explicit) == ((threshold - 1) % period in residues):
        threshold -= 1
        explicit.discard(threshold)
    return UltimatelyPeriodicSet(threshold, period, explicit, residues)


def upset_to_dfa(u, letter="a", minimal=True):
    """DFA over ``{letter}``: a tail of ``threshold`` states feeding a cycle"""
    tail = [f"n{i}" for i in range(u.threshold)]
    cycle = [f"c{j}" for j in range(u.period)]
    chain = tail + cycle
    edges = [(chain[i], letter, chain[i + 1]) for i in range(len(chain) - 1)]
    edges.append((cycle[-1], letter, cycle[0]))
    finals = {f"n{i}" for i in u.explicit}
    finals |= {
        f"c{j}" for j in range(u.period) if (u.threshold + j) % u.period in u.residues
    }
    dfa = FiniteAutomaton({letter}, set(chain), chain[0], finals, edges, True)
    return minimize(dfa) if minimal else dfa


def _minimalize(vectors):
    """Keep the componentwise-minimal rows"""
    kept = []
    for v in vectors:
        if all(not np.all(v >= g) for g in kept):
            kept = [g for g in kept if not np.all(g >= v)]
            kept.append(v)
    return kept


def solve_nonneg_linear(A, b, norm_cap=256):
    """All nonnegative integer solutions of ``A x = b``.

    Completion over the homogeneous system ``[A | -b] (x, y) = 0`` with
    ``y <= 1``: a frontier vector grows along unit vectors that decrease its
    residual, and is pruned once it dominates a known minimal solution.
    Minimal solutions with ``y = 1`` are the constants, those with ``y = 0``
    the shared periods.

    Parameters
    ----------
    A : array_like of int, shape (m, n)
    b : array_like of int, shape (m,)
    norm_cap : int, optional
        Largest 1-norm a frontier vector may reach.

    Returns
    -------
    SemilinearSet
        Empty when the system has no solution.

    Raises
    ------
    ResourceLimitError
        If the frontier outgrows ``norm_cap``.
    """
    b = np.asarray(b, dtype=np.int64).reshape(-1)
    A = np.asarray(A, dtype=np.int64)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if A.shape[0] != len(b):
        raise ValueError(f"matrix has {A.shape[0]} rows but b has {len(b)} entries")
    m, n = A.shape
    extended = np.hstack([A, -b.reshape(m, 1)])
    size = n + 1
    units = np.eye(size, dtype=np.int64)
    columns = [extended[:, j] for j in range(size)]

    basis = []
    frontier = [units[j] for j in range(size)]
    while frontier:
        fresh = []
        for v in frontier:
            if not np.any(extended @ v):
                basis.append(v)
            else:
                fresh.append(v)
        candidates = {}
        for v in fresh:
            residual = extended @ v
            for j in range(size):
                if residual @ columns[j] >= 0:
                    continue
                w = v + units[j]
                if w[n] > 1:
                    continue
                if any(np.all(w >= g) for g in basis):
                    continue
                if int(w.sum()) > norm_cap:
                    raise ResourceLimitError(
                        f"Hilbert basis search passed norm {norm_cap} on a "
                        f"{m}x{n} system"
                    )
                candidates.setdefault(tuple(w), w)
        frontier = list(candidates.values())
    basis = _minimalize(basis)
    constants = [tuple(v[:n]) for v in basis if v[n] == 1]
    periods = [tuple(v[:n]) for v in basis if v[n] == 0]
    logger.debug(
        f"Solved {m}x{n} system: {len(constants)} constants, {len(periods)} periods"
    )
    return SemilinearSet(n, tuple(LinearSet(c, periods) for c in sorted(constants)))
