"""Finite-alphabet full shift, words, and depth-k cylinder representations.

Points of the shift space are approximated by finite words. A depth-k
function is a table with one value per word of length k; words are encoded
as base-r integers with the first symbol as the most significant digit, so
the branch map ``w -> jw`` (truncated back to depth k) is plain index
arithmetic: ``j * r**(k-1) + idx // r``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


#: diameter of the shift space under d(x, y) = 2**-min{n : x_n != y_n}
DIAMETER = 0.5


@dataclass(frozen=True)
class Word:
    """A finite word over the alphabet {0, ..., r-1}."""

    symbols: tuple[int, ...]
    r: int

    def __init__(self, symbols: Iterable[int], r: int):
        symbols = tuple(int(s) for s in symbols)
        if r < 2:
            raise ValueError(f"alphabet size must be >= 2, got {r}")
        for s in symbols:
            if not 0 <= s < r:
                raise ValueError(f"symbol {s} outside alphabet of size {r}")
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "r", int(r))

    def __len__(self) -> int:
        return len(self.symbols)

    def __getitem__(self, i):
        return self.symbols[i]

    def index(self) -> int:
        """Base-r encoding (first symbol most significant)."""
        return word_index(self.symbols, self.r)

    def padded(self, length: int, tail: Callable[[int], int] | None = None) -> tuple[int, ...]:
        """Extend to ``length`` symbols using ``tail(position)`` (default 0)."""
        if length <= len(self.symbols):
            return self.symbols[:length]
        tail = tail or (lambda n: 0)
        return self.symbols + tuple(tail(n) for n in range(len(self.symbols), length))

    def truncate(self, depth: int) -> "Word":
        return Word(self.padded(depth), self.r)

    def drop_first(self) -> "Word":
        """The shift map on words."""
        return Word(self.symbols[1:], self.r)

    @classmethod
    def from_index(cls, idx: int, r: int, depth: int) -> "Word":
        return cls(index_to_symbols(idx, r, depth), r)


def word_index(symbols: Sequence[int], r: int) -> int:
    idx = 0
    for s in symbols:
        idx = idx * r + int(s)
    return idx


def index_to_symbols(idx: int, r: int, depth: int) -> tuple[int, ...]:
    out = []
    for _ in range(depth):
        idx, s = divmod(idx, r)
        out.append(s)
    return tuple(reversed(out))


def all_words(r: int, depth: int) -> np.ndarray:
    """Symbol matrix of shape (r**depth, depth), rows in index order."""
    idx = np.arange(r**depth)
    powers = r ** np.arange(depth - 1, -1, -1)
    return (idx[:, None] // powers[None, :]) % r


def distance(u: Word, v: Word, tail: Callable[[int], int] | None = None) -> float:
    """Shift-space distance between the points obtained by extending u and v.

    Both words are extended by ``tail`` (pad with symbol 0 by default), so
    only the first ``max(len(u), len(v))`` positions can differ.
    """
    if u.r != v.r:
        raise ValueError(f"alphabet sizes differ: {u.r} != {v.r}")
    n = max(len(u), len(v))
    x, y = u.padded(n, tail), v.padded(n, tail)
    for i, (a, b) in enumerate(zip(x, y)):
        if a != b:
            return 2.0 ** -(i + 1)
    return 0.0


def prepend(j: int, w: Word) -> Word:
    """Branch map phi_j: (w_1, w_2, ...) -> (j, w_1, w_2, ...)."""
    if not 0 <= j < w.r:
        raise ValueError(f"symbol {j} outside alphabet of size {w.r}")
    return Word((j,) + w.symbols, w.r)


def branch_index(j, idx, r: int, depth: int):
    """Index of ``jw`` truncated to ``depth``, for ``w`` with index ``idx``.

    Works elementwise on arrays.
    """
    return j * r ** (depth - 1) + idx // r


def branch_table(r: int, depth: int) -> np.ndarray:
    """``src[w, j]`` = index of phi_j(w) truncated to depth; shape (r**depth, r)."""
    idx = np.arange(r**depth)
    return branch_index(np.arange(r)[None, :], idx[:, None], r, depth)


@dataclass(frozen=True, eq=False)
class CylinderFunction:
    """Real function constant on depth-k cylinders."""

    values: np.ndarray
    r: int
    depth: int

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        if self.r < 2:
            raise ValueError("alphabet size must be >= 2")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if values.size != self.r**self.depth:
            raise ValueError(
                f"table has {values.size} entries, expected {self.r}**{self.depth}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, c: float, r: int, depth: int = 0) -> "CylinderFunction":
        return cls(np.full(r**depth, float(c)), r, depth)

    @classmethod
    def from_callable(cls, func: Callable[[np.ndarray], np.ndarray], r: int,
                      depth: int) -> "CylinderFunction":
        """Tabulate ``func`` on the symbol matrix returned by :func:`all_words`."""
        return cls(np.asarray(func(all_words(r, depth)), dtype=float), r, depth)

    def __call__(self, w: Word) -> float:
        if w.r != self.r:
            raise ValueError("alphabet size mismatch")
        return float(self.values[word_index(w.padded(self.depth), self.r)])

    def __len__(self) -> int:
        return self.values.size

    def refine(self, depth: int) -> "CylinderFunction":
        return refine(self, depth)

    def compose_branch(self, j: int) -> "CylinderFunction":
        """f o phi_j at the same depth (reads the entry for (j, w_1..w_{k-1}))."""
        if self.depth == 0:
            return self
        return CylinderFunction(self.values[branch_index(j, np.arange(len(self)), self.r,
                                                         self.depth)], self.r, self.depth)


@dataclass(frozen=True, eq=False)
class CylinderMeasure:
    """Nonnegative atomic weights on depth-k cylinders."""

    weights: np.ndarray
    r: int
    depth: int
    probability: bool = True
    _tol: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.size != self.r**self.depth:
            raise ValueError(f"measure has {w.size} atoms, expected {self.r}**{self.depth}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("measure weights must be finite and nonnegative")
        if self.probability:
            total = w.sum()
            if total <= 0:
                raise ValueError("probability measure has zero mass")
            w = w / total
            if abs(w.sum() - 1.0) > self._tol:
                raise ValueError("normalisation failed")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, r: int, depth: int) -> "CylinderMeasure":
        return cls(np.full(r**depth, 1.0), r, depth)

    def integrate(self, f: CylinderFunction | np.ndarray) -> float:
        vals = f.values if isinstance(f, CylinderFunction) else np.asarray(f)
        if vals.size != self.weights.size:
            raise ValueError("depth mismatch between measure and function")
        return float(np.dot(self.weights, vals))

    def total(self) -> float:
        return float(self.weights.sum())


def refine(f: CylinderFunction, depth: int) -> CylinderFunction:
    """Copy each depth-k value to all of its depth-``depth`` descendants."""
    if depth < f.depth:
        raise ValueError(f"cannot refine depth {f.depth} to shallower depth {depth}")
    if depth == f.depth:
        return f
    return CylinderFunction(np.repeat(f.values, f.r ** (depth - f.depth)), f.r, depth)


def coarsen_max_range(values: np.ndarray, r: int, depth: int, prefix: int) -> float:
    """Largest oscillation of a depth-``depth`` table inside a cylinder of
    length ``prefix``."""
    blocks = np.asarray(values).reshape(r**prefix, r ** (depth - prefix))
    return float(np.max(blocks.max(axis=1) - blocks.min(axis=1)))


def oscillation_profile(values: np.ndarray, r: int, depth: int) -> np.ndarray:
    """``osc[n-1]`` = max |f(u) - f(v)| over pairs agreeing on the first n-1
    symbols, for n = 1..depth."""
    return np.array([coarsen_max_range(values, r, depth, n - 1)
                     for n in range(1, depth + 1)])


def discrete_lipschitz(f: CylinderFunction | np.ndarray, r: int | None = None,
                       depth: int | None = None) -> float:
    """Max of |f(u) - f(v)| / d(u, v) over distinct depth-k words.

    A pair first differing at position n has d = 2**-n; the largest
    difference among such pairs is bounded by the oscillation over the
    common (n-1)-prefix cylinder, and any pair realising that oscillation
    with a later mismatch has an even larger ratio, so the maximum over n of
    ``2**n * osc[n-1]`` is exact.
    """
    if isinstance(f, CylinderFunction):
        values, r, depth = f.values, f.r, f.depth
    else:
        values = np.asarray(f, dtype=float)
    if depth < 1:
        raise ValueError("discrete Lipschitz constant needs depth >= 1")
    osc = oscillation_profile(values, r, depth)
    return float(np.max(osc * 2.0 ** np.arange(1, depth + 1)))
