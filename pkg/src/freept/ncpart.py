"""Non-crossing partitions of ``{1, ..., p}``.

Partitions are stored canonically: every block is an ascending tuple and the
blocks are ordered by their minimum element.  All counts are Python integers,
so nothing overflows.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ResourceError

P_MAX = 12
BRUTEFORCE_CAP = 10**7


@dataclass(frozen=True)
class Partition:
    """A set partition of ``{1, ..., p}`` in canonical form.

    ``noncrossing`` is computed on construction, so it is always consistent
    with ``blocks``.
    """

    p: int
    blocks: tuple[tuple[int, ...], ...]
    noncrossing: bool = field(init=False, compare=False)

    def __init__(self, p: int, blocks: Iterable[Iterable[int]]):
        if not isinstance(p, (int, np.integer)) or p < 1:
            raise DomainError(f"ground set size must be a positive integer, got {p!r}")
        canon = tuple(sorted((tuple(sorted(int(x) for x in b)) for b in blocks), key=lambda b: b[0] if b else 0))
        if any(len(b) == 0 for b in canon):
            raise DomainError("partition blocks must be nonempty")
        flat = [x for b in canon for x in b]
        if len(flat) != len(set(flat)) or set(flat) != set(range(1, p + 1)):
            raise DomainError(f"blocks {canon} do not partition {{1..{p}}}")
        object.__setattr__(self, "p", int(p))
        object.__setattr__(self, "blocks", canon)
        object.__setattr__(self, "noncrossing", _scan_noncrossing(int(p), canon))

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __repr__(self) -> str:
        inner = ",".join("{" + ",".join(map(str, b)) + "}" for b in self.blocks)
        return f"Partition({{{inner}}})"

    @property
    def even_blocks(self) -> int:
        """Number of blocks of even size."""
        return sum(1 for b in self.blocks if len(b) % 2 == 0)

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)

    def labels(self) -> list[int]:
        """Block index (0-based) of every element 1..p."""
        out = [0] * self.p
        for j, b in enumerate(self.blocks):
            for x in b:
                out[x - 1] = j
        return out

    def to_lists(self) -> list[list[int]]:
        return [list(b) for b in self.blocks]

    @classmethod
    def one(cls, p: int) -> "Partition":
        """The one-block partition ``1_p``."""
        return cls(p, [range(1, p + 1)])

    @classmethod
    def singletons(cls, p: int) -> "Partition":
        return cls(p, [[i] for i in range(1, p + 1)])


@dataclass(frozen=True)
class IndexTuple:
    """Indices ``(i_1, ..., i_p)`` drawn from ``{1, ..., n}``."""

    n: int
    indices: tuple[int, ...]

    def __init__(self, n: int, indices: Iterable[int]):
        idx = tuple(int(i) for i in indices)
        if n < 1:
            raise DomainError(f"index alphabet size must be >= 1, got {n}")
        if any(i < 1 or i > n for i in idx):
            raise DomainError(f"indices {idx} outside 1..{n}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)

    def double_indices(self) -> list[tuple[int, int]]:
        """The cyclic double-index tuple ``(i_2 i_1, i_3 i_2, ..., i_1 i_p)``."""
        p = len(self.indices)
        return [(self.indices[(l + 1) % p], self.indices[l]) for l in range(p)]


def _scan_noncrossing(p: int, blocks: Sequence[Sequence[int]]) -> bool:
    # An element may only touch a block that was opened earlier if that block
    # is the innermost one still open.
    label = [0] * (p + 1)
    last = {}
    for j, b in enumerate(blocks):
        for x in b:
            label[x] = j
        last[j] = b[-1]
    stack: list[int] = []
    opened: set[int] = set()
    for x in range(1, p + 1):
        j = label[x]
        if j in opened:
            if not stack or stack[-1] != j:
                return False
        else:
            opened.add(j)
            stack.append(j)
        if last[j] == x:
            stack.pop()
    return True


def is_noncrossing(pi: Partition) -> bool:
    """True iff no ``a < b < c < d`` has ``a, c`` in one block and ``b, d`` in another."""
    if not isinstance(pi, Partition):
        raise DomainError(f"expected a Partition, got {type(pi).__name__}")
    return pi.noncrossing


def _nc_interval(elems: tuple[int, ...]) -> list[list[tuple[int, ...]]]:
    """All non-crossing partitions (as block lists) of an ordered tuple."""
    if not elems:
        return [[]]
    first, rest = elems[0], elems[1:]
    out = []
    # The block holding `first` picks further members from `rest`; the gaps
    # between consecutive members are partitioned independently.
    for r in range(len(rest) + 1):
        for picks in itertools.combinations(range(len(rest)), r):
            block = (first,) + tuple(rest[i] for i in picks)
            bounds = (-1,) + picks + (len(rest),)
            gaps = [rest[bounds[i] + 1 : bounds[i + 1]] for i in range(len(bounds) - 1)]
            for combo in itertools.product(*(_nc_interval(g) for g in gaps)):
                blocks = [block]
                for part in combo:
                    blocks.extend(part)
                out.append(blocks)
    return out


@lru_cache(maxsize=None)
def _enumerate_cached(p: int) -> tuple[Partition, ...]:
    parts = [Partition(p, bl) for bl in _nc_interval(tuple(range(1, p + 1)))]
    parts.sort(key=lambda q: q.blocks)
    return tuple(parts)


def enumerate_nc(p: int, p_max: int = P_MAX) -> list[Partition]:
    """All non-crossing partitions of ``{1..p}`` in canonical lexicographic order."""
    if not isinstance(p, (int, np.integer)) or p < 1 or p > p_max:
        raise DomainError(f"p must lie in 1..{p_max}, got {p!r}")
    return list(_enumerate_cached(int(p)))


@lru_cache(maxsize=None)
def block_type_counts(p: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    """Multiplicity of each sorted block-size signature in ``NC(p)``.

    Any multiplicative functional on NC(p) depends only on this signature.
    """
    counts = Counter(tuple(sorted(q.block_sizes)) for q in _enumerate_cached(p))
    return tuple(sorted(counts.items()))


def _as_permutation(pi: Partition) -> list[int]:
    # Each block (l_1 < ... < l_s) becomes the cycle l_1 -> l_2 -> ... -> l_1.
    perm = [0] * (pi.p + 1)
    for b in pi.blocks:
        for a, c in zip(b, b[1:] + b[:1]):
            perm[a] = c
    return perm


def kreweras_complement(pi: Partition) -> Partition:
    """Kreweras complement ``K(pi)``, computed as the cycles of ``pi^{-1} gamma``.

    ``gamma`` is the full cycle ``1 -> 2 -> ... -> p -> 1``.
    """
    if not is_noncrossing(pi):
        raise DomainError(f"Kreweras complement needs a non-crossing partition, got {pi}")
    p = pi.p
    perm = _as_permutation(pi)
    inv = [0] * (p + 1)
    for a in range(1, p + 1):
        inv[perm[a]] = a
    seen = [False] * (p + 1)
    blocks = []
    for start in range(1, p + 1):
        if seen[start]:
            continue
        cyc = []
        a = start
        while not seen[a]:
            seen[a] = True
            cyc.append(a)
            a = inv[a % p + 1]
        blocks.append(cyc)
    return Partition(p, blocks)


def _check_ccw_args(pi: Partition, length: int) -> None:
    if not is_noncrossing(pi):
        raise DomainError(f"cyclic coupling is defined for non-crossing partitions, got {pi}")
    if length != pi.p:
        raise DomainError(f"index tuple has length {length}, partition has p={pi.p}")


def ccw_check(pi: Partition, t: IndexTuple) -> bool:
    """Does ``pi`` couple the double indices ``(i_2 i_1, ..., i_1 i_p)`` cyclically?

    For each block ``l_1 < ... < l_s`` the second index of entry ``l_k`` must
    equal the first index of entry ``l_{k+1}``, with ``l_{s+1} = l_1``.
    """
    _check_ccw_args(pi, len(t))
    pairs = t.double_indices()
    for b in pi.blocks:
        for a, c in zip(b, b[1:] + b[:1]):
            if pairs[a - 1][1] != pairs[c - 1][0]:
                return False
    return True


def _count_ccw_bruteforce(pi: Partition, n: int) -> int:
    p = pi.p
    total = n**p
    if total > BRUTEFORCE_CAP:
        raise ResourceError(f"brute-force count needs n^p = {total} > {BRUTEFORCE_CAP} tuples")
    # Same condition as ccw_check, vectorised over every tuple.  Entry l
    # (1-based) carries the pair (first, second) = (i_{l+1}, i_l).
    links = [(a, c) for b in pi.blocks for a, c in zip(b, b[1:] + b[:1])]
    dtype = np.int8 if n < 128 else np.int32
    count = 0
    chunk = 1 << 20
    for start in range(0, total, chunk):
        flat = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = np.empty((p, flat.size), dtype=dtype)
        for pos in range(p - 1, -1, -1):
            digits[pos] = flat % n
            flat //= n
        ok = np.ones(digits.shape[1], dtype=bool)
        for a, c in links:
            second_a = digits[a - 1]
            first_c = digits[c % p]
            ok &= second_a == first_c
        count += int(ok.sum())
    return count


def count_ccw(pi: Partition, n: int, mode: str = "closed") -> int:
    """Number ``N(pi)`` of index tuples in ``{1..n}^p`` that ``pi`` couples cyclically.

    ``mode="closed"`` returns ``n ** (even_blocks + 1)``; ``mode="bruteforce"``
    enumerates all ``n ** p`` tuples and refuses above ``BRUTEFORCE_CAP``.
    """
    _check_ccw_args(pi, pi.p)
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    if mode == "closed":
        return int(n) ** (pi.even_blocks + 1)
    if mode == "bruteforce":
        return _count_ccw_bruteforce(pi, int(n))
    raise DomainError(f"unknown count mode {mode!r}")


def catalan(p: int) -> int:
    """Catalan number by the convolution recurrence."""
    c = [1]
    for k in range(p):
        c.append(sum(c[i] * c[k - i] for i in range(k + 1)))
    return c[p]
