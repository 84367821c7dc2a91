"""Truncated free-probability calculus.

Moment and cumulant sequences are finite truncations ``(x_1, ..., x_P)`` of
formal power series; ``x_0 = 1`` is implicit.  Every routine here accepts
either exact rationals (:class:`fractions.Fraction`, ints are promoted) or
floats and computes with whatever scalar type it was handed, so combinatorial
identities can be checked with ``==``.

The partial-transpose map on cumulants is *not* an involution.  Applying
:func:`pt_cumulants` twice does not return the input once ``p >= 4``, because
the partially transposed variable is no longer unitarily invariant.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Rational, Real
from typing import Callable, Iterable, NamedTuple, Sequence, Union

import numpy as np

from . import ncpart
from .errors import DomainError

Scalar = Union[Fraction, float]

DEFAULT_ORDER = 8

# Newton/continuation parameters for Stieltjes inversion.
NEWTON_MAX_ITER = 60
NEWTON_TOL = 1e-12
CONTINUATION_LEVELS = 200


def as_scalar(x) -> Scalar:
    """Promote ints and ``"p/q"`` strings to Fraction; keep floats."""
    if isinstance(x, bool):
        raise DomainError("booleans are not scalars")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer, Rational)):
        return Fraction(int(x)) if isinstance(x, (int, np.integer)) else Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x)
        except ValueError:
            return float(x)
    if isinstance(x, Real):
        return float(x)
    raise DomainError(f"unsupported scalar {x!r}")


def _is_exact(x) -> bool:
    return isinstance(x, Fraction)


class _Truncated:
    """Shared behaviour of moment and cumulant sequences."""

    __slots__ = ("values",)
    kind = "sequence"

    def __init__(self, values: Iterable):
        vals = tuple(as_scalar(v) for v in values)
        if not vals:
            raise DomainError(f"{type(self).__name__} needs order P >= 1")
        object.__setattr__(self, "values", vals)

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    @property
    def order(self) -> int:
        return len(self.values)

    @property
    def mode(self) -> str:
        return "rational" if all(_is_exact(v) for v in self.values) else "float"

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, p: int) -> Scalar:
        """1-based access: ``seq[p]`` is the p-th entry."""
        if not 1 <= p <= len(self.values):
            raise IndexError(f"order {p} outside 1..{len(self.values)}")
        return self.values[p - 1]

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.values == other.values

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.values))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({[str(v) for v in self.values]})"

    def truncate(self, order: int):
        if not 1 <= order <= self.order:
            raise DomainError(f"cannot truncate order {self.order} sequence to {order}")
        return type(self)(self.values[:order])

    def as_float(self):
        return type(self)(float(v) for v in self.values)

    def to_dict(self) -> dict:
        mode = self.mode
        if mode == "rational":
            vals = [f"{v.numerator}/{v.denominator}" for v in self.values]
        else:
            vals = [float(v) for v in self.values]
        return {"kind": self.kind, "order": self.order, "mode": mode, "values": vals}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict):
        vals = data["values"]
        if data.get("mode") == "rational":
            seq = cls(Fraction(v) for v in vals)
        else:
            seq = cls(float(v) for v in vals)
        if "order" in data and data["order"] != seq.order:
            raise DomainError(f"order field {data['order']} disagrees with {seq.order} values")
        return seq

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text))


class MomentSequence(_Truncated):
    """Moments ``(m_1, ..., m_P)``."""

    __slots__ = ()
    kind = "moments"


class CumulantSequence(_Truncated):
    """Free cumulants ``(k_1, ..., k_P)``."""

    __slots__ = ()
    kind = "cumulants"

    def r_transform(self) -> "RTransform":
        return RTransform(self.values)


@dataclass(frozen=True)
class RTransform:
    """Truncated R-transform ``R(z) = sum_{p<P} k_{p+1} z^p``."""

    coefficients: tuple

    def __call__(self, z):
        exact = isinstance(z, (int, Fraction))
        acc = 0
        for c in reversed(self.coefficients):
            acc = acc * z + (c if exact else float(c))
        return acc

    def derivative(self, z):
        acc = 0
        coeffs = self.coefficients
        for p in range(len(coeffs) - 1, 0, -1):
            acc = acc * z + p * float(coeffs[p])
        return acc

    def cumulants(self) -> CumulantSequence:
        return CumulantSequence(self.coefficients)


# --------------------------------------------------------------------------
# moment <-> cumulant
# --------------------------------------------------------------------------


def _block_product(values: Sequence[Scalar], sizes: Sequence[int]) -> Scalar:
    return math.prod((values[s - 1] for s in sizes), start=1)


def cumulants_to_moments(k: CumulantSequence) -> MomentSequence:
    """Evaluate ``m_p = sum over NC(p) of prod_V k_|V|`` directly."""
    vals = k.values
    out = []
    for p in range(1, len(vals) + 1):
        total = 0
        for sizes, count in ncpart.block_type_counts(p):
            total += count * _block_product(vals, sizes)
        out.append(total)
    return MomentSequence(out)


def moments_to_cumulants(m: MomentSequence) -> CumulantSequence:
    """Invert the NC moment-cumulant relation by recursive subtraction.

    ``k_p`` is ``m_p`` minus the contribution of every non-crossing partition
    other than ``1_p``; those only involve cumulants of lower order.
    """
    kappa: list[Scalar] = []
    for p, mp in enumerate(m.values, start=1):
        rest = 0
        for sizes, count in ncpart.block_type_counts(p):
            if sizes == (p,):
                continue
            rest += count * _block_product(kappa, sizes)
        kappa.append(mp - rest)
    return CumulantSequence(kappa)


# --------------------------------------------------------------------------
# convolutions
# --------------------------------------------------------------------------


def _same_order(a: _Truncated, b: _Truncated) -> None:
    if a.order != b.order:
        raise DomainError(f"order mismatch: {a.order} vs {b.order}")


def free_add_convolve(a: CumulantSequence, b: CumulantSequence) -> CumulantSequence:
    """Free additive convolution: cumulants add."""
    _same_order(a, b)
    return CumulantSequence(x + y for x, y in zip(a.values, b.values))


def free_power(a: CumulantSequence, t) -> CumulantSequence:
    """Free convolution power ``mu^{boxplus t}`` for ``t >= 1``."""
    t = as_scalar(t)
    if t < 1:
        raise DomainError(f"free convolution power needs t >= 1, got {t}")
    return CumulantSequence(t * x for x in a.values)


@lru_cache(maxsize=None)
def _kreweras_type_counts(p: int) -> tuple:
    counts = Counter()
    for q in ncpart.enumerate_nc(p):
        kq = ncpart.kreweras_complement(q)
        counts[(q.block_sizes, kq.block_sizes)] += 1
    return tuple(sorted(counts.items()))


def free_mult_moments(a, b, order: int, p_max: int = ncpart.P_MAX) -> MomentSequence:
    """Moments of ``a boxtimes b`` from ``sum_pi k_pi(a) m_{K(pi)}(b)``.

    ``a`` and ``b`` may be :class:`Measure` objects or already truncated
    sequences (cumulants for ``a``, moments for ``b``).  The caller is
    responsible for one of them having nonnegative support.
    """
    if not 1 <= order <= p_max:
        raise DomainError(f"order must lie in 1..{p_max}, got {order}")
    ka = a.cumulants(order) if isinstance(a, Measure) else a
    mb = b.moments(order) if isinstance(b, Measure) else b
    if not isinstance(ka, CumulantSequence) or not isinstance(mb, MomentSequence):
        raise DomainError("free_mult_moments needs cumulants of a and moments of b")
    if ka.order < order or mb.order < order:
        raise DomainError(f"inputs are truncated below order {order}")
    out = []
    for p in range(1, order + 1):
        total = 0
        for (sa, sb), count in _kreweras_type_counts(p):
            total += count * _block_product(ka.values, sa) * _block_product(mb.values, sb)
        out.append(total)
    return MomentSequence(out)


# --------------------------------------------------------------------------
# partial transposition
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PTContext:
    """Block count ``n`` of the partial transposition."""

    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise DomainError(f"block count must be a positive integer, got {self.n!r}")

    def c(self, p: int) -> int:
        """The constant ``c(n, p)``: ``n`` for odd ``p``, ``n**2`` for even ``p``."""
        return self.n if p % 2 else self.n**2


def _ctx(ctx) -> PTContext:
    return ctx if isinstance(ctx, PTContext) else PTContext(int(ctx))


def pt_cumulants(a: CumulantSequence, ctx) -> CumulantSequence:
    """Cumulants of the partial transpose: ``k_p -> c(n,p) k_p / n^p``."""
    ctx = _ctx(ctx)
    n = ctx.n
    return CumulantSequence(
        x * Fraction(ctx.c(p), n**p) for p, x in enumerate(a.values, start=1)
    )


def pt_r_series(a: CumulantSequence, ctx) -> CumulantSequence:
    """Coefficientwise ``(1+n)/2 R(z/n) + (1-n)/2 R(-z/n)``.

    Independent route to :func:`pt_cumulants`; both must agree exactly.
    """
    n = _ctx(ctx).n
    plus = Fraction(1 + n, 2)
    minus = Fraction(1 - n, 2)
    out = []
    for q, r in enumerate(a.values):
        out.append(plus * r * Fraction(1, n**q) + minus * r * Fraction((-1) ** q, n**q))
    return CumulantSequence(out)


# --------------------------------------------------------------------------
# measures
# --------------------------------------------------------------------------


class Measure(ABC):
    """A compactly supported probability measure known through its cumulants."""

    @abstractmethod
    def cumulants(self, order: int = DEFAULT_ORDER) -> CumulantSequence: ...

    def moments(self, order: int = DEFAULT_ORDER) -> MomentSequence:
        return cumulants_to_moments(self.cumulants(order))

    def r_functions(self, order: int = DEFAULT_ORDER) -> tuple[Callable, Callable]:
        """``(R, R')`` as vectorised complex callables.

        The default is the truncated series; families with a rational
        R-transform override this with the exact resummation.
        """
        r = self.cumulants(order).r_transform()
        return r, r.derivative

    @abstractmethod
    def support(self) -> tuple[float, float]:
        """Convex hull of the support."""


@dataclass(frozen=True)
class Atomic(Measure):
    """Finitely many atoms ``((location, weight), ...)``."""

    atoms: tuple

    def __init__(self, atoms):
        clean = []
        for loc, w in atoms:
            loc, w = as_scalar(loc), as_scalar(w)
            if w < 0:
                raise DomainError(f"negative atom weight {w}")
            if w != 0:
                clean.append((loc, w))
        if not clean:
            raise DomainError("atomic measure needs at least one atom of positive weight")
        total = sum(w for _, w in clean)
        exact = all(_is_exact(w) for _, w in clean)
        if (exact and total != 1) or (not exact and abs(total - 1) > 1e-12):
            raise DomainError(f"atom weights sum to {total}, not 1")
        object.__setattr__(self, "atoms", tuple(clean))

    def moment(self, p: int) -> Scalar:
        return sum(w * t**p for t, w in self.atoms)

    def moments(self, order: int = DEFAULT_ORDER) -> MomentSequence:
        return MomentSequence(self.moment(p) for p in range(1, order + 1))

    def cumulants(self, order: int = DEFAULT_ORDER) -> CumulantSequence:
        return moments_to_cumulants(self.moments(order))

    def r_functions(self, order: int = DEFAULT_ORDER):
        if len(self.atoms) == 1:
            c = float(self.atoms[0][0])
            return (lambda z: c + 0 * z), (lambda z: 0 * z)
        return super().r_functions(order)

    def support(self):
        locs = [float(t) for t, _ in self.atoms]
        return min(locs), max(locs)


def point_mass(c) -> Atomic:
    return Atomic([(c, 1)])


@dataclass(frozen=True)
class Semicircle(Measure):
    """Centered semicircle on ``[-radius, radius]``; variance ``radius**2 / 4``."""

    radius: Scalar = Fraction(2)

    def __post_init__(self):
        object.__setattr__(self, "radius", as_scalar(self.radius))
        if self.radius < 0:
            raise DomainError(f"semicircle radius must be >= 0, got {self.radius}")

    @property
    def variance(self) -> Scalar:
        return self.radius**2 / 4

    def cumulants(self, order: int = DEFAULT_ORDER) -> CumulantSequence:
        zero = 0 * self.radius
        return CumulantSequence(self.variance if p == 2 else zero for p in range(1, order + 1))

    def r_functions(self, order: int = DEFAULT_ORDER):
        v = float(self.variance)
        return (lambda z: v * z), (lambda z: v + 0 * z)

    def support(self):
        r = float(self.radius)
        return -r, r

    def density(self, t):
        r = float(self.radius)
        t = np.asarray(t, dtype=float)
        inside = np.clip(r * r - t * t, 0.0, None)
        return 2.0 * np.sqrt(inside) / (np.pi * r * r)


@dataclass(frozen=True)
class FreePoisson(Measure):
    """Free Poisson (Marchenko-Pastur) law with ``rate`` and ``jump`` size."""

    rate: Scalar = Fraction(1)
    jump: Scalar = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "rate", as_scalar(self.rate))
        object.__setattr__(self, "jump", as_scalar(self.jump))
        if self.rate < 0:
            raise DomainError(f"free Poisson rate must be >= 0, got {self.rate}")

    def cumulants(self, order: int = DEFAULT_ORDER) -> CumulantSequence:
        return free_poisson_cumulants(self.rate, self.jump, order)

    def r_functions(self, order: int = DEFAULT_ORDER):
        lam, a = float(self.rate), float(self.jump)
        return (lambda z: lam * a / (1 - a * z)), (lambda z: lam * a * a / (1 - a * z) ** 2)

    def support(self):
        lam, a = float(self.rate), float(self.jump)
        ends = [a * (1 - math.sqrt(lam)) ** 2, a * (1 + math.sqrt(lam)) ** 2]
        if lam < 1:
            ends.append(0.0)
        return min(ends), max(ends)

    def density(self, t):
        """Absolutely continuous part of the law (the atom at 0 for rate < 1 is omitted)."""
        lam, a = float(self.rate), float(self.jump)
        t = np.asarray(t, dtype=float)
        disc = 4 * lam * a * a - (t - a * (1 + lam)) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.sqrt(np.clip(disc, 0.0, None)) / (2 * np.pi * a * t)
        return np.where((disc > 0) & (t != 0), out, 0.0)


@dataclass(frozen=True)
class CompoundFreePoisson(Measure):
    """Compound free Poisson law with ``rate`` and atomic jump distribution."""

    rate: Scalar
    jump: Atomic

    def __post_init__(self):
        object.__setattr__(self, "rate", as_scalar(self.rate))
        if not isinstance(self.jump, Atomic):
            raise DomainError("compound free Poisson jump distribution must be atomic")
        if self.rate < 0:
            raise DomainError(f"rate must be >= 0, got {self.rate}")

    def cumulants(self, order: int = DEFAULT_ORDER) -> CumulantSequence:
        return compound_free_poisson_cumulants(self.rate, self.jump, order)

    def r_functions(self, order: int = DEFAULT_ORDER):
        lam = float(self.rate)
        atoms = [(float(t), float(w)) for t, w in self.jump.atoms]

        def r(z):
            return lam * sum(w * t / (1 - t * z) for t, w in atoms)

        def dr(z):
            return lam * sum(w * t * t / (1 - t * z) ** 2 for t, w in atoms)

        return r, dr

    def support(self):
        # Limit k -> oo of the free-power bound applied to
        # (1 - rate/k) delta_0 + (rate/k) jump.
        lo, hi = self.jump.support()
        lo, hi = min(lo, 0.0), max(hi, 0.0)
        lam = float(self.rate)
        m1, m2 = float(self.jump.moment(1)), float(self.jump.moment(2))
        spread = 2 * math.sqrt(lam * m2)
        return lo + lam * m1 - spread, hi + lam * m1 + spread


@dataclass(frozen=True)
class Shifted(Measure):
    """``inner boxplus delta_shift``: the law of ``x + c``."""

    inner: Measure
    shift: Scalar

    def __post_init__(self):
        object.__setattr__(self, "shift", as_scalar(self.shift))

    def cumulants(self, order: int = DEFAULT_ORDER) -> CumulantSequence:
        k = list(self.inner.cumulants(order).values)
        k[0] = k[0] + self.shift
        return CumulantSequence(k)

    def r_functions(self, order: int = DEFAULT_ORDER):
        r, dr = self.inner.r_functions(order)
        c = float(self.shift)
        return (lambda z: c + r(z)), dr

    def support(self):
        lo, hi = self.inner.support()
        return lo + float(self.shift), hi + float(self.shift)

    def density(self, t):
        if not hasattr(self.inner, "density"):
            raise DomainError(f"no closed-form density for {type(self.inner).__name__}")
        return self.inner.density(np.asarray(t, dtype=float) - float(self.shift))


def free_poisson_cumulants(rate, jump, order: int = DEFAULT_ORDER) -> CumulantSequence:
    """``k_p = rate * jump**p``."""
    lam, a = as_scalar(rate), as_scalar(jump)
    if lam < 0:
        raise DomainError(f"free Poisson rate must be >= 0, got {lam}")
    return CumulantSequence(lam * a**p for p in range(1, order + 1))


def compound_free_poisson_cumulants(rate, jump: Atomic, order: int = DEFAULT_ORDER) -> CumulantSequence:
    """``k_p = rate * m_p(jump)`` for an atomic jump distribution."""
    if not isinstance(jump, Atomic):
        raise DomainError("jump distribution must be an atomic measure")
    lam = as_scalar(rate)
    return CumulantSequence(lam * jump.moment(p) for p in range(1, order + 1))


def pt_jump_measure(ctx, jump) -> Atomic:
    """Atoms ``jump/n`` (weight ``(n+1)/2n``) and ``-jump/n`` (weight ``(n-1)/2n``)."""
    n = _ctx(ctx).n
    loc = as_scalar(jump) / n
    return Atomic([(loc, Fraction(n + 1, 2 * n)), (-loc, Fraction(n - 1, 2 * n))])


def pt_measure(mu: FreePoisson, ctx) -> CompoundFreePoisson:
    """Law of the partial transpose of a free Poisson element, as a compound free Poisson law."""
    n = _ctx(ctx).n
    return CompoundFreePoisson(mu.rate * n * n, pt_jump_measure(n, mu.jump))


# --------------------------------------------------------------------------
# support bounds
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SupportBound:
    """Enclosure ``[x1, x2]`` of the support of a free convolution power."""

    A: float
    B: float
    mean: float
    variance: float
    k: float
    x1: float
    x2: float


def support_bound_free_power(A, B, mean, variance, k) -> SupportBound:
    """Bound the support of ``mu^{boxplus k}`` for ``A <= x <= B``.

    ``x1 = A - 2 sigma sqrt(k-1) + (k-1) m`` and symmetrically for ``x2``.
    """
    A, B, mean, variance, k = (float(v) for v in (A, B, mean, variance, k))
    if k < 1:
        raise DomainError(f"free power k must be >= 1, got {k}")
    if A > B:
        raise DomainError(f"need A <= B, got A={A}, B={B}")
    if variance < 0:
        raise DomainError(f"variance must be >= 0, got {variance}")
    spread = 2 * math.sqrt(variance) * math.sqrt(k - 1)
    drift = (k - 1) * mean
    return SupportBound(A, B, mean, variance, k, A - spread + drift, B + spread + drift)


def shifted_mp_support(rate, jump, shift=1) -> tuple[float, float]:
    """Support hull of ``shift + jump * W`` with ``W`` free Poisson of the given rate."""
    lam, a, c = float(rate), float(jump), float(shift)
    if lam < 0:
        raise DomainError(f"rate must be >= 0, got {lam}")
    ends = [c + a * (1 + math.sqrt(lam)) ** 2, c + a * (1 - math.sqrt(lam)) ** 2]
    if lam < 1 and a != 0:
        ends.append(c)  # atom at the shift
    return min(ends), max(ends)


# --------------------------------------------------------------------------
# Stieltjes inversion
# --------------------------------------------------------------------------


class DensityPoint(NamedTuple):
    t: float
    density: float
    converged: bool
    clamped: bool


def density_from_cumulants(
    source: Union[CumulantSequence, Measure],
    grid: Iterable[float],
    eps: float = 1e-3,
    *,
    order: int = DEFAULT_ORDER,
    max_iter: int = NEWTON_MAX_ITER,
    tol: float = NEWTON_TOL,
    levels: int = CONTINUATION_LEVELS,
) -> list[DensityPoint]:
    """Recover a density by solving ``z = R(G) + 1/G`` at ``z = t + i eps``.

    ``source`` is either a truncated cumulant sequence, whose R-transform is
    then the polynomial of degree ``P-1``, or a :class:`Measure`, in which case
    the family's exact R-transform is used where one is known.  Each grid
    point is continued from ``t + iY`` with ``Y = 10 (1 + sum |k_p|)`` down to
    ``t + i eps`` starting at ``G = 1/z``.  Points where Newton fails are
    returned with ``converged=False`` and density ``nan``.
    """
    if not 1e-6 <= eps <= 1e-1:
        raise DomainError(f"eps must lie in [1e-6, 1e-1], got {eps}")
    if isinstance(source, Measure):
        r, dr = source.r_functions(order)
        kappa = source.cumulants(order)
    elif isinstance(source, CumulantSequence):
        kappa = source
        rt = source.r_transform()
        r, dr = rt, rt.derivative
    else:
        raise DomainError(f"cannot build an R-transform from {type(source).__name__}")

    t = np.asarray(list(grid), dtype=float)
    scale = sum(abs(float(v)) for v in kappa.values)
    heights = np.geomspace(10.0 * (1.0 + scale), eps, levels)
    G = 1.0 / (t + 1j * heights[0])
    ok = np.ones(t.shape, dtype=bool)
    for y in heights:
        z = t + 1j * y
        done = ~ok  # failed points are not iterated further
        for _ in range(max_iter):
            active = ~done
            if not active.any():
                break
            g = G[active]
            with np.errstate(all="ignore"):
                f = r(g) + 1.0 / g - z[active]
                df = dr(g) - 1.0 / (g * g)
                step = f / df
            step = np.where(np.isfinite(step), step, np.nan)
            G[active] = g - step
            small = np.abs(step) < tol * np.maximum(1.0, np.abs(g))
            idx = np.flatnonzero(active)
            done[idx[small]] = True
            bad = ~np.isfinite(step)
            ok[idx[bad]] = False
            done[idx[bad]] = True
        ok &= done
        # The Cauchy transform maps the upper half plane into the lower one.
        ok &= G.imag <= 0
    dens = -G.imag / np.pi
    clamped = ok & (dens < 0)
    dens = np.where(clamped, 0.0, dens)
    dens = np.where(ok, dens, np.nan)
    return [DensityPoint(float(a), float(b), bool(c), bool(d)) for a, b, c, d in zip(t, dens, ok, clamped)]


def density_csv(points: Sequence[DensityPoint]) -> str:
    lines = ["t,density,converged"]
    for pt in points:
        lines.append(f"{pt.t!r},{pt.density!r},{str(pt.converged).lower()}")
    return "\n".join(lines) + "\n"


def sequence_from_json(text: str) -> _Truncated:
    data = json.loads(text)
    cls = MomentSequence if data.get("kind") == "moments" else CumulantSequence
    return cls.from_dict(data)
