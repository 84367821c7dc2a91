"""Brute-force oracles for the exact identities, plus the self-test runner.

Nothing here reuses the fast paths it checks: partitions are enumerated as
raw set partitions, coupling counts come from exhaustive index loops, and the
partial-transpose moments are assembled from the coupling sum rather than
from the closed-form cumulant map.
"""

from __future__ import annotations

import math
import random
import time
from fractions import Fraction
from typing import Callable, Iterator, NamedTuple

from . import freecalc as fc
from . import ncpart


def set_partitions(p: int) -> Iterator[list[list[int]]]:
    """Every set partition of ``{1..p}`` (Bell(p) of them), via restricted growth strings."""

    def grow(prefix: list[int], top: int):
        if len(prefix) == p:
            blocks: list[list[int]] = [[] for _ in range(top + 1)]
            for i, b in enumerate(prefix, start=1):
                blocks[b].append(i)
            yield blocks
            return
        for b in range(top + 2):
            yield from grow(prefix + [b], max(top, b))

    if p == 0:
        return
    yield from grow([0], 0)


def crossing_bruteforce(p: int, blocks: list[list[int]]) -> bool:
    """Direct search for ``a < b < c < d`` with ``a, c`` and ``b, d`` in different blocks."""
    label = {x: j for j, b in enumerate(blocks) for x in b}
    for a in range(1, p + 1):
        for b in range(a + 1, p + 1):
            for c in range(b + 1, p + 1):
                for d in range(c + 1, p + 1):
                    if label[a] == label[c] and label[b] == label[d] and label[a] != label[b]:
                        return True
    return False


def nc_bruteforce(p: int) -> list[ncpart.Partition]:
    """NC(p) by filtering all set partitions."""
    return [ncpart.Partition(p, bl) for bl in set_partitions(p) if not crossing_bruteforce(p, bl)]


def kreweras_bruteforce(pi: ncpart.Partition) -> ncpart.Partition:
    """The coarsest ``sigma`` with ``pi`` on 1,3,5,... and ``sigma`` on 2,4,6,... non-crossing."""
    p = pi.p
    odd = [[2 * x - 1 for x in b] for b in pi.blocks]
    admissible = []
    for sigma in set_partitions(p):
        even = [[2 * x for x in b] for b in sigma]
        if not crossing_bruteforce(2 * p, odd + even):
            admissible.append(ncpart.Partition(p, sigma))

    def refines(a: ncpart.Partition, b: ncpart.Partition) -> bool:
        lab = b.labels()
        return all(len({lab[x - 1] for x in blk}) == 1 for blk in a.blocks)

    top = [s for s in admissible if all(refines(o, s) for o in admissible)]
    assert len(top) == 1, "maximal complement must be unique"
    return top[0]


def count_ccw_loop(pi: ncpart.Partition, n: int) -> int:
    """N(pi) by looping ``ccw_check`` over every index tuple."""
    import itertools

    return sum(
        ncpart.ccw_check(pi, ncpart.IndexTuple(n, idx))
        for idx in itertools.product(range(1, n + 1), repeat=pi.p)
    )


def pt_moments_by_coupling(kappa: fc.CumulantSequence, n: int, mode: str = "bruteforce") -> fc.MomentSequence:
    """Moments of the partial transpose from the coupling sum.

    ``m_p = (1/n) sum_{pi in NC(p)} N(pi) n^{|pi|} prod_V k_|V|(x/n)``, with
    ``N(pi)`` counted by ``ncpart.count_ccw`` in the given mode.
    """
    out = []
    for p in range(1, kappa.order + 1):
        total = Fraction(0) if kappa.mode == "rational" else 0.0
        for pi in ncpart.enumerate_nc(p):
            weight = ncpart.count_ccw(pi, n, mode=mode) * n ** len(pi)
            term = math.prod((kappa[len(b)] * Fraction(1, n ** len(b)) for b in pi.blocks), start=1)
            total += weight * term
        out.append(total * Fraction(1, n))
    return fc.MomentSequence(out)


def random_rational_sequence(rng: random.Random, order: int, cls=fc.CumulantSequence, span: int = 9):
    return cls(Fraction(rng.randint(-span, span), rng.randint(1, span)) for _ in range(order))


# --------------------------------------------------------------------------
# checks shared by the self-test and the acceptance suite
# --------------------------------------------------------------------------


def check_counting_theorem(p_max: int = 6, ns=(1, 2, 3, 4)) -> bool:
    return all(
        ncpart.count_ccw(pi, n, "bruteforce") == n ** (pi.even_blocks + 1)
        for p in range(1, p_max + 1)
        for pi in ncpart.enumerate_nc(p)
        for n in ns
    )


def check_pt_coupling_identity(ns=(2, 3), order: int = 6, params=((1, 1), (4, Fraction(-1, 8)))) -> bool:
    for lam, alpha in params:
        kappa = fc.free_poisson_cumulants(lam, alpha, order)
        for n in ns:
            lhs = pt_moments_by_coupling(kappa, n)
            rhs = fc.cumulants_to_moments(fc.pt_cumulants(kappa, n))
            if lhs != rhs:
                return False
    return True


def check_r_series(cases: int = 100, order: int = 8, n_max: int = 4, seed: int = 0) -> bool:
    rng = random.Random(seed)
    for _ in range(cases):
        k = random_rational_sequence(rng, order)
        n = rng.randint(1, n_max)
        if fc.pt_r_series(k, n) != fc.pt_cumulants(k, n):
            return False
    return True


def check_compound_poisson(n_max: int = 4, order: int = 8, params=((1, 1), (4, Fraction(-1, 8)), (Fraction(3, 2), Fraction(2, 7)))) -> bool:
    for lam, alpha in params:
        for n in range(1, n_max + 1):
            for P in range(1, order + 1):
                lhs = fc.pt_cumulants(fc.free_poisson_cumulants(lam, alpha, P), n)
                rhs = fc.compound_free_poisson_cumulants(Fraction(lam) * n * n, fc.pt_jump_measure(n, alpha), P)
                if lhs != rhs:
                    return False
    return True


def check_round_trip(cases: int = 200, order_max: int = 10, seed: int = 1) -> bool:
    rng = random.Random(seed)
    for i in range(cases):
        P = 1 + i % order_max
        m = random_rational_sequence(rng, P, fc.MomentSequence)
        if fc.cumulants_to_moments(fc.moments_to_cumulants(m)) != m:
            return False
        k = random_rational_sequence(rng, P)
        if fc.moments_to_cumulants(fc.cumulants_to_moments(k)) != k:
            return False
    return True


def check_bernoulli_compression(ts=(Fraction(1, 2), Fraction(1, 3)), order: int = 6) -> bool:
    mu = fc.FreePoisson(1, 1)
    for t in ts:
        powered = fc.cumulants_to_moments(fc.free_power(mu.cumulants(order), 1 / t))
        bern = fc.Atomic([(0, 1 - t), (1, t)])
        product = fc.free_mult_moments(mu, bern, order)
        for p in range(1, order + 1):
            if t ** (p + 1) * powered[p] != product[p]:
                return False
    return True


class CheckResult(NamedTuple):
    name: str
    passed: bool
    seconds: float


SELFTEST_CHECKS: dict[str, Callable[[], bool]] = {
    "counting theorem N(pi) = n^(even+1)": check_counting_theorem,
    "coupling sum == pt_cumulants moments": check_pt_coupling_identity,
    "R-series route == pt_cumulants": check_r_series,
    "compound free Poisson identity": check_compound_poisson,
    "moment/cumulant round trip": check_round_trip,
    "Bernoulli compression identity": check_bernoulli_compression,
}


def run_selftest() -> list[CheckResult]:
    results = []
    for name, fn in SELFTEST_CHECKS.items():
        t0 = time.perf_counter()
        ok = bool(fn())
        results.append(CheckResult(name, ok, time.perf_counter() - t0))
    return results
