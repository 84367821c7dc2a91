"""Co-complete positivity and k-block positivity certificates for ``I + alpha W``.

For a Wishart matrix ``W`` of rate ``lam > 1`` and a jump ``alpha < 0`` the
limiting spectrum of ``X = I + alpha W`` straddles zero exactly when
``1/n + 2 sqrt(lam) + lam < -1/alpha < (1 + sqrt(lam))^2``; inside that window
``X`` is not positive while its partial transpose is.  The k-block positivity
of ``X`` is certified analytically by ``f(n) > 0``; Monte Carlo projections can
only ever refute it.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import freecalc, randmat
from .errors import DomainError

log = logging.getLogger(__name__)

SCHEMA = "certReport/1"
# Finite-N slack on extreme eigenvalues, by block dimension.
EDGE_SLACK = {400: 0.05, 200: 0.07}


def edge_slack(N: int) -> float:
    """Slack for the smallest listed ``N`` not exceeding the given one."""
    eligible = [s for n_, s in sorted(EDGE_SLACK.items()) if n_ <= N]
    return eligible[-1] if eligible else max(EDGE_SLACK.values())


@dataclass(frozen=True)
class CertParams:
    n: int
    k: int
    rate: float
    jump: float
    N: int = 200
    trials: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.rate > 1:
            raise DomainError(f"rate must exceed 1, got {self.rate}")
        # jump = 0 is the degenerate identity matrix and is allowed.
        if self.jump > 0:
            raise DomainError(f"jump must be negative (or 0), got {self.jump}")
        if not 1 <= self.k <= self.n:
            raise DomainError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if self.N < 1 or self.trials < 1:
            raise DomainError("N and trials must be positive")


def ppt_window(n: int, rate: float) -> tuple[float, float]:
    """Range ``(lo, hi)`` of ``-1/alpha`` giving PPT but not positive. May be empty."""
    if not rate > 1:
        raise DomainError(f"window needs rate > 1, got {rate}")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    s = math.sqrt(rate)
    return 1 / n + 2 * s + rate, (1 + s) ** 2


def window_holds(n: int, rate: float, jump: float) -> bool:
    if jump >= 0:
        return False
    lo, hi = ppt_window(n, rate)
    return lo < -1 / jump < hi


def pt_lower_bound(n: int, rate: float, jump: float) -> float:
    """Lower bound ``1 + alpha/n + lam alpha - 2 sqrt(lam alpha^2)`` on the support of the PT law."""
    return 1 + jump / n + rate * jump - 2 * math.sqrt(rate * jump * jump)


def k_bound_f(n: int, k: int, rate: float, jump: float) -> float:
    """``f(n) = (alpha(1+sqrt lam)^2 + 1) + (n/k - 1) m - 2 sigma sqrt(n/k - 1)``.

    Here ``m = lam alpha + 1`` and ``sigma^2 = lam alpha^2`` are the mean and
    variance of the limit law of ``X``; ``f(n) > 0`` certifies k-block positivity.
    """
    if k < 1 or n < k:
        raise DomainError(f"need n >= k >= 1, got n={n}, k={k}")
    lo, hi = freecalc.shifted_mp_support(rate, jump, 1)
    mean = rate * jump + 1
    var = rate * jump * jump
    return freecalc.support_bound_free_power(lo, hi, mean, var, n / k).x1


def min_n_for_k(k: int, rate: float, jump: float, n_max: int = 64) -> Optional[int]:
    """Smallest ``n`` in ``[k, n_max]`` with ``f(n) > 0``, else ``None``."""
    if n_max < k:
        raise DomainError(f"n_max={n_max} is below k={k}")
    if rate * jump + 1 <= 0:
        return None
    for n in range(k, n_max + 1):
        if k_bound_f(n, k, rate, jump) > 0:
            if not window_holds(n, rate, jump):
                log.warning("f(%d) > 0 but the PPT window fails at n=%d", n, n)
            return n
    return None


@dataclass
class CertReport:
    params: dict
    window: tuple
    window_satisfied: bool
    supp_mu: tuple
    pt_lower_bound: float
    f_of_n: float
    min_n: Optional[int]
    min_n_window_ok: Optional[bool]
    lambda_min_x: list = field(default_factory=list)
    lambda_min_pt: list = field(default_factory=list)
    lambda_min_compressed: list = field(default_factory=list)
    moments_x: Optional[dict] = None
    moments_pt: Optional[dict] = None
    ensemble: Optional[dict] = None
    edge_slack: Optional[float] = None
    verdicts: dict = field(default_factory=dict)

    def derive_verdicts(self) -> dict:
        """Verdicts as pure functions of the recorded numbers."""
        if not self.lambda_min_x:
            return {}
        return {
            "npt": all(v < 0 for v in self.lambda_min_x),
            "ppt": all(v > 0 for v in self.lambda_min_pt),
            "kBlockPositive": self.f_of_n > 0 and all(v > 0 for v in self.lambda_min_compressed),
        }

    def to_dict(self) -> dict:
        d = {
            "schema": SCHEMA,
            "params": self.params,
            "window": list(self.window),
            "windowSatisfied": self.window_satisfied,
            "suppMu": list(self.supp_mu),
            "ptLowerBound": self.pt_lower_bound,
            "fOfN": self.f_of_n,
            "minN": self.min_n,
            "minNWindowOk": self.min_n_window_ok,
            "empirical": {
                "lambdaMinX": self.lambda_min_x,
                "lambdaMinXGamma": self.lambda_min_pt,
                "lambdaMinCompressed": self.lambda_min_compressed,
                "momentsX": self.moments_x,
                "momentsXGamma": self.moments_pt,
            },
            "ensemble": self.ensemble,
            "edgeSlack": self.edge_slack,
            "verdicts": self.verdicts,
        }
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def check_params(p: CertParams) -> CertReport:
    """Analytic part of the certificate; no sampling."""
    lo, hi = ppt_window(p.n, p.rate)
    inside = window_holds(p.n, p.rate, p.jump)
    supp = freecalc.shifted_mp_support(p.rate, p.jump, 1)
    lower = pt_lower_bound(p.n, p.rate, p.jump)
    if inside and not (supp[0] < 0 and lower > 0):
        # Would contradict the window algebra; never expected.
        raise AssertionError(f"window satisfied but supp={supp}, pt bound={lower}")
    min_n = min_n_for_k(p.k, p.rate, p.jump, max(p.k, 64))
    return CertReport(
        params=asdict(p),
        window=(lo, hi),
        window_satisfied=inside,
        supp_mu=supp,
        pt_lower_bound=lower,
        f_of_n=k_bound_f(p.n, p.k, p.rate, p.jump),
        min_n=min_n,
        min_n_window_ok=None if min_n is None else window_holds(min_n, p.rate, p.jump),
    )


def _one_trial(p: CertParams, spec: randmat.EnsembleSpec, trial: int, order: int):
    ss = randmat.trial_seed(p.seed, trial)
    matrix_seq, proj_seq = ss.spawn(2)
    x = randmat.sample(spec, rng=randmat.make_rng(matrix_seq))
    sx = randmat.eigvalsh(x)
    sg = randmat.eigvalsh(randmat.partial_transpose(x))
    sc = randmat.project_compress(x, p.k, randmat.make_rng(proj_seq))
    return (
        sx.min,
        sg.min,
        sc.min,
        randmat.empirical_moments(sx, order),
        randmat.empirical_moments(sg, order),
    )


def monte_carlo_certify(p: CertParams, threads: Optional[int] = None, order: int = 4) -> CertReport:
    """Analytic certificate plus ``p.trials`` sampled draws of ``I + alpha W``."""
    report = check_params(p)
    spec = randmat.EnsembleSpec("shiftedWishart", p.n, p.N, rate=p.rate, jump=p.jump, shift=1.0, seed=p.seed)
    results = randmat.run_trials(lambda t: _one_trial(p, spec, t, order), p.trials, threads)
    report.lambda_min_x = [r[0] for r in results]
    report.lambda_min_pt = [r[1] for r in results]
    report.lambda_min_compressed = [r[2] for r in results]
    mx = randmat.moment_stats([r[3] for r in results])
    mg = randmat.moment_stats([r[4] for r in results])
    report.moments_x = {"mean": list(mx.mean), "stderr": list(mx.stderr)}
    report.moments_pt = {"mean": list(mg.mean), "stderr": list(mg.stderr)}
    report.ensemble = dict(spec.to_dict(), lambdaRealized=spec.rate_realized)
    report.edge_slack = edge_slack(p.N)
    report.verdicts = report.derive_verdicts()
    return report
