"""Block random matrices: sampling, partial transposition and spectra.

Normalisation: every Gaussian entry has variance ``1/(nN)``, so a Wishart
matrix ``B* B`` with ``B`` of shape ``d x nN`` and ``d = round(rate * nN)``
has Marchenko-Pastur limit with support ``[(sqrt(rate)-1)^2, (sqrt(rate)+1)^2]``.

Randomness comes from numpy's counter-based Philox generator.  A trial's
stream is keyed by ``(master_seed, trial_index)`` through
:class:`numpy.random.SeedSequence`, so trials are independent of each other
and of the order in which they are executed.
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence, TypeVar

import numpy as np

from .errors import DomainError, ResourceError
from .freecalc import MomentSequence

DIM_CAP = 4096
HERMITIAN_RTOL = 1e-13
DUMP_MAGIC = b"FREEPT01"

ENSEMBLES = ("gue", "wishart", "shiftedWishart")

T = TypeVar("T")


@dataclass(frozen=True)
class EnsembleSpec:
    """Parameters of one block ensemble draw.

    ``shiftedWishart`` samples ``shift * I + jump * W``.
    """

    kind: str
    n: int
    N: int
    rate: float = 1.0
    jump: float = 1.0
    shift: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ENSEMBLES:
            raise DomainError(f"unknown ensemble {self.kind!r}; expected one of {ENSEMBLES}")
        if self.n < 1 or self.N < 1:
            raise DomainError(f"block dimensions must be positive, got n={self.n}, N={self.N}")
        if self.kind != "gue" and not self.rate > 0:
            raise DomainError(f"Wishart rate must be > 0, got {self.rate}")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")

    @property
    def dim(self) -> int:
        return self.n * self.N

    @property
    def rows(self) -> int:
        """Rows ``d`` of the Gaussian factor of a Wishart matrix."""
        return max(1, round(self.rate * self.dim))

    @property
    def rate_realized(self) -> float:
        return self.rows / self.dim

    def with_seed(self, seed: int) -> "EnsembleSpec":
        return EnsembleSpec(self.kind, self.n, self.N, self.rate, self.jump, self.shift, seed)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class BlockHermitian:
    """An ``(nN) x (nN)`` Hermitian matrix viewed as ``n x n`` blocks of size ``N``."""

    n: int
    N: int
    entries: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != self.n * self.N:
            raise DomainError(f"shape {a.shape} does not factor as ({self.n}*{self.N})^2")
        check_hermitian(a)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.n * self.N

    def block(self, i: int, j: int) -> np.ndarray:
        N = self.N
        return self.entries[i * N : (i + 1) * N, j * N : (j + 1) * N]


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigenvalues in ascending order plus their provenance."""

    eigenvalues: np.ndarray
    n: int = 1
    N: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if ev.ndim != 1:
            raise DomainError("eigenvalues must be one-dimensional")
        if ev.size > 1 and np.any(np.diff(ev) < 0):
            raise DomainError("eigenvalues must be sorted ascending")
        object.__setattr__(self, "eigenvalues", ev)

    def __len__(self) -> int:
        return self.eigenvalues.size

    @property
    def min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def max(self) -> float:
        return float(self.eigenvalues[-1])


def check_hermitian(a: np.ndarray, rtol: float = HERMITIAN_RTOL) -> None:
    scale = max(np.abs(a).max(initial=0.0), 1.0)
    if np.abs(a - a.conj().T).max(initial=0.0) > rtol * scale:
        raise DomainError("matrix is not Hermitian within tolerance")


def trial_seed(master_seed: int, trial: int) -> np.random.SeedSequence:
    """Independent stream for ``trial``; a hash of ``(master_seed, trial)``."""
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(trial),))


def make_rng(seed) -> np.random.Generator:
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(seed))


def complex_gaussian(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    """Entries ``sqrt(variance) * (g1 + i g2)/sqrt(2)`` with independent unit normals."""
    g = rng.standard_normal((2,) + tuple(shape))
    return (g[0] + 1j * g[1]) * np.sqrt(variance / 2.0)


def _check_dim(dim: int, cap: int) -> None:
    if dim > cap:
        raise ResourceError(f"matrix dimension {dim} exceeds cap {cap}")


def sample(spec: EnsembleSpec, rng: Optional[np.random.Generator] = None, dim_cap: int = DIM_CAP) -> BlockHermitian:
    """Draw one matrix of the ensemble; deterministic given ``spec.seed``."""
    D = spec.dim
    _check_dim(D, dim_cap)
    rng = make_rng(spec.seed) if rng is None else rng
    meta = {"spec": spec.to_dict()}
    if spec.kind == "gue":
        a = complex_gaussian(rng, (D, D), 1.0 / D)
        x = np.triu(a, 1)
        x = x + x.conj().T
        x[np.diag_indices(D)] = rng.standard_normal(D) / np.sqrt(D)
        return BlockHermitian(spec.n, spec.N, x, meta)

    if spec.kind == "shiftedWishart" and spec.jump == 0:
        return BlockHermitian(spec.n, spec.N, spec.shift * np.eye(D, dtype=complex), meta)
    b = complex_gaussian(rng, (spec.rows, D), 1.0 / D)
    w = b.conj().T @ b
    # Restore exact Hermitian symmetry lost to rounding in the product.
    w = np.triu(w, 1) + np.triu(w, 1).conj().T + np.diag(np.diag(w).real)
    meta["lambdaRealized"] = spec.rate_realized
    if spec.kind == "wishart":
        return BlockHermitian(spec.n, spec.N, w, meta)
    x = spec.jump * w
    x[np.diag_indices(D)] += spec.shift
    return BlockHermitian(spec.n, spec.N, x, meta)


def partial_transpose(x: BlockHermitian) -> BlockHermitian:
    """Swap blocks: block ``(i, j)`` of the result is block ``(j, i)`` of ``x``."""
    n, N = x.n, x.N
    out = x.entries.reshape(n, N, n, N).transpose(2, 1, 0, 3).reshape(n * N, n * N)
    return BlockHermitian(n, N, np.ascontiguousarray(out), dict(x.meta, partialTranspose=not x.meta.get("partialTranspose", False)))


def eigvalsh(x) -> Spectrum:
    """Ascending real spectrum of a Hermitian matrix (LAPACK ``heevd`` through numpy)."""
    if isinstance(x, BlockHermitian):
        a, n, N, meta = x.entries, x.n, x.N, x.meta
    else:
        a = np.asarray(x)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DomainError(f"expected a square matrix, got shape {a.shape}")
        check_hermitian(a)
        n, N, meta = 1, a.shape[0], {}
    return Spectrum(np.linalg.eigvalsh(a), n, N, dict(meta))


def eig_residual(a: np.ndarray) -> float:
    """``||A - Q diag(w) Q*|| / ||A||`` in the Frobenius norm."""
    w, q = np.linalg.eigh(a)
    rec = (q * w) @ q.conj().T
    return float(np.linalg.norm(a - rec) / max(np.linalg.norm(a), 1e-300))


def empirical_moments(s: Spectrum, order: int) -> MomentSequence:
    """``m_p = (1/dim) sum_i lambda_i^p`` for ``p = 1..order``."""
    if order < 1:
        raise DomainError(f"order must be >= 1, got {order}")
    ev = s.eigenvalues
    powers = np.ones_like(ev)
    out = []
    for _ in range(order):
        powers = powers * ev
        out.append(float(np.sum(powers) / ev.size))
    return MomentSequence(out)


def haar_isometry(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """``n x k`` matrix with orthonormal columns spanning a Haar-random k-plane."""
    z = complex_gaussian(rng, (n, k), 1.0)
    q, r = np.linalg.qr(z)
    # Fix the phase ambiguity of QR so the column space is Haar distributed.
    d = np.diag(r)
    return q * (d / np.abs(d))


def project_compress(x: BlockHermitian, k: int, seed) -> Spectrum:
    """Spectrum of ``(Q x I_N) X (Q x I_N)`` restricted to the range of ``Q x I_N``.

    ``Q`` is a Haar-random rank-``k`` projection on the first (``n``-dim)
    factor; the ``(n-k)N`` trivial kernel directions are excluded.
    """
    n, N = x.n, x.N
    if not 1 <= k <= n:
        raise DomainError(f"projection rank k must lie in 1..{n}, got {k}")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    v = haar_isometry(n, k, rng)
    x4 = x.entries.reshape(n, N, n, N)
    # C[(a,s),(b,t)] = sum_{i,j} conj(v[i,a]) X[(i,s),(j,t)] v[j,b]
    c = np.einsum("ia,isjt,jb->satb", v.conj(), x4, v, optimize=True).reshape(k * N, k * N)
    c = (c + c.conj().T) / 2
    return Spectrum(np.linalg.eigvalsh(c), k, N, {"compressionRank": k})


def run_trials(fn: Callable[[int], T], trials: int, threads: Optional[int] = None) -> list[T]:
    """Evaluate ``fn(0..trials-1)``; results always come back in trial order."""
    if trials < 1:
        raise DomainError(f"need at least one trial, got {trials}")
    if threads is None or threads <= 1:
        return [fn(i) for i in range(trials)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(trials)))


@dataclass(frozen=True)
class MomentStats:
    """Per-order trial mean and standard error of the mean."""

    mean: tuple
    stderr: tuple
    trials: int


def moment_stats(per_trial: Sequence[MomentSequence]) -> MomentStats:
    arr = np.array([[float(v) for v in m.values] for m in per_trial])
    t = arr.shape[0]
    mean = arr.sum(axis=0) / t  # fixed reduction order: trial index
    se = arr.std(axis=0, ddof=1) / np.sqrt(t) if t > 1 else np.full(arr.shape[1], np.inf)
    return MomentStats(tuple(mean.tolist()), tuple(se.tolist()), t)


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------


def spectrum_csv(s: Spectrum) -> str:
    lines = ["index,eigenvalue"]
    lines.extend(f"{i},{float(v)!r}" for i, v in enumerate(s.eigenvalues))
    return "\n".join(lines) + "\n"


def spectrum_sidecar(spec: EnsembleSpec, trial: int) -> str:
    return json.dumps({"spec": spec.to_dict(), "lambdaRealized": spec.rate_realized, "trial": trial}, sort_keys=True)


def dump_matrix(x: BlockHermitian) -> bytes:
    """Debug dump: ``FREEPT01``, two little-endian uint32 dims, then row-major re/im float64 pairs."""
    a = np.ascontiguousarray(x.entries, dtype="<c16")
    return DUMP_MAGIC + struct.pack("<II", x.n, x.N) + a.tobytes()


def load_matrix(buf: bytes) -> BlockHermitian:
    if buf[:8] != DUMP_MAGIC:
        raise DomainError("not a FREEPT01 matrix dump")
    n, N = struct.unpack("<II", buf[8:16])
    D = n * N
    a = np.frombuffer(buf[16:], dtype="<c16")
    if a.size != D * D:
        raise DomainError(f"dump holds {a.size} entries, expected {D * D}")
    return BlockHermitian(n, N, a.reshape(D, D).copy())


# --------------------------------------------------------------------------
# repeated-trial simulation
# --------------------------------------------------------------------------


@dataclass
class SimResult:
    """Trial statistics for one view of the ensemble (``X`` or ``X^Gamma``)."""

    moments: MomentStats
    lambda_min: list
    lambda_max: list
    spectra: Optional[list] = None


def simulate(
    spec: EnsembleSpec,
    trials: int,
    order: int = 4,
    threads: Optional[int] = None,
    keep_spectra: bool = False,
) -> dict[str, SimResult]:
    """Sample ``trials`` matrices with seeds derived from ``spec.seed``.

    Returns statistics keyed ``"x"`` (the matrix) and ``"pt"`` (its partial
    transpose).
    """

    def one(t: int):
        x = sample(spec, rng=make_rng(trial_seed(spec.seed, t)))
        return eigvalsh(x), eigvalsh(partial_transpose(x))

    pairs = run_trials(one, trials, threads)
    out = {}
    for key, idx in (("x", 0), ("pt", 1)):
        specs = [p[idx] for p in pairs]
        out[key] = SimResult(
            moment_stats([empirical_moments(s, order) for s in specs]),
            [s.min for s in specs],
            [s.max for s in specs],
            specs if keep_spectra else None,
        )
    return out


def limit_cumulants(spec: EnsembleSpec, order: int, partial: bool = False):
    """Free cumulants of the large-N limit law of the ensemble (or of its partial transpose)."""
    from . import freecalc as fc

    if spec.kind == "gue":
        k = fc.Semicircle().cumulants(order)
    elif spec.kind == "wishart":
        k = fc.free_poisson_cumulants(spec.rate, 1, order)
    else:
        k = fc.Shifted(fc.FreePoisson(spec.rate, spec.jump), spec.shift).cumulants(order)
    return fc.pt_cumulants(k, spec.n) if partial else k
