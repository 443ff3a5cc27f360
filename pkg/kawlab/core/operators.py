"""
Structured measurement operators A = P_Omega D U, dyadic level structures,
multilevel random sampling and local coherence.

Indices are 0-based internally and 1-based in every text format.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterator, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from kawlab.common.constants import MAX_COHERENCE_N, MAX_PROJECTOR_COLS, MAX_SVD_DIM
from kawlab.common.errors import ArgumentError, ConfigError, SizeError
from kawlab.common.helpers import require_power_of_two
from kawlab.core.tensor_linalg import FORWARD, INVERSE, dft, fwht_sequency, haar_dwt, svd_small

logger = logging.getLogger(__name__)

STRUCTURED_KINDS = ("fourier", "walsh", "identity")
OPERATOR_KINDS = STRUCTURED_KINDS + ("dense",)


def frequency_order(n: int) -> np.ndarray:
    """DFT bins ordered by |frequency|: 0, 1, -1, 2, -2, ..., N/2 (as bin indices)."""
    require_power_of_two(n)
    order = [0]
    for f in range(1, n // 2):
        order.extend([f, n - f])
    if n > 1:
        order.append(n // 2)
    return np.asarray(order, dtype=np.int64)


def dyadic_levels(r: int) -> Tuple[int, ...]:
    """(1, 2, 4, ..., 2^(r-1))."""
    if r < 1:
        raise ArgumentError(f"level count must be >= 1, got {r}")
    return tuple(2 ** (l - 1) for l in range(1, r + 1))


def _bounds(levels: Sequence[int]) -> list:
    out, prev = [], 0
    for edge in levels:
        out.append((prev, int(edge)))
        prev = int(edge)
    return out


@dataclass(frozen=True)
class LevelStructure:
    """Sparsity levels M, local sparsities s, sampling levels N and the weights."""

    sparsity_levels: Tuple[int, ...]
    local_sparsities: Tuple[int, ...]
    sampling_levels: Tuple[int, ...]
    empty_level_weight: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "sparsity_levels", tuple(int(v) for v in self.sparsity_levels))
        object.__setattr__(self, "local_sparsities", tuple(int(v) for v in self.local_sparsities))
        object.__setattr__(self, "sampling_levels", tuple(int(v) for v in self.sampling_levels))
        M, s, Nv = self.sparsity_levels, self.local_sparsities, self.sampling_levels
        if not M or len(s) != len(M):
            raise ArgumentError(f"need one local sparsity per level, got {len(s)} for {len(M)} levels")
        if any(b <= a for a, b in zip((0,) + M, M)):
            raise ArgumentError(f"sparsity levels must be strictly increasing positive integers: {M}")
        if not Nv or any(b <= a for a, b in zip((0,) + Nv, Nv)):
            raise ArgumentError(f"sampling levels must be strictly increasing positive integers: {Nv}")
        if M[-1] != Nv[-1]:
            raise ArgumentError(f"M_r = {M[-1]} and N_r = {Nv[-1]} must both equal N")
        for l, ((lo, hi), sl) in enumerate(zip(_bounds(M), s), start=1):
            if not 0 <= sl <= hi - lo:
                raise ArgumentError(f"s_{l} = {sl} outside [0, {hi - lo}]")

    @classmethod
    def dyadic(cls, r: int, local_sparsities: Optional[Sequence[int]] = None, **kwargs) -> "LevelStructure":
        levels = dyadic_levels(r)
        s = tuple(local_sparsities) if local_sparsities is not None else (0,) * r
        return cls(levels, s, levels, **kwargs)

    def with_sparsities(self, local_sparsities: Sequence[int]) -> "LevelStructure":
        return LevelStructure(self.sparsity_levels, tuple(local_sparsities), self.sampling_levels,
                              self.empty_level_weight)

    @property
    def r(self) -> int:
        return len(self.sparsity_levels)

    @property
    def n(self) -> int:
        return self.sparsity_levels[-1]

    @property
    def total_sparsity(self) -> int:
        return sum(self.local_sparsities)

    @property
    def sparsity_bounds(self) -> list:
        return _bounds(self.sparsity_levels)

    @property
    def sampling_bounds(self) -> list:
        return _bounds(self.sampling_levels)

    @property
    def sampling_sizes(self) -> Tuple[int, ...]:
        return tuple(hi - lo for lo, hi in self.sampling_bounds)

    @property
    def weights(self) -> Tuple[float, ...]:
        """omega_l = sqrt(s / s_l); empty levels get sqrt(s N) unless overridden."""
        s = self.total_sparsity
        if s == 0:
            return (1.0,) * self.r
        sentinel = self.empty_level_weight if self.empty_level_weight is not None else math.sqrt(s * self.n)
        return tuple(math.sqrt(s / sl) if sl > 0 else sentinel for sl in self.local_sparsities)

    def weight_vector(self) -> np.ndarray:
        out = np.empty(self.n)
        for (lo, hi), w in zip(self.sparsity_bounds, self.weights):
            out[lo:hi] = w
        return out

    def sparsity_level_of(self) -> np.ndarray:
        """0-based sparsity level index of every coefficient."""
        out = np.empty(self.n, dtype=np.int64)
        for l, (lo, hi) in enumerate(self.sparsity_bounds):
            out[lo:hi] = l
        return out


@dataclass(frozen=True, eq=False)
class SamplingScheme:
    """Sorted 0-based sample positions with the per-level budgets that drew them."""

    omega: np.ndarray
    budgets: Tuple[int, ...]
    sampling_levels: Tuple[int, ...]
    seed: int = 0
    allow_repeats: bool = False

    @property
    def r(self) -> int:
        return len(self.sampling_levels)

    @property
    def n(self) -> int:
        return self.sampling_levels[-1]

    @property
    def m(self) -> int:
        return int(self.omega.size)

    def counts_per_level(self) -> Tuple[int, ...]:
        return tuple(int(np.count_nonzero((self.omega >= lo) & (self.omega < hi)))
                     for lo, hi in _bounds(self.sampling_levels))

    def to_text(self) -> str:
        lines = [f"OMEGA r={self.r} seed={self.seed}"]
        lines.extend(str(int(i) + 1) for i in self.omega)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SamplingScheme":
        rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not rows or not rows[0].startswith("OMEGA"):
            raise ConfigError("expected 'OMEGA r=<r> seed=<seed>' header", line=1)
        fields = dict(tok.split("=", 1) for tok in rows[0].split()[1:])
        try:
            r, seed = int(fields["r"]), int(fields["seed"])
        except (KeyError, ValueError) as e:
            raise ConfigError(f"bad OMEGA header: {rows[0]!r}", line=1) from e
        levels = dyadic_levels(r)
        omega = np.asarray([int(v) - 1 for v in rows[1:]], dtype=np.int64)
        if omega.size and (omega.min() < 0 or omega.max() >= levels[-1]):
            raise SizeError(f"scheme index outside 1..{levels[-1]}")
        omega = np.sort(omega)
        counts = tuple(int(np.count_nonzero((omega >= lo) & (omega < hi))) for lo, hi in _bounds(levels))
        return cls(omega, counts, levels, seed, allow_repeats=bool(np.any(np.diff(omega) == 0)))


def draw_multilevel_scheme(budgets: Sequence[int], sampling_levels: Sequence[int], seed: int,
                           allow_repeats: bool = False) -> SamplingScheme:
    """
    Multilevel random sampling: m_k uniform draws in each band (N_{k-1}, N_k].

    Repeats are redrawn by default so each band holds exactly m_k distinct
    indices; ``allow_repeats`` keeps independent draws with multiplicity.
    """
    budgets = tuple(int(b) for b in budgets)
    levels = tuple(int(v) for v in sampling_levels)
    if len(budgets) != len(levels):
        raise ArgumentError(f"{len(budgets)} budgets for {len(levels)} sampling levels")
    rng = np.random.default_rng(seed)
    picked = []
    for k, ((lo, hi), mk) in enumerate(zip(_bounds(levels), budgets), start=1):
        size = hi - lo
        if mk < 0 or mk > size:
            raise ArgumentError(f"budget m_{k} = {mk} outside [0, {size}]")
        if mk == size and not allow_repeats:
            picked.extend(range(lo, hi))
            continue
        if allow_repeats:
            picked.extend(int(v) for v in rng.integers(lo, hi, size=mk))
            continue
        chosen = set()
        while len(chosen) < mk:
            chosen.add(int(rng.integers(lo, hi)))
        picked.extend(chosen)
    omega = np.sort(np.asarray(picked, dtype=np.int64))
    logger.debug(f"drew scheme seed={seed} budgets={budgets} |Omega|={omega.size}")
    return SamplingScheme(omega, budgets, levels, int(seed), allow_repeats)


def sampling_matrix_D(budgets: Sequence[int], sampling_levels: Sequence[int]) -> np.ndarray:
    """Per-level scaling d_k = sqrt((N_k - N_{k-1}) / m_k), or 1 when m_k = 0."""
    out = []
    for (lo, hi), mk in zip(_bounds(sampling_levels), budgets):
        out.append(math.sqrt((hi - lo) / mk) if mk else 1.0)
    return np.asarray(out)


def _budget_log_factor(n: int, m_total: int, s_total: int, nu: float) -> float:
    return (math.log(n) ** 3 * math.log(2 * max(m_total, 1)) * math.log(2 * max(s_total, 1)) ** 2
            + math.log(n) * math.log(1.0 / nu))


def _solve_budgets(s: Sequence[int], sampling_levels: Sequence[int], nu: float, C: float,
                   effective: Callable[[int], float]) -> Tuple[int, ...]:
    if not 0 < nu < 1:
        raise ArgumentError(f"nu must lie in (0, 1), got {nu}")
    sizes = [hi - lo for lo, hi in _bounds(sampling_levels)]
    if len(s) != len(sizes):
        raise ArgumentError(f"{len(s)} sparsities for {len(sizes)} sampling levels")
    n = int(sampling_levels[-1])
    s_total = int(sum(s))
    # m enters its own formula through log(2m); iterate down from m = N
    m_total = n
    budgets: Tuple[int, ...] = ()
    for _ in range(100):
        L = _budget_log_factor(n, m_total, s_total, nu)
        budgets = tuple(min(size, int(math.ceil(C * effective(k) * L - 1e-12))) for k, size in enumerate(sizes))
        new_total = sum(budgets)
        if new_total == m_total:
            break
        m_total = new_total
    return budgets


def walsh_budgets(s: Sequence[int], sampling_levels: Sequence[int], nu: float, C: float = 1.0) -> Tuple[int, ...]:
    """m_k = ceil(C s_k L), clipped to the band size."""
    s = [int(v) for v in s]
    return _solve_budgets(s, sampling_levels, nu, C, lambda k: s[k])


def fourier_budgets(s: Sequence[int], sampling_levels: Sequence[int], nu: float, C: float = 1.0) -> Tuple[int, ...]:
    """Fourier budgets with the cross-level decay terms 2^-(k-l) and 2^-3(l-k)."""
    s = [int(v) for v in s]
    r = len(s)

    def effective(k: int) -> float:
        below = sum(s[l] * 2.0 ** (-(k - l)) for l in range(k))
        above = sum(s[l] * 2.0 ** (-3 * (l - k)) for l in range(k + 1, r))
        return s[k] + below + above

    return _solve_budgets(s, sampling_levels, nu, C, effective)


@dataclass(frozen=True, eq=False)
class MeasurementOperator:
    """
    A = P_Omega D U.

    ``rows`` are 0-based positions in the ordered transform output (DFT bins in
    frequency_order, Walsh rows in sequency order); ``d`` scales each row.
    Dense operators carry an explicit matrix instead.
    """

    kind: str
    n: int
    rows: np.ndarray
    d: np.ndarray
    matrix: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise ArgumentError(f"unknown operator kind {self.kind!r}")
        if self.kind != "dense":
            require_power_of_two(self.n, "operator length")
        if self.rows.shape != self.d.shape:
            raise SizeError("rows and scaling must have the same length")
        if self.rows.size == 0:
            raise ArgumentError("operator needs at least one row")

    @classmethod
    def structured(cls, kind: str, n: int, omega: Sequence[int], d=None) -> "MeasurementOperator":
        rows = np.asarray(omega, dtype=np.int64)
        if rows.size and (rows.min() < 0 or rows.max() >= n):
            raise SizeError(f"row index outside 0..{n - 1}")
        scale = np.ones(rows.size) if d is None else np.asarray(d, dtype=float)
        return cls(kind, int(n), rows, scale)

    @classmethod
    def from_scheme(cls, kind: str, scheme: SamplingScheme, scaled: bool = True) -> "MeasurementOperator":
        if not scaled:
            return cls.structured(kind, scheme.n, scheme.omega)
        per_level = sampling_matrix_D(scheme.budgets, scheme.sampling_levels)
        level_of = np.searchsorted(np.asarray(scheme.sampling_levels), scheme.omega, side="right")
        return cls.structured(kind, scheme.n, scheme.omega, per_level[level_of])

    @classmethod
    def identity(cls, n: int) -> "MeasurementOperator":
        return cls.structured("identity", n, np.arange(n))

    @classmethod
    def dense(cls, matrix) -> "MeasurementOperator":
        mat = np.atleast_2d(np.asarray(matrix, dtype=complex))
        return cls("dense", mat.shape[1], np.arange(mat.shape[0]), np.ones(mat.shape[0]), mat)

    @property
    def m(self) -> int:
        return int(self.rows.size)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.m, self.n

    @cached_property
    def has_repeats(self) -> bool:
        return bool(np.unique(self.rows).size != self.rows.size)

    @property
    def is_structured(self) -> bool:
        return self.kind in STRUCTURED_KINDS and not self.has_repeats

    def _check(self, v: np.ndarray, length: int, what: str) -> np.ndarray:
        arr = np.asarray(v, dtype=complex)
        if arr.ndim == 0 or arr.shape[-1] != length:
            raise SizeError(f"{what} has length {arr.shape[-1] if arr.ndim else 0}, expected {length}")
        return arr

    def ordered_transform(self, x: np.ndarray) -> np.ndarray:
        """Full transform U x with rows in sampling order (frequency_order for DFT, sequency for Walsh)."""
        if self.kind == "fourier":
            return dft(x, FORWARD)[..., frequency_order(self.n)]
        if self.kind == "walsh":
            return fwht_sequency(x, FORWARD)
        return x

    def ordered_inverse(self, c: np.ndarray) -> np.ndarray:
        if self.kind == "fourier":
            natural = np.empty_like(c)
            natural[..., frequency_order(self.n)] = c
            return dft(natural, INVERSE)
        if self.kind == "walsh":
            return fwht_sequency(c, INVERSE)
        return c

    def apply(self, x) -> np.ndarray:
        x = self._check(x, self.n, "signal")
        if self.kind == "dense":
            return x @ self.matrix.T
        return self.d * self.ordered_transform(x)[..., self.rows]

    def adjoint(self, y) -> np.ndarray:
        y = self._check(y, self.m, "measurement")
        if self.kind == "dense":
            return y @ self.matrix.conj()
        batch = y.shape[:-1]
        full = np.zeros((self.n,) + batch, dtype=complex)
        np.add.at(full, self.rows, np.moveaxis(self.d * y, -1, 0))
        return self.ordered_inverse(np.moveaxis(full, 0, -1))

    @cached_property
    def _dense_pinv(self) -> np.ndarray:
        return np.linalg.pinv(self.to_dense())

    def pinv_apply(self, y) -> np.ndarray:
        """Minimum-norm least-squares solution; lands in N(A)^perp."""
        y = self._check(y, self.m, "measurement")
        if self.is_structured:
            return self.adjoint(y / self.d ** 2)
        return y @ self._dense_pinv.T

    def to_dense(self) -> np.ndarray:
        if self.kind == "dense":
            return self.matrix
        return self.apply(np.eye(self.n, dtype=complex)).T

    @cached_property
    def _singular_values(self) -> np.ndarray:
        mat = self.to_dense()
        if max(mat.shape) <= MAX_SVD_DIM:
            return svd_small(mat).s
        return np.linalg.svd(mat, compute_uv=False)

    def norm(self) -> float:
        """Spectral norm sigma_max."""
        if self.is_structured:
            return float(np.max(np.abs(self.d)))
        return float(self._singular_values[0])

    def sigma_min(self) -> float:
        """Smallest of the min(m, N) singular values."""
        if self.is_structured and self.m <= self.n:
            return float(np.min(np.abs(self.d)))
        return float(self._singular_values[-1])

    def scaled(self, factor: float) -> "MeasurementOperator":
        if self.kind == "dense":
            return MeasurementOperator.dense(factor * self.matrix)
        return MeasurementOperator(self.kind, self.n, self.rows, factor * self.d)

    def to_text(self) -> str:
        """
        ``OPERATOR kind=<kind> n=<N> m=<m>`` then one line per row: the
        1-based position and its scaling, or for dense operators the row
        entries as ``re im`` pairs.
        """
        lines = [f"OPERATOR kind={self.kind} n={self.n} m={self.m}"]
        if self.kind == "dense":
            lines.extend(" ".join(f"{v.real:.17g} {v.imag:.17g}" for v in row) for row in self.matrix)
        else:
            lines.extend(f"{int(i) + 1} {di:.17g}" for i, di in zip(self.rows, self.d))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MeasurementOperator":
        rows = [(no, ln.strip()) for no, ln in enumerate(text.splitlines(), start=1)
                if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows or not rows[0][1].startswith("OPERATOR"):
            raise ConfigError("expected 'OPERATOR kind=<kind> n=<N> m=<m>' header", line=1)
        head_line, head = rows[0]
        try:
            fields = dict(tok.split("=", 1) for tok in head.split()[1:])
            kind, n, m = fields["kind"], int(fields["n"]), int(fields["m"])
        except (KeyError, ValueError) as e:
            raise ConfigError(f"bad OPERATOR header: {head!r}", line=head_line) from e
        body = rows[1:]
        if len(body) != m:
            raise SizeError(f"header declares {m} rows, found {len(body)}")
        if kind == "dense":
            matrix = np.empty((m, n), dtype=complex)
            for i, (no, line) in enumerate(body):
                vals = line.split()
                if len(vals) != 2 * n:
                    raise ConfigError(f"dense row needs {2 * n} numbers, got {len(vals)}", line=no)
                pairs = np.asarray(vals, dtype=float).reshape(n, 2)
                matrix[i] = pairs[:, 0] + 1j * pairs[:, 1]
            return cls.dense(matrix)
        positions, scale = [], []
        for no, line in body:
            parts = line.split()
            if len(parts) != 2:
                raise ConfigError(f"expected '<row> <scale>', got {line!r}", line=no)
            positions.append(int(parts[0]) - 1)
            scale.append(float(parts[1]))
        return cls.structured(kind, n, positions, scale)


class KernelProjectors(NamedTuple):
    project_kernel: Callable[[np.ndarray], np.ndarray]
    project_cokernel: Callable[[np.ndarray], np.ndarray]


def _dense_row_space(A: MeasurementOperator) -> np.ndarray:
    if A.n > MAX_PROJECTOR_COLS:
        raise SizeError(f"dense projectors limited to {MAX_PROJECTOR_COLS} columns, got {A.n}")
    mat = A.to_dense()
    if max(mat.shape) <= MAX_SVD_DIM:
        _, s, vh = svd_small(mat)
    else:
        _, s, vh = np.linalg.svd(mat, full_matrices=False)
    tol = max(mat.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    return vh[s > tol].conj().T


def kernel_projectors(A: MeasurementOperator) -> KernelProjectors:
    """Orthogonal projectors onto N(A) and N(A)^perp."""
    if A.is_structured:
        def cokernel(x):
            return A.pinv_apply(A.apply(x))
    else:
        basis = _dense_row_space(A)

        def cokernel(x):
            x = np.asarray(x, dtype=complex)
            return (x @ basis.conj()) @ basis.T

    def kernel(x):
        x = np.asarray(x, dtype=complex)
        return x - cokernel(x)

    return KernelProjectors(kernel, cokernel)


def kernel_basis(A: MeasurementOperator) -> np.ndarray:
    """Orthonormal basis of N(A) as columns (N x dim N(A))."""
    if A.is_structured:
        unsampled = np.setdiff1d(np.arange(A.n), A.rows)
        coeffs = np.zeros((unsampled.size, A.n), dtype=complex)
        coeffs[np.arange(unsampled.size), unsampled] = 1.0
        return A.ordered_inverse(coeffs).T
    row_space = _dense_row_space(A)
    if row_space.shape[1] == A.n:
        return np.zeros((A.n, 0), dtype=complex)
    full = np.linalg.svd(A.to_dense(), full_matrices=True)[2]
    return full[row_space.shape[1]:].conj().T


def random_unit(project: Callable[[np.ndarray], np.ndarray], rng: np.random.Generator, n: int) -> np.ndarray:
    """Unit vector in the range of ``project`` from a projected complex Gaussian."""
    for _ in range(100):
        v = project(rng.standard_normal(n) + 1j * rng.standard_normal(n))
        nrm = np.linalg.norm(v)
        if nrm > 1e-8:
            return v / nrm
    raise ArgumentError("subspace is trivial")


def random_sparse_in_levels(levels: LevelStructure, rng: np.random.Generator,
                            norm_range: Tuple[float, float] = (0.2, 1.0)) -> np.ndarray:
    """Coefficients with s_l random entries in level l and a norm drawn from ``norm_range``."""
    if levels.total_sparsity == 0:
        raise ArgumentError("every level has sparsity zero")
    c = np.zeros(levels.n, dtype=complex)
    for (lo, hi), sl in zip(levels.sparsity_bounds, levels.local_sparsities):
        if sl:
            idx = rng.choice(np.arange(lo, hi), size=sl, replace=False)
            c[idx] = rng.standard_normal(sl) + 1j * rng.standard_normal(sl)
    return c * (rng.uniform(*norm_range) / np.linalg.norm(c))


def local_coherence(kind: str, levels: LevelStructure, block: int = 256) -> np.ndarray:
    """
    r x r matrix of mu_{k,l} = max |(U H*)_{ij}|^2 over sampling band k and
    sparsity level l, with H the Haar transform.
    """
    n = levels.n
    if n > MAX_COHERENCE_N:
        raise SizeError(f"local coherence limited to N <= {MAX_COHERENCE_N}, got {n}")
    if kind not in STRUCTURED_KINDS:
        raise ArgumentError(f"coherence needs a structured kind, got {kind!r}")
    probe = MeasurementOperator.structured(kind, n, np.arange(n))
    r = levels.r
    mu = np.zeros((r, r))
    row_starts = np.asarray([lo for lo, _ in levels.sampling_bounds])
    col_level = levels.sparsity_level_of()
    for start in range(0, n, block):
        cols = np.arange(start, min(start + block, n))
        basis = np.zeros((cols.size, n), dtype=complex)
        basis[np.arange(cols.size), cols] = 1.0
        images = probe.ordered_transform(haar_dwt(basis, INVERSE))
        band_max = np.maximum.reduceat(np.abs(images) ** 2, row_starts, axis=1)
        for l in np.unique(col_level[cols]):
            sel = col_level[cols] == l
            mu[:, l] = np.maximum(mu[:, l], band_max[sel].max(axis=0))
    return mu


def coherence_decay_constant(mu: np.ndarray, levels: LevelStructure) -> float:
    """Smallest c with mu_{k,l}(N_k - N_{k-1}) <= c 2^-(k-l) (l <= k), c 2^-3(l-k) (l > k)."""
    sizes = levels.sampling_sizes
    c = 0.0
    for k in range(mu.shape[0]):
        for l in range(mu.shape[1]):
            profile = 2.0 ** (-(k - l)) if l <= k else 2.0 ** (-3 * (l - k))
            c = max(c, mu[k, l] * sizes[k] / profile)
    return c


def coherence_csv(mu: np.ndarray) -> str:
    lines = ["k,l,mu"]
    for k in range(mu.shape[0]):
        for l in range(mu.shape[1]):
            lines.append(f"{k + 1},{l + 1},{mu[k, l]:.17g}")
    return "\n".join(lines) + "\n"


class VanishingPatterns(NamedTuple):
    count: int
    patterns: Iterator[Tuple[int, ...]]


def count_vanishing_level_patterns(r: int) -> VanishingPatterns:
    """Patterns with s_1 = 0 and 1 <= s_j <= 2^(j-2) for j > 1; there are 2^((r-1)(r-2)/2)."""
    if r < 2:
        raise ArgumentError(f"r must be >= 2, got {r}")
    count = 2 ** ((r - 1) * (r - 2) // 2)
    ranges = [range(1, 2 ** (j - 2) + 1) for j in range(2, r + 1)]
    patterns = ((0,) + combo for combo in itertools.product(*ranges))
    return VanishingPatterns(count, patterns)
