import struct
import zlib
from dataclasses import dataclass
from functools import cached_property
from logging import getLogger
from math import ceil, comb, isqrt, log
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

from src.enums import CacheStatus, MollifierKind
from src.exceptions import CapacityError, FitConditioningError

DEFAULT_TABLE_LIMIT_BUDGET = 50_000_000
DEFAULT_COEFF_LENGTH_BUDGET = 20_000_000
MAX_TABLE_LIMIT = 2**31

CACHE_MAGIC = b"DMLB"
CACHE_FORMAT_VERSION = 1
_CACHE_HEADER = struct.Struct("<4sBQ")
_CACHE_TRAILER = struct.Struct("<I")
# spf (u4) + big omega (u1) + mangoldt (f8)
_CACHE_BYTES_PER_ENTRY = 4 + 1 + 8

FIT_CONDITION_LIMIT = 1e8


@dataclass(frozen=True, eq=False)
class FactorTables:
    """Sieved arithmetic data for every integer in [0, limit]

    Index 0 is padding; ``spf[1] = 1`` and ``mangoldt[1] = 0``.
    """

    limit: int
    spf: np.ndarray
    big_omega: np.ndarray
    mangoldt: np.ndarray

    @cached_property
    def lambda_vals(self) -> np.ndarray:
        return (1 - 2 * (self.big_omega.astype(np.int8) & 1)).astype(np.int8)

    @cached_property
    def prime_powers(self) -> np.ndarray:
        return np.flatnonzero(self.mangoldt)

    def psi(self, x: int | None = None) -> float:
        """Chebyshev's psi(x) = sum of mangoldt[n] for n <= x"""
        stop = self.limit if x is None else min(x, self.limit)
        return float(np.sum(self.mangoldt[: stop + 1]))

    def check_covers(self, n: int, purpose: str) -> None:
        if n > self.limit:
            raise ValueError(
                f"Factor tables up to {self.limit} are too small for {purpose} (need {n})"
            )


@dataclass(frozen=True)
class MollifierSpec:
    kind: MollifierKind
    beta1: float = 0.0
    beta2: float = 1.0
    r: int = 1
    eta: int = 0
    k: int = 1

    def __post_init__(self):
        if not 0.0 <= self.beta1 <= self.beta2 <= 1.0:
            raise ValueError(
                f"Invalid flip window ({self.beta1}, {self.beta2}): need 0 <= beta1 <= beta2 <= 1"
            )
        if not 1 <= self.r <= 16:
            raise ValueError(f"Invalid divisor order r: {self.r}")
        if self.eta < 0:
            raise ValueError(f"Invalid smoothing exponent eta: {self.eta}")
        if self.k < 1:
            raise ValueError(f"Invalid Liouville order k: {self.k}")

    @classmethod
    def unit(cls) -> "MollifierSpec":
        return cls(MollifierKind.UNIT, beta1=0.0, beta2=0.0)

    @classmethod
    def liouville(cls) -> "MollifierSpec":
        return cls(MollifierKind.LIOUVILLE)

    @classmethod
    def liouville_k(cls, k: int) -> "MollifierSpec":
        return cls(MollifierKind.LIOUVILLE_K, k=k)

    @classmethod
    def interval_flip(cls, beta1: float, beta2: float) -> "MollifierSpec":
        return cls(MollifierKind.INTERVAL_FLIP, beta1=beta1, beta2=beta2)

    @classmethod
    def liouville_divisor(cls, r: int, eta: int = 0) -> "MollifierSpec":
        return cls(MollifierKind.LIOUVILLE_DIVISOR, r=r, eta=eta)

    @classmethod
    def general(cls, beta1: float, beta2: float, r: int, eta: int) -> "MollifierSpec":
        return cls(MollifierKind.GENERAL, beta1=beta1, beta2=beta2, r=r, eta=eta)

    @classmethod
    def parse(cls, text: str) -> "MollifierSpec":
        """Parses the command-line notation of a mollifier

        >>> MollifierSpec.parse("lambda-dr=2").label
        'lambda-dr=2'
        >>> MollifierSpec.parse("lambda2").kind
        <MollifierKind.LIOUVILLE_K: 'liouville_k'>
        >>> MollifierSpec.parse("flip=0.25,0.5").beta2
        0.5
        """
        name, _, argument = text.strip().partition("=")
        try:
            match name:
                case "unit":
                    return cls.unit()
                case "lambda":
                    return cls.liouville()
                case "lambda2":
                    return cls.liouville_k(2)
                case "lambdaK":
                    return cls.liouville_k(int(argument))
                case "flip":
                    beta1, beta2 = (float(x) for x in argument.split(","))
                    return cls.interval_flip(beta1, beta2)
                case "lambda-dr":
                    r, _, eta = argument.partition(",")
                    return cls.liouville_divisor(int(r), int(eta) if eta else 0)
                case "general":
                    beta1, beta2, r, eta = argument.split(",")
                    return cls.general(float(beta1), float(beta2), int(r), int(eta))
        except ValueError as e:
            raise ValueError(f"Invalid mollifier '{text}': {e}") from e
        raise ValueError(f"Invalid mollifier: {text}")

    @property
    def label(self) -> str:
        match self.kind:
            case MollifierKind.UNIT:
                return "unit"
            case MollifierKind.LIOUVILLE:
                return "lambda"
            case MollifierKind.LIOUVILLE_K:
                return "lambda2" if self.k == 2 else f"lambdaK={self.k}"
            case MollifierKind.INTERVAL_FLIP:
                return f"flip={self.beta1:g},{self.beta2:g}"
            case MollifierKind.LIOUVILLE_DIVISOR:
                return f"lambda-dr={self.r}" + (f",{self.eta}" if self.eta else "")
            case MollifierKind.GENERAL:
                return f"general={self.beta1:g},{self.beta2:g},{self.r},{self.eta}"

    @property
    def flip_window(self) -> tuple[float, float] | None:
        """Window (beta1, beta2] of primes whose sign is flipped, None for the lambda_k family"""
        if self.kind == MollifierKind.LIOUVILLE_K:
            return None
        return self.beta1, self.beta2

    @property
    def has_full_flip(self) -> bool:
        return self.flip_window == (0.0, 1.0)

    @property
    def has_empty_flip(self) -> bool:
        return self.flip_window is not None and self.beta1 == self.beta2


@dataclass(frozen=True, eq=False)
class CoeffSeries:
    """Coefficients b(1..length) of a Dirichlet polynomial, ``values[0]`` is always 0

    ``prefactor`` is a global factor that consumers multiply in exactly once.
    """

    values: np.ndarray
    scale: float
    description: str
    prefactor: float = 1.0

    @property
    def length(self) -> int:
        return len(self.values) - 1

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.values)

    def l1_bound(self) -> float:
        """sum |prefactor * b(n)| / sqrt(n), a bound for the polynomial on the critical line"""
        n = self.support
        return float(abs(self.prefactor) * np.sum(np.abs(self.values[n]) / np.sqrt(n)))

    def split(self, cutoff: float) -> tuple["CoeffSeries", "CoeffSeries"]:
        """Splits into the parts with n < cutoff and n >= cutoff"""
        index = np.arange(len(self.values))
        head = np.where(index < cutoff, self.values, 0.0)
        tail = np.where(index >= cutoff, self.values, 0.0)
        return (
            CoeffSeries(head, self.scale, f"{self.description} [n < {cutoff:g}]", self.prefactor),
            CoeffSeries(tail, self.scale, f"{self.description} [n >= {cutoff:g}]", self.prefactor),
        )


def head_bound(T: float) -> float:
    """T0 = T / log(T)^2, the strict upper bound of the mollifier length"""
    return T / log(T) ** 2


def head_length(T: float) -> int:
    """Largest n with n < T / log(T)^2"""
    return ceil(head_bound(T)) - 1


def _prime_power_rounds(
    spf: np.ndarray, upto: int
) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]:
    """Strips one prime power from every n in [2, upto] per round

    Yields (indices, primes, exponents, cofactors) for the integers still
    having a prime factor left, smallest prime first.
    """
    rest = np.arange(upto + 1, dtype=np.int64)
    rest[: min(2, upto + 1)] = 1
    while True:
        index = np.flatnonzero(rest > 1)
        if index.size == 0:
            return
        remaining = rest[index]
        primes = spf[remaining].astype(np.int64)
        exponents = np.zeros(index.size, dtype=np.int64)
        divisible = np.ones(index.size, dtype=bool)
        while divisible.any():
            divisible = remaining % primes == 0
            remaining = np.where(divisible, remaining // primes, remaining)
            exponents += divisible
        rest[index] = remaining
        yield index, primes, exponents, remaining


def build_factor_tables(N: int, budget: int = DEFAULT_TABLE_LIMIT_BUDGET) -> FactorTables:
    """Sieves smallest prime factors, Omega and Lambda for every n <= N

    Args:
        N: The inclusive limit of the tables.
        budget: The largest limit allowed by the run configuration.

    Returns:
        The FactorTables for [0, N].

    Raises:
        ValueError: If N is outside [2, 2^31].
        CapacityError: If N exceeds the budget.
    """
    if not 2 <= N <= MAX_TABLE_LIMIT:
        raise ValueError(f"Invalid table limit: {N}")
    if N > budget:
        raise CapacityError(f"Table limit {N} exceeds the configured budget {budget}")

    spf = np.zeros(N + 1, dtype=np.uint32)
    for p in range(2, isqrt(N) + 1):
        if spf[p] == 0:
            multiples = spf[p * p :: p]
            multiples[multiples == 0] = p
    unmarked = np.flatnonzero(spf == 0)
    spf[unmarked] = unmarked
    spf[0], spf[1] = 0, 1

    big_omega = np.zeros(N + 1, dtype=np.uint8)
    mangoldt = np.zeros(N + 1, dtype=np.float64)
    for round_number, (index, primes, exponents, cofactors) in enumerate(
        _prime_power_rounds(spf, N)
    ):
        big_omega[index] += exponents.astype(np.uint8)
        if round_number == 0:
            is_prime_power = cofactors == 1
            mangoldt[index[is_prime_power]] = np.log(primes[is_prime_power])

    getLogger().info(f"Built factor tables up to {N}")
    return FactorTables(limit=N, spf=spf, big_omega=big_omega, mangoldt=mangoldt)


def factorize(n: int, tables: FactorTables) -> list[tuple[int, int]]:
    """Prime factorization of n as (prime, exponent) pairs using the spf table"""
    if not 1 <= n <= tables.limit:
        raise ValueError(f"n={n} is outside the factor tables [1, {tables.limit}]")
    factors = []
    while n > 1:
        p = int(tables.spf[n])
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        factors.append((p, e))
    return factors


def lambda_k_value(n: int, k: int, tables: FactorTables) -> int:
    """(-1) ** floor(Omega(n) / k)"""
    if not 1 <= n <= tables.limit:
        raise ValueError(f"n={n} is outside the factor tables [1, {tables.limit}]")
    if k < 1:
        raise ValueError(f"Invalid Liouville order k: {k}")
    return -1 if (int(tables.big_omega[n]) // k) % 2 else 1


def divisor_r(n: int, r: int, tables: FactorTables) -> int:
    """Generalized divisor function d_r(n), the n-th coefficient of zeta(s)^r

    d_r is multiplicative with d_r(p^e) = C(e + r - 1, r - 1).
    """
    if r < 1:
        raise ValueError(f"Invalid divisor order r: {r}")
    value = 1
    for _, e in factorize(n, tables):
        value *= comb(e + r - 1, r - 1)
    return value


def multiplicative_array(
    tables: FactorTables,
    prime_power_value: Callable[[np.ndarray, np.ndarray], np.ndarray],
    upto: int,
    dtype=np.float64,
) -> np.ndarray:
    """Tabulates the multiplicative function with the given values on prime powers over [0, upto]"""
    tables.check_covers(upto, "a multiplicative function")
    values = np.ones(upto + 1, dtype=dtype)
    values[0] = 0
    for index, primes, exponents, _ in _prime_power_rounds(tables.spf, upto):
        values[index] *= prime_power_value(primes, exponents)
    return values


def prime_factor_count(
    tables: FactorTables, predicate: Callable[[np.ndarray], np.ndarray], upto: int
) -> np.ndarray:
    """Number of prime factors, with multiplicity, satisfying the predicate, for n in [0, upto]"""
    tables.check_covers(upto, "a prime factor count")
    counts = np.zeros(upto + 1, dtype=np.int64)
    for index, primes, exponents, _ in _prime_power_rounds(tables.spf, upto):
        counts[index] += exponents * predicate(primes)
    return counts


def divisor_r_array(r: int, tables: FactorTables, upto: int) -> np.ndarray:
    lookup = np.array([comb(e + r - 1, r - 1) for e in range(64)], dtype=np.int64)
    return multiplicative_array(
        tables, lambda _, exponents: lookup[exponents], upto, dtype=np.int64
    )


def liouville_k_array(k: int, tables: FactorTables, upto: int) -> np.ndarray:
    tables.check_covers(upto, "lambda_k")
    parity = (tables.big_omega[: upto + 1].astype(np.int64) // k) % 2
    return (1 - 2 * parity).astype(np.int8)


def interval_flip_signs(
    beta1: float, beta2: float, T: float, tables: FactorTables, upto: int
) -> np.ndarray:
    """Completely multiplicative sign that is -1 on primes in (T^beta1, T^beta2]"""
    low, high = T**beta1, T**beta2
    flips = prime_factor_count(tables, lambda p: (p > low) & (p <= high), upto)
    return (1 - 2 * (flips % 2)).astype(np.int8)


def _mollifier_values(spec: MollifierSpec, T: float, tables: FactorTables, length: int) -> np.ndarray:
    match spec.kind:
        case MollifierKind.UNIT:
            values = np.ones(length + 1)
        case MollifierKind.LIOUVILLE:
            values = tables.lambda_vals[: length + 1].astype(np.float64)
        case MollifierKind.LIOUVILLE_K:
            values = liouville_k_array(spec.k, tables, length).astype(np.float64)
        case MollifierKind.INTERVAL_FLIP | MollifierKind.LIOUVILLE_DIVISOR | MollifierKind.GENERAL:
            signs = interval_flip_signs(spec.beta1, spec.beta2, T, tables, length)
            values = signs * divisor_r_array(spec.r, tables, length).astype(np.float64)
            if spec.eta:
                values[1:] *= (1 - np.log(np.arange(1, length + 1)) / log(T)) ** spec.eta
        case _:
            raise ValueError(f"Invalid mollifier kind: {spec.kind}")
    values[0] = 0.0
    return values


def mollifier_coeffs(spec: MollifierSpec, T: float, tables: FactorTables) -> CoeffSeries:
    """Materializes a(n) = lambda_{beta1,beta2}(n) d_r(n) (1 - log n / log T)^eta for n < T / log^2 T"""
    if T < 100:
        raise ValueError(f"Invalid height T={T}: must be at least 100")
    length = head_length(T)
    tables.check_covers(length, f"the mollifier at T={T:g}")
    return CoeffSeries(
        values=_mollifier_values(spec, T, tables, length),
        scale=T,
        description=f"mollifier {spec.label} at T={T:g}",
    )


def _zhat_values(alpha: float, T: float, tables: FactorTables, length: int) -> np.ndarray:
    tables.check_covers(length, f"Z_alpha at T={T:g}, alpha={alpha:g}")
    values = np.zeros(length + 1)
    n = tables.prime_powers[tables.prime_powers <= length]
    values[n] = tables.mangoldt[n] * (1 - np.log(n) / (alpha * log(T)))
    return values


def zhat_coeffs(
    alpha: float,
    T: float,
    tables: FactorTables,
    length_budget: int = DEFAULT_COEFF_LENGTH_BUDGET,
) -> CoeffSeries:
    """Coefficients Lambda(n) (1 - log n / (alpha log T)) for n < T^alpha

    The global factor -2 / (alpha log T) is carried in ``prefactor``.
    """
    if alpha <= 0:
        raise ValueError(f"Invalid alpha: {alpha}")
    length = ceil(T**alpha) - 1
    if length > length_budget:
        raise CapacityError(
            f"Z_alpha needs {length} coefficients, over the budget of {length_budget}"
        )
    prefactor = -2 / (alpha * log(T))
    return CoeffSeries(
        values=_zhat_values(alpha, T, tables, length),
        scale=T,
        description=f"Z_alpha alpha={alpha:g} T={T:g} prefactor={prefactor:.12g}",
        prefactor=prefactor,
    )


def convolve_b(
    spec: MollifierSpec,
    alpha: float,
    T: float,
    tables: FactorTables,
    upto: int | None = None,
    length_budget: int = DEFAULT_COEFF_LENGTH_BUDGET,
) -> CoeffSeries:
    """Dirichlet coefficients b(m) of Z_alpha(s) * A(s)

    b(m) = -2 / (alpha log T) * sum over d | m, d = p^j < T^alpha, of
    Lambda(d) (1 - log d / (alpha log T)) a(m / d).

    Args:
        upto: Only materialize b(m) for m <= upto (the full product otherwise).
    """
    a = mollifier_coeffs(spec, T, tables).values
    a_length = len(a) - 1
    z_length = ceil(T**alpha) - 1
    length = a_length * z_length if upto is None else min(upto, a_length * z_length)
    if length > length_budget:
        raise CapacityError(
            f"b series needs {length} coefficients, over the budget of {length_budget}"
        )
    z = _zhat_values(alpha, T, tables, min(z_length, length))

    b = np.zeros(length + 1)
    for d in np.flatnonzero(z):
        top = min(a_length, length // d)
        b[d : d * top + 1 : d] += z[d] * a[1 : top + 1]
    b *= -2 / (alpha * log(T))
    return CoeffSeries(
        values=b,
        scale=T,
        description=f"b = Z_alpha * A, mollifier {spec.label}, alpha={alpha:g}, T={T:g}",
    )


def divisor_square_partial_sums(r: int, N: int, tables: FactorTables) -> np.ndarray:
    """Running sums S[j] = sum over m <= j of d_r(m)^2 / m, for j in [0, N]"""
    d = divisor_r_array(r, tables, N).astype(np.float64)
    terms = np.zeros(N + 1)
    terms[1:] = d[1:] ** 2 / np.arange(1, N + 1)
    return np.cumsum(terms)


def fit_Ar(
    r: int,
    N: int,
    tables: FactorTables,
    window: tuple[float, float] | None = None,
    samples: int = 32,
) -> float:
    """Fits sum_{m<x} d_r(m)^2 / m = c (log x)^(r^2) + c' (log x)^(r^2 - 1) and returns c

    Args:
        r: Divisor order.
        N: Upper end of the sampled range.
        tables: Factor tables covering N.
        window: Range of x sampled geometrically, (N / 100, N) by default.
        samples: Number of sample points.

    Raises:
        FitConditioningError: If the design matrix condition number exceeds FIT_CONDITION_LIMIT.
    """
    if N < 10**5:
        raise ValueError(f"fit_Ar needs N >= 10^5, got {N}")
    low, high = window or (N / 100, N)
    partial = divisor_square_partial_sums(r, int(high), tables)

    x = np.geomspace(low, high, samples)
    sums = partial[np.ceil(x).astype(np.int64) - 1]
    logs = np.log(x)
    design = np.column_stack([logs ** (r * r), logs ** (r * r - 1)])

    condition = np.linalg.cond(design)
    if condition > FIT_CONDITION_LIMIT:
        getLogger().error(f"A_{r} fit is ill-conditioned (condition number {condition:.3g})")
        raise FitConditioningError(
            f"Condition number {condition:.3g} exceeds {FIT_CONDITION_LIMIT:g}"
        )
    (c, c_prime), *_ = np.linalg.lstsq(design, sums, rcond=None)
    getLogger().info(f"A_{r} fit on [{low:g}, {high:g}]: c={c:.6g}, c'={c_prime:.6g}")
    return float(c)


def cache_file_name(N: int) -> str:
    return f"factor_tables_N{N}_v{CACHE_FORMAT_VERSION}.dmlb"


def save_factor_tables(tables: FactorTables, cache_dir: str | Path) -> Path:
    path = Path(cache_dir) / cache_file_name(tables.limit)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = b"".join(
        [
            _CACHE_HEADER.pack(CACHE_MAGIC, CACHE_FORMAT_VERSION, tables.limit),
            tables.spf.astype("<u4").tobytes(),
            tables.big_omega.astype("u1").tobytes(),
            tables.mangoldt.astype("<f8").tobytes(),
        ]
    )
    path.write_bytes(payload + _CACHE_TRAILER.pack(zlib.crc32(payload)))
    return path


def load_factor_tables(path: str | Path) -> FactorTables:
    """Reads a cache file written by save_factor_tables

    Raises:
        ValueError: If the magic, version, size or CRC-32 do not match.
    """
    data = Path(path).read_bytes()
    if len(data) < _CACHE_HEADER.size + _CACHE_TRAILER.size:
        raise ValueError(f"Truncated cache file: {path}")
    magic, version, N = _CACHE_HEADER.unpack_from(data)
    if magic != CACHE_MAGIC:
        raise ValueError(f"Not a factor table cache: {path}")
    if version != CACHE_FORMAT_VERSION:
        raise ValueError(f"Unsupported cache format version {version} in {path}")
    expected = _CACHE_HEADER.size + (N + 1) * _CACHE_BYTES_PER_ENTRY + _CACHE_TRAILER.size
    if len(data) != expected:
        raise ValueError(f"Cache file {path} has {len(data)} bytes, expected {expected}")
    payload, (crc,) = data[: -_CACHE_TRAILER.size], _CACHE_TRAILER.unpack(
        data[-_CACHE_TRAILER.size :]
    )
    if zlib.crc32(payload) != crc:
        raise ValueError(f"CRC-32 mismatch in cache file {path}")

    offset = _CACHE_HEADER.size
    spf = np.frombuffer(payload, dtype="<u4", count=N + 1, offset=offset)
    offset += 4 * (N + 1)
    big_omega = np.frombuffer(payload, dtype="u1", count=N + 1, offset=offset)
    offset += N + 1
    mangoldt = np.frombuffer(payload, dtype="<f8", count=N + 1, offset=offset)
    return FactorTables(
        limit=N,
        spf=spf.astype(np.uint32),
        big_omega=big_omega.astype(np.uint8),
        mangoldt=mangoldt.astype(np.float64),
    )


def load_or_build_factor_tables(
    N: int, cache_dir: str | Path | None = None, budget: int = DEFAULT_TABLE_LIMIT_BUDGET
) -> tuple[FactorTables, CacheStatus]:
    """Returns cached tables for N when a valid cache file exists, building (and caching) them otherwise"""
    if cache_dir is None:
        return build_factor_tables(N, budget), CacheStatus.DISABLED
    path = Path(cache_dir) / cache_file_name(N)
    status = CacheStatus.MISS
    if path.exists():
        try:
            tables = load_factor_tables(path)
            getLogger().info(f"Factor table cache hit: {path}")
            return tables, CacheStatus.HIT
        except ValueError as e:
            getLogger().warning(f"Rebuilding factor tables, cache file is unusable: {e}")
            status = CacheStatus.REBUILT
    else:
        getLogger().info(f"Factor table cache miss: {path}")
    tables = build_factor_tables(N, budget)
    save_factor_tables(tables, cache_dir)
    return tables, status
