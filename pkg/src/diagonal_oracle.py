from collections import Counter
from dataclasses import dataclass, field
from logging import getLogger
from math import factorial, fsum, log, prod
from sys import float_info
from typing import Iterator

import numpy as np

from src.arith_tables import (
    FactorTables,
    MollifierSpec,
    convolve_b,
    head_bound,
    head_length,
    mollifier_coeffs,
)
from src.enums import MomentMethod
from src.exceptions import CapacityError
from src.measure_engine import MomentResult, diagonal_mass

DEFAULT_TUPLE_BUDGET = 2_000_000


@dataclass(frozen=True)
class DiagonalSum:
    """Sum over the diagonal n * n_1 ... n_k = m, before normalization by the diagonal mass"""

    value: float
    terms_enumerated: int
    k: int
    constraint: float
    abs_sum: float = 0.0


def multiset_multiplicity(parts: tuple[int, ...]) -> int:
    """Number of distinct orderings of a multiset

    >>> multiset_multiplicity((2, 2, 3))
    3
    >>> multiset_multiplicity(())
    1
    """
    return factorial(len(parts)) // prod(factorial(c) for c in Counter(parts).values())


def enumerate_prime_power_tuples(
    k: int,
    bound: float,
    tables: FactorTables,
    part_bound: float | None = None,
    primes_only: bool = False,
) -> Iterator[tuple[tuple[int, ...], int]]:
    """Yields nondecreasing k-tuples of prime powers with product < bound, with their ordering multiplicity

    Args:
        part_bound: Strict upper bound on every entry (T^alpha for Z_alpha).
        primes_only: Restrict the entries to primes.
    """
    limit = bound if part_bound is None else min(bound, part_bound)
    candidates = tables.prime_powers[tables.prime_powers < limit]
    if primes_only:
        candidates = candidates[tables.big_omega[candidates] == 1]
    candidates = candidates.tolist()

    def extend(prefix: tuple[int, ...], product: int, start: int):
        if len(prefix) == k:
            yield prefix, multiset_multiplicity(prefix)
            return
        for i in range(start, len(candidates)):
            n = candidates[i]
            # remaining entries are at least n each
            if product * n ** (k - len(prefix)) >= bound:
                return
            yield from extend(prefix + (n,), product * n, i)

    yield from extend((), 1, 0)


def _zhat_weight(n: int, alpha: float, T: float, tables: FactorTables) -> float:
    return float(tables.mangoldt[n]) * (1 - log(n) / (alpha * log(T)))


def diagonal_sum(
    a: np.ndarray,
    k: int,
    alpha: float,
    T: float,
    tables: FactorTables,
    tuple_budget: int = DEFAULT_TUPLE_BUDGET,
    primes_only: bool = False,
) -> DiagonalSum:
    """Sum over tuples of prod Lambda_hat(n_j) * sum_{n N < T0} a(n) a(n N) / (n N), N = prod n_j

    The global factor (-2 / (alpha log T))^k is not applied here.
    """
    bound = head_bound(T)
    a_length = len(a) - 1
    terms, magnitudes = [], []
    count = 0
    for parts, multiplicity in enumerate_prime_power_tuples(
        k, bound, tables, part_bound=T**alpha, primes_only=primes_only
    ):
        count += 1
        if count > tuple_budget:
            raise CapacityError(f"Diagonal enumeration exceeds the budget of {tuple_budget} tuples")
        N = prod(parts)
        top = a_length // N
        n = np.arange(1, top + 1)
        inner = fsum((a[1 : top + 1] * a[N : N * top + 1 : N] / (n * N)).tolist())
        weight = multiplicity * prod(_zhat_weight(p, alpha, T, tables) for p in parts)
        terms.append(weight * inner)
        magnitudes.append(abs(weight * inner))
    return DiagonalSum(
        value=fsum(terms),
        terms_enumerated=count,
        k=k,
        constraint=bound,
        abs_sum=fsum(magnitudes),
    )


def diagonal_moment(
    spec: MollifierSpec,
    k: int,
    alpha: float,
    T: float,
    tables: FactorTables,
    tuple_budget: int = DEFAULT_TUPLE_BUDGET,
) -> MomentResult:
    """Pseudo-moment of order k from the diagonal terms alone, normalized by the diagonal mass"""
    if k < 0:
        raise ValueError(f"Invalid moment order: {k}")
    coeffs = mollifier_coeffs(spec, T, tables)
    mass = diagonal_mass(coeffs)
    if k == 0:
        return MomentResult(value=1.0, method=MomentMethod.DIAGONAL, components={"terms": 0})
    raw = diagonal_sum(coeffs.values, k, alpha, T, tables, tuple_budget)
    factor = (-2 / (alpha * log(T))) ** k / mass
    getLogger().info(
        f"Diagonal k={k} {spec.label} T={T:g}: {raw.terms_enumerated} tuples, sum {raw.value:.12g}"
    )
    return MomentResult(
        value=raw.value * factor,
        method=MomentMethod.DIAGONAL,
        err_estimate=4 * float_info.epsilon * raw.abs_sum * abs(factor),
        components={"terms": raw.terms_enumerated, "diag_mass": mass},
    )


def head_sum_bsq(
    spec: MollifierSpec,
    alpha: float,
    T: float,
    tables: FactorTables,
    normalized: bool = False,
) -> float:
    """sum over m < T/log^2 T of b(m)^2 / m, optionally divided by the diagonal mass"""
    b = convolve_b(spec, alpha, T, tables, upto=head_length(T))
    m = b.support
    value = fsum((b.values[m] ** 2 / m).tolist())
    if normalized:
        value /= diagonal_mass(mollifier_coeffs(spec, T, tables))
    return value


@dataclass(frozen=True)
class LambdaSignReport:
    """Term-by-term comparison of the lambda_2 and lambda diagonal sums over prime tuples"""

    order: int
    restricted_lambda: float
    restricted_lambda2: float
    relative_residual: float
    prime_power_residual: float
    odd_sign_table: dict[int, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.relative_residual <= 1e-12 and all(self.odd_sign_table.values())


def odd_sign_table(
    tables: FactorTables, orders: tuple[int, ...] = (1, 3, 5, 7), samples: int = 2000, seed: int = 0
) -> dict[int, bool]:
    """Checks lambda_2(n) lambda_2(n m) = +-lambda(n) for Omega(m) = k odd, + when k = 1 mod 4

    n and m are drawn at random from the tables with n m within range.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    omega = tables.big_omega.astype(np.int64)
    results = {}
    for k in orders:
        candidates = np.flatnonzero(omega[: tables.limit // 2 + 1] == k)
        candidates = candidates[candidates >= 2]
        if candidates.size == 0:
            getLogger().warning(f"No integer with Omega = {k} below {tables.limit // 2}")
            results[k] = False
            continue
        m = rng.choice(candidates, size=samples)
        n = np.floor(rng.random(samples) * (tables.limit // m)).astype(np.int64) + 1
        expected = (1 if k % 4 == 1 else -1) * (1 - 2 * (omega[n] % 2))
        observed = (1 - 2 * ((omega[n] // 2) % 2)) * (1 - 2 * ((omega[n * m] // 2) % 2))
        results[k] = bool(np.all(expected == observed))
    return results


def lambda2_sign_check(
    k: int,
    alpha: float,
    T: float,
    tables: FactorTables,
    tuple_budget: int = DEFAULT_TUPLE_BUDGET,
) -> LambdaSignReport:
    """Verifies that the lambda_2 diagonal sum of order 2k is (-1)^k times the lambda one on prime tuples

    For a tuple of 2k primes, lambda_2(n) lambda_2(n p_1 ... p_2k) = (-1)^k while
    lambda(n) lambda(n p_1 ... p_2k) = 1, so the sums agree term by term up to
    that sign. Prime-power tuples do not obey the identity; their contribution
    is reported as ``prime_power_residual`` relative to the lambda sum.
    """
    a_lambda = mollifier_coeffs(MollifierSpec.liouville(), T, tables).values
    a_lambda2 = mollifier_coeffs(MollifierSpec.liouville_k(2), T, tables).values
    order = 2 * k
    sign = (-1) ** k

    restricted_lambda = diagonal_sum(a_lambda, order, alpha, T, tables, tuple_budget, True).value
    restricted_lambda2 = diagonal_sum(a_lambda2, order, alpha, T, tables, tuple_budget, True).value
    full_lambda = diagonal_sum(a_lambda, order, alpha, T, tables, tuple_budget).value
    full_lambda2 = diagonal_sum(a_lambda2, order, alpha, T, tables, tuple_budget).value

    relative = abs(restricted_lambda2 - sign * restricted_lambda) / abs(restricted_lambda)
    prime_power = abs(full_lambda2 - sign * full_lambda) / abs(full_lambda)
    report = LambdaSignReport(
        order=order,
        restricted_lambda=restricted_lambda,
        restricted_lambda2=restricted_lambda2,
        relative_residual=relative,
        prime_power_residual=prime_power,
        odd_sign_table=odd_sign_table(tables),
    )
    if not report.passed:
        getLogger().warning(f"lambda_2 sign identity failed for order {order} at T={T:g}")
    return report
