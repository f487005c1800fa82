from dataclasses import dataclass
from fractions import Fraction
from functools import cache
from logging import getLogger
from math import comb, cos, factorial, pi, sin, sqrt

import numpy as np
import sympy
from scipy import integrate, optimize, stats

from src.arith_tables import MollifierSpec
from src.enums import MollifierKind, MomentMethod
from src.measure_engine import MomentResult
from src.utils import integrate_polynomial_on_simplex, to_fraction

MAX_SIMPLEX_DEPTH = 4
MAX_EXACT_ORDER = 64
NUMERIC_SIMPLEX_TOLERANCE = 1e-10
LOGNORMAL_TRUNCATION = 1e-12

# value printed in the source derivation vs the value its own formula gives
PRINTED_CONSTANTS = {
    "mean square, alpha=1, r=1": (0.56664, Fraction(17, 30)),
    "third pseudo-moment, alpha=1": (0.16504, Fraction(52, 315)),
}


def printed_constant_discrepancies() -> list[tuple[str, float, Fraction]]:
    """Constants whose printed decimal disagrees with the exact value in its last printed digit"""
    flagged = []
    for name, (printed, exact) in PRINTED_CONSTANTS.items():
        if round(float(exact), 5) != printed:
            getLogger().warning(f"Printed constant for {name} is {printed}, exact value is {exact}")
            flagged.append((name, printed, exact))
    return flagged


def exact_pseudo_moment(k: int, alpha: Fraction | float | int = 1) -> Fraction:
    """(2 / alpha)^k * sum_i C(k, i) (-1 / alpha)^i / (k + i + 1)!

    >>> exact_pseudo_moment(1)
    Fraction(2, 3)
    >>> exact_pseudo_moment(2, 2)
    Fraction(61, 480)
    """
    if not 0 <= k <= MAX_EXACT_ORDER:
        raise ValueError(f"Invalid moment order: {k}")
    alpha = to_fraction(alpha)
    total = sum(
        Fraction(comb(k, i)) * (-1 / alpha) ** i / factorial(k + i + 1) for i in range(k + 1)
    )
    return (2 / alpha) ** k * total


def lambda2_even_moment(k: int, alpha: Fraction | float | int = 1) -> Fraction:
    """Moment of order 2k under the lambda_2 mollifier: (-1)^k times the lambda one"""
    if k < 1:
        raise ValueError(f"Invalid moment order: {k}")
    return (-1) ** k * exact_pseudo_moment(2 * k, alpha)


@dataclass(frozen=True)
class SimplexIntegrand:
    """Integrand of the simplex form of the pseudo-moments

    ``flip_window`` is the (beta1, beta2] range where the sign of v_j is
    flipped; None means no flip.
    """

    k: int
    r: int = 1
    eta: int = 0
    alpha: Fraction | float = Fraction(1)
    flip_window: tuple[float, float] | None = (0.0, 1.0)

    def __post_init__(self):
        if self.flip_window is not None:
            beta1, beta2 = self.flip_window
            if not 0.0 <= beta1 <= beta2 <= 1.0:
                raise ValueError(f"Invalid flip window: {self.flip_window}")
        if self.r < 1 or self.eta < 0 or self.k < 0:
            raise ValueError(f"Invalid simplex integrand: {self}")

    @property
    def flip_sign(self) -> int | None:
        """Sign shared by every v_j when the window is trivial, None when it splits (0, 1]"""
        if self.flip_window is None or self.flip_window[0] == self.flip_window[1]:
            return 1
        if self.flip_window[0] == 0.0 and self.flip_window[1] == 1.0:
            return -1
        return None


@cache
def _inner_u_integral(r: int, eta: int) -> sympy.Expr:
    """I(s) = integral over [0, 1 - s] of u^(r^2 - 1) (1 - u)^eta (1 - u - s)^eta du"""
    u, s = sympy.symbols("u s")
    integrand = u ** (r * r - 1) * (1 - u) ** eta * (1 - u - s) ** eta
    return sympy.expand(sympy.integrate(integrand, (u, 0, 1 - s)))


def beta_normalizer(r: int, eta: int) -> Fraction:
    """integral over [0, 1] of v^(r^2 - 1) (1 - v)^(2 eta) dv"""
    return Fraction(factorial(r * r - 1) * factorial(2 * eta), factorial(r * r + 2 * eta))


def _sympy_rational(value: Fraction) -> sympy.Rational:
    return sympy.Rational(value.numerator, value.denominator)


def simplex_moment(si: SimplexIntegrand) -> Fraction | float:
    """(-2r / alpha)^k * integral over the simplex of prod Lambda(v_j) I(sum v) dv / B

    Lambda(v) = -(1 - v / alpha) inside the flip window and (1 - v / alpha)
    outside; I is the inner u-integral and B the beta normalizer. Exact in
    rationals when the window is trivial, adaptive cubature otherwise.
    """
    if si.k > MAX_SIMPLEX_DEPTH:
        raise ValueError(f"Simplex depth {si.k} exceeds {MAX_SIMPLEX_DEPTH}")
    if si.k == 0:
        return Fraction(1)
    if si.flip_sign is not None:
        return _exact_simplex_moment(si)
    return _numeric_simplex_moment(si)


def _exact_simplex_moment(si: SimplexIntegrand) -> Fraction:
    alpha = to_fraction(si.alpha)
    s = sympy.Symbol("s")
    variables = sympy.symbols(f"v1:{si.k + 1}")
    inner = _inner_u_integral(si.r, si.eta).subs(s, sum(variables))
    alpha_sym = _sympy_rational(alpha)
    integrand = inner
    for v in variables:
        integrand *= 1 - v / alpha_sym
    value = integrate_polynomial_on_simplex(integrand, variables)
    prefactor = (Fraction(-2 * si.r) / alpha * si.flip_sign) ** si.k
    return prefactor * value / beta_normalizer(si.r, si.eta)


def _numeric_simplex_moment(si: SimplexIntegrand) -> float:
    alpha = float(si.alpha)
    beta1, beta2 = si.flip_window
    s = sympy.Symbol("s")
    coefficients = [float(c) for c in sympy.Poly(_inner_u_integral(si.r, si.eta), s).all_coeffs()]
    inner = np.polynomial.Polynomial(coefficients[::-1])

    def sign(v: float) -> float:
        return -1.0 if beta1 < v <= beta2 else 1.0

    def integrand(*v: float) -> float:
        value = inner(sum(v))
        for vj in v:
            value *= sign(vj) * (1 - vj / alpha)
        return value

    def bounds(*rest: float) -> tuple[float, float]:
        return 0.0, max(0.0, 1.0 - sum(rest))

    def options(*rest: float) -> dict:
        low, high = bounds(*rest)
        return {
            "points": [p for p in (beta1, beta2) if low < p < high],
            "epsabs": NUMERIC_SIMPLEX_TOLERANCE,
            "epsrel": NUMERIC_SIMPLEX_TOLERANCE,
        }

    value, error = integrate.nquad(integrand, [bounds] * si.k, opts=[options] * si.k)
    getLogger().info(f"Numeric simplex moment {si}: {value:.12g} (error {error:.2g})")
    return (-2 * si.r / alpha) ** si.k * value / float(beta_normalizer(si.r, si.eta))


def mean_square_closed(alpha: Fraction | float | int = 1, r: int = 1, eta: int = 0) -> Fraction:
    """Asymptotic normalized head mean square sum_{m < T0} b(m)^2 / m / sum a(n)^2 / n

    [4 r^2 / alpha^2 I_a + 4 r^4 / alpha^2 I_b] / (r^2 B), with
    I_a the integral of v Q(u, v, v) over u + v <= 1, I_b the integral of
    Q(u, v1, v2) over u + v1 + v2 <= 1 and
    Q = u^(r^2 - 1) (1 - v1 / alpha)(1 - v2 / alpha)(1 - u - v1)^eta (1 - u - v2)^eta.
    """
    if r < 1 or eta < 0:
        raise ValueError(f"Invalid parameters r={r}, eta={eta}")
    alpha = to_fraction(alpha)
    a = _sympy_rational(alpha)
    u, v, v1, v2 = sympy.symbols("u v v1 v2")

    def Q(x1, x2):
        return (
            u ** (r * r - 1) * (1 - x1 / a) * (1 - x2 / a) * (1 - u - x1) ** eta * (1 - u - x2) ** eta
        )

    I_a = integrate_polynomial_on_simplex(v * Q(v, v), (u, v))
    I_b = integrate_polynomial_on_simplex(Q(v1, v2), (u, v1, v2))
    numerator = Fraction(4 * r * r) / alpha**2 * I_a + Fraction(4 * r**4) / alpha**2 * I_b
    return numerator / (r * r * beta_normalizer(r, eta))


def liouville_mean_square_polynomial(alpha: Fraction | float | int = 1) -> Fraction:
    """4 / (3 alpha^2) - 1 / alpha^3 + 7 / (30 alpha^4)

    >>> liouville_mean_square_polynomial(2)
    Fraction(107, 480)
    """
    alpha = to_fraction(alpha)
    if alpha < 1:
        raise ValueError(f"Invalid alpha: {alpha}")
    return Fraction(4, 3) / alpha**2 - 1 / alpha**3 + Fraction(7, 30) / alpha**4


def landau_gonek_profile(d: float) -> float:
    """integral over [0, 1] of 2u(1 - u) sin(2 pi u d) du

    With c = 2 pi d this is 2 (2 (1 - cos c) / c^3 - sin c / c^2); a Taylor
    series replaces it near c = 0.
    """
    c = 2 * pi * d
    if abs(c) < 1e-2:
        return c / 6 - c**3 / 90 + c**5 / 3360
    return 2 * (2 * (1 - cos(c)) / c**3 - sin(c) / c**2)


def landau_gonek_max() -> tuple[float, float]:
    """Location and value of the maximum of the profile on [0, 1], by golden-section search"""
    result = optimize.minimize_scalar(
        lambda d: -landau_gonek_profile(d),
        bracket=(0.1, 0.4, 0.9),
        method="golden",
        options={"xtol": 1e-10},
    )
    return float(result.x), float(-result.fun)


def circle_rv_moment(k: int) -> Fraction:
    """E[X^k] = 2^-k for X(t) = 1/2 + sum_n c_n e^(int), t uniform on [0, 2 pi)"""
    if k < 0:
        raise ValueError(f"Invalid moment order: {k}")
    return Fraction(1, 2**k)


def circle_rv_monte_carlo(
    k: int, samples: int = 1_000_000, seed: int = 0, terms: int = 40
) -> tuple[complex, float]:
    """Monte Carlo E[X^k] with c_n = 2^-n; returns (estimate, standard error)"""
    rng = np.random.Generator(np.random.Philox(seed))
    t = rng.uniform(0.0, 2 * pi, samples)
    x = np.full(samples, 0.5, dtype=np.complex128)
    for n in range(1, terms + 1):
        x += 2.0**-n * np.exp(1j * n * t)
    values = x**k
    error = sqrt((np.var(values.real) + np.var(values.imag)) / samples)
    return complex(np.mean(values)), error


@dataclass(frozen=True)
class RandomVariableMoment:
    k: int
    empirical: complex
    analytic: float
    standard_error: float
    a_k: float


@dataclass(frozen=True, eq=False)
class WasilewskiModel:
    """Z = X e^(iT) with T of density (1 + 2 sum a_n cos(n t)) / (2 pi) and X lognormal

    X has log-scale standard deviation ``sigma``, unit untruncated mean, and
    is truncated at the LOGNORMAL_TRUNCATION quantile on both sides.
    """

    a: np.ndarray
    sigma: float = 0.5

    def __post_init__(self):
        if 2 * np.sum(np.abs(self.a[1:])) >= 1:
            raise ValueError("Invalid coefficients: 1 + 2 sum a_n cos(nt) would go negative")

    @classmethod
    def factorial_decay(cls, terms: int, scale: float = 0.5, sigma: float = 0.5) -> "WasilewskiModel":
        """a_n = scale / ((n + 1)! E[X]^n), giving E[Z^k] = scale E[X^k] / ((k + 1)! E[X]^k)"""
        mean = cls(np.zeros(terms + 1), sigma).x_moment(1)
        a = np.array([0.0] + [scale / (factorial(n + 1) * mean**n) for n in range(1, terms + 1)])
        return cls(a, sigma)

    @property
    def _z_range(self) -> tuple[float, float]:
        return stats.norm.ppf(LOGNORMAL_TRUNCATION), stats.norm.isf(LOGNORMAL_TRUNCATION)

    def x_moment(self, k: int) -> float:
        low, high = self._z_range
        mu = -self.sigma**2 / 2
        mass = stats.norm.cdf(high) - stats.norm.cdf(low)
        shifted = stats.norm.cdf(high - k * self.sigma) - stats.norm.cdf(low - k * self.sigma)
        return float(np.exp(k * mu + (k * self.sigma) ** 2 / 2) * shifted / mass)

    def a_k(self, k: int) -> float:
        if k == 0:
            return 1.0
        return float(self.a[k]) if k < len(self.a) else 0.0

    def sample_angles(self, rng: np.random.Generator, samples: int) -> np.ndarray:
        envelope = 1 + 2 * np.sum(np.abs(self.a[1:]))
        accepted = []
        remaining = samples
        while remaining > 0:
            batch = int(remaining * envelope) + 64
            t = rng.uniform(0.0, 2 * pi, batch)
            density = np.ones(batch)
            for n in range(1, len(self.a)):
                density += 2 * self.a[n] * np.cos(n * t)
            keep = t[rng.uniform(0.0, envelope, batch) <= density][:remaining]
            accepted.append(keep)
            remaining -= len(keep)
        return np.concatenate(accepted)

    def sample_x(self, rng: np.random.Generator, samples: int) -> np.ndarray:
        low, high = self._z_range
        logs = stats.truncnorm.rvs(
            low, high, loc=-self.sigma**2 / 2, scale=self.sigma, size=samples, random_state=rng
        )
        return np.exp(logs)


def wasilewski_moments(
    k_max: int,
    samples: int = 1_000_000,
    seed: int = 0,
    model: WasilewskiModel | None = None,
) -> list[RandomVariableMoment]:
    """Empirical E[Z^k], k = 0..k_max, beside the analytic a_k E[X^k]

    Standard errors come from the analytic second moment E[X^(2k)].
    """
    model = model or WasilewskiModel.factorial_decay(max(k_max, 16))
    rng = np.random.Generator(np.random.Philox(seed))
    t = model.sample_angles(rng, samples)
    x = model.sample_x(rng, samples)
    results = []
    for k in range(k_max + 1):
        empirical = complex(np.mean(x**k * np.exp(1j * k * t)))
        analytic = model.a_k(k) * model.x_moment(k)
        variance = max(model.x_moment(2 * k) - analytic**2, 0.0)
        results.append(
            RandomVariableMoment(
                k=k,
                empirical=empirical,
                analytic=analytic,
                standard_error=sqrt(variance / samples),
                a_k=model.a_k(k),
            )
        )
    return results


def real_part_expansion(k: int) -> list[tuple[int, int, int]]:
    """Terms (coefficient, power of Re, power of Im) of Re(z^k) = sum C(k, 2n) (-1)^n Re^(k-2n) Im^(2n)

    >>> real_part_expansion(4)
    [(1, 4, 0), (-6, 2, 2), (1, 0, 4)]
    """
    return [((-1) ** n * comb(k, 2 * n), k - 2 * n, 2 * n) for n in range(k // 2 + 1)]


def check_real_part_expansion(k: int, samples: int = 256, seed: int = 0) -> float:
    """Largest relative gap between Re(z^k) and its expansion over random complex z"""
    rng = np.random.Generator(np.random.Philox(seed))
    z = rng.normal(size=samples) + 1j * rng.normal(size=samples)
    expanded = sum(c * z.real**p * z.imag**q for c, p, q in real_part_expansion(k))
    scale = np.maximum(np.abs(z) ** k, 1e-300)
    return float(np.max(np.abs(expanded - (z**k).real) / scale))


def polycI_identity(k: int, alpha: Fraction | float | int = 1) -> Fraction:
    """Exact k-th pseudo-moment after checking the Re(Z^k) expansion it is combined with"""
    if k < 1:
        raise ValueError(f"Invalid moment order: {k}")
    gap = check_real_part_expansion(k)
    if gap > 1e-9:
        raise ArithmeticError(f"Real part expansion of order {k} is off by {gap:.3g}")
    value = exact_pseudo_moment(k, alpha)
    for name, (printed, exact) in PRINTED_CONSTANTS.items():
        if exact == value and round(float(exact), 5) != printed:
            getLogger().warning(f"Printed constant for {name} is {printed}, formula gives {exact}")
    return value


def closed_form_moment(spec: MollifierSpec, k: int, alpha: Fraction | float | int = 1) -> MomentResult:
    """Asymptotic k-th pseudo-moment of Z_alpha under the mollifier spec

    Raises:
        ValueError: If no closed form is known for the spec and order.
    """
    alpha = to_fraction(alpha)
    match spec.kind:
        case MollifierKind.LIOUVILLE:
            value = exact_pseudo_moment(k, alpha)
        case MollifierKind.UNIT:
            value = (-1) ** k * exact_pseudo_moment(k, alpha)
        case MollifierKind.LIOUVILLE_K if spec.k == 1:
            value = exact_pseudo_moment(k, alpha)
        case MollifierKind.LIOUVILLE_K if spec.k == 2 and k % 2 == 0:
            value = lambda2_even_moment(k // 2, alpha) if k else Fraction(1)
        case MollifierKind.INTERVAL_FLIP | MollifierKind.LIOUVILLE_DIVISOR | MollifierKind.GENERAL:
            window = spec.flip_window if not spec.has_empty_flip else None
            value = simplex_moment(SimplexIntegrand(k, spec.r, spec.eta, alpha, window))
        case _:
            raise ValueError(f"No closed form for {spec.label} at order {k}")

    if isinstance(value, Fraction):
        return MomentResult(
            value=float(value),
            method=MomentMethod.CLOSED_FORM,
            err_estimate=float(abs(Fraction(float(value)) - value)),
            exact=value,
        )
    return MomentResult(
        value=value, method=MomentMethod.CLOSED_FORM, err_estimate=NUMERIC_SIMPLEX_TOLERANCE
    )
