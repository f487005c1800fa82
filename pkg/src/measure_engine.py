from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from logging import getLogger
from math import fsum, log

import numpy as np

from src.arith_tables import (
    DEFAULT_COEFF_LENGTH_BUDGET,
    CoeffSeries,
    FactorTables,
    MollifierSpec,
    convolve_b,
    head_bound,
    mollifier_coeffs,
)
from src.enums import MomentMethod
from src.exceptions import NyquistError
from src.poly_eval import (
    DEFAULT_GRID_POINT_BUDGET,
    DEFAULT_TAIL_EPS,
    PolyValues,
    TGrid,
    eval_dirichlet,
    eval_Z,
    make_grid,
)
from src.utils import format_rational

IMAG_RESIDUAL_WARNING = 1e-6
MASS_AGREEMENT = 1e-6


@dataclass(frozen=True)
class MomentResult:
    """A moment value with its provenance

    ``exact`` holds the rational value when one is known; ``imag_residual``
    is the discarded imaginary part of a quadrature pseudo-moment.
    """

    value: float
    method: MomentMethod
    err_estimate: float = 0.0
    exact: Fraction | None = None
    imag_residual: float = 0.0
    components: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.err_estimate >= 0:
            raise ValueError(f"Invalid error estimate: {self.err_estimate}")

    @property
    def display(self) -> str:
        return format_rational(self.exact if self.exact is not None else self.value)


@dataclass(eq=False)
class MeasureContext:
    """The probability measure omega |A|^2 dt / mass discretized on a grid"""

    spec: MollifierSpec
    T: float
    mass: float
    diag_mass: float
    grid: TGrid
    A_values: PolyValues
    tables: FactorTables
    threads: int = 1
    z_cache: dict[float, np.ndarray] = field(default_factory=dict)

    @cached_property
    def density(self) -> np.ndarray:
        return self.grid.weights * np.abs(self.A_values.values) ** 2 / self.mass

    @cached_property
    def coarse_density(self) -> np.ndarray:
        coarse = self.grid.coarse_weights() * np.abs(self.A_values.values) ** 2
        return coarse / np.sum(coarse)

    def z_values(self, alpha: float) -> np.ndarray:
        if alpha not in self.z_cache:
            self.z_cache[alpha] = eval_Z(alpha, self.T, self.grid, self.tables, self.threads).values
        return self.z_cache[alpha]

    def integrate(self, integrand: np.ndarray) -> tuple[complex, float]:
        """Returns the integral against the measure and its step-doubling error estimate"""
        fine = complex(np.sum(self.density * integrand))
        coarse = complex(np.sum(self.coarse_density * integrand))
        return fine, abs(fine - coarse)


def diagonal_mass(coeffs: CoeffSeries) -> float:
    """sum a(n)^2 / n, the mass the measure would have with every off-diagonal term removed"""
    n = coeffs.support
    return fsum((coeffs.values[n] ** 2 / n).tolist())


def build_measure(
    spec: MollifierSpec,
    T: float,
    tables: FactorTables,
    grid: TGrid | None = None,
    k_max: int = 2,
    alpha: float = 1.0,
    tail_eps: float = DEFAULT_TAIL_EPS,
    point_budget: int = DEFAULT_GRID_POINT_BUDGET,
    threads: int = 1,
    z_cache: dict[float, np.ndarray] | None = None,
) -> MeasureContext:
    """Builds the mollified measure for spec at height T

    Args:
        grid: The quadrature grid, designed from (k_max, alpha, tail_eps) when omitted.
        z_cache: Z_alpha values already evaluated on this same grid, shared between measures.
    """
    if grid is None:
        grid = make_grid(T, k_max, alpha, tail_eps, point_budget)
    coeffs = mollifier_coeffs(spec, T, tables)
    A_values = eval_dirichlet(coeffs, grid, threads)
    mass = float(np.sum(grid.weights * np.abs(A_values.values) ** 2))
    diag_mass = diagonal_mass(coeffs)

    relative_gap = abs(mass - diag_mass) / diag_mass
    if T >= 1e4 and relative_gap > MASS_AGREEMENT:
        getLogger().warning(
            f"Off-diagonal suppression violated for {spec.label} at T={T:g}: "
            f"mass {mass:.12g} vs diagonal mass {diag_mass:.12g}"
        )
    else:
        getLogger().info(
            f"Measure {spec.label} at T={T:g}: mass {mass:.12g}, relative gap {relative_gap:.3g}"
        )
    return MeasureContext(
        spec=spec,
        T=T,
        mass=mass,
        diag_mass=diag_mass,
        grid=grid,
        A_values=A_values,
        tables=tables,
        threads=threads,
        z_cache={} if z_cache is None else z_cache,
    )


def _check_nyquist(grid: TGrid, k: int, alpha: float) -> None:
    if k > grid.k_max or alpha > grid.alpha:
        raise NyquistError(
            f"Grid built for k <= {grid.k_max}, alpha <= {grid.alpha:g} cannot resolve "
            f"k={k}, alpha={alpha:g}"
        )


def pseudo_moment_numeric(ctx: MeasureContext, k: int, alpha: float) -> MomentResult:
    """Quadrature value of the integral of Z_alpha^k against the measure

    The real part is returned; the imaginary part, which only off-diagonal
    terms feed, is kept as ``imag_residual``.
    """
    if k < 0:
        raise ValueError(f"Invalid moment order: {k}")
    _check_nyquist(ctx.grid, k, alpha)
    integrand = np.ones(len(ctx.grid)) if k == 0 else ctx.z_values(alpha) ** k
    value, err = ctx.integrate(integrand)
    if abs(value.imag) > IMAG_RESIDUAL_WARNING:
        getLogger().warning(
            f"Pseudo-moment k={k} of {ctx.spec.label} at T={ctx.T:g} "
            f"has imaginary residual {value.imag:.3g}"
        )
    return MomentResult(
        value=value.real,
        method=MomentMethod.QUADRATURE,
        err_estimate=err,
        imag_residual=abs(value.imag),
        components={"points": len(ctx.grid)},
    )


def mean_square_numeric(ctx: MeasureContext, alpha: float) -> MomentResult:
    """Quadrature value of the integral of |Z_alpha|^2, off-diagonal and tail terms included"""
    _check_nyquist(ctx.grid, 2, alpha)
    value, err = ctx.integrate(np.abs(ctx.z_values(alpha)) ** 2)
    return MomentResult(value=value.real, method=MomentMethod.QUADRATURE, err_estimate=err)


def component_moments(ctx: MeasureContext, alpha: float) -> dict[str, float]:
    """Integrals of Re Z, (Re Z)^2, (Im Z)^2, Re(Z^2) and |Z|^2 against the measure"""
    _check_nyquist(ctx.grid, 2, alpha)
    z = ctx.z_values(alpha)
    integrands = {
        "re": z.real,
        "re_squared": z.real**2,
        "im_squared": z.imag**2,
        "re_of_square": (z**2).real,
        "abs_squared": np.abs(z) ** 2,
    }
    return {name: ctx.integrate(values)[0].real for name, values in integrands.items()}


def cross_term_bound(head: CoeffSeries, tail: CoeffSeries, T: float) -> float:
    """Bound on |2 Re integral of omega H conj(R)| from the Gaussian off-diagonal factors"""
    tail_n = tail.support
    tail_weights = np.abs(tail.prefactor * tail.values[tail_n]) / np.sqrt(tail_n)
    tail_logs = np.log(tail_n.astype(np.float64))
    scale = T**2 / (4 * log(T) ** 2)
    total = []
    for m in head.support:
        factors = np.exp(-scale * (tail_logs - log(m)) ** 2)
        weight = abs(head.prefactor * head.values[m]) / np.sqrt(m)
        total.append(weight * float(np.sum(tail_weights * factors)))
    return 2 * fsum(total)


def tail_mean_square(
    spec: MollifierSpec,
    alpha: float,
    T: float,
    tables: FactorTables,
    grid: TGrid,
    threads: int = 1,
    length_budget: int = DEFAULT_COEFF_LENGTH_BUDGET,
) -> MomentResult:
    """Integral of omega |sum_{m >= T/log^2 T} b(m) m^(-1/2-it)|^2 for b = Z_alpha * A

    ``components`` carries the full and head integrals, the quadrature cross
    term with its coefficient bound, and the tail normalized by the diagonal
    mass of the mollifier.
    """
    _check_nyquist(grid, 2, alpha)
    b = convolve_b(spec, alpha, T, tables, length_budget=length_budget)
    head, tail = b.split(head_bound(T))
    if tail.support.size == 0:
        raise ValueError(f"The b series of {spec.label} has no terms beyond T/log^2 T at T={T:g}")

    head_values = eval_dirichlet(head, grid, threads).values
    tail_values = eval_dirichlet(tail, grid, threads).values
    weights = grid.weights

    head_integral = float(np.sum(weights * np.abs(head_values) ** 2))
    tail_integral = float(np.sum(weights * np.abs(tail_values) ** 2))
    full_integral = float(np.sum(weights * np.abs(head_values + tail_values) ** 2))
    cross = 2 * float(np.sum(weights * head_values * np.conj(tail_values)).real)
    coarse_tail = float(np.sum(grid.coarse_weights() * np.abs(tail_values) ** 2))

    bound = cross_term_bound(head, tail, T)
    if abs(cross) > bound + 1e-12:
        getLogger().warning(
            f"Cross term {cross:.3g} exceeds its off-diagonal bound {bound:.3g} at T={T:g}"
        )
    diag_mass = diagonal_mass(mollifier_coeffs(spec, T, tables))
    return MomentResult(
        value=tail_integral,
        method=MomentMethod.QUADRATURE,
        err_estimate=abs(tail_integral - coarse_tail),
        components={
            "full": full_integral,
            "head": head_integral,
            "cross": cross,
            "cross_bound": bound,
            "diag_mass": diag_mass,
            "normalized": tail_integral / diag_mass,
        },
    )
