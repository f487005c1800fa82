from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from logging import getLogger
from math import ceil, exp, log, pi, sqrt

import numpy as np
from more_itertools import chunked
from pandas import DataFrame

from src.arith_tables import CoeffSeries, FactorTables, zhat_coeffs
from src.exceptions import CapacityError

DEFAULT_TAIL_EPS = 1e-12
DEFAULT_GRID_POINT_BUDGET = 4_000_000
RESEED_INTERVAL = 1024
TERM_CHUNK = 2048
DIRECT_CHUNK = 256
TWO_PI = 2 * pi


@dataclass(frozen=True)
class WeightSpec:
    """Gaussian weight omega(1/2 + it) = log T / (sqrt(pi) T) exp(-(t - T)^2 log^2 T / T^2)"""

    T: float

    def __post_init__(self):
        if self.T < 100:
            raise ValueError(f"Invalid height T={self.T}: must be at least 100")

    @cached_property
    def logT(self) -> float:
        return log(self.T)

    @property
    def width(self) -> float:
        return self.T / self.logT

    def density(self, t: np.ndarray | float) -> np.ndarray | float:
        return self.logT / (sqrt(pi) * self.T) * np.exp(-(((t - self.T) / self.width) ** 2))


@dataclass(frozen=True, eq=False)
class TGrid:
    """Uniform grid t = T + j * step, j in [-half_points, half_points], with trapezoid weights"""

    T: float
    step: float
    half_points: int
    weights: np.ndarray
    k_max: int
    alpha: float

    @property
    def half_width(self) -> float:
        return self.step * self.half_points

    @cached_property
    def offsets(self) -> np.ndarray:
        return self.step * np.arange(-self.half_points, self.half_points + 1)

    @cached_property
    def t_values(self) -> np.ndarray:
        return self.T + self.offsets

    def __len__(self) -> int:
        return 2 * self.half_points + 1

    def coarse_weights(self) -> np.ndarray:
        """Weights of the grid with doubled step, as a mask over this grid (zero off the coarse points)"""
        index = np.arange(-self.half_points, self.half_points + 1)
        plain = self.weights.copy()
        plain[[0, -1]] *= 2
        coarse = np.where(index % 2 == 0, 2 * plain, 0.0)
        # trapezoid end points of the coarse grid
        ends = np.flatnonzero(coarse)[[0, -1]]
        coarse[ends] = plain[ends]
        return coarse


@dataclass(frozen=True, eq=False)
class PolyValues:
    values: np.ndarray
    grid: TGrid | None
    description: str

    def to_dataframe(self) -> DataFrame:
        if self.grid is None:
            raise ValueError("Values were not evaluated on a grid")
        return DataFrame(
            {"t": self.grid.t_values, "re": self.values.real, "im": self.values.imag}
        )


def nyquist_step(T: float, k_max: int, alpha: float) -> float:
    """Largest step resolving Z_alpha^k |A|^2 for k <= k_max: pi / ((alpha k + 2) log(T^(alpha + 1)))"""
    return pi / ((alpha * k_max + 2) * (alpha + 1) * log(T))


def make_grid(
    T: float,
    k_max: int,
    alpha: float,
    tail_eps: float = DEFAULT_TAIL_EPS,
    point_budget: int = DEFAULT_GRID_POINT_BUDGET,
) -> TGrid:
    """Designs the quadrature grid for moments up to k_max of Z_alpha

    The window is W = (T / log T) sqrt(log(1 / tail_eps)) on each side of T,
    the step is the largest W / n not above the Nyquist step.

    Raises:
        ValueError: If tail_eps is outside (1e-16, 1e-6).
        CapacityError: If the grid would exceed point_budget points.
    """
    if not 1e-16 < tail_eps < 1e-6:
        raise ValueError(f"Invalid tail_eps: {tail_eps}")
    if k_max < 0 or alpha <= 0:
        raise ValueError(f"Invalid grid request k_max={k_max}, alpha={alpha}")
    weight = WeightSpec(T)
    half_width = weight.width * sqrt(log(1 / tail_eps))
    half_points = ceil(half_width / nyquist_step(T, k_max, alpha))
    if 2 * half_points + 1 > point_budget:
        raise CapacityError(
            f"Grid for T={T:g}, k_max={k_max}, alpha={alpha:g} needs {2 * half_points + 1} points,"
            f" over the budget of {point_budget}"
        )
    step = half_width / half_points
    weights = weight.density(T + step * np.arange(-half_points, half_points + 1)) * step
    weights[[0, -1]] /= 2
    return TGrid(T=T, step=step, half_points=half_points, weights=weights, k_max=k_max, alpha=alpha)


def _reduced_phases(frequencies: np.ndarray, scale: float) -> np.ndarray:
    return np.mod(scale * frequencies, TWO_PI)


def _evaluate_segment(
    start: int,
    stop: int,
    grid: TGrid,
    amplitudes: np.ndarray,
    frequencies: np.ndarray,
    base_phases: np.ndarray,
    rotors: np.ndarray,
) -> np.ndarray:
    """Sums the polynomial over grid rows [start, stop) by phase rotation from an exact seed row"""
    offset = grid.offsets[start]
    total = np.zeros(stop - start, dtype=np.complex128)
    for chunk in chunked(range(len(amplitudes)), TERM_CHUNK):
        terms = slice(chunk[0], chunk[-1] + 1)
        block = np.empty((stop - start, len(chunk)), dtype=np.complex128)
        block[0] = np.exp(-1j * (base_phases[terms] + offset * frequencies[terms]))
        block[1:] = rotors[terms]
        np.cumprod(block, axis=0, out=block)
        total += (block * amplitudes[terms]).sum(axis=1)
    return total


def eval_dirichlet(coeffs: CoeffSeries, grid: TGrid, threads: int = 1) -> PolyValues:
    """Evaluates sum b(n) n^(-1/2 - it) at every grid point

    Each term is advanced along the grid by its rotor exp(-i step log n) and
    reseeded from the exact phase every RESEED_INTERVAL rows. Terms are
    reduced per row with numpy's pairwise summation, so results do not
    depend on the thread count.
    """
    if coeffs.length < 1:
        raise ValueError("Cannot evaluate an empty coefficient series")
    n = coeffs.support
    amplitudes = coeffs.prefactor * coeffs.values[n] / np.sqrt(n)
    frequencies = np.log(n.astype(np.float64))
    base_phases = _reduced_phases(frequencies, grid.T)
    rotors = np.exp(-1j * grid.step * frequencies)

    segments = [(s, min(s + RESEED_INTERVAL, len(grid))) for s in range(0, len(grid), RESEED_INTERVAL)]

    def run(segment):
        return _evaluate_segment(*segment, grid, amplitudes, frequencies, base_phases, rotors)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            parts = list(executor.map(run, segments))
    else:
        parts = [run(segment) for segment in segments]
    return PolyValues(values=np.concatenate(parts), grid=grid, description=coeffs.description)


def eval_dirichlet_at(coeffs: CoeffSeries, t_values: np.ndarray) -> np.ndarray:
    """Direct evaluation of sum b(n) n^(-1/2 - it) at arbitrary heights"""
    t_values = np.atleast_1d(np.asarray(t_values, dtype=np.float64))
    n = coeffs.support
    amplitudes = coeffs.prefactor * coeffs.values[n] / np.sqrt(n)
    frequencies = np.log(n.astype(np.float64))
    base_phases = _reduced_phases(frequencies, coeffs.scale)
    result = np.empty(len(t_values), dtype=np.complex128)
    for start in range(0, len(t_values), DIRECT_CHUNK):
        shifts = t_values[start : start + DIRECT_CHUNK, None] - coeffs.scale
        phases = base_phases + shifts * frequencies
        result[start : start + DIRECT_CHUNK] = (np.exp(-1j * phases) * amplitudes).sum(axis=1)
    return result


def eval_Z(
    alpha: float, T: float, grid: TGrid, tables: FactorTables, threads: int = 1
) -> PolyValues:
    """Z_alpha(1/2 + it) on the grid; real part C_alpha(t), imaginary part Im_alpha(t)"""
    return eval_dirichlet(zhat_coeffs(alpha, T, tables), grid, threads)


def off_diagonal_factor(m: int, n: int, T: float) -> float:
    """Gaussian suppression exp(-T^2 log^2(m / n) / (4 log^2 T)) of the pair (m, n)"""
    if m == n:
        raise ValueError("The off-diagonal factor is only defined for m != n")
    # ordered difference keeps factor(m, n) == factor(n, m) bit for bit
    gap = log(max(m, n)) - log(min(m, n))
    return exp(-((T * gap) ** 2) / (4 * log(T) ** 2))


def grid_fourier_integral(grid: TGrid, frequency: float) -> complex:
    """Grid approximation of the integral of omega(1/2 + it) exp(i t frequency) dt"""
    phases = grid.offsets * frequency + np.mod(grid.T * frequency, TWO_PI)
    return complex(np.sum(grid.weights * np.exp(1j * phases)))


def log_grid_summary(grid: TGrid) -> None:
    getLogger().info(
        f"Grid T={grid.T:g}: {len(grid)} points, step {grid.step:.6g}, "
        f"half width {grid.half_width:.6g}, weight sum {np.sum(grid.weights):.12f}"
    )
