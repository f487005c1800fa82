from dataclasses import dataclass
from logging import getLogger
from math import e, fsum, log, pi
from pathlib import Path
from typing import Iterable

import numpy as np

from src.arith_tables import FactorTables, zhat_coeffs
from src.closed_forms import landau_gonek_profile
from src.exceptions import ZeroTableError
from src.poly_eval import eval_dirichlet_at

FIRST_ZERO = 14.134725141734693
WINDOW_CUT = 200 * pi
MAX_KERNEL_ALPHA = 4.0
DEFAULT_LG_ALPHA = 0.9
LG_ALPHA_SENSITIVITY = (0.8, 0.9, 0.95)
ZERO_COUNT_TOLERANCE = 0.01
MIN_ZEROS_FOR_AVERAGE = 10


@dataclass(frozen=True, eq=False)
class ZeroTable:
    """Ordinates of the nontrivial zeros, strictly ascending"""

    heights: np.ndarray
    source: str

    def __post_init__(self):
        if self.heights.size == 0:
            raise ZeroTableError(f"No zeros in {self.source}")
        if self.heights[0] <= 0:
            raise ZeroTableError(f"Zero heights must be positive, got {self.heights[0]}")
        steps = np.diff(self.heights)
        if np.any(steps <= 0):
            position = int(np.flatnonzero(steps <= 0)[0]) + 1
            raise ZeroTableError(f"Heights are not strictly increasing at entry {position + 1}")

    def __len__(self) -> int:
        return len(self.heights)

    @property
    def first(self) -> float:
        return float(self.heights[0])

    @property
    def last(self) -> float:
        return float(self.heights[-1])

    def below(self, T: float) -> np.ndarray:
        return self.heights[: count_zeros_below(self, T)]


def load_zeros(path: str | Path) -> ZeroTable:
    """Reads a plain-text table, one ordinate per line; blank lines and lines starting with '#' are skipped

    Raises:
        ZeroTableError: On an unparsable line, a non-ascending line or an empty table,
            naming the first offending line.
    """
    path = Path(path)
    heights: list[float] = []
    with path.open() as file:
        for line_number, line in enumerate(file, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            try:
                height = float(text.split()[0])
            except ValueError:
                raise ZeroTableError(f"Cannot parse {text!r} as a zero height", line_number)
            if heights and height <= heights[-1]:
                raise ZeroTableError(
                    f"Height {height} does not exceed the previous {heights[-1]}", line_number
                )
            heights.append(height)
    if not heights:
        raise ZeroTableError(f"No zeros in {path}")

    table = ZeroTable(np.array(heights), source=str(path))
    if abs(table.first - FIRST_ZERO) < 1 and abs(table.first - FIRST_ZERO) > 1e-6:
        getLogger().warning(
            f"First zero of {path} is {table.first}, expected {FIRST_ZERO:.6f}: check the table format"
        )
    getLogger().info(f"Loaded {len(table)} zeros from {path}, heights {table.first} to {table.last}")
    return table


def count_zeros_below(zt: ZeroTable, T: float) -> int:
    return int(np.searchsorted(zt.heights, T, side="right"))


def riemann_von_mangoldt(T: float) -> float:
    """Main term (T / 2 pi) log(T / (2 pi e)) + 7/8 of the zero counting function"""
    return T / (2 * pi) * log(T / (2 * pi * e)) + 7 / 8


def zero_count_deviation(zt: ZeroTable, T: float) -> float:
    """Relative gap between the zeros loaded up to T and the Riemann-von Mangoldt main term"""
    if zt.last < T:
        raise ValueError(f"Zero table ends at {zt.last}, below T={T}")
    expected = riemann_von_mangoldt(T)
    deviation = abs(count_zeros_below(zt, T) - expected) / expected
    if deviation > ZERO_COUNT_TOLERANCE:
        getLogger().warning(
            f"{count_zeros_below(zt, T)} zeros below {T:g}, main term predicts {expected:.1f}"
        )
    return deviation


def normalized_height(gamma: np.ndarray | float) -> np.ndarray | float:
    """(gamma / 2 pi) log(gamma / 2 pi), the height in units of mean zero spacing"""
    scaled = np.asarray(gamma, dtype=np.float64) / (2 * pi)
    return scaled * np.log(scaled)


def normalized_gaps(zt: ZeroTable) -> np.ndarray:
    return np.diff(normalized_height(zt.heights))


@dataclass(frozen=True)
class KernelSum:
    value: float
    tail_estimate: float
    zeros_used: int


def _zero_density(t: float) -> float:
    return log(max(t, 2 * pi * e) / (2 * pi)) / (2 * pi)


def kernel_sum(t: float, alpha: float, zt: ZeroTable, T_scale: float) -> KernelSum:
    """Sum over zeros of sinc^2((alpha / 2)(gamma - t) log T_scale), minus 1 / alpha

    Only zeros with |x| <= 200 pi enter, x the sinc argument. Every omitted
    term is at most 1 / x^2, so with rho zeros per unit of x the omitted
    part is about 2 rho / (200 pi).

    Raises:
        ValueError: If alpha is outside (0, 4] or t lies outside the table.
    """
    if not 0 < alpha <= MAX_KERNEL_ALPHA:
        raise ValueError(f"Invalid alpha: {alpha}")
    if not zt.first <= t <= zt.last:
        raise ValueError(f"Height {t} is outside the zero table [{zt.first}, {zt.last}]")
    scale = alpha / 2 * log(T_scale)
    half_window = WINDOW_CUT / scale
    start, stop = np.searchsorted(zt.heights, [t - half_window, t + half_window])
    if t - half_window < zt.first or t + half_window > zt.last:
        getLogger().warning(f"Kernel window around {t:g} is not covered by the zero table")

    x = scale * (zt.heights[start:stop] - t)
    # np.sinc(y) = sin(pi y) / (pi y), equal to 1 at y = 0
    terms = np.sinc(x / pi) ** 2
    value = fsum(terms.tolist()) - 1 / alpha
    tail = 2 * _zero_density(t) / scale / WINDOW_CUT
    return KernelSum(value=value, tail_estimate=tail, zeros_used=int(stop - start))


def c_alpha_from_zeros(t: float, alpha: float, zt: ZeroTable, T_scale: float) -> float:
    """C_alpha(t) from its representation as a sinc^2 sum over the zeros"""
    return kernel_sum(t, alpha, zt, T_scale).value


def lg_empirical(
    d: float,
    alpha: float,
    zt: ZeroTable,
    T: float,
    tables: FactorTables,
) -> float:
    """Average of Im_alpha(gamma + 2 pi d / log T) over the zeros 0 < gamma <= T

    Raises:
        ValueError: If alpha >= 1 or the table does not reach T.
    """
    if not 0 < alpha < 1:
        raise ValueError(f"Invalid alpha: {alpha}, the zero average needs alpha < 1")
    zeros = _zeros_up_to(zt, T)
    coeffs = zhat_coeffs(alpha, T, tables)
    values = eval_dirichlet_at(coeffs, zeros + 2 * pi * d / log(T))
    return fsum(values.imag.tolist()) / len(zeros)


def lg_profile(
    ds: Iterable[float],
    alpha: float,
    zt: ZeroTable,
    T: float,
    tables: FactorTables,
) -> list[tuple[float, float, float]]:
    """(d, empirical average, limiting profile) for each shift d"""
    profile = [(d, lg_empirical(d, alpha, zt, T, tables), landau_gonek_profile(d)) for d in ds]
    for d, empirical, analytic in profile:
        getLogger().info(f"Zero average d={d:g} alpha={alpha:g}: {empirical:.6f} vs {analytic:.6f}")
    return profile


def zero_average_real_part(zt: ZeroTable, T: float, alpha: float, tables: FactorTables) -> float:
    """(2 pi / (T log T)) sum over 0 < gamma <= T of Re Z_alpha(1/2 + i gamma)"""
    zeros = _zeros_up_to(zt, T)
    values = eval_dirichlet_at(zhat_coeffs(alpha, T, tables), zeros)
    return 2 * pi / (T * log(T)) * fsum(values.real.tolist())


def _zeros_up_to(zt: ZeroTable, T: float) -> np.ndarray:
    zeros = zt.below(T)
    if zt.last < T or len(zeros) < MIN_ZEROS_FOR_AVERAGE:
        raise ValueError(
            f"Insufficient zeros up to T={T:g}: table has {len(zeros)} below it and ends at {zt.last}"
        )
    return zeros
