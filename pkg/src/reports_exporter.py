from enum import StrEnum
from fractions import Fraction
from json import dump, dumps
from logging import getLogger
from math import log, nan
from pathlib import Path

import numpy as np
from jsonschema import ValidationError, validate
from more_itertools import unique_everseen
from pandas import DataFrame, ExcelWriter, concat

from src.arith_tables import (
    FactorTables,
    MollifierSpec,
    cache_file_name,
    fit_Ar,
    load_or_build_factor_tables,
    zhat_coeffs,
)
from src.bounds_chain import (
    BoundReport,
    fourth_moment_chain,
    general_method_chain,
    has_mean_square_closed_form,
    mollifier_baseline_chain,
    second_moment_chain,
    tail_lower_bound_chain,
)
from src.closed_forms import (
    PRINTED_CONSTANTS,
    WasilewskiModel,
    circle_rv_moment,
    circle_rv_monte_carlo,
    closed_form_moment,
    exact_pseudo_moment,
    landau_gonek_max,
    landau_gonek_profile,
    mean_square_closed,
    printed_constant_discrepancies,
    wasilewski_moments,
)
from src.config import RunConfig
from src.diagonal_oracle import diagonal_moment, head_sum_bsq, lambda2_sign_check
from src.enums import MollifierKind, MomentMethod
from src.exceptions import AcceptanceError, CapacityError, FitConditioningError
from src.measure_engine import build_measure, pseudo_moment_numeric, tail_mean_square
from src.poly_eval import eval_dirichlet_at, log_grid_summary, make_grid
from src.schemas import REPORT_ROW_SCHEMA
from src.utils import format_rational
from src.zeros_stats import (
    DEFAULT_LG_ALPHA,
    LG_ALPHA_SENSITIVITY,
    WINDOW_CUT,
    c_alpha_from_zeros,
    count_zeros_below,
    lg_empirical,
    lg_profile,
    load_zeros,
    normalized_gaps,
    riemann_von_mangoldt,
    zero_average_real_part,
)

LANDAU_GONEK_SHIFTS = (0.1, 0.2, 0.3, 0.4, 0.4147, 0.5, 0.6, 0.7, 0.8, 0.9)
LANDAU_GONEK_PEAK = 0.4147
TAIL_MAX_T = 2000
RV_MIN_ORDER = 6
KERNEL_DIAGNOSTIC_POINTS = 64


def _verify_tolerance(T: float) -> float:
    return 1e-6 if T >= 1e4 else 1e-3


def _closed_form_anchor(spec: MollifierSpec) -> str:
    match spec.kind:
        case MollifierKind.LIOUVILLE:
            return "high-moment sum (2/α)^k Σ C(k,i)(-1/α)^i/(k+i+1)!"
        case MollifierKind.UNIT:
            return "unit mollifier: (-1)^k times the Liouville moment"
        case MollifierKind.LIOUVILLE_K:
            return "λ₂ even-moment sign rule (-1)^(k/2)"
        case _:
            return "simplex integral of prod Λ(v_j) I(Σv)"


def _printed_flag(value: Fraction | None) -> tuple[str, str]:
    for name, (printed, exact) in PRINTED_CONSTANTS.items():
        if value is not None and value == exact and round(float(exact), 5) != printed:
            return str(printed), f"printed {name} differs from {exact}"
    return "", ""


class ReportsExporter:
    class AvailableFormats(StrEnum):
        CSV = "csv"
        JSON = "json"
        EXCEL = "xlsx"
        TXT = "txt"

    class ReportTypes(StrEnum):
        TABLES = "tables"
        MOMENTS = "moments"
        VERIFY = "verify"
        BOUNDS = "bounds"
        ZEROS = "zeros"
        RV = "rv"

    @classmethod
    def export_report_by_type(
        cls,
        config: RunConfig,
        report_type: ReportTypes,
        save_file_path: str,
        output_format: str = AvailableFormats.CSV,
        **kwargs,
    ) -> DataFrame:
        """Generates and saves a report of the specified type in the specified format

        Args:
            config: The effective run configuration, echoed into the saved report.
            report_type: The type of report to generate.
            save_file_path: The path to save the generated report.
            output_format: The format in which to save the report.
            **kwargs: Additional keyword arguments to pass to the report generation function.

        Returns:
            The generated report.

        Raises:
            ValueError: If an invalid report type or output format is provided.
            AcceptanceError: If a verify report has failing rows; the report is saved first.
        """
        match report_type:
            case cls.ReportTypes.TABLES:
                report = cls.generate_tables_report(config, **kwargs)
            case cls.ReportTypes.MOMENTS:
                report = cls.generate_moments_report(config, **kwargs)
            case cls.ReportTypes.VERIFY:
                report = cls.generate_verify_report(config, **kwargs)
            case cls.ReportTypes.BOUNDS:
                report = cls.generate_bounds_report(config, **kwargs)
            case cls.ReportTypes.ZEROS:
                report = cls.generate_zeros_report(config, **kwargs)
            case cls.ReportTypes.RV:
                report = cls.generate_rv_report(config, **kwargs)
            case _:
                raise ValueError(f"Invalid report type: {report_type}")
        if not save_file_path.endswith(f".{output_format}"):
            save_file_path += f".{output_format}"

        match output_format:
            case cls.AvailableFormats.CSV:
                cls._write_delimited(report, config, save_file_path, ",")
            case cls.AvailableFormats.JSON:
                cls._write_json(report, config, save_file_path)
            case cls.AvailableFormats.EXCEL:
                with ExcelWriter(save_file_path) as writer:
                    report.to_excel(writer, sheet_name="results", index=False)
                    DataFrame(
                        [(key, dumps(value)) for key, value in config.to_dict().items()],
                        columns=["Key", "Value"],
                    ).to_excel(writer, sheet_name="config", index=False)
            case cls.AvailableFormats.TXT:
                cls._write_delimited(report, config, save_file_path, "\t")
            case _:
                raise ValueError(f"Invalid output format: {output_format}")

        if report_type == cls.ReportTypes.VERIFY and not report["Pass"].all():
            failing = report.loc[~report["Pass"], ["T", "Mollifier", "Quantity", "k"]]
            raise AcceptanceError(
                f"{len(failing)} verify rows outside tolerance: "
                f"{failing.to_dict(orient='records')}"
            )
        return report

    @classmethod
    def _write_delimited(cls, report: DataFrame, config: RunConfig, path: str, sep: str) -> None:
        with open(path, "w", newline="") as f:
            f.write(f"# config: {dumps(config.to_dict(), sort_keys=True)}\n")
            report.to_csv(f, index=False, sep=sep)

    @classmethod
    def _write_json(cls, report: DataFrame, config: RunConfig, path: str) -> None:
        rows = report.astype(object).where(report.notna(), None).to_dict(orient="records")
        for row in rows:
            try:
                validate(row, REPORT_ROW_SCHEMA)
            except ValidationError as e:
                getLogger().error(f"Invalid report row {row}: {e.message}")
                raise
        anchors = list(unique_everseen(row["Anchor"] for row in rows if row.get("Anchor")))
        with open(path, "w") as f:
            dump({"config": config.to_dict(), "results": rows, "anchors": anchors}, f, indent=2, default=str)

    @classmethod
    def load_tables(cls, config: RunConfig, alphas: list[float]) -> FactorTables:
        tables, status = load_or_build_factor_tables(
            config.required_table_limit(alphas), config.cache_dir, config.table_limit_budget
        )
        getLogger().info(f"Factor tables up to {tables.limit}: cache {status}")
        return tables

    @classmethod
    def generate_tables_report(cls, config: RunConfig) -> DataFrame:
        """Builds or loads the factor tables the configured run needs

        Returns:
            A pandas DataFrame with the columns "Quantity", "Value", "Method", "Anchor".
        """
        limit = config.required_table_limit(config.alphas((1.0,)))
        tables, status = load_or_build_factor_tables(limit, config.cache_dir, config.table_limit_budget)
        path = str(Path(config.cache_dir) / cache_file_name(limit)) if config.cache_dir else ""
        rows = [
            ("limit", str(tables.limit), "sieve range"),
            ("cache", f"cache {status}", "binary cache with CRC-32 trailer"),
            ("cache file", path, "binary cache with CRC-32 trailer"),
            ("prime powers", str(len(tables.prime_powers)), "support of the von Mangoldt function"),
            ("psi(N)/N", f"{tables.psi() / tables.limit:.9f}", "prime number theorem: psi(N) ~ N"),
        ]
        if tables.limit >= 10**5:
            for r in (1, 2):
                try:
                    rows.append((f"A_{r} fit", f"{fit_Ar(r, tables.limit, tables):.9f}",
                                 f"sum d_{r}(m)²/m ~ A_{r} log^{r * r} x"))
                except FitConditioningError as e:
                    getLogger().warning(f"Skipping A_{r} fit: {e}")
        return DataFrame(
            [(quantity, value, "table", anchor) for quantity, value, anchor in rows],
            columns=["Quantity", "Value", "Method", "Anchor"],
        )

    @classmethod
    def generate_moments_report(cls, config: RunConfig) -> DataFrame:
        """Closed-form pseudo-moments for every configured mollifier, alpha and k <= k_max

        Orders without a closed form for a mollifier are skipped with a warning.
        Mean-square rows are added for the mollifiers that have one.

        Returns:
            A pandas DataFrame with the columns "Mollifier", "alpha", "Quantity", "k", "Value",
            "Decimal", "Exact", "Method", "Printed", "Flag", "Anchor".
        """
        printed_constant_discrepancies()
        rows = []
        for spec in config.specs:
            for alpha in config.alphas():
                for k in range(config.k_max + 1):
                    try:
                        result = closed_form_moment(spec, k, alpha)
                    except ValueError as e:
                        getLogger().warning(f"Skipping {spec.label} alpha={alpha:g} k={k}: {e}")
                        continue
                    printed, flag = _printed_flag(result.exact)
                    rows.append((
                        spec.label, alpha, "Re Z^k", k, result.display, result.value,
                        "" if result.exact is None else str(result.exact),
                        result.method.value, printed, flag, _closed_form_anchor(spec),
                    ))
                if has_mean_square_closed_form(spec):
                    value = mean_square_closed(alpha, spec.r, spec.eta)
                    printed, flag = _printed_flag(value)
                    rows.append((
                        spec.label, alpha, "|Z|^2 head", None, format_rational(value), float(value),
                        str(value), MomentMethod.CLOSED_FORM.value, printed, flag,
                        "mean-square lemma: head sum of |b(m)|²/m",
                    ))
        return DataFrame(
            rows,
            columns=[
                "Mollifier", "alpha", "Quantity", "k", "Value", "Decimal", "Exact",
                "Method", "Printed", "Flag", "Anchor",
            ],
        )

    @classmethod
    def generate_verify_report(cls, config: RunConfig, tables: FactorTables | None = None) -> DataFrame:
        """Closed form vs diagonal sum vs quadrature for every T, mollifier, alpha and 1 <= k <= k_max

        Quadrature rows pass when they agree with the diagonal sum within the
        tolerance for their T plus their own step-doubling error estimate.
        The "Trend" column tells whether the closed-form gap shrank since the
        previous T of the same cell, and models the gap as C / log T with C
        calibrated at that previous T.

        Raises:
            ValueError: If k_max exceeds the numeric range.
            CapacityError: If a grid, table or coefficient budget would be exceeded.
        """
        config.check_numeric_order()
        alphas = config.alphas((1.0,))
        tables = tables or cls.load_tables(config, alphas)
        rows = []
        for T in sorted(config.T):
            grid = make_grid(T, config.k_max, max(alphas), config.tail_eps, config.grid_point_budget)
            log_grid_summary(grid)
            z_cache: dict[float, np.ndarray] = {}
            tolerance = _verify_tolerance(T)
            for spec in config.specs:
                ctx = build_measure(
                    spec, T, tables, grid=grid, threads=config.threads, z_cache=z_cache
                )
                rows.append(cls._verify_row(
                    T, spec, nan, "mass gap", None, MomentMethod.QUADRATURE,
                    ctx.mass / ctx.diag_mass - 1, 0.0, 0.0, tolerance, True,
                    "Gaussian weight suppresses off-diagonal terms",
                ))
                for alpha in alphas:
                    rows.extend(cls._verify_cell(config, ctx, spec, T, alpha, tables, tolerance))
                    rows.extend(cls._verify_head_and_tail(config, spec, T, alpha, tables, grid))
            if any(spec.kind == MollifierKind.LIOUVILLE_K and spec.k == 2 for spec in config.specs):
                check = lambda2_sign_check(1, 1.0, T, tables, config.tuple_budget)
                rows.append(cls._verify_row(
                    T, MollifierSpec.liouville_k(2), 1.0, "λ₂ sign identity", check.order,
                    MomentMethod.DIAGONAL, check.relative_residual, 0.0, 0.0, 1e-12, check.passed,
                    "λ₂(n)λ₂(np₁p₂) = -λ(n)λ(np₁p₂) on prime pairs",
                ))

        report = DataFrame(
            rows,
            columns=[
                "T", "Mollifier", "alpha", "Quantity", "k", "Method", "Value", "Error estimate",
                "Reference", "Abs difference", "Tolerance", "Pass", "Anchor",
            ],
        )
        report.insert(len(report.columns) - 1, "Trend", cls._closed_form_trend(report))
        return report

    @classmethod
    def _verify_row(
        cls, T, spec, alpha, quantity, k, method, value, error, reference, tolerance, passed, anchor
    ) -> tuple:
        return (
            T, spec.label, alpha, quantity, k, method.value, value, error, reference,
            abs(value - reference), tolerance, bool(passed), anchor,
        )

    @classmethod
    def _verify_cell(cls, config, ctx, spec, T, alpha, tables, tolerance) -> list[tuple]:
        rows = []
        for k in range(1, config.k_max + 1):
            oracle = diagonal_moment(spec, k, alpha, T, tables, config.tuple_budget)
            rows.append(cls._verify_row(
                T, spec, alpha, "Re Z^k", k, MomentMethod.DIAGONAL, oracle.value,
                oracle.err_estimate, oracle.value, nan, True, "diagonal terms n·n₁⋯n_k = m",
            ))
            quadrature = pseudo_moment_numeric(ctx, k, alpha)
            passed = abs(quadrature.value - oracle.value) <= tolerance + quadrature.err_estimate
            if not passed:
                getLogger().warning(
                    f"Quadrature and diagonal sum disagree for {spec.label} T={T:g} alpha={alpha:g}"
                    f" k={k}: {quadrature.value:.12g} vs {oracle.value:.12g}"
                )
            rows.append(cls._verify_row(
                T, spec, alpha, "Re Z^k", k, MomentMethod.QUADRATURE, quadrature.value,
                quadrature.err_estimate, oracle.value, tolerance, passed,
                "Fourier identity of the Gaussian weight",
            ))
            try:
                closed = closed_form_moment(spec, k, alpha)
            except ValueError as e:
                getLogger().warning(f"No closed form to compare for {spec.label} k={k}: {e}")
                continue
            rows.append(cls._verify_row(
                T, spec, alpha, "Re Z^k", k, MomentMethod.CLOSED_FORM, closed.value,
                closed.err_estimate, oracle.value, nan, True, _closed_form_anchor(spec),
            ))
        return rows

    @classmethod
    def _verify_head_and_tail(cls, config, spec, T, alpha, tables, grid) -> list[tuple]:
        if not has_mean_square_closed_form(spec):
            return []
        closed = float(mean_square_closed(alpha, spec.r, spec.eta))
        head = head_sum_bsq(spec, alpha, T, tables, normalized=True)
        rows = [cls._verify_row(
            T, spec, alpha, "|b|² head", None, MomentMethod.DIAGONAL, head, 0.0, closed, nan,
            True, "mean-square lemma: head sum of |b(m)|²/m",
        )]
        if spec.kind == MollifierKind.LIOUVILLE_DIVISOR and spec.r == 2 and alpha == 1 and T <= TAIL_MAX_T:
            try:
                tail = tail_mean_square(
                    spec, alpha, T, tables, grid, config.threads, config.coeff_length_budget
                )
            except CapacityError as e:
                getLogger().warning(f"Skipping tail mean square at T={T:g}: {e}")
                return rows
            chain = tail_lower_bound_chain(alpha, spec.r)
            rows.append(cls._verify_row(
                T, spec, alpha, "|b|² tail", None, MomentMethod.QUADRATURE,
                tail.components["normalized"], tail.err_estimate / tail.components["diag_mass"],
                float(chain.value("tail (diagonal mass)")), nan, True,
                "|Z|² = head + tail, cross term suppressed",
            ))
        return rows

    @classmethod
    def _closed_form_trend(cls, report: DataFrame) -> list[str]:
        trend = [""] * len(report)
        closed = report[report["Method"] == MomentMethod.CLOSED_FORM.value]
        for _, group in closed.groupby(["Mollifier", "alpha", "k"], sort=False):
            previous = None
            for index, row in group.sort_values("T").iterrows():
                if previous is not None:
                    previous_T, previous_gap = previous
                    # C calibrated at the previous height, gap modelled as C / log T
                    c = previous_gap * log(previous_T)
                    direction = "decreasing" if row["Abs difference"] < previous_gap else "not decreasing"
                    trend[report.index.get_loc(index)] = (
                        f"{direction}, C={c:.3g}, C/log T={c / log(row['T']):.3g}"
                    )
                previous = (row["T"], row["Abs difference"])
        return trend

    @classmethod
    def generate_bounds_report(cls, config: RunConfig) -> DataFrame:
        """Every inequality chain, one row per step, with a replay check per chain

        Returns:
            A pandas DataFrame with the columns "Chain", "Quantity", "Relation", "Value",
            "Decimal", "Derivation", "Replay", "Method", "Anchor".
        """
        chains: list[BoundReport] = []
        alphas = config.alphas()
        for spec in config.specs:
            for alpha in alphas:
                try:
                    chains.append(second_moment_chain(spec, alpha))
                except ValueError as e:
                    getLogger().warning(f"Skipping second moment chain of {spec.label}: {e}")
        chains.append(fourth_moment_chain(1))
        chains.append(tail_lower_bound_chain())
        for alpha in alphas:
            chains.append(mollifier_baseline_chain(alpha))
            chains.append(general_method_chain(
                [exact_pseudo_moment(1, alpha), exact_pseudo_moment(2, alpha)]
            ))

        frames = []
        for chain in chains:
            mismatches = chain.replay()
            if mismatches:
                getLogger().warning(f"Chain '{chain.title}' does not replay at {mismatches}")
            frame = chain.to_dataframe()
            frame.insert(0, "Chain", chain.title)
            frame.insert(len(frame.columns) - 1, "Replay", "ok" if not mismatches else "mismatch")
            frame.insert(len(frame.columns) - 1, "Method", "bound")
            frames.append(frame)
        return concat(frames, ignore_index=True)

    @classmethod
    def generate_zeros_report(cls, config: RunConfig, zeros_file: str | None = None) -> DataFrame:
        """Zero-count check, normalized gaps, zero averages and the sinc² kernel diagnostic

        Raises:
            ValueError: If no zero table is configured.
        """
        zeros_file = zeros_file or config.zeros_file
        if not zeros_file:
            raise ValueError("The zeros report needs a zero table (--zeros-file)")
        zt = load_zeros(zeros_file)
        rows = []
        peak_d, peak_value = landau_gonek_max()
        rows.append(("profile maximum", f"d={peak_d:.6f}", peak_value, nan, "profile",
                     "max of ∫2u(1-u)sin(2πud)du"))

        for T in config.T:
            if zt.last < T:
                getLogger().warning(f"Skipping zero count at T={T:g}: table ends at {zt.last}")
                continue
            rows.append(("zero count", f"T={T:g}", float(count_zeros_below(zt, T)),
                         riemann_von_mangoldt(T), "table", "N(T) = (T/2π)log(T/2πe) + 7/8 + O(log T)"))
        gaps = normalized_gaps(zt)
        rows.append(("mean normalized gap", f"{len(gaps)} gaps", float(np.mean(gaps)), 1.0, "table",
                     "γ̄ = (γ/2π)log(γ/2π)"))

        T = min(max(config.T), zt.last)
        budget = min(config.coeff_length_budget, config.table_limit_budget)
        alphas = []
        for alpha in config.alphas((1.0,)):
            if T**alpha > budget:
                getLogger().warning(f"Skipping zero averages at alpha={alpha:g}: T^alpha exceeds {budget}")
            else:
                alphas.append(alpha)
        tables = cls.load_tables(config.with_overrides(T=[T]), alphas + [max(LG_ALPHA_SENSITIVITY)])
        for d, empirical, analytic in lg_profile(LANDAU_GONEK_SHIFTS, DEFAULT_LG_ALPHA, zt, T, tables):
            rows.append(("zero average of Im", f"d={d:g}, alpha={DEFAULT_LG_ALPHA:g}, T={T:g}",
                         empirical, analytic, "profile", "limit ∫2u(1-u)sin(2πud)du"))
        for alpha in LG_ALPHA_SENSITIVITY:
            if alpha == DEFAULT_LG_ALPHA:
                continue
            empirical = lg_empirical(LANDAU_GONEK_PEAK, alpha, zt, T, tables)
            rows.append(("zero average of Im", f"d={LANDAU_GONEK_PEAK:g}, alpha={alpha:g}, T={T:g}",
                         empirical, landau_gonek_profile(LANDAU_GONEK_PEAK), "profile",
                         "sensitivity to alpha = 1 - ε"))

        for alpha in alphas:
            try:
                value = zero_average_real_part(zt, T, alpha, tables)
                diagnostic = cls._kernel_diagnostic(zt, T, alpha, tables)
            except ValueError as e:
                getLogger().warning(f"Skipping zero averages at alpha={alpha:g}: {e}")
                continue
            rows.append(("zero average of Re", f"alpha={alpha:g}, T={T:g}", value, 0.5, "profile",
                         "above 1/2 at alpha=2 contradicts half-integer spacing"))
            rows.append(diagnostic)
        return DataFrame(rows, columns=["Quantity", "Parameter", "Value", "Reference", "Method", "Anchor"])

    @classmethod
    def _kernel_diagnostic(cls, zt, T: float, alpha: float, tables: FactorTables) -> tuple:
        """Mean |sinc² zero sum - Re Z_alpha| over points below T whose kernel window the table covers"""
        half_window = WINDOW_CUT / (alpha / 2 * log(T))
        end = min(T, zt.last - half_window)
        t_values = np.linspace(max(end - 50, zt.first), end, KERNEL_DIAGNOSTIC_POINTS)
        polynomial = eval_dirichlet_at(zhat_coeffs(alpha, T, tables), t_values).real
        kernel = np.array([c_alpha_from_zeros(t, alpha, zt, T) for t in t_values])
        return ("zero sum vs polynomial", f"alpha={alpha:g}, T={T:g}",
                float(np.mean(np.abs(kernel - polynomial))), 0.15, "profile",
                "C_α(t) = sinc² zero sum - 1/α + O(1/log T)")

    @classmethod
    def generate_rv_report(cls, config: RunConfig) -> DataFrame:
        """Circle and lognormal-angle random-variable models, analytic vs Monte Carlo

        Returns:
            A pandas DataFrame with the columns "Model", "k", "Analytic", "Empirical", "Imaginary",
            "Standard error", "Within 3 SE", "Resolved", "Method", "Anchor". Rows whose
            standard error is not below the analytic value are not resolved, and their
            3 SE check carries no information.
        """
        k_max = max(config.k_max, RV_MIN_ORDER)
        rows = []
        for k in range(k_max + 1):
            estimate, error = circle_rv_monte_carlo(k, config.samples, config.seed)
            analytic = float(circle_rv_moment(k))
            rows.append(("circle", k, analytic, estimate.real, estimate.imag, error,
                         abs(estimate - analytic) <= 3 * error + 1e-15, error < abs(analytic),
                         "E[X^k] = 2^-k"))
        model = WasilewskiModel.factorial_decay(max(k_max, 16))
        for moment in wasilewski_moments(k_max, config.samples, config.seed, model):
            within = abs(moment.empirical - moment.analytic) <= 3 * moment.standard_error + 1e-15
            resolved = moment.standard_error < abs(moment.analytic)
            if not within:
                getLogger().warning(f"Monte Carlo moment k={moment.k} is beyond 3 standard errors")
            elif not resolved:
                getLogger().info(f"Monte Carlo moment k={moment.k}: the standard error exceeds the value")
            rows.append(("lognormal angle", moment.k, moment.analytic, moment.empirical.real,
                         moment.empirical.imag, moment.standard_error, within, resolved,
                         "E[Z^k] = a_k E[X^k]"))
        report = DataFrame(
            rows,
            columns=["Model", "k", "Analytic", "Empirical", "Imaginary", "Standard error",
                     "Within 3 SE", "Resolved", "Anchor"],
        )
        report.insert(len(report.columns) - 1, "Method", MomentMethod.MONTE_CARLO.value)
        return report
