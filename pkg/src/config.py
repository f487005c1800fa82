from dataclasses import asdict, dataclass, field, fields, replace
from json import load
from logging import getLogger
from math import ceil

from jsonschema import ValidationError, validate

from src.arith_tables import (
    DEFAULT_COEFF_LENGTH_BUDGET,
    DEFAULT_TABLE_LIMIT_BUDGET,
    MollifierSpec,
    head_length,
)
from src.diagonal_oracle import DEFAULT_TUPLE_BUDGET
from src.poly_eval import DEFAULT_GRID_POINT_BUDGET, DEFAULT_TAIL_EPS
from src.schemas import RUN_CONFIG_SCHEMA

MAX_NUMERIC_ORDER = 4


@dataclass(frozen=True)
class RunConfig:
    """Effective settings of a run; echoed into every report"""

    T: list[float] = field(default_factory=lambda: [1000.0, 10000.0])
    alpha: list[float] | None = None
    k_max: int = 4
    mollifiers: list[str] = field(default_factory=lambda: ["unit", "lambda", "lambda2", "lambda-dr=2"])
    tail_eps: float = DEFAULT_TAIL_EPS
    cache_dir: str | None = None
    format: str = "csv"
    seed: int = 0
    threads: int = 1
    samples: int = 1_000_000
    zeros_file: str | None = None
    table_limit: int | None = None
    table_limit_budget: int = DEFAULT_TABLE_LIMIT_BUDGET
    grid_point_budget: int = DEFAULT_GRID_POINT_BUDGET
    tuple_budget: int = DEFAULT_TUPLE_BUDGET
    coeff_length_budget: int = DEFAULT_COEFF_LENGTH_BUDGET

    def __post_init__(self):
        try:
            validate(self.to_dict(), RUN_CONFIG_SCHEMA)
        except ValidationError as e:
            getLogger().error(f"Invalid run configuration: {e.message}")
            raise

    @classmethod
    def from_file(cls, path: str, **overrides) -> "RunConfig":
        """Reads a JSON config file; keyword overrides that are not None replace file values"""
        with open(path, "r") as f:
            raw_data = load(f)
        try:
            validate(raw_data, RUN_CONFIG_SCHEMA)
        except ValidationError as e:
            getLogger().error(f"Invalid config file {path}: {e.message}")
            raise
        return cls(**raw_data).with_overrides(**overrides)

    def with_overrides(self, **overrides) -> "RunConfig":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"Unknown configuration keys: {sorted(unknown)}")
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)

    def alphas(self, default: tuple[float, ...] = (1.0, 2.0)) -> list[float]:
        return list(self.alpha) if self.alpha is not None else list(default)

    @property
    def specs(self) -> list[MollifierSpec]:
        return [MollifierSpec.parse(text) for text in self.mollifiers]

    def check_numeric_order(self) -> None:
        if self.k_max > MAX_NUMERIC_ORDER:
            raise ValueError(
                f"Invalid k_max={self.k_max}: quadrature and diagonal sums support k <= {MAX_NUMERIC_ORDER}"
            )

    def required_table_limit(self, alphas: list[float]) -> int:
        """Sieve range covering Z_alpha for every T and alpha, and every mollifier"""
        if self.table_limit is not None:
            return self.table_limit
        return max(max(ceil(T**alpha), head_length(T)) for T in self.T for alpha in alphas) + 1
