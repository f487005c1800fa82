from enum import StrEnum


class MollifierKind(StrEnum):
    UNIT = "unit"
    LIOUVILLE = "liouville"
    LIOUVILLE_K = "liouville_k"
    INTERVAL_FLIP = "interval_flip"
    LIOUVILLE_DIVISOR = "liouville_divisor"
    GENERAL = "general"


class MomentMethod(StrEnum):
    QUADRATURE = "quadrature"
    DIAGONAL = "diagonal"
    CLOSED_FORM = "closed_form"
    MONTE_CARLO = "monte_carlo"


class Relation(StrEnum):
    EQ = "="
    GE = ">="
    GT = ">"


class ChainOp(StrEnum):
    GIVEN = "given"
    ADD = "add"
    SUB = "sub"
    MUL = "mul"
    HALF = "half"
    SQUARE = "square"
    SQRT = "sqrt"
    MAX = "max"
    SCALE = "scale"


class CacheStatus(StrEnum):
    HIT = "hit"
    MISS = "miss"
    REBUILT = "rebuilt"
    DISABLED = "disabled"
