from src.enums import MomentMethod

POSITIVE_NUMBER_LIST = {
    "type": ["array", "null"],
    "items": {"type": "number", "exclusiveMinimum": 0},
    "minItems": 1,
}
MOLLIFIER_PATTERN = (
    r"^(unit|lambda|lambda2|lambdaK=\d+"
    r"|flip=\d*\.?\d+,\d*\.?\d+"
    r"|lambda-dr=\d+(,\d+)?"
    r"|general=\d*\.?\d+,\d*\.?\d+,\d+,\d+)$"
)
RUN_CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "T": {
            "type": "array",
            "items": {"type": "number", "minimum": 100},
            "minItems": 1,
        },
        "alpha": POSITIVE_NUMBER_LIST,
        "k_max": {"type": "integer", "minimum": 0, "maximum": 64},
        "mollifiers": {
            "type": "array",
            "items": {"type": "string", "pattern": MOLLIFIER_PATTERN},
            "minItems": 1,
        },
        "tail_eps": {"type": "number", "exclusiveMinimum": 1e-16, "exclusiveMaximum": 1e-6},
        "cache_dir": {"type": ["string", "null"]},
        "format": {"enum": ["csv", "json", "xlsx", "txt"]},
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "samples": {"type": "integer", "minimum": 1},
        "zeros_file": {"type": ["string", "null"]},
        "table_limit": {"type": ["integer", "null"], "minimum": 2},
        "table_limit_budget": {"type": "integer", "minimum": 2},
        "grid_point_budget": {"type": "integer", "minimum": 16},
        "tuple_budget": {"type": "integer", "minimum": 1},
        "coeff_length_budget": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}
REPORT_ROW_SCHEMA = {
    "type": "object",
    "properties": {
        "Method": {"enum": [m.value for m in MomentMethod] + ["bound", "table", "profile"]},
        "Anchor": {"type": "string"},
    },
    "required": ["Method"],
}
