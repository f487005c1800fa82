from src.utils.rationals import format_rational, to_fraction
from src.utils.simplex import simplex_monomial_integral, integrate_polynomial_on_simplex

__all__ = [
    "rationals",
    "simplex",
    "format_rational",
    "to_fraction",
    "simplex_monomial_integral",
    "integrate_polynomial_on_simplex",
]
