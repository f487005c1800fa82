from fractions import Fraction
from math import factorial

import sympy


def simplex_monomial_integral(exponents: tuple[int, ...]) -> Fraction:
    """Exact integral of prod(x_i ** a_i) over the unit simplex {x >= 0, sum(x) <= 1}

    Uses the Dirichlet formula prod(a_i!) / (sum(a_i) + d)!, d = len(exponents).

    >>> simplex_monomial_integral((0,))
    Fraction(1, 1)
    >>> simplex_monomial_integral((1, 1))
    Fraction(1, 24)
    >>> simplex_monomial_integral((0, 0, 0))
    Fraction(1, 6)
    """
    numerator = 1
    for a in exponents:
        numerator *= factorial(a)
    return Fraction(numerator, factorial(sum(exponents) + len(exponents)))


def integrate_polynomial_on_simplex(
    expression: sympy.Expr, variables: tuple[sympy.Symbol, ...]
) -> Fraction:
    """Integrates a polynomial with rational coefficients exactly over the unit simplex

    >>> x, y = sympy.symbols("x y")
    >>> integrate_polynomial_on_simplex(1 - x - y, (x, y))
    Fraction(1, 6)
    >>> integrate_polynomial_on_simplex(sympy.Integer(3), (x,))
    Fraction(3, 1)
    """
    poly = sympy.Poly(sympy.expand(expression), *variables)
    total = Fraction(0)
    for monomial, coefficient in poly.terms():
        coefficient = sympy.Rational(coefficient)
        total += Fraction(int(coefficient.p), int(coefficient.q)) * simplex_monomial_integral(
            tuple(monomial)
        )
    return total
