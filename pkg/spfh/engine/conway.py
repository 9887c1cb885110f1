"""Conway polynomials shipped as data.

Coefficients are listed low to high and the polynomials are monic. Degree-one
entries are not stored: GF(p) uses x - g with g the least primitive root.
"""
from __future__ import annotations

from typing import Dict, Tuple

from spfh.engine.errors import FieldError


def _from_exponents(*exps: int) -> Tuple[int, ...]:
    top = max(exps)
    coeffs = [0] * (top + 1)
    for e in exps:
        coeffs[e] = 1
    return tuple(coeffs)


CONWAY: Dict[Tuple[int, int], Tuple[int, ...]] = {
    (2, 2): (1, 1, 1),
    (2, 3): (1, 1, 0, 1),
    (2, 4): (1, 1, 0, 0, 1),
    (2, 5): (1, 0, 1, 0, 0, 1),
    (2, 6): (1, 1, 0, 1, 1, 0, 1),
    (2, 7): _from_exponents(7, 1, 0),
    (2, 8): _from_exponents(8, 4, 3, 2, 0),
    (2, 9): _from_exponents(9, 4, 0),
    (2, 10): _from_exponents(10, 6, 5, 3, 2, 1, 0),
    (2, 11): _from_exponents(11, 2, 0),
    (2, 12): _from_exponents(12, 7, 6, 5, 3, 1, 0),
    (2, 13): _from_exponents(13, 4, 3, 1, 0),
    (2, 14): _from_exponents(14, 7, 5, 3, 0),
    (2, 15): _from_exponents(15, 5, 4, 2, 0),
    (2, 16): _from_exponents(16, 5, 3, 2, 0),
    (3, 2): (2, 2, 1),
    (3, 3): (1, 2, 0, 1),
    (3, 4): (2, 0, 0, 2, 1),
    (3, 5): (1, 2, 0, 0, 0, 1),
    (3, 6): (2, 2, 1, 0, 2, 0, 1),
    (5, 2): (2, 4, 1),
    (5, 3): (3, 3, 0, 1),
    (5, 4): (2, 4, 4, 0, 1),
    (5, 5): (3, 4, 0, 0, 0, 1),
    (5, 6): (2, 0, 1, 4, 1, 0, 1),
    (7, 2): (3, 6, 1),
    (7, 3): (4, 0, 6, 1),
    (7, 4): (3, 4, 5, 0, 1),
    (7, 5): (4, 1, 0, 0, 0, 1),
    (11, 2): (2, 7, 1),
    (11, 3): (9, 2, 0, 1),
    (11, 4): (2, 10, 8, 0, 1),
    (13, 2): (2, 12, 1),
    (13, 3): (11, 2, 0, 1),
    (13, 4): (2, 12, 3, 0, 1),
}


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    i = 2
    while i * i <= p:
        if p % i == 0:
            return False
        i += 1
    return True


def _prime_factors(n: int) -> list[int]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def least_primitive_root(p: int) -> int:
    if p == 2:
        return 1
    factors = _prime_factors(p - 1)
    for g in range(2, p):
        if all(pow(g, (p - 1) // f, p) != 1 for f in factors):
            return g
    raise FieldError(f"no primitive root mod {p}", p=p)


def conway_polynomial(p: int, r: int) -> Tuple[int, ...]:
    if r == 1:
        g = least_primitive_root(p)
        return ((-g) % p, 1)
    try:
        return CONWAY[(p, r)]
    except KeyError:
        raise FieldError(f"no shipped modulus for GF({p}^{r})", p=p, r=r) from None
