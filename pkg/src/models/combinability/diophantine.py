"""
Extended Euclid, Bezout solutions and period arithmetic

Every intermediate product is checked against the signed 128-bit range.
"""
import logging
import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, List, Optional, Tuple

from src.utils.exceptions import (
    ArithmeticOverflowError,
    HyperperiodOverflowError,
    InvalidSpecError,
    NoSolutionError,
)
from src.utils.utils import INT128_MAX, checked, checked_mul, nonneg_mod

logger = logging.getLogger(__name__)


def gcdex(a: int, b: int) -> Tuple[int, int, int]:
    """Return (x, y, g) such that g = x*a + y*b = gcd(a, b)

    >>> gcdex(2, 3)
    (-1, 1, 1)
    >>> gcdex(100, 2004)
    (-20, 1, 4)
    """
    if not a and not b:
        return (0, 1, 0)
    if not a:
        return (0, b // abs(b), abs(b))
    if not b:
        return (a // abs(a), 0, abs(a))

    if a < 0:
        a, x_sign = -a, -1
    else:
        x_sign = 1
    if b < 0:
        b, y_sign = -b, -1
    else:
        y_sign = 1

    x, y, r, s = 1, 0, 0, 1
    while b:
        (c, q) = (a % b, a // b)
        (a, b, r, s, x, y) = (b, c, x - q * r, y - q * s, r, s)

    return (x * x_sign, y * y_sign, a)


@dataclass(frozen=True)
class DiophantineSolution:
    """All integer solutions of a*x - b*y = c as particular + k*step"""
    a: int
    b: int
    c: int
    exists: bool
    particular: Optional[Tuple[int, int]] = None
    homogeneous_step: Optional[Tuple[int, int]] = None

    def at(self, k: int) -> Tuple[int, int]:
        if not self.exists:
            raise ValueError("equation has no integer solution")
        x0, y0 = self.particular
        hx, hy = self.homogeneous_step
        return (x0 + k * hx, y0 + k * hy)

    def first_nonnegative(self) -> Tuple[int, int, int]:
        """Smallest k (and its pair) for which both coordinates are >= 0"""
        x0, y0 = self.particular
        hx, hy = self.homogeneous_step
        k = max(-(x0 // hx), -(y0 // hy))
        x, y = self.at(k)
        return k, x, y


def extended_bezout(a: int, b: int, c: int) -> DiophantineSolution:
    """Solve a*x - b*y = c over the integers

    The particular solution has the smallest non-negative x; the homogeneous
    step is (b/g, a/g) with g = gcd(a, b).
    """
    if a <= 0 or b <= 0:
        raise InvalidSpecError(f"coefficients must be positive, got a={a}, b={b}")
    s, t, g = gcdex(a, b)
    if c % g != 0:
        return DiophantineSolution(a=a, b=b, c=c, exists=False)

    hx, hy = b // g, a // g
    x = checked_mul(s, c // g, "Bezout particular solution")
    x0 = nonneg_mod(x, hx)
    numerator = checked(checked_mul(a, x0) - c, "Bezout particular solution")
    y0 = numerator // b
    return DiophantineSolution(a=a, b=b, c=c, exists=True, particular=(x0, y0), homogeneous_step=(hx, hy))


def _check_periods(periods: Iterable[int]) -> List[int]:
    values = list(periods)
    if not values:
        raise InvalidSpecError("at least one period is required")
    for value in values:
        if value is None or value <= 0:
            raise InvalidSpecError(f"periods must be positive, got {value}")
    return values


def gcd_periods(periods: Iterable[int]) -> int:
    """Greatest common divisor of all periods"""
    return reduce(math.gcd, _check_periods(periods))


def hyperperiod(periods: Iterable[int], cap: Optional[int] = None) -> int:
    """Least common multiple of all periods with checked arithmetic"""
    values = _check_periods(periods)
    result = 1
    for value in values:
        result = result // math.gcd(result, value) * value
        if result > INT128_MAX:
            logger.error("Hyperperiod exceeds the 128-bit range")
            raise HyperperiodOverflowError("hyperperiod exceeds 2^127 - 1; cap the horizon")
    if cap is not None and result > cap:
        logger.error(f"Hyperperiod {result} exceeds the configured cap {cap}")
        raise HyperperiodOverflowError(f"hyperperiod {result} exceeds the cap {cap}")
    return result


def chain_solve(periods: List[int], rhs: List[int]) -> Tuple[List[int], List[int]]:
    """Solve T_i x_i - T_{i+1} x_{i+1} = rhs_i for i = 0..K-2 by recursive chaining

    Returns (base, step): every solution is base + k*step. The base is the
    smallest member with all components non-negative.
    """
    if len(periods) < 2 or len(rhs) != len(periods) - 1:
        raise InvalidSpecError("need K >= 2 periods and K-1 right-hand sides")

    first = extended_bezout(periods[0], periods[1], rhs[0])
    if not first.exists:
        raise NoSolutionError(f"{periods[0]}x - {periods[1]}y = {rhs[0]} has no integer solution")
    base = list(first.particular)
    step = list(first.homogeneous_step)

    for i in range(1, len(periods) - 1):
        eq = extended_bezout(periods[i], periods[i + 1], rhs[i])
        if not eq.exists:
            raise NoSolutionError(f"{periods[i]}x - {periods[i + 1]}y = {rhs[i]} has no integer solution")
        p, q = eq.particular
        h, h_next = eq.homogeneous_step
        # Match x_i = base_i + k*step_i against x_i = p + k'*h
        link = extended_bezout(step[i], h, p - base[i])
        if not link.exists:
            raise NoSolutionError(f"equations {i - 1} and {i} share no common solution")
        t0, t1 = link.particular
        l0, l1 = link.homogeneous_step
        base = [checked(b + checked_mul(t0, s), "solution base") for b, s in zip(base, step)]
        base.append(checked(q + checked_mul(t1, h_next), "solution base"))
        step = [checked_mul(s, l0, "solution step") for s in step]
        step.append(checked_mul(h_next, l1, "solution step"))

    # Move to the smallest member with every index non-negative
    shift = max(-(b // s) for b, s in zip(base, step))
    base = [b + shift * s for b, s in zip(base, step)]
    if any(b > INT128_MAX for b in base):
        raise ArithmeticOverflowError("solution base exceeds the 128-bit range")
    return base, step
