"""Exact integer and rational helpers.

Everything that decides an inequality goes through this module, so that no
floating point value ever reaches a yes/no answer:

- primality for moduli (deterministic Miller-Rabin)
- ceilings of rational powers, e.g. the slab width ceil(p^alpha)
- parsing of "num/den" rationals from the command line and config files
- comparison of terms c * b^e with rational c, b and e
"""

import logging
import math
from fractions import Fraction

logger = logging.getLogger(__name__)

# Deterministic Miller-Rabin witnesses, valid for every n < 3.3 * 10^24
_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)

# Moduli must fit three base-p digits in one signed 64-bit identifier
MAX_MODULUS = 1 << 21

# Relative gap between logarithms above which a float comparison is decisive
LOG_SEPARATION = 1e-9


def is_prime(n: int) -> bool:
    """Return True if n is prime."""
    if n < 2:
        return False
    for q in _MR_BASES:
        if n % q == 0:
            return n == q
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def require_prime_modulus(p: int) -> int:
    """Validate a modulus for the Heisenberg packing.

    Raises:
        ValueError: If p is not a prime below 2^21
    """
    if not isinstance(p, int) or isinstance(p, bool):
        raise ValueError(f"Modulus must be an integer, got {p!r}")
    if not is_prime(p):
        raise ValueError(f"Modulus {p} is not prime")
    if p >= MAX_MODULUS:
        raise ValueError(f"Modulus {p} too large: packing requires p < 2^21")
    return p


def integer_root_floor(n: int, k: int) -> int:
    """Largest integer r >= 0 with r^k <= n (integer Newton iteration)."""
    if k < 1:
        raise ValueError(f"Root index must be positive, got {k}")
    if n < 0:
        raise ValueError(f"Cannot take a root of negative {n}")
    if n < 2 or k == 1:
        return n
    if k == 2:
        return math.isqrt(n)
    # Start above the root; Newton steps decrease monotonically to the floor
    x = 1 << -(-n.bit_length() // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            return x
        x = y


def integer_root_ceil(n: int, k: int) -> int:
    """Smallest integer r >= 0 with r^k >= n."""
    if n <= 0:
        return 0
    r = integer_root_floor(n, k)
    return r if r**k == n else r + 1


def ceil_power(base: int, exponent: Fraction) -> int:
    """Exact ceil(base^exponent) for an integer base >= 1 and exponent >= 0.

    With exponent = a/b this is the smallest m with m^b >= base^a.
    """
    exponent = Fraction(exponent)
    if base < 1:
        raise ValueError(f"Base must be positive, got {base}")
    if exponent < 0:
        raise ValueError(f"Exponent must be non-negative, got {exponent}")
    return integer_root_ceil(base**exponent.numerator, exponent.denominator)


def parse_rational(text: str | int | Fraction) -> Fraction:
    """Parse an exact rational.

    Accepts integers, Fractions and strings of the form "a", "a/b" or "-a/b".
    Decimal notation is rejected: every rational enters the program exactly.

    Raises:
        ValueError: If the text is not an exact rational
    """
    if isinstance(text, Fraction):
        return text
    if isinstance(text, bool):
        raise ValueError(f"Not a rational: {text!r}")
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise ValueError(f"Not a rational: {text!r}")
    raw = text.strip()
    if not raw or any(ch in raw for ch in ".eE"):
        raise ValueError(f"Not an exact rational (use 'num/den'): {text!r}")
    parts = raw.split("/")
    if len(parts) > 2:
        raise ValueError(f"Not a rational: {text!r}")
    try:
        num = int(parts[0])
        den = int(parts[1]) if len(parts) == 2 else 1
    except ValueError as e:
        raise ValueError(f"Not a rational: {text!r}") from e
    if den == 0:
        raise ValueError(f"Zero denominator in {text!r}")
    return Fraction(num, den)


def fraction_str(value: Fraction | int) -> str:
    """Render a rational as "num/den" (integers keep a "/1" suffix)."""
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def _term_sign(coefficient: Fraction, base: Fraction, exponent: Fraction) -> int:
    if coefficient == 0:
        return 0
    if base < 0:
        raise ValueError(f"Negative base {base} in exact term")
    if base == 0:
        if exponent <= 0:
            raise ValueError("0 raised to a non-positive exponent")
        return 0
    return 1 if coefficient > 0 else -1


def _log_abs(coefficient: Fraction, base: Fraction, exponent: Fraction) -> float:
    """log|c| + e log b for c != 0 and b > 0."""
    c = abs(coefficient)
    return (
        math.log(c.numerator)
        - math.log(c.denominator)
        + float(exponent) * (math.log(base.numerator) - math.log(base.denominator))
    )


def compare_terms(
    lhs: tuple[Fraction, Fraction, Fraction],
    rhs: tuple[Fraction, Fraction, Fraction],
) -> int:
    """Compare c1 * b1^e1 with c2 * b2^e2 exactly.

    Each side is (coefficient, base, exponent) with rational entries and a
    non-negative base. Both sides are raised to the least common denominator of
    the exponents, which turns the comparison into one between rationals.

    Returns:
        -1, 0 or 1 as lhs is smaller, equal or larger
    """
    c1, b1, e1 = (Fraction(v) for v in lhs)
    c2, b2, e2 = (Fraction(v) for v in rhs)
    s1 = _term_sign(c1, b1, e1)
    s2 = _term_sign(c2, b2, e2)
    if s1 != s2 or s1 == 0:
        return (s1 > s2) - (s1 < s2)
    # Logarithms separated by far more than their rounding error decide alone;
    # the exact powers below can run to millions of digits
    l1, l2 = _log_abs(c1, b1, e1), _log_abs(c2, b2, e2)
    if abs(l1 - l2) > LOG_SEPARATION * max(1.0, abs(l1), abs(l2)):
        cmp = 1 if l1 > l2 else -1
        return cmp if s1 > 0 else -cmp
    L = math.lcm(e1.denominator, e2.denominator)
    v1 = abs(c1) ** L * b1 ** int(e1 * L)
    v2 = abs(c2) ** L * b2 ** int(e2 * L)
    cmp = (v1 > v2) - (v1 < v2)
    return cmp if s1 > 0 else -cmp


def term_float(coefficient: Fraction, base: Fraction, exponent: Fraction) -> float:
    """Approximate value of c * b^e for display (inf on overflow)."""
    c, b, e = Fraction(coefficient), Fraction(base), Fraction(exponent)
    if c == 0 or b == 0:
        return 0.0
    sign = 1.0 if c > 0 else -1.0
    log_value = (
        math.log(abs(c.numerator))
        - math.log(c.denominator)
        + float(e) * (math.log(b.numerator) - math.log(b.denominator))
    )
    try:
        return sign * math.exp(log_value)
    except OverflowError:
        return sign * math.inf
