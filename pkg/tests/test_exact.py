"""Unit tests for exact integer and rational helpers."""

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from heisenberg_freiman.exact import (
    MAX_MODULUS,
    ceil_power,
    compare_terms,
    fraction_str,
    integer_root_ceil,
    integer_root_floor,
    is_prime,
    parse_rational,
    require_prime_modulus,
    term_float,
)

# --- primality ---


def test_is_prime_small_values():
    """Test primality on the first integers."""
    primes = [n for n in range(60) if is_prime(n)]
    assert primes == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]


def test_is_prime_carmichael_and_large():
    """Test that Carmichael numbers are rejected and large primes accepted."""
    assert not is_prime(561)
    assert not is_prime(41041)
    assert is_prime(2_097_143)
    assert is_prime(1_000_000_007)


def test_require_prime_modulus_rejects_composites_and_large():
    """Test the modulus guard names the problem."""
    assert require_prime_modulus(101) == 101
    with pytest.raises(ValueError, match="not prime"):
        require_prime_modulus(91)
    with pytest.raises(ValueError, match="too large"):
        require_prime_modulus(1_000_000_007)
    with pytest.raises(ValueError, match="must be an integer"):
        require_prime_modulus(True)
    assert MAX_MODULUS == 2**21


# --- integer roots and powers ---


@given(st.integers(min_value=0, max_value=10**30), st.integers(min_value=1, max_value=7))
def test_integer_root_floor_brackets(n, k):
    """Test r^k <= n < (r+1)^k."""
    r = integer_root_floor(n, k)
    assert r**k <= n < (r + 1) ** k


@given(st.integers(min_value=0, max_value=10**30), st.integers(min_value=1, max_value=7))
def test_integer_root_ceil_brackets(n, k):
    """Test (r-1)^k < n <= r^k."""
    r = integer_root_ceil(n, k)
    assert r**k >= n
    assert r == 0 or (r - 1) ** k < n


def test_ceil_power_slab_widths():
    """Test ceil(p^alpha) on the slab widths used by the harness."""
    assert ceil_power(5, Fraction(43, 100)) == 2
    assert ceil_power(5, Fraction(0)) == 1
    assert ceil_power(4, Fraction(1, 2)) == 2
    assert ceil_power(5, Fraction(1, 2)) == 3
    # alpha0(1) + 1/100 at p = 5, alpha0(43/44) + 1/100 at p = 101
    assert ceil_power(5, Fraction(203, 300)) == 3
    assert ceil_power(101, Fraction(1011, 1100)) == 70


def test_ceil_power_rejects_negative_exponent():
    """Test ceil_power refuses negative exponents."""
    with pytest.raises(ValueError, match="non-negative"):
        ceil_power(5, Fraction(-1, 2))


# --- rationals ---


def test_parse_rational_forms():
    """Test the accepted spellings of a rational."""
    assert parse_rational("43/44") == Fraction(43, 44)
    assert parse_rational("-1/3") == Fraction(-1, 3)
    assert parse_rational("7") == 7
    assert parse_rational(2) == 2
    assert parse_rational(Fraction(1, 2)) == Fraction(1, 2)


@pytest.mark.parametrize("text", ["0.5", "1e3", "", "1/0", "a/b", "1/2/3", True])
def test_parse_rational_rejects(text):
    """Test that decimals and malformed values are refused."""
    with pytest.raises(ValueError):
        parse_rational(text)


def test_fraction_str_keeps_denominator():
    """Test that integers render with a /1 suffix."""
    assert fraction_str(Fraction(33, 32)) == "33/32"
    assert fraction_str(3) == "3/1"


# --- exact term comparison ---


def test_compare_terms_square_root():
    """Test sqrt(2) < 3/2 and 2^(1/2) = 4^(1/4)."""
    one = Fraction(1)
    assert compare_terms((one, Fraction(2), Fraction(1, 2)), (Fraction(3, 2), one, one)) == -1
    assert compare_terms((one, Fraction(2), Fraction(1, 2)), (one, Fraction(4), Fraction(1, 4))) == 0


def test_compare_terms_negative_exponent_and_sign():
    """Test 100 / 5^(3/2) against 8 and comparisons across signs."""
    one = Fraction(1)
    # 100 / 5^1.5 = 8.94...
    assert compare_terms((Fraction(100), Fraction(5), Fraction(-3, 2)), (Fraction(8), one, one)) == 1
    assert compare_terms((Fraction(-1), one, one), (Fraction(0), one, one)) == -1
    assert compare_terms((Fraction(-2), one, one), (Fraction(-3), one, one)) == 1


@given(
    st.fractions(min_value=0, max_value=1000),
    st.fractions(min_value=0, max_value=1000),
)
def test_compare_terms_matches_fraction_order(a, b):
    """Test that plain rationals compare like Fractions."""
    one = Fraction(1)
    assert compare_terms((a, one, one), (b, one, one)) == (a > b) - (a < b)


def test_term_float_approximates():
    """Test the display value of a term."""
    assert term_float(Fraction(1), Fraction(101), Fraction(3)) == pytest.approx(101**3)
    assert term_float(Fraction(0), Fraction(7), Fraction(2)) == 0.0
