"""Representation counts over F_p and the character sums that bound them.

r(t) counts triples (x, y, z) in X x Y x Z with t = xy + z - x0*y0, and N(t)
counts quadruples with t = xy + z - z' - x0*y0. Counts are exact integers
built from the distribution of the products xy (a bincount) shifted by the
elements of Z; character sums use a table of p-th roots of unity.
"""

import csv
import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel

from heisenberg_freiman.exact import fraction_str, require_prime_modulus
from heisenberg_freiman.reports import Rational

logger = logging.getLogger(__name__)

VINOGRADOV_TOLERANCE = 1e-6
PARSEVAL_RELATIVE_TOLERANCE = 1e-9
# Entries per bincount pass when collecting |T(h)|^2 coefficients
PARSEVAL_CHUNK = 1 << 22


class EmptyInputError(ValueError):
    """A counting operation received an empty set."""


def _residues(values: Iterable[int], p: int, name: str) -> np.ndarray:
    arr = np.unique(np.asarray([int(v) % p for v in values], dtype=np.int64))
    if len(arr) == 0:
        raise EmptyInputError(f"Set {name} is empty")
    return arr


# =============================================================================
# Representation counts
# =============================================================================


@dataclass(frozen=True)
class RepCountTable:
    """Counts indexed by t in F_p."""

    p: int
    kind: Literal["r", "N"]
    counts: np.ndarray = field(repr=False)
    sizes: tuple[int, int, int]

    def __post_init__(self):
        self.counts.setflags(write=False)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __getitem__(self, t: int) -> int:
        return int(self.counts[t % self.p])

    def positive_everywhere(self) -> bool:
        return bool((self.counts > 0).all())

    def to_csv(self, path: Path) -> None:
        """Write "t,count" rows after a header comment with p and the set sizes."""
        with Path(path).open("w", newline="") as f:
            sx, sy, sz = self.sizes
            f.write(f"# kind={self.kind} p={self.p} |X|={sx} |Y|={sy} |Z|={sz}\n")
            writer = csv.writer(f)
            writer.writerow(["t", "count"])
            for t, count in enumerate(self.counts.tolist()):
                writer.writerow([t, count])


def product_distribution(X: np.ndarray, Y: np.ndarray, p: int) -> np.ndarray:
    """c[k] = #{(x, y) in X x Y : xy = k mod p}."""
    return np.bincount((X[:, None] * Y[None, :] % p).ravel(), minlength=p).astype(np.int64)


def rep_counts_r(
    X: Iterable[int], Y: Iterable[int], Z: Iterable[int], x0: int, y0: int, p: int
) -> RepCountTable:
    """r(t) = #{(x, y, z) : xy + z - x0*y0 = t}."""
    require_prime_modulus(p)
    xs, ys, zs = _residues(X, p, "X"), _residues(Y, p, "Y"), _residues(Z, p, "Z")
    prod = product_distribution(xs, ys, p)
    shift = (x0 * y0) % p
    counts = np.zeros(p, dtype=np.int64)
    for z in zs.tolist():
        counts += np.roll(prod, (z - shift) % p)
    return RepCountTable(p, "r", counts, (len(xs), len(ys), len(zs)))


def rep_counts_N(
    X: Iterable[int], Y: Iterable[int], Z: Iterable[int], x0: int, y0: int, p: int
) -> RepCountTable:
    """N(t) = #{(x, y, z, z') : xy + z - z' - x0*y0 = t}: r convolved with -Z."""
    r = rep_counts_r(X, Y, Z, x0, y0, p)
    zs = _residues(Z, p, "Z")
    counts = np.zeros(p, dtype=np.int64)
    for zp in zs.tolist():
        counts += np.roll(r.counts, -zp)
    return RepCountTable(p, "N", counts, r.sizes)


def additive_energy(table: RepCountTable) -> int:
    """Sum of r(t)^2: the number of solutions of xy + z = x'y' + z'."""
    return sum(c * c for c in table.counts.tolist())


class EnergyBoundReport(BaseModel):
    energy: int
    bound: Rational
    holds: bool
    slack: Rational


def energy_bound(size_X: int, size_Y: int, size_Z: int, p: int, c: Fraction = Fraction(2)) -> Fraction:
    """(|X||Y||Z|)^2 / p + c p |X||Y||Z|."""
    n = size_X * size_Y * size_Z
    return Fraction(n * n, p) + Fraction(c) * p * n


def verify_energy_bound(table: RepCountTable, c: Fraction = Fraction(2)) -> EnergyBoundReport:
    """Check sum r(t)^2 <= (|X||Y||Z|)^2/p + c p |X||Y||Z| exactly."""
    energy = additive_energy(table)
    bound = energy_bound(*table.sizes, table.p, c)
    holds = energy <= bound
    if not holds:
        logger.warning(f"Energy bound fails at p={table.p}: {energy} > {float(bound):.1f}")
    return EnergyBoundReport(energy=energy, bound=bound, holds=holds, slack=bound - energy)


# =============================================================================
# Exceptions
# =============================================================================


class ExceptionReport(BaseModel):
    """The exception set E = {t : r(t) = 0} and the bounds around it."""

    p: int
    e: list[int]
    covered_size: int
    e_minus_e: list[int]
    energy: int
    bound_cauchy: Rational
    cauchy_holds: bool
    bound_exceptions: Rational
    bound_holds: bool
    energy_bound_holds: bool

    @property
    def chain_consistent(self) -> bool:
        """Energy bound holding must force the exception bound to hold."""
        return self.cauchy_holds and (self.bound_holds or not self.energy_bound_holds)


def difference_set(E: Iterable[int], p: int) -> list[int]:
    """E - E mod p."""
    arr = np.asarray(sorted(set(int(e) % p for e in E)), dtype=np.int64)
    if len(arr) == 0:
        return []
    return np.unique((arr[:, None] - arr[None, :]) % p).tolist()


def exception_set(table: RepCountTable) -> ExceptionReport:
    """E, C = F_p minus E, E - E and the Cauchy-Schwarz / exception bounds."""
    if table.kind != "r":
        raise ValueError("exception_set needs an r-table")
    p = table.p
    E = np.nonzero(table.counts == 0)[0].tolist()
    covered = p - len(E)
    n = table.total
    energy = additive_energy(table)
    bound_cauchy = Fraction(n * n, energy)
    bound_exceptions = Fraction(2 * p**3, n)
    energy_ok = verify_energy_bound(table).holds
    report = ExceptionReport(
        p=p,
        e=E,
        covered_size=covered,
        e_minus_e=difference_set(E, p),
        energy=energy,
        bound_cauchy=bound_cauchy,
        cauchy_holds=covered * energy >= n * n,
        bound_exceptions=bound_exceptions,
        bound_holds=len(E) <= bound_exceptions,
        energy_bound_holds=energy_ok,
    )
    logger.info(f"Exceptions at p={p}: |E|={len(E)}, |E-E|={len(report.e_minus_e)}")
    return report


# =============================================================================
# Character sums
# =============================================================================


@lru_cache(maxsize=32)
def roots_of_unity(p: int) -> np.ndarray:
    """e(k/p) for k = 0..p-1."""
    roots = np.exp(2j * np.pi * np.arange(p) / p)
    roots.setflags(write=False)
    return roots


@dataclass(frozen=True)
class ExpSumSeries:
    """A character sum evaluated at every h in F_p."""

    p: int
    values: np.ndarray = field(repr=False)

    def __getitem__(self, h: int) -> complex:
        return complex(self.values[h % self.p])


def _series_from_distribution(dist: np.ndarray, p: int) -> np.ndarray:
    # sum_k dist[k] e(hk/p) for every h, using the root table
    h = np.arange(p, dtype=np.int64)
    return roots_of_unity(p)[(h[:, None] * np.arange(p)[None, :]) % p] @ dist


def exp_sum_S(X: Iterable[int], Y: Iterable[int], h: int, p: int) -> complex:
    """S(h) = sum over (x, y) in X x Y of e(hxy/p)."""
    xs, ys = _residues(X, p, "X"), _residues(Y, p, "Y")
    dist = product_distribution(xs, ys, p)
    k = np.arange(p)
    return complex(roots_of_unity(p)[(h % p) * k % p] @ dist)


def exp_sum_series_S(X: Iterable[int], Y: Iterable[int], p: int) -> ExpSumSeries:
    xs, ys = _residues(X, p, "X"), _residues(Y, p, "Y")
    return ExpSumSeries(p, _series_from_distribution(product_distribution(xs, ys, p), p))


def exp_sum_series_T(Z: Iterable[int], p: int) -> ExpSumSeries:
    """T(h) = sum over z in Z of e(hz/p)."""
    zs = _residues(Z, p, "Z")
    return ExpSumSeries(p, _series_from_distribution(np.bincount(zs, minlength=p), p))


class VinogradovReport(BaseModel):
    p: int
    size_X: int
    size_Y: int
    bound: float
    max_abs: float
    max_ratio: float
    worst_h: int | None
    holds: bool


def verify_vinogradov(X: Iterable[int], Y: Iterable[int], p: int) -> VinogradovReport:
    """Check |S(h)| <= sqrt(p|X||Y|) + 1e-6 for every h != 0."""
    xs, ys = _residues(X, p, "X"), _residues(Y, p, "Y")
    series = exp_sum_series_S(xs, ys, p)
    bound = float(np.sqrt(p * len(xs) * len(ys)))
    magnitudes = np.abs(series.values[1:])
    worst = int(np.argmax(magnitudes)) + 1 if len(magnitudes) else None
    max_abs = float(magnitudes.max()) if len(magnitudes) else 0.0
    holds = max_abs <= bound + VINOGRADOV_TOLERANCE
    if not holds:
        logger.warning(f"Vinogradov bound fails at p={p}, h={worst}: {max_abs} > {bound}")
    return VinogradovReport(
        p=p,
        size_X=len(xs),
        size_Y=len(ys),
        bound=bound,
        max_abs=max_abs,
        max_ratio=max_abs / bound,
        worst_h=worst,
        holds=holds,
    )


class ParsevalReport(BaseModel):
    p: int
    size_Z: int
    mean_square: float
    relative_error: float
    float_holds: bool
    exact_sum: int | None
    exact_holds: bool


def square_sum_coefficients(Z: Iterable[int], p: int) -> np.ndarray:
    """Coefficients of sum_h T(h) conj(T(h)) in Z[x]/(x^p - 1).

    T(h) = sum_z x^(hz) and conj sends x^k to x^-k, so the coefficient at x^k
    is #{(h, z, z') : h(z - z') = k}.
    """
    zs = _residues(Z, p, "Z")
    diffs = ((zs[:, None] - zs[None, :]) % p).ravel()
    coefficients = np.zeros(p, dtype=np.int64)
    rows = max(1, PARSEVAL_CHUNK // len(diffs))
    for start in range(0, p, rows):
        h = np.arange(start, min(start + rows, p), dtype=np.int64)
        coefficients += np.bincount(((h[:, None] * diffs[None, :]) % p).ravel(), minlength=p)
    return coefficients


def cyclotomic_value(coefficients: np.ndarray) -> int | None:
    """sum_k c_k zeta^k at a primitive p-th root of unity, or None if irrational.

    1 + zeta + ... + zeta^(p-1) = 0, so the value is rational iff
    c_1 = ... = c_(p-1), and it is then c_0 - c_1.
    """
    c = np.asarray(coefficients, dtype=np.int64)
    if len(c) == 1:
        return int(c[0])
    if not (c[1:] == c[1]).all():
        return None
    return int(c[0] - c[1])


def verify_parseval(Z: Iterable[int], p: int) -> ParsevalReport:
    """(1/p) sum over all h mod p of |T(h)|^2 = |Z|.

    The float side evaluates the character sums. The exact side builds
    sum_h |T(h)|^2 in Z[x]/(x^p - 1), evaluates it at a root of unity and
    compares with p|Z|.
    """
    zs = _residues(Z, p, "Z")
    series = exp_sum_series_T(zs, p)
    mean_square = float(np.sum(np.abs(series.values) ** 2) / p)
    size = len(zs)
    relative_error = abs(mean_square - size) / size
    exact_sum = cyclotomic_value(square_sum_coefficients(zs, p))
    if exact_sum is None:
        logger.error(f"sum |T(h)|^2 over Z of size {size} is not an integer at p={p}")
    return ParsevalReport(
        p=p,
        size_Z=size,
        mean_square=mean_square,
        relative_error=relative_error,
        float_holds=relative_error <= PARSEVAL_RELATIVE_TOLERANCE,
        exact_sum=exact_sum,
        exact_holds=exact_sum == p * size,
    )


class NLowerBound(BaseModel):
    """|X||Y||Z|^2/p - sqrt(p|X||Y|)|Z|, with the square root kept symbolic."""

    main_term: Rational
    subtracted_squared: Rational
    sign: int
    implies_positive: bool


def N_lower_bound(size_X: int, size_Y: int, size_Z: int, p: int) -> NLowerBound:
    """Lower bound for every N(t) and its sign, decided exactly.

    main^2 vs subtracted^2 reduces to |X||Y||Z|^2 vs p^3. The bound is a strict
    lower bound, so N(t) > 0 as soon as |X||Y||Z|^2 >= p^3.
    """
    if min(size_X, size_Y, size_Z) < 1:
        raise EmptyInputError("N_lower_bound needs positive set sizes")
    key = size_X * size_Y * size_Z**2
    cube = p**3
    return NLowerBound(
        main_term=Fraction(key, p),
        subtracted_squared=Fraction(p * size_X * size_Y * size_Z**2),
        sign=(key > cube) - (key < cube),
        implies_positive=key >= cube,
    )


def exception_report_json(report: ExceptionReport) -> dict:
    """The exported view: e, covered_size and the bounds, under the interface's key names."""
    return {
        "e": report.e,
        "covered_size": report.covered_size,
        "bound_cauchy": fraction_str(report.bound_cauchy),
        "bound_new14": fraction_str(report.bound_exceptions),
        "bound_holds": report.bound_holds,
    }
