"""Point-hyperplane incidences in F_p^d and the expander-mixing bound.

A hyperplane is a pair (a, b) with a != 0 and equation a . x = b; it is
stored normalised so that the first nonzero coefficient of a is 1.
"""

import logging
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel

from heisenberg_freiman.exact import require_prime_modulus
from heisenberg_freiman.reports import Rational

logger = logging.getLogger(__name__)

MIN_DIMENSION = 2
MAX_DIMENSION = 4


class DimensionMismatchError(ValueError):
    """Points and hyperplanes live in different spaces."""


def _check_space(d: int, p: int) -> None:
    require_prime_modulus(p)
    if not MIN_DIMENSION <= d <= MAX_DIMENSION:
        raise ValueError(f"Dimension must lie in {MIN_DIMENSION}..{MAX_DIMENSION}, got {d}")


@dataclass(frozen=True)
class PointSet:
    """Distinct points of F_p^d, one row per point."""

    d: int
    p: int
    coords: np.ndarray = field(repr=False)

    @classmethod
    def of(cls, d: int, p: int, points: Iterable[Sequence[int]]) -> "PointSet":
        _check_space(d, p)
        rows = [tuple(int(c) % p for c in pt) for pt in points]
        if any(len(r) != d for r in rows):
            raise DimensionMismatchError(f"Every point needs {d} coordinates")
        if rows:
            arr = np.unique(np.array(rows, dtype=np.int64), axis=0)
        else:
            arr = np.empty((0, d), dtype=np.int64)
        arr.setflags(write=False)
        return cls(d, p, arr)

    @classmethod
    def full(cls, d: int, p: int) -> "PointSet":
        """All p^d points."""
        _check_space(d, p)
        grids = np.meshgrid(*([np.arange(p, dtype=np.int64)] * d), indexing="ij")
        arr = np.stack([g.ravel() for g in grids], axis=1)
        arr.setflags(write=False)
        return cls(d, p, arr)

    def __len__(self) -> int:
        return int(self.coords.shape[0])

    def rows(self) -> list[tuple[int, ...]]:
        return [tuple(r) for r in self.coords.tolist()]


def normalize_hyperplane(coefficients: Sequence[int], offset: int, p: int) -> tuple[tuple[int, ...], int]:
    """Scale (a, b) so that the first nonzero entry of a is 1."""
    a = [int(c) % p for c in coefficients]
    lead = next((c for c in a if c), 0)
    if lead == 0:
        raise ValueError("Hyperplane needs a nonzero coefficient vector")
    scale = pow(lead, -1, p)
    return tuple(c * scale % p for c in a), int(offset) * scale % p


@dataclass(frozen=True)
class HyperplaneSet:
    """Normalised hyperplanes with the multiplicity each one was given with.

    The distinct hyperplanes are what the mixing bound counts; the
    multiplicities keep the raw family, which the energy identity needs.
    """

    d: int
    p: int
    coefficients: np.ndarray = field(repr=False)
    offsets: np.ndarray = field(repr=False)
    multiplicity: np.ndarray = field(repr=False)

    @classmethod
    def of(cls, d: int, p: int, hyperplanes: Iterable[tuple[Sequence[int], int]]) -> "HyperplaneSet":
        _check_space(d, p)
        rows = []
        for coefficients, offset in hyperplanes:
            if len(coefficients) != d:
                raise DimensionMismatchError(f"Every hyperplane needs {d} coefficients")
            a, b = normalize_hyperplane(coefficients, offset, p)
            rows.append((*a, b))
        if rows:
            arr, counts = np.unique(np.array(rows, dtype=np.int64), axis=0, return_counts=True)
        else:
            arr, counts = np.empty((0, d + 1), dtype=np.int64), np.empty(0, dtype=np.int64)
        coefficients_arr = np.ascontiguousarray(arr[:, :d])
        offsets_arr = np.ascontiguousarray(arr[:, d])
        for a in (coefficients_arr, offsets_arr, counts):
            a.setflags(write=False)
        return cls(d, p, coefficients_arr, offsets_arr, counts.astype(np.int64))

    @classmethod
    def all_hyperplanes(cls, d: int, p: int) -> "HyperplaneSet":
        """Every hyperplane of F_p^d: (p^d - 1)/(p - 1) directions times p offsets."""
        normals = PointSet.full(d, p).coords[1:]
        lead = normals[np.arange(len(normals)), np.argmax(normals != 0, axis=1)]
        normals = normals[lead == 1]
        return cls.of(d, p, ((tuple(a), b) for a in normals.tolist() for b in range(p)))

    def __len__(self) -> int:
        return int(self.offsets.shape[0])

    @property
    def raw_count(self) -> int:
        return int(self.multiplicity.sum())

    def rows(self) -> list[tuple[tuple[int, ...], int]]:
        return [(tuple(a), int(b)) for a, b in zip(self.coefficients.tolist(), self.offsets.tolist(), strict=True)]


# =============================================================================
# Counting
# =============================================================================


def _count_bucketed(points: np.ndarray, H: HyperplaneSet, weights: np.ndarray) -> int:
    # Group hyperplanes by coefficient vector: one evaluation a . P per group
    p = H.p
    if len(H) == 0 or len(points) == 0:
        return 0
    directions, inverse = np.unique(H.coefficients, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    total = 0
    for k, a in enumerate(directions):
        values = np.bincount(points @ a % p, minlength=p)
        members = inverse == k
        total += int(values[H.offsets[members]] @ weights[members])
    return total


def _count_brute(points: np.ndarray, H: HyperplaneSet, weights: np.ndarray) -> int:
    if len(H) == 0 or len(points) == 0:
        return 0
    hits = (points @ H.coefficients.T) % H.p == H.offsets[None, :]
    return int(hits.sum(axis=0) @ weights)


def count_incidences(
    P: PointSet,
    H: HyperplaneSet,
    *,
    method: Literal["bucketed", "brute"] = "bucketed",
    with_multiplicity: bool = False,
    threads: int = 1,
) -> int:
    """Number of pairs (x, (a, b)) with a . x = b.

    Args:
        with_multiplicity: Count each hyperplane as often as it was given

    Raises:
        DimensionMismatchError: If P and H live in different spaces
    """
    if (P.d, P.p) != (H.d, H.p):
        raise DimensionMismatchError(f"Points in F_{P.p}^{P.d} vs hyperplanes in F_{H.p}^{H.d}")
    weights = H.multiplicity if with_multiplicity else np.ones(len(H), dtype=np.int64)
    counter = _count_bucketed if method == "bucketed" else _count_brute
    if threads <= 1 or len(P) < 2 * threads:
        return counter(P.coords, H, weights)
    parts = np.array_split(P.coords, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return sum(pool.map(lambda part: counter(part, H, weights), parts))


def vinh_bound(size_P: int, size_H: int, p: int, d: int, c: float = 2.0) -> float:
    """|P||H|/p + c p^((d-1)/2) sqrt(|P||H|)."""
    if c <= 0:
        raise ValueError(f"Constant c must be positive, got {c}")
    n = size_P * size_H
    return n / p + float(c) * p ** ((d - 1) / 2) * n**0.5


class IncidenceReport(BaseModel):
    d: int
    p: int
    size_P: int
    size_H: int
    raw_hyperplanes: int
    incidences: int
    main_term: Rational
    error_budget: float
    bound: float
    slack: float
    c: Rational
    holds: bool


def verify_vinh(P: PointSet, H: HyperplaneSet, c: Fraction = Fraction(2), *, threads: int = 1) -> IncidenceReport:
    """Count incidences and compare with the mixing bound.

    The verdict is exact: I <= main + c p^((d-1)/2) sqrt(|P||H|) iff I <= main
    or (I - main)^2 <= c^2 p^(d-1) |P||H|.
    """
    c = Fraction(c)
    incidences = count_incidences(P, H, threads=threads)
    n = len(P) * len(H)
    main = Fraction(n, P.p)
    excess = incidences - main
    holds = excess <= 0 or excess * excess <= c * c * P.p ** (P.d - 1) * n
    error_budget = float(c) * P.p ** ((P.d - 1) / 2) * n**0.5
    bound = float(main) + error_budget
    if not holds:
        logger.warning(f"Mixing bound with c={c} fails at p={P.p}, d={P.d}: {incidences} > {bound:.1f}")
    return IncidenceReport(
        d=P.d,
        p=P.p,
        size_P=len(P),
        size_H=len(H),
        raw_hyperplanes=H.raw_count,
        incidences=incidences,
        main_term=main,
        error_budget=error_budget,
        bound=bound,
        slack=bound - incidences,
        c=c,
        holds=holds,
    )


def energy_to_incidence(
    X: Iterable[int], Y: Iterable[int], Z: Iterable[int], p: int
) -> tuple[PointSet, HyperplaneSet]:
    """Points (y, y', z) in Y x Y x Z and hyperplanes x1 y - x1' y' + z = z1'.

    Counting incidences with multiplicity gives the number of solutions of
    xy + z = x'y' + z', i.e. the additive energy of the r-table.
    """
    xs = sorted({int(v) % p for v in X})
    ys = sorted({int(v) % p for v in Y})
    zs = sorted({int(v) % p for v in Z})
    if not (xs and ys and zs):
        raise ValueError("energy_to_incidence needs non-empty sets")
    points = PointSet.of(3, p, ((y, yp, z) for y in ys for yp in ys for z in zs))
    hyperplanes = HyperplaneSet.of(
        3, p, (((x1, -x1p, 1), z1p) for x1 in xs for x1p in xs for z1p in zs)
    )
    logger.debug(f"Energy instance: {len(points)} points, {hyperplanes.raw_count} hyperplanes")
    return points, hyperplanes


# =============================================================================
# Instance files
# =============================================================================


def read_instance_file(path: Path) -> tuple[PointSet, HyperplaneSet]:
    """Read "d=<d> p=<p>", a "P" section of points and an "H" section of "a1 .. ad b" rows."""
    path = Path(path)
    lines = [(i + 1, line.strip()) for i, line in enumerate(path.read_text().splitlines())]
    lines = [(n, line) for n, line in lines if line and not line.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty instance file")
    lineno, header = lines[0]
    try:
        fields = dict(part.split("=", 1) for part in header.split())
        d, p = int(fields["d"]), int(fields["p"])
        _check_space(d, p)
    except (KeyError, ValueError) as e:
        raise ValueError(f"{path}:{lineno}: bad header {header!r} ({e})") from e

    section = None
    points: list[list[int]] = []
    hyperplanes: list[tuple[list[int], int]] = []
    for lineno, line in lines[1:]:
        if line in ("P", "H"):
            section = line
            continue
        try:
            values = [int(tok) for tok in line.split()]
        except ValueError as e:
            raise ValueError(f"{path}:{lineno}: {e}") from e
        if section == "P":
            if len(values) != d:
                raise ValueError(f"{path}:{lineno}: point needs {d} coordinates")
            points.append(values)
        elif section == "H":
            if len(values) != d + 1:
                raise ValueError(f"{path}:{lineno}: hyperplane needs {d + 1} entries")
            if not any(v % p for v in values[:d]):
                raise ValueError(f"{path}:{lineno}: zero coefficient vector")
            hyperplanes.append((values[:d], values[d]))
        else:
            raise ValueError(f"{path}:{lineno}: data before a 'P' or 'H' section")
    return PointSet.of(d, p, points), HyperplaneSet.of(d, p, hyperplanes)


def write_instance_file(P: PointSet, H: HyperplaneSet, path: Path) -> None:
    lines = [f"d={P.d} p={P.p}", "P"]
    lines.extend(" ".join(str(c) for c in row) for row in P.rows())
    lines.append("H")
    lines.extend(" ".join(str(c) for c in (*a, b)) for a, b in H.rows())
    Path(path).write_text("\n".join(lines) + "\n")
