"""Finite subsets of a group and the product-set machinery built on them.

A GroupSet stores the sorted packed ids of its members. Membership uses a
dense bitmap when the group is small enough (every Heisenberg group at desk
scale), otherwise a binary search over the sorted ids.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel

from heisenberg_freiman.exact import ceil_power, require_prime_modulus
from heisenberg_freiman.groups import DENSE_ORDER_LIMIT, FiniteGroup, Heisenberg
from heisenberg_freiman.reports import Rational

logger = logging.getLogger(__name__)

DEFAULT_PRODUCT_BUDGET = 100_000_000

# Pair products evaluated per vectorised block
_BLOCK_CELLS = 1 << 22


class BudgetExceededError(ValueError):
    """A computation would exceed its configured size budget."""

    def __init__(self, message: str, *, max_feasible_s: int | None = None):
        super().__init__(message)
        self.max_feasible_s = max_feasible_s


# =============================================================================
# GroupSet
# =============================================================================


@dataclass(frozen=True, eq=False)
class GroupSet:
    """An immutable finite subset of a group, keyed by packed ids."""

    group: FiniteGroup
    ids: np.ndarray = field(repr=False)

    @classmethod
    def from_ids(
        cls, group: FiniteGroup, ids: Iterable[int] | np.ndarray, *, assume_unique: bool = False
    ) -> GroupSet:
        arr = np.asarray(ids if isinstance(ids, np.ndarray) else list(ids), dtype=np.int64)
        arr = arr.ravel()
        if not assume_unique:
            arr = np.unique(arr)
        if len(arr) and (arr[0] < 0 or arr[-1] >= group.order):
            raise ValueError(f"Packed ids outside {group!r}")
        arr = np.array(arr, dtype=np.int64)
        arr.setflags(write=False)
        return cls(group, arr)

    @classmethod
    def from_elements(cls, group: FiniteGroup, elements: Iterable[Any]) -> GroupSet:
        return cls.from_ids(group, [group.encode(e) for e in elements])

    @classmethod
    def whole(cls, group: FiniteGroup) -> GroupSet:
        return cls.from_ids(group, group.all_ids(), assume_unique=True)

    @property
    def size(self) -> int:
        return int(len(self.ids))

    def __len__(self) -> int:
        return self.size

    def __iter__(self):
        return (self.group.decode(int(i)) for i in self.ids)

    @cached_property
    def _mask(self) -> np.ndarray | None:
        if self.group.order > DENSE_ORDER_LIMIT:
            return None
        mask = np.zeros(self.group.order, dtype=bool)
        mask[self.ids] = True
        return mask

    def contains_ids(self, ids: np.ndarray) -> np.ndarray:
        """Vectorised membership of packed ids."""
        ids = np.asarray(ids, dtype=np.int64)
        if self._mask is not None:
            return self._mask[ids]
        pos = np.searchsorted(self.ids, ids)
        pos = np.minimum(pos, max(0, len(self.ids) - 1))
        return (self.ids[pos] == ids) if len(self.ids) else np.zeros(ids.shape, dtype=bool)

    def contains_id(self, packed_id: int) -> bool:
        return bool(self.contains_ids(np.array([packed_id]))[0])

    def __contains__(self, element: Any) -> bool:
        try:
            return self.contains_id(self.group.encode(element))
        except ValueError:
            return False

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, GroupSet)
            and other.group == self.group
            and np.array_equal(other.ids, self.ids)
        )

    __hash__ = None

    def issubset(self, other: GroupSet) -> bool:
        return bool(other.contains_ids(self.ids).all())

    def describe(self) -> list[Any]:
        return [self.group.describe(int(i)) for i in self.ids]


def _same_group(x: GroupSet, y: GroupSet) -> FiniteGroup:
    if x.group != y.group:
        raise ValueError(f"Sets live in different groups: {x.group!r} and {y.group!r}")
    return x.group


# =============================================================================
# Products
# =============================================================================


def _products_of_block(group: FiniteGroup, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    found = []
    step = max(1, _BLOCK_CELLS // max(1, len(right)))
    for start in range(0, len(left), step):
        block = left[start : start + step]
        found.append(np.unique(group.mul_ids(block[:, None], right[None, :])))
    return np.unique(np.concatenate(found)) if found else np.empty(0, dtype=np.int64)


def product_set(
    X: GroupSet,
    Y: GroupSet,
    *,
    budget: int = DEFAULT_PRODUCT_BUDGET,
    threads: int = 1,
) -> GroupSet:
    """The product set XY = {x * y : x in X, y in Y}.

    With threads > 1 the left operand is partitioned and the partial results
    are merged; the result does not depend on the partition.

    Raises:
        BudgetExceededError: If the result could exceed `budget` elements
    """
    group = _same_group(X, Y)
    bound = min(X.size * Y.size, group.order)
    if bound > budget:
        raise BudgetExceededError(
            f"Product set of sizes {X.size} x {Y.size} may reach {bound} elements "
            f"(budget {budget})"
        )
    if X.size == 0 or Y.size == 0:
        return GroupSet.from_ids(group, [])

    if threads <= 1 or X.size < 2 * threads:
        ids = _products_of_block(group, X.ids, Y.ids)
    else:
        parts = np.array_split(X.ids, threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda part: _products_of_block(group, part, Y.ids), parts))
        ids = np.unique(np.concatenate(results))
    logger.debug(f"Product set |X|={X.size} |Y|={Y.size} -> {len(ids)}")
    return GroupSet.from_ids(group, ids, assume_unique=True)


def inverse_set(X: GroupSet) -> GroupSet:
    """X^-1 = {x^-1 : x in X}."""
    return GroupSet.from_ids(X.group, X.group.inv_ids(X.ids))


@dataclass(frozen=True)
class SignedWordPattern:
    """Signs (+1 / -1) of an iterated product A^e1 A^e2 ... A^en."""

    signs: tuple[int, ...]

    def __post_init__(self):
        if len(self.signs) < 1:
            raise ValueError("A signed word pattern needs at least one sign")
        if any(s not in (1, -1) for s in self.signs):
            raise ValueError(f"Signs must be +1 or -1, got {self.signs}")

    @classmethod
    def parse(cls, text: str) -> SignedWordPattern:
        """Parse "++--+" or "+1,+1,-1" style patterns."""
        raw = text.replace(",", "").replace(" ", "").replace("1", "")
        if not raw or any(ch not in "+-" for ch in raw):
            raise ValueError(f"Bad sign pattern {text!r}")
        return cls(tuple(1 if ch == "+" else -1 for ch in raw))

    def __str__(self) -> str:
        return "".join("+" if s > 0 else "-" for s in self.signs)


# A^2 A^-2 A: products [u,v,t] of the first step
PATTERN_FIRST_STEP = SignedWordPattern((1, 1, -1, -1, 1))
# A^2 A^-2 A A^-1: the set B whose center coverage is checked
PATTERN_CENTER = SignedWordPattern((1, 1, -1, -1, 1, -1))


def signed_product_set(
    A: GroupSet,
    pattern: SignedWordPattern,
    *,
    budget: int = DEFAULT_PRODUCT_BUDGET,
    threads: int = 1,
) -> GroupSet:
    """All products a1^e1 ... an^en with every ai in A."""
    inverse = inverse_set(A)
    factors = {1: A, -1: inverse}
    result = factors[pattern.signs[0]]
    for sign in pattern.signs[1:]:
        result = product_set(result, factors[sign], budget=budget, threads=threads)
    logger.info(f"Signed product {pattern} of |A|={A.size}: {result.size} elements")
    return result


# =============================================================================
# The slab A0 and its statistics
# =============================================================================


def slab_width(p: int, alpha: Fraction) -> int:
    """m = ceil(p^alpha): the number of integers in [0, p^alpha)."""
    return ceil_power(p, Fraction(alpha))


def build_slab(p: int, m: int) -> GroupSet:
    """{[x, y, z] : 0 <= x < m} in Heisenberg(p); its ids are exactly range(m p^2)."""
    group = Heisenberg(p)
    if not 1 <= m <= p:
        raise ValueError(f"Slab width m={m} must satisfy 1 <= m <= p={p}")
    return GroupSet.from_ids(group, np.arange(m * p * p, dtype=np.int64), assume_unique=True)


def build_A0(p: int, alpha: Fraction) -> GroupSet:
    """A0 = {[x,y,z] : 0 <= x < p^alpha, y, z in F_p}, |A0| = m p^2.

    Raises:
        ValueError: If alpha is outside [0, 1) or the slab does not fit
    """
    require_prime_modulus(p)
    alpha = Fraction(alpha)
    if not 0 <= alpha < 1:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    m = slab_width(p, alpha)
    if m > p:
        raise ValueError(f"alpha={alpha} too large for p={p}: slab width {m} > p")
    logger.info(f"A0 for p={p}, alpha={alpha}: slab width m={m}, |A0|={m * p * p}")
    return build_slab(p, m)


class DoublingReport(BaseModel):
    """Sizes of A and AA."""

    size_A: int
    size_AA: int
    ratio: Rational
    small_squaring: bool


def doubling_stats(A: GroupSet, *, budget: int = DEFAULT_PRODUCT_BUDGET, threads: int = 1) -> DoublingReport:
    if A.size == 0:
        raise ValueError("doubling_stats needs a non-empty set")
    AA = product_set(A, A, budget=budget, threads=threads)
    return DoublingReport(
        size_A=A.size,
        size_AA=AA.size,
        ratio=Fraction(AA.size, A.size),
        small_squaring=AA.size < 2 * A.size,
    )


# =============================================================================
# Fibers
# =============================================================================


@dataclass(frozen=True)
class Fibers:
    """Three coordinate fibers inside A.

    [x, y0, z0] in A for x in X; [x0, y, z0p] in A for y in Y;
    [u, v, z] in A for z in Z.
    """

    p: int
    X: tuple[int, ...]
    y0: int
    z0: int
    Y: tuple[int, ...]
    x0: int
    z0p: int
    Z: tuple[int, ...]
    u: int
    v: int

    def summary(self) -> dict:
        return {
            "size_X": len(self.X),
            "size_Y": len(self.Y),
            "size_Z": len(self.Z),
            "X_base": [self.y0, self.z0],
            "Y_base": [self.x0, self.z0p],
            "Z_base": [self.u, self.v],
        }


def _largest_fiber(keys: np.ndarray, values: np.ndarray, n_keys: int) -> tuple[int, np.ndarray]:
    # argmax returns the first maximum, i.e. the lexicographically smallest key
    counts = np.bincount(keys, minlength=n_keys)
    best = int(np.argmax(counts))
    return best, np.sort(values[keys == best])


def extract_fibers(A: GroupSet) -> Fibers:
    """Largest x-, y- and z-fibers of a subset of Heisenberg(p).

    Ties go to the lexicographically smallest base point.
    """
    group = A.group
    if not isinstance(group, Heisenberg):
        raise ValueError("extract_fibers needs a subset of a Heisenberg group")
    if A.size == 0:
        raise ValueError("extract_fibers needs a non-empty set")
    p = group.p
    x, y, z = group.split_ids(A.ids)
    xkey, X = _largest_fiber(y * p + z, x, p * p)
    ykey, Y = _largest_fiber(x * p + z, y, p * p)
    zkey, Z = _largest_fiber(x * p + y, z, p * p)
    fibers = Fibers(
        p=p,
        X=tuple(int(v) for v in X),
        y0=xkey // p,
        z0=xkey % p,
        Y=tuple(int(v) for v in Y),
        x0=ykey // p,
        z0p=ykey % p,
        Z=tuple(int(v) for v in Z),
        u=zkey // p,
        v=zkey % p,
    )
    logger.info(f"Fibers of |A|={A.size}: |X|={len(X)} |Y|={len(Y)} |Z|={len(Z)}")
    return fibers


# =============================================================================
# Sampling and files
# =============================================================================


def sample_subset(A0: GroupSet, theta: Fraction, seed: int) -> GroupSet:
    """Uniform random subset of size ceil(|A0|^theta), reproducible from seed."""
    theta = Fraction(theta)
    if not 0 < theta <= 1:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    target = ceil_power(A0.size, theta)
    if target > A0.size:
        raise ValueError(f"Target size {target} exceeds |A0|={A0.size}")
    if target == A0.size:
        return A0
    rng = np.random.default_rng(seed)
    chosen = rng.choice(A0.ids, size=target, replace=False)
    logger.info(f"Sampled {target} of {A0.size} elements (theta={theta}, seed={seed})")
    return GroupSet.from_ids(A0.group, chosen)


def read_set_file(path: Path) -> GroupSet:
    """Read "p=<prime>" then one "x y z" line per element; duplicates rejected."""
    path = Path(path)
    lines = [(i + 1, line.strip()) for i, line in enumerate(path.read_text().splitlines())]
    lines = [(n, line) for n, line in lines if line and not line.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty set file")
    lineno, header = lines[0]
    if not header.startswith("p="):
        raise ValueError(f"{path}:{lineno}: expected 'p=<prime>', got {header!r}")
    try:
        group = Heisenberg(int(header[2:]))
    except ValueError as e:
        raise ValueError(f"{path}:{lineno}: {e}") from e
    seen: dict[int, int] = {}
    for lineno, line in lines[1:]:
        try:
            element = group.parse_element(line.split())
        except ValueError as e:
            raise ValueError(f"{path}:{lineno}: {e}") from e
        key = element.packed_id
        if key in seen:
            raise ValueError(f"{path}:{lineno}: duplicate of line {seen[key]}")
        seen[key] = lineno
    if not seen:
        raise ValueError(f"{path}: set file has no elements")
    return GroupSet.from_ids(group, list(seen))


def write_set_file(A: GroupSet, path: Path) -> None:
    group = A.group
    if not isinstance(group, Heisenberg):
        raise ValueError("Set files hold subsets of Heisenberg groups")
    lines = [f"p={group.p}"]
    lines.extend(" ".join(str(c) for c in group.describe(int(i))) for i in A.ids)
    Path(path).write_text("\n".join(lines) + "\n")


def heisenberg_set(p: int, triples: Sequence[tuple[int, int, int]]) -> GroupSet:
    """Convenience constructor from coordinate triples."""
    group = Heisenberg(p)
    return GroupSet.from_elements(group, (group.element(*t) for t in triples))
