"""Finite groups: the Heisenberg group over F_p and groups given by a table.

Both kinds implement `FiniteGroup`, which works on two representations:

- elements (HeisElement for Heisenberg, int index for tables) for readable,
  one-at-a-time arithmetic
- packed integer ids in numpy arrays, for vectorised products over large sets

Element [x, y, z] of Heisenberg(p) is the matrix

    1 x z
    0 1 y
    0 0 1

and packs to the id (x * p + y) * p + z.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass
from itertools import permutations
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from heisenberg_freiman.exact import require_prime_modulus

if TYPE_CHECKING:
    from heisenberg_freiman.sets import GroupSet

logger = logging.getLogger(__name__)

# Exhaustive associativity check up to this order, sampling above it
ASSOCIATIVITY_EXHAUSTIVE_MAX = 512
ASSOCIATIVITY_SAMPLES = 100_000

# Groups up to this order keep membership in a dense bitmap
DENSE_ORDER_LIMIT = 1 << 26


class ModulusMismatchError(ValueError):
    """Elements over different prime fields were combined."""


class TableGroupError(ValueError):
    """A multiplication table does not define a group."""


# =============================================================================
# Scalars and Heisenberg elements
# =============================================================================


@dataclass(frozen=True, slots=True)
class FpScalar:
    """A residue modulo a prime p."""

    value: int
    p: int

    def __post_init__(self):
        if not 0 <= self.value < self.p:
            raise ValueError(f"Residue {self.value} outside [0, {self.p})")

    def _check(self, other: FpScalar) -> None:
        if other.p != self.p:
            raise ModulusMismatchError(f"Moduli differ: {self.p} and {other.p}")

    def __add__(self, other: FpScalar) -> FpScalar:
        self._check(other)
        return FpScalar((self.value + other.value) % self.p, self.p)

    def __sub__(self, other: FpScalar) -> FpScalar:
        self._check(other)
        return FpScalar((self.value - other.value) % self.p, self.p)

    def __mul__(self, other: FpScalar) -> FpScalar:
        self._check(other)
        return FpScalar(self.value * other.value % self.p, self.p)

    def __neg__(self) -> FpScalar:
        return FpScalar(-self.value % self.p, self.p)

    def __int__(self) -> int:
        return self.value


@dataclass(frozen=True, slots=True)
class HeisElement:
    """The Heisenberg matrix [x, y, z] over F_p."""

    x: int
    y: int
    z: int
    p: int

    def __post_init__(self):
        for name in ("x", "y", "z"):
            value = getattr(self, name)
            if not 0 <= value < self.p:
                raise ValueError(
                    f"Coordinate {name}={value} outside [0, {self.p}) for p={self.p}"
                )

    @classmethod
    def of(cls, x: int, y: int, z: int, p: int) -> HeisElement:
        """Build an element, reducing the coordinates mod p."""
        return cls(x % p, y % p, z % p, p)

    @classmethod
    def from_id(cls, packed_id: int, p: int) -> HeisElement:
        packed_id = int(packed_id)
        if not 0 <= packed_id < p**3:
            raise ValueError(f"Packed id {packed_id} outside Heisenberg({p})")
        return cls(packed_id // (p * p), (packed_id // p) % p, packed_id % p, p)

    @property
    def packed_id(self) -> int:
        return (self.x * self.p + self.y) * self.p + self.z

    def coordinates(self) -> tuple[FpScalar, FpScalar, FpScalar]:
        return (
            FpScalar(self.x, self.p),
            FpScalar(self.y, self.p),
            FpScalar(self.z, self.p),
        )

    def __str__(self) -> str:
        return f"[{self.x},{self.y},{self.z}]"


def heis_mul(a: HeisElement, b: HeisElement) -> HeisElement:
    """[x,y,z] * [x',y',z'] = [x+x', y+y', x*y' + z + z']."""
    if a.p != b.p:
        raise ModulusMismatchError(f"Cannot multiply elements mod {a.p} and {b.p}")
    p = a.p
    return HeisElement((a.x + b.x) % p, (a.y + b.y) % p, (a.x * b.y + a.z + b.z) % p, p)


def heis_inv(a: HeisElement) -> HeisElement:
    """[x,y,z]^-1 = [-x, -y, x*y - z]."""
    p = a.p
    return HeisElement(-a.x % p, -a.y % p, (a.x * a.y - a.z) % p, p)


# =============================================================================
# Group interface
# =============================================================================


class FiniteGroup(ABC):
    """A finite group with element-level and packed-id arithmetic."""

    @property
    @abstractmethod
    def order(self) -> int: ...

    @property
    @abstractmethod
    def identity(self) -> Any: ...

    @abstractmethod
    def mul(self, a: Any, b: Any) -> Any: ...

    @abstractmethod
    def inv(self, a: Any) -> Any: ...

    @abstractmethod
    def encode(self, element: Any) -> int: ...

    @abstractmethod
    def decode(self, packed_id: int) -> Any: ...

    @abstractmethod
    def mul_ids(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Elementwise (broadcasting) product of packed ids."""

    @abstractmethod
    def inv_ids(self, a: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def parse_element(self, tokens: list[str]) -> Any:
        """Element from whitespace-separated file tokens."""

    @abstractmethod
    def describe(self, packed_id: int) -> Any:
        """JSON-friendly rendering of an element."""

    @property
    def identity_id(self) -> int:
        return self.encode(self.identity)

    def elements(self) -> Iterator[Any]:
        for i in range(self.order):
            yield self.decode(i)

    def all_ids(self) -> np.ndarray:
        return np.arange(self.order, dtype=np.int64)

    def power(self, a: Any, k: int) -> Any:
        """a^k for k >= 0 by repeated squaring."""
        if k < 0:
            return self.power(self.inv(a), -k)
        result, base = self.identity, a
        while k:
            if k & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            k >>= 1
        return result

    def commutator_ids(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Vectorised a * b * a^-1 * b^-1."""
        return self.mul_ids(self.mul_ids(a, b), self.mul_ids(self.inv_ids(a), self.inv_ids(b)))


class Heisenberg(FiniteGroup):
    """Upper unitriangular 3x3 matrices over F_p, order p^3."""

    def __init__(self, p: int):
        self.p = require_prime_modulus(p)

    def __repr__(self) -> str:
        return f"Heisenberg({self.p})"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Heisenberg) and other.p == self.p

    def __hash__(self) -> int:
        return hash(("heisenberg", self.p))

    @property
    def order(self) -> int:
        return self.p**3

    @property
    def identity(self) -> HeisElement:
        return HeisElement(0, 0, 0, self.p)

    def element(self, x: int, y: int, z: int) -> HeisElement:
        return HeisElement.of(x, y, z, self.p)

    def _check(self, a: HeisElement) -> None:
        if a.p != self.p:
            raise ModulusMismatchError(f"Element mod {a.p} used in {self!r}")

    def mul(self, a: HeisElement, b: HeisElement) -> HeisElement:
        self._check(a)
        return heis_mul(a, b)

    def inv(self, a: HeisElement) -> HeisElement:
        self._check(a)
        return heis_inv(a)

    def encode(self, element: HeisElement) -> int:
        self._check(element)
        return element.packed_id

    def decode(self, packed_id: int) -> HeisElement:
        return HeisElement.from_id(packed_id, self.p)

    def split_ids(self, ids: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Coordinate arrays (x, y, z) of packed ids."""
        ids = np.asarray(ids, dtype=np.int64)
        p = self.p
        return ids // (p * p), (ids // p) % p, ids % p

    def pack(self, x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        p = self.p
        x, y, z = (np.asarray(v, dtype=np.int64) % p for v in (x, y, z))
        return (x * p + y) * p + z

    def mul_ids(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        ax, ay, az = self.split_ids(a)
        bx, by, bz = self.split_ids(b)
        return self.pack(ax + bx, ay + by, ax * by + az + bz)

    def inv_ids(self, a: np.ndarray) -> np.ndarray:
        x, y, z = self.split_ids(a)
        return self.pack(-x, -y, x * y - z)

    def commutator_ids(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        # [a;b] = [0, 0, x1*y2 - x2*y1]
        ax, ay, _ = self.split_ids(a)
        bx, by, _ = self.split_ids(b)
        zero = np.zeros(np.broadcast_shapes(ax.shape, bx.shape), dtype=np.int64)
        return self.pack(zero, zero, ax * by - bx * ay)

    def parse_element(self, tokens: list[str]) -> HeisElement:
        if len(tokens) != 3:
            raise ValueError(f"Expected 'x y z', got {' '.join(tokens)!r}")
        x, y, z = (int(t) for t in tokens)
        return HeisElement(x, y, z, self.p)

    def describe(self, packed_id: int) -> list[int]:
        e = self.decode(packed_id)
        return [e.x, e.y, e.z]

    def center_ids(self) -> np.ndarray:
        """Ids of the center [0, 0, F]."""
        return np.arange(self.p, dtype=np.int64)


class TableGroup(FiniteGroup):
    """A finite group given by its multiplication table.

    Row i, column j holds the index of i * j. The identity is detected (it does
    not have to be index 0) and the group axioms are verified on construction.
    """

    def __init__(self, table: Any, *, name: str | None = None):
        table = np.asarray(table, dtype=np.int64)
        if table.ndim != 2 or table.shape[0] != table.shape[1] or table.shape[0] < 1:
            raise TableGroupError(f"Table must be a non-empty square array, got {table.shape}")
        n = table.shape[0]
        if table.min() < 0 or table.max() >= n:
            raise TableGroupError(f"Table entries must lie in [0, {n})")
        expected = np.arange(n)
        if not (np.sort(table, axis=1) == expected).all():
            raise TableGroupError("Table is not a Latin square (repeated entry in a row)")
        if not (np.sort(table, axis=0) == expected[:, None]).all():
            raise TableGroupError("Table is not a Latin square (repeated entry in a column)")

        identities = [
            e
            for e in range(n)
            if np.array_equal(table[e], expected) and np.array_equal(table[:, e], expected)
        ]
        if len(identities) != 1:
            raise TableGroupError(f"Expected one two-sided identity, found {len(identities)}")
        identity = identities[0]

        inverse = np.argmax(table == identity, axis=1)
        if not (table[inverse, expected] == identity).all():
            raise TableGroupError("Some element has no two-sided inverse")

        self.table = table
        self.table.setflags(write=False)
        self.inverse = inverse.astype(np.int64)
        self.inverse.setflags(write=False)
        self.identity_index = int(identity)
        self.name = name or f"TableGroup(order={n})"
        self._check_associative()

    def _check_associative(self) -> None:
        n = self.order
        t = self.table
        if n <= ASSOCIATIVITY_EXHAUSTIVE_MAX:
            for a in range(n):
                # (a*b)*c over all b, c against a*(b*c)
                if not np.array_equal(t[t[a]], t[a][t]):
                    raise TableGroupError(f"Table is not associative (first failure at a={a})")
            return
        rng = np.random.default_rng(0)
        a, b, c = rng.integers(0, n, size=(3, ASSOCIATIVITY_SAMPLES))
        if not np.array_equal(t[t[a, b], c], t[a, t[b, c]]):
            raise TableGroupError("Table is not associative (sampled triple failed)")
        logger.debug(f"{self.name}: associativity sampled on {ASSOCIATIVITY_SAMPLES} triples")

    def __repr__(self) -> str:
        return self.name

    # --- constructors ---

    @classmethod
    def cyclic(cls, n: int) -> TableGroup:
        idx = np.arange(n)
        return cls((idx[:, None] + idx[None, :]) % n, name=f"Z{n}")

    @classmethod
    def symmetric(cls, n: int) -> TableGroup:
        """S_n acting on {0..n-1}; product is composition (i*j)(k) = i(j(k))."""
        if not 1 <= n <= 5:
            raise ValueError(f"Symmetric group tables are supported for n <= 5, got {n}")
        perms = list(permutations(range(n)))
        index = {perm: i for i, perm in enumerate(perms)}
        table = [[index[tuple(f[g[k]] for k in range(n))] for g in perms] for f in perms]
        return cls(table, name=f"S{n}")

    @classmethod
    def direct_product(cls, g: TableGroup, h: TableGroup) -> TableGroup:
        """G x H with (i, j) stored at index i * |H| + j."""
        m = h.order
        gi = np.repeat(np.arange(g.order), m)
        hi = np.tile(np.arange(m), g.order)
        table = g.table[gi[:, None], gi[None, :]] * m + h.table[hi[:, None], hi[None, :]]
        return cls(table, name=f"{g.name}x{h.name}")

    @classmethod
    def from_group(cls, group: FiniteGroup) -> TableGroup:
        """Cayley table of any finite group, indexed by packed id."""
        ids = group.all_ids()
        return cls(group.mul_ids(ids[:, None], ids[None, :]), name=f"Table[{group!r}]")

    @classmethod
    def quotient(
        cls, group: FiniteGroup, label_ids: Callable[[np.ndarray], np.ndarray], *, name: str | None = None
    ) -> TableGroup:
        """Table of the image of a surjective homomorphism.

        `label_ids` maps packed ids of `group` onto labels 0..k-1; label i * j
        is the label of any product of preimages. The labels must form a
        congruence, which is checked on a generating set: multiplying by a
        generator on either side must not separate two elements with one label.

        Raises:
            TableGroupError: If the labels are not onto 0..k-1 or the map
                does not respect products
        """
        ids = group.all_ids()
        labels = np.asarray(label_ids(ids), dtype=np.int64)
        distinct, first = np.unique(labels, return_index=True)
        if distinct[0] != 0 or distinct[-1] != len(distinct) - 1:
            raise TableGroupError("Quotient labels must cover 0..k-1 exactly")
        reps = ids[first]
        rep_of = reps[labels]
        _, generators = closure_ids(group, ids)
        for s in generators:
            right = np.array_equal(labels[group.mul_ids(ids, s)], labels[group.mul_ids(rep_of, s)])
            left = np.array_equal(labels[group.mul_ids(s, ids)], labels[group.mul_ids(s, rep_of)])
            if not (right and left):
                raise TableGroupError("Quotient map is not a homomorphism")
        table = labels[group.mul_ids(reps[:, None], reps[None, :])]
        return cls(table, name=name or f"{group!r}/ker")

    # --- FiniteGroup ---

    @property
    def order(self) -> int:
        return self.table.shape[0]

    @property
    def identity(self) -> int:
        return self.identity_index

    def _check(self, a: int) -> int:
        a = int(a)
        if not 0 <= a < self.order:
            raise ValueError(f"Element index {a} outside {self.name}")
        return a

    def mul(self, a: int, b: int) -> int:
        return int(self.table[self._check(a), self._check(b)])

    def inv(self, a: int) -> int:
        return int(self.inverse[self._check(a)])

    def encode(self, element: int) -> int:
        return self._check(element)

    def decode(self, packed_id: int) -> int:
        return self._check(packed_id)

    def mul_ids(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.table[np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)]

    def inv_ids(self, a: np.ndarray) -> np.ndarray:
        return self.inverse[np.asarray(a, dtype=np.int64)]

    def parse_element(self, tokens: list[str]) -> int:
        if len(tokens) != 1:
            raise ValueError(f"Expected one element index, got {' '.join(tokens)!r}")
        return self._check(int(tokens[0]))

    def describe(self, packed_id: int) -> int:
        return int(packed_id)


def read_table_file(path: Path) -> TableGroup:
    """Read a table file: "n=<order>" then n rows of n indices.

    Raises:
        ValueError: If the file is malformed or the table is not a group
    """
    path = Path(path)
    lines = [line.strip() for line in path.read_text().splitlines()]
    lines = [(i + 1, line) for i, line in enumerate(lines) if line and not line.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty table file")
    lineno, header = lines[0]
    if not header.startswith("n="):
        raise ValueError(f"{path}:{lineno}: expected 'n=<order>', got {header!r}")
    try:
        n = int(header[2:])
    except ValueError as e:
        raise ValueError(f"{path}:{lineno}: bad order {header[2:]!r}") from e
    rows = lines[1:]
    if len(rows) != n:
        raise ValueError(f"{path}: expected {n} table rows, found {len(rows)}")
    table = []
    for lineno, line in rows:
        try:
            row = [int(tok) for tok in line.split()]
        except ValueError as e:
            raise ValueError(f"{path}:{lineno}: non-integer entry") from e
        if len(row) != n:
            raise ValueError(f"{path}:{lineno}: expected {n} entries, got {len(row)}")
        table.append(row)
    group = TableGroup(table, name=path.stem)
    logger.info(f"Loaded table group {group.name} of order {n} from {path}")
    return group


def write_table_file(group: TableGroup, path: Path) -> None:
    lines = [f"n={group.order}"]
    lines.extend(" ".join(str(int(v)) for v in row) for row in group.table)
    Path(path).write_text("\n".join(lines) + "\n")


# =============================================================================
# Structural operations
# =============================================================================


def _ids_of(group: FiniteGroup, elements: GroupSet | Iterable[Any]) -> np.ndarray:
    from heisenberg_freiman.sets import GroupSet

    if isinstance(elements, GroupSet):
        return elements.ids
    return np.unique(np.array([group.encode(e) for e in elements], dtype=np.int64))


def commutator(group: FiniteGroup, a: Any, b: Any) -> Any:
    """[a;b] = a * b * a^-1 * b^-1."""
    return group.mul(group.mul(a, b), group.mul(group.inv(a), group.inv(b)))


def check_commutator_identity(group: FiniteGroup, x: Any, y: Any, z: Any) -> bool:
    """Check [xy;z] = [x;[y;z]] * [y;z] * [x;z] for one triple."""
    yz = commutator(group, y, z)
    lhs = commutator(group, group.mul(x, y), z)
    rhs = group.mul(group.mul(commutator(group, x, yz), yz), commutator(group, x, z))
    return lhs == rhs


def _row_chunks(n_rows: int, n_cols: int, cells: int = 1 << 22) -> Iterator[slice]:
    step = max(1, cells // max(1, n_cols))
    for start in range(0, n_rows, step):
        yield slice(start, min(n_rows, start + step))


def _pairwise_commutators(group: FiniteGroup, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Distinct values of [a;b] over a in left, b in right."""
    found = []
    for rows in _row_chunks(len(left), len(right)):
        found.append(np.unique(group.commutator_ids(left[rows, None], right[None, :])))
    if not found:
        return np.empty(0, dtype=np.int64)
    return np.unique(np.concatenate(found))


def is_two_step_nilpotent_on(group: FiniteGroup, elements: GroupSet | Iterable[Any]) -> bool:
    """True iff [[a;b];c] is the identity for all a, b, c in the set."""
    ids = _ids_of(group, elements)
    commutators = _pairwise_commutators(group, ids, ids)
    doubles = _pairwise_commutators(group, commutators, ids)
    return bool((doubles == group.identity_id).all())


def is_abelian_on(group: FiniteGroup, elements: GroupSet | Iterable[Any]) -> bool:
    """True iff every pair of the set commutes."""
    ids = _ids_of(group, elements)
    return bool((_pairwise_commutators(group, ids, ids) == group.identity_id).all())


def element_order(group: FiniteGroup, a: Any) -> int:
    """Smallest k >= 1 with a^k = identity, by iterated multiplication."""
    identity = group.identity
    x, k = a, 1
    while x != identity:
        x = group.mul(x, a)
        k += 1
        if k > group.order:
            raise TableGroupError(f"Element {a!r} has no finite order within |G|")
    return k


def closure_ids(
    group: FiniteGroup, generators: np.ndarray, budget: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Subgroup generated by packed ids, by incremental generator extraction.

    Scans the generators in order and keeps only those not already in the
    subgroup built so far, so at most log2|G| of them are ever multiplied.

    Returns:
        (sorted member ids, the extracted generating subset)

    Raises:
        BudgetExceededError: If the subgroup grows beyond the budget
    """
    from heisenberg_freiman.sets import BudgetExceededError

    generators = np.asarray(generators, dtype=np.int64)
    identity = group.identity_id
    limit = budget if budget is not None else group.order
    dense = group.order <= DENSE_ORDER_LIMIT

    if dense:
        mask = np.zeros(group.order, dtype=bool)
        mask[identity] = True
    else:
        seen = {identity}
    members = [np.array([identity], dtype=np.int64)]
    size = 1
    extracted: list[int] = []

    while True:
        if dense:
            missing = generators[~mask[generators]]
        else:
            missing = np.array([g for g in generators.tolist() if g not in seen], dtype=np.int64)
        if len(missing) == 0:
            break
        extracted.append(int(missing[0]))
        gens = np.array(extracted, dtype=np.int64)
        gens = np.unique(np.concatenate([gens, group.inv_ids(gens)]))
        frontier = np.concatenate(members)
        while len(frontier):
            candidates = np.unique(group.mul_ids(frontier[:, None], gens[None, :]).ravel())
            if dense:
                fresh = candidates[~mask[candidates]]
                mask[fresh] = True
            else:
                fresh = np.array([c for c in candidates.tolist() if c not in seen], dtype=np.int64)
                seen.update(fresh.tolist())
            size += len(fresh)
            if size > limit:
                raise BudgetExceededError(f"Subgroup closure exceeds budget of {limit} elements")
            members.append(fresh)
            frontier = fresh
        logger.debug(f"Closure grew to {size} elements with {len(extracted)} generator(s)")

    return np.sort(np.concatenate(members)), np.array(extracted, dtype=np.int64)


def subgroup_closure(
    group: FiniteGroup, elements: GroupSet | Iterable[Any], budget: int | None = None
) -> GroupSet:
    """Smallest subgroup containing the given elements."""
    from heisenberg_freiman.sets import GroupSet

    ids = _ids_of(group, elements)
    if len(ids) == 0:
        raise ValueError("subgroup_closure needs a non-empty set")
    members, _ = closure_ids(group, ids, budget)
    return GroupSet.from_ids(group, members, assume_unique=True)
