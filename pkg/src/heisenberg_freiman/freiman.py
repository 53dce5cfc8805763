"""Freiman s-homomorphisms between finite subsets of groups, and model audits.

A map pi on A is a Freiman s-homomorphism when, for every sign vector
(e1, ..., es) and all a_i, b_i in A,

    a1^e1 ... as^es = b1^e1 ... bs^es  implies
    pi(a1)^e1 ... pi(as)^es = pi(b1)^e1 ... pi(bs)^es.

The checker evaluates every signed word once, per sign vector, and groups the
words by their value in the domain group: the map passes iff each group has a
single image value. Words are enumerated in lexicographic order (sign vectors
with + before -, then letter indices), so the reported witness is the first
violating word paired with the first word of its class.
"""

import logging
from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel

from heisenberg_freiman.config import Budgets
from heisenberg_freiman.groups import (
    FiniteGroup,
    Heisenberg,
    TableGroup,
    closure_ids,
    element_order,
    is_abelian_on,
    is_two_step_nilpotent_on,
)
from heisenberg_freiman.sets import BudgetExceededError, GroupSet

logger = logging.getLogger(__name__)

# Class tables indexed directly by group element up to this order
WORD_TABLE_DENSE_LIMIT = 1 << 22
# Shortest word length model_audit accepts
MIN_AUDIT_S = 6


class NotFreimanHomomorphismError(ValueError):
    """The audited map is not a Freiman s-homomorphism on the audited configurations.

    verdict is the one at the shortest failing word length.
    """

    def __init__(self, message: str, verdict: "FreimanVerdict"):
        super().__init__(message)
        self.verdict = verdict


class MissingAnchorError(ValueError):
    """Elements the audit is anchored on are not in the domain."""


# =============================================================================
# Partial maps
# =============================================================================


@dataclass(frozen=True, eq=False)
class PartialMap:
    """A map from a finite subset of one group into another group.

    images[i] is the packed id of the image of domain.ids[i].
    """

    domain: GroupSet
    codomain: FiniteGroup
    images: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.images.shape != self.domain.ids.shape:
            raise ValueError("Every domain element needs exactly one image")
        if len(self.images) and (self.images.min() < 0 or self.images.max() >= self.codomain.order):
            raise ValueError(f"Images outside {self.codomain!r}")
        self.images.setflags(write=False)

    @classmethod
    def from_ids(cls, domain: GroupSet, codomain: FiniteGroup, image_of: dict[int, int]) -> "PartialMap":
        missing = [i for i in domain.ids.tolist() if i not in image_of]
        if missing:
            raise ValueError(f"{len(missing)} domain element(s) have no image")
        images = np.array([image_of[i] for i in domain.ids.tolist()], dtype=np.int64)
        return cls(domain, codomain, images)

    @classmethod
    def from_function(
        cls, domain: GroupSet, codomain: FiniteGroup, fn: Callable[[np.ndarray], np.ndarray]
    ) -> "PartialMap":
        """Build from a vectorised function on packed ids."""
        return cls(domain, codomain, np.asarray(fn(domain.ids), dtype=np.int64).copy())

    @classmethod
    def identity(cls, domain: GroupSet) -> "PartialMap":
        return cls(domain, domain.group, domain.ids.copy())

    @property
    def size(self) -> int:
        return self.domain.size

    def image_ids(self, ids: np.ndarray) -> np.ndarray:
        """Images of domain ids.

        Raises:
            KeyError: If some id is outside the domain
        """
        ids = np.asarray(ids, dtype=np.int64)
        if not self.domain.contains_ids(ids).all():
            raise KeyError("Element outside the domain of the map")
        return self.images[np.searchsorted(self.domain.ids, ids)]

    def image_of(self, element: Any) -> Any:
        packed = self.domain.group.encode(element)
        return self.codomain.decode(int(self.image_ids(np.array([packed]))[0]))

    def image_set(self) -> GroupSet:
        return GroupSet.from_ids(self.codomain, self.images)

    def is_injective(self) -> bool:
        return len(np.unique(self.images)) == len(self.images)

    def collision(self) -> tuple[int, int] | None:
        """The first pair of domain ids (in id order) sharing an image."""
        first_seen: dict[int, int] = {}
        for dom, img in zip(self.domain.ids.tolist(), self.images.tolist(), strict=True):
            if img in first_seen:
                return first_seen[img], dom
            first_seen[img] = dom
        return None

    def inverse(self) -> "PartialMap":
        """The inverse map on the image set.

        Raises:
            ValueError: If the map is not injective
        """
        if not self.is_injective():
            raise ValueError("Only an injective map has an inverse")
        order = np.argsort(self.images)
        image_domain = GroupSet.from_ids(self.codomain, self.images[order], assume_unique=True)
        return PartialMap(image_domain, self.domain.group, self.domain.ids[order].copy())

    def restrict(self, ids: np.ndarray) -> "PartialMap":
        ids = np.unique(np.asarray(ids, dtype=np.int64))
        return PartialMap(GroupSet.from_ids(self.domain.group, ids, assume_unique=True), self.codomain, self.image_ids(ids))

    def compose(self, sigma: Callable[[np.ndarray], np.ndarray], target: FiniteGroup) -> "PartialMap":
        """sigma o pi for a vectorised map sigma from the codomain into `target`."""
        return PartialMap(self.domain, target, np.asarray(sigma(self.images), dtype=np.int64).copy())


def integer_surrogate(values: list[int], s: int) -> tuple[TableGroup, GroupSet]:
    """Represent a finite set of integers inside a cyclic group.

    The order exceeds 2 s max|a|, so two signed s-term sums are equal in the
    cyclic group iff they are equal as integers.
    """
    bound = max((abs(v) for v in values), default=0)
    group = TableGroup.cyclic(2 * s * bound + 1)
    return group, GroupSet.from_ids(group, [v % group.order for v in values])


# =============================================================================
# Word enumeration
# =============================================================================


def max_feasible_s(size: int, budget: int) -> int:
    """Largest s with (2 size)^s <= budget."""
    s, words = 0, 1
    while words * 2 * size <= budget:
        words *= 2 * size
        s += 1
        if size == 0:
            break
    return s


def _check_word_budget(size: int, s: int, budget: int) -> int:
    if s < 1:
        raise ValueError(f"Word length s must be positive, got {s}")
    total = (2 * size) ** s
    if total > budget:
        feasible = max_feasible_s(size, budget)
        raise BudgetExceededError(
            f"(2*{size})^{s} = {total} signed words exceed the budget of {budget}; "
            f"largest feasible s is {feasible}",
            max_feasible_s=feasible,
        )
    return total


def sign_vectors(s: int) -> list[tuple[int, ...]]:
    """All sign vectors of length s, + before -."""
    return list(product((1, -1), repeat=s))


def evaluate_word(group: FiniteGroup, ids: list[int], signs: tuple[int, ...] | list[int]) -> int:
    """Packed id of ids[0]^signs[0] ... ids[-1]^signs[-1]."""
    value = np.array(group.identity_id, dtype=np.int64)
    for i, e in zip(ids, signs, strict=True):
        letter = np.array(i, dtype=np.int64)
        value = group.mul_ids(value, letter if e > 0 else group.inv_ids(letter))
    return int(value)


def _letter_digits(index: int, n: int, s: int) -> list[int]:
    digits = []
    for _ in range(s):
        index, d = divmod(index, n)
        digits.append(d)
    return digits[::-1]


def _extend(group: FiniteGroup, values: np.ndarray, letters: np.ndarray) -> np.ndarray:
    return group.mul_ids(values[:, None], letters[None, :]).ravel()


def _chunks_for_signs(
    pi: PartialMap, signs: tuple[int, ...], threads: int
) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
    """Yield (offset, domain values, image values) per leading letter, in order."""
    dom_group, img_group = pi.domain.group, pi.codomain
    dom_letters = {1: pi.domain.ids, -1: dom_group.inv_ids(pi.domain.ids)}
    img_letters = {1: pi.images, -1: img_group.inv_ids(pi.images)}
    n = pi.size
    stride = n ** (len(signs) - 1)

    def chunk(lead: int) -> tuple[int, np.ndarray, np.ndarray]:
        values = dom_letters[signs[0]][lead : lead + 1]
        images = img_letters[signs[0]][lead : lead + 1]
        for e in signs[1:]:
            values = _extend(dom_group, values, dom_letters[e])
            images = _extend(img_group, images, img_letters[e])
        return lead * stride, values, images

    if threads <= 1:
        yield from (chunk(lead) for lead in range(n))
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(chunk, range(n))


class _ClassTable:
    """First word and its image per domain value."""

    def __init__(self, order: int):
        self.dense = order <= WORD_TABLE_DENSE_LIMIT
        if self.dense:
            self.image = np.full(order, -1, dtype=np.int64)
            self.word = np.full(order, -1, dtype=np.int64)
        else:
            self.keys = np.empty(0, dtype=np.int64)
            self.image = np.empty(0, dtype=np.int64)
            self.word = np.empty(0, dtype=np.int64)

    def lookup(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.dense:
            return self.image[values], self.word[values]
        if len(self.keys) == 0:
            missing = np.full(values.shape, -1, dtype=np.int64)
            return missing, missing
        pos = np.minimum(np.searchsorted(self.keys, values), len(self.keys) - 1)
        found = self.keys[pos] == values
        return np.where(found, self.image[pos], -1), np.where(found, self.word[pos], -1)

    def add(self, values: np.ndarray, images: np.ndarray, words: np.ndarray) -> None:
        """Record first words for values not seen before (values unique)."""
        _, known = self.lookup(values)
        fresh = known < 0
        if self.dense:
            self.image[values[fresh]] = images[fresh]
            self.word[values[fresh]] = words[fresh]
            return
        keys = np.concatenate([self.keys, values[fresh]])
        order = np.argsort(keys, kind="stable")
        self.keys = keys[order]
        self.image = np.concatenate([self.image, images[fresh]])[order]
        self.word = np.concatenate([self.word, words[fresh]])[order]


@dataclass(frozen=True)
class SignedWordIndex:
    """Values of all (2|A|)^s signed words of length s over A.

    values are sorted packed ids; multiplicity[k] counts the words with value
    values[k] and representative[k] is the global index of the first of them.
    A global index is sign_index * |A|^s + letter index.
    """

    domain: GroupSet
    s: int
    values: np.ndarray = field(repr=False)
    multiplicity: np.ndarray = field(repr=False)
    representative: np.ndarray = field(repr=False)

    @property
    def words_total(self) -> int:
        return int(self.multiplicity.sum())

    def decode(self, global_index: int) -> tuple[tuple[int, ...], list[int]]:
        """(sign vector, packed ids of the letters) of a word."""
        n = self.domain.size
        sign_index, word = divmod(int(global_index), n**self.s)
        signs = sign_vectors(self.s)[sign_index]
        letters = [int(self.domain.ids[d]) for d in _letter_digits(word, n, self.s)]
        return signs, letters

    def value_counts(self) -> dict[int, int]:
        return dict(zip(self.values.tolist(), self.multiplicity.tolist(), strict=True))


def enumerate_signed_words(
    A: GroupSet, s: int, *, budget: int = 100_000_000, threads: int = 1
) -> SignedWordIndex:
    """Evaluate every signed word of length s over A in the group of A.

    Raises:
        BudgetExceededError: If (2|A|)^s exceeds the budget
    """
    if A.size == 0:
        raise ValueError("enumerate_signed_words needs a non-empty set")
    _check_word_budget(A.size, s, budget)
    pi = PartialMap.identity(A)
    per_sign = A.size**s
    values, counts, firsts = [], [], []
    for k, signs in enumerate(sign_vectors(s)):
        for offset, chunk_values, _ in _chunks_for_signs(pi, signs, threads):
            uniq, first, cnt = np.unique(chunk_values, return_index=True, return_counts=True)
            values.append(uniq)
            counts.append(cnt)
            firsts.append(k * per_sign + offset + first)
    all_values = np.concatenate(values)
    all_counts = np.concatenate(counts)
    all_firsts = np.concatenate(firsts)
    order = np.lexsort((all_firsts, all_values))
    all_values, all_counts, all_firsts = all_values[order], all_counts[order], all_firsts[order]
    uniq, starts = np.unique(all_values, return_index=True)
    index = SignedWordIndex(
        domain=A,
        s=s,
        values=uniq,
        multiplicity=np.add.reduceat(all_counts, starts),
        representative=all_firsts[starts],
    )
    logger.info(f"Enumerated {index.words_total} words of length {s} over |A|={A.size}: {len(uniq)} values")
    return index


# =============================================================================
# Verdicts
# =============================================================================

Direction = Literal["forward", "inverse", "injectivity"]


class FreimanWitness(BaseModel):
    """Two words with a shared sign vector and equal products in the checked
    domain, whose images differ (for injectivity: equal images, distinct words).
    """

    signs: list[int]
    a_word: list[int]
    b_word: list[int]
    a_elements: list[Any]
    b_elements: list[Any]
    domain_value_a: Any
    domain_value_b: Any
    image_value_a: Any
    image_value_b: Any


class FreimanVerdict(BaseModel):
    s: int
    mode: Literal["homomorphism", "isomorphism"] = "homomorphism"
    is_homomorphism: bool
    is_isomorphism: bool | None = None
    direction: Direction | None = None
    witness: FreimanWitness | None = None
    words_checked: int


def _make_witness(pi: PartialMap, signs: tuple[int, ...], a: list[int], b: list[int]) -> FreimanWitness:
    dom, img = pi.domain.group, pi.codomain
    a_img = pi.image_ids(np.array(a)).tolist()
    b_img = pi.image_ids(np.array(b)).tolist()
    return FreimanWitness(
        signs=list(signs),
        a_word=a,
        b_word=b,
        a_elements=[dom.describe(i) for i in a],
        b_elements=[dom.describe(i) for i in b],
        domain_value_a=dom.describe(evaluate_word(dom, a, signs)),
        domain_value_b=dom.describe(evaluate_word(dom, b, signs)),
        image_value_a=img.describe(evaluate_word(img, a_img, signs)),
        image_value_b=img.describe(evaluate_word(img, b_img, signs)),
    )


def witness_is_valid(pi: PartialMap, witness: FreimanWitness) -> bool:
    """Re-evaluate a forward witness: equal in the domain, unequal in the image."""
    signs = tuple(witness.signs)
    dom, img = pi.domain.group, pi.codomain
    same_domain = evaluate_word(dom, witness.a_word, signs) == evaluate_word(dom, witness.b_word, signs)
    a_img = pi.image_ids(np.array(witness.a_word)).tolist()
    b_img = pi.image_ids(np.array(witness.b_word)).tolist()
    return same_domain and evaluate_word(img, a_img, signs) != evaluate_word(img, b_img, signs)


def _find_violation(pi: PartialMap, s: int, threads: int) -> FreimanWitness | None:
    n = pi.size
    for signs in sign_vectors(s):
        table = _ClassTable(pi.domain.group.order)
        for offset, values, images in _chunks_for_signs(pi, signs, threads):
            uniq, first = np.unique(values, return_index=True)
            table.add(uniq, images[first], offset + first)
            rep_image, rep_word = table.lookup(values)
            bad = np.nonzero(rep_image != images)[0]
            if len(bad):
                k = int(bad[0])
                a = [int(pi.domain.ids[d]) for d in _letter_digits(int(rep_word[k]), n, s)]
                b = [int(pi.domain.ids[d]) for d in _letter_digits(offset + k, n, s)]
                return _make_witness(pi, signs, a, b)
    return None


def check_freiman_homomorphism(
    pi: PartialMap, s: int, *, budget: int = 100_000_000, threads: int = 1
) -> FreimanVerdict:
    """Decide whether pi is a Freiman s-homomorphism on its domain.

    Raises:
        BudgetExceededError: If (2|A|)^s exceeds the budget
    """
    if pi.size == 0:
        raise ValueError("The map has an empty domain")
    total = _check_word_budget(pi.size, s, budget)
    witness = _find_violation(pi, s, threads)
    verdict = FreimanVerdict(
        s=s,
        is_homomorphism=witness is None,
        direction=None if witness is None else "forward",
        witness=witness,
        words_checked=total,
    )
    logger.info(f"Freiman {s}-homomorphism check on |A|={pi.size}: {verdict.is_homomorphism}")
    return verdict


def check_freiman_isomorphism(
    pi: PartialMap, s: int, *, budget: int = 100_000_000, threads: int = 1
) -> FreimanVerdict:
    """pi injective, and both pi and its inverse Freiman s-homomorphisms."""
    forward = check_freiman_homomorphism(pi, s, budget=budget, threads=threads)
    if not forward.is_homomorphism:
        return forward.model_copy(update={"mode": "isomorphism", "is_isomorphism": False})

    collision = pi.collision()
    if collision is not None:
        a, b = collision
        # pi(a) pi(a) ... = pi(b) pi(a) ... although a a ... != b a ...
        a_word, b_word = [a] * s, [b] + [a] * (s - 1)
        witness = _make_witness(pi, (1,) * s, a_word, b_word)
        return FreimanVerdict(
            s=s,
            mode="isomorphism",
            is_homomorphism=True,
            is_isomorphism=False,
            direction="injectivity",
            witness=witness,
            words_checked=forward.words_checked,
        )

    backward = check_freiman_homomorphism(pi.inverse(), s, budget=budget, threads=threads)
    return FreimanVerdict(
        s=s,
        mode="isomorphism",
        is_homomorphism=True,
        is_isomorphism=backward.is_homomorphism,
        direction=None if backward.is_homomorphism else "inverse",
        witness=backward.witness,
        words_checked=forward.words_checked + backward.words_checked,
    )


def brute_force_pair_check(pi: PartialMap, s: int, *, budget: int = 10_000_000) -> FreimanVerdict:
    """The definition itself: every pair of s-tuples under every sign vector.

    Only for tiny instances; used to cross-check the class-based checker.
    """
    n = pi.size
    pairs = n ** (2 * s) * 2**s
    if pairs > budget:
        raise BudgetExceededError(f"{pairs} word pairs exceed the brute-force budget of {budget}")
    dom, img = pi.domain.group, pi.codomain
    ids = pi.domain.ids.tolist()
    image = dict(zip(ids, pi.images.tolist(), strict=True))
    tuples = list(product(ids, repeat=s))
    for signs in sign_vectors(s):
        dom_values = [evaluate_word(dom, list(t), signs) for t in tuples]
        img_values = [evaluate_word(img, [image[i] for i in t], signs) for t in tuples]
        for i, a in enumerate(tuples):
            for j in range(i + 1, len(tuples)):
                if dom_values[i] == dom_values[j] and img_values[i] != img_values[j]:
                    return FreimanVerdict(
                        s=s,
                        is_homomorphism=False,
                        direction="forward",
                        witness=_make_witness(pi, signs, list(a), list(tuples[j])),
                        words_checked=pairs,
                    )
    return FreimanVerdict(s=s, is_homomorphism=True, words_checked=pairs)


# =============================================================================
# Model audit
# =============================================================================


@dataclass(frozen=True)
class FiberAnchor:
    """The fiber [u, v, *] and the two heights z1 != z the audit starts from."""

    u: int
    v: int
    z1: int
    z: int


class AuditReport(BaseModel):
    """Structural facts about the image of A under a Freiman s-model.

    freiman_levels maps each word length 1..s to whether every signed-word
    identity of that length on the scope survives pi. Padding both words with
    one letter turns a k-identity into an s-identity, so every level below a
    passing s must pass too; a False entry there is a checker inconsistency.
    """

    s: int
    freiman_ok: bool
    freiman6_ok: bool
    freiman_levels: dict[int, bool]
    freiman_scope: Literal["full", "restricted"]
    freiman_scope_size: int
    words_checked: int
    h: Any
    order_p_element: Any | None
    h_order: int
    generated_subgroup_size: int | None
    generators_extracted: int | None
    p_divides_order: bool | None
    size_at_least_p3: bool | None
    double_commutators_trivial: bool
    double_commutator_method: Literal["exhaustive", "sampled"]
    class_two_on_generators: bool | None
    commutators_central_on_scope: bool
    image_abelian: bool | None
    abelian_contradiction: bool
    stage_notes: list[str] = []


def _audit_scope(
    pi: PartialMap, anchor_ids: np.ndarray, extra_ids: np.ndarray | None, s: int, budget: int
) -> tuple[np.ndarray, str]:
    """Domain ids on which the Freiman s property is verified."""
    if (2 * pi.size) ** s <= budget:
        return pi.domain.ids, "full"
    cap = max(len(anchor_ids), max_feasible_size(s, budget))
    candidates = [anchor_ids]
    if extra_ids is not None:
        candidates.append(np.asarray(extra_ids, dtype=np.int64))
    ordered = list(dict.fromkeys(np.concatenate(candidates).tolist()))
    return np.array(ordered[:cap], dtype=np.int64), "restricted"


def max_feasible_size(s: int, budget: int) -> int:
    """Largest n with (2n)^s <= budget."""
    n = 0
    while (2 * (n + 1)) ** s <= budget:
        n += 1
    return n


def _sampled_double_commutators(group: FiniteGroup, ids: np.ndarray, samples: int, seed: int) -> bool:
    rng = np.random.default_rng(seed)
    a, b, c = (ids[rng.integers(0, len(ids), size=samples)] for _ in range(3))
    doubles = group.commutator_ids(group.commutator_ids(a, b), c)
    return bool((doubles == group.identity_id).all())


def _commutators_central(group: FiniteGroup, ids: np.ndarray) -> bool:
    """[a;b] commutes with c for all a, b, c in ids."""
    comm = group.commutator_ids(ids[:, None], ids[None, :]).ravel()
    comm = np.unique(comm)
    lhs = group.mul_ids(comm[:, None], ids[None, :])
    rhs = group.mul_ids(ids[None, :], comm[:, None])
    return bool((lhs == rhs).all())


def model_audit(
    pi: PartialMap,
    anchor: FiberAnchor,
    *,
    s: int = 6,
    budgets: Budgets | None = None,
    scope_ids: np.ndarray | None = None,
    seed: int = 0,
) -> AuditReport:
    """Audit a map from A in Heisenberg(p) into a finite group G.

    The map must be a Freiman s-homomorphism on the audited configurations:
    all of A when (2|A|)^s fits the audit budget, otherwise the anchor fiber
    elements followed by `scope_ids`, truncated to the budget. Every shorter
    word length is checked on the same scope and reported, failing or not.

    Raises:
        MissingAnchorError: If [u, v, z1] or [u, v, z] is not in A
        NotFreimanHomomorphismError: If the s-homomorphism check fails
    """
    if s < MIN_AUDIT_S:
        raise ValueError(f"model_audit needs s >= {MIN_AUDIT_S}, got {s}")
    budgets = budgets or Budgets()
    group = pi.domain.group
    if not isinstance(group, Heisenberg):
        raise ValueError("model_audit needs a map defined on a subset of a Heisenberg group")
    p = group.p
    base_id = group.encode(group.element(anchor.u, anchor.v, anchor.z1))
    top_id = group.encode(group.element(anchor.u, anchor.v, anchor.z))
    anchor_ids = np.array([base_id, top_id], dtype=np.int64)
    if anchor.z1 % p == anchor.z % p:
        raise MissingAnchorError(f"Anchor heights must differ, got z1 = z = {anchor.z}")
    if not pi.domain.contains_ids(anchor_ids).all():
        raise MissingAnchorError(
            f"Anchor elements [{anchor.u},{anchor.v},{anchor.z1}] / [{anchor.u},{anchor.v},{anchor.z}] not in A"
        )

    scope, scope_kind = _audit_scope(pi, anchor_ids, scope_ids, s, budgets.audit_words)
    scoped = pi.restrict(scope)
    verdicts = {}
    for k in range(1, s + 1):
        verdicts[k] = check_freiman_homomorphism(scoped, k, budget=budgets.audit_words, threads=budgets.threads)
        if not verdicts[k].is_homomorphism:
            # Fails at k, so at every longer length too
            raise NotFreimanHomomorphismError(
                f"Map is not a Freiman {s}-homomorphism on the {scope_kind} scope of {len(scope)} elements; "
                f"the shortest failing word length is {k}",
                verdicts[k],
            )
    levels = {k: v.is_homomorphism for k, v in verdicts.items()}
    words_checked = sum(v.words_checked for v in verdicts.values())

    G = pi.codomain
    notes = []
    if scope_kind == "restricted":
        notes.append(f"Freiman {s} verified on {len(scope)} of {pi.size} elements")

    # h = pi([u,v,z1])^-1 pi([u,v,z]), the image of [0, 0, z - z1]
    base_img, top_img = pi.image_ids(anchor_ids).tolist()
    h = G.mul(G.inv(G.decode(base_img)), G.decode(top_img))
    h_order = element_order(G, h)

    image_ids = np.unique(pi.images)
    size = generators = None
    try:
        members, extracted = closure_ids(G, image_ids, budgets.closure)
        size, generators = len(members), len(extracted)
    except BudgetExceededError as e:
        extracted = None
        notes.append(f"closure: {e}")

    image = GroupSet.from_ids(G, image_ids, assume_unique=True)
    if len(image_ids) ** 2 <= budgets.audit_words:
        doubles_ok = is_two_step_nilpotent_on(G, image)
        method = "exhaustive"
    else:
        doubles_ok = _sampled_double_commutators(G, image_ids, budgets.triple_samples, seed)
        method = "sampled"

    class_two = image_abelian = None
    if extracted is not None:
        generating = GroupSet.from_ids(G, extracted)
        class_two = is_two_step_nilpotent_on(G, generating)
        image_abelian = is_abelian_on(G, generating)
    elif len(image_ids) ** 2 <= budgets.audit_words:
        image_abelian = is_abelian_on(G, image)

    contradiction = bool(pi.size > p * p and image_abelian)
    if contradiction:
        logger.warning(f"|A|={pi.size} > p^2 but the image generates an abelian group")

    report = AuditReport(
        s=s,
        freiman_ok=True,
        freiman6_ok=levels[MIN_AUDIT_S],
        freiman_levels=levels,
        freiman_scope=scope_kind,
        freiman_scope_size=len(scope),
        words_checked=words_checked,
        h=G.describe(G.encode(h)),
        order_p_element=G.describe(G.encode(h)) if h_order == p else None,
        h_order=h_order,
        generated_subgroup_size=size,
        generators_extracted=generators,
        p_divides_order=None if size is None else size % p == 0,
        size_at_least_p3=None if size is None else size >= p**3,
        double_commutators_trivial=doubles_ok,
        double_commutator_method=method,
        class_two_on_generators=class_two,
        commutators_central_on_scope=_commutators_central(G, pi.image_ids(scope)),
        image_abelian=image_abelian,
        abelian_contradiction=contradiction,
        stage_notes=notes,
    )
    logger.info(f"Audit at s={s}: h of order {h_order}, <pi(A)> of size {size}")
    return report


# =============================================================================
# Map files
# =============================================================================


def read_map_file(
    path: Path, *, p: int | None = None, codomain: FiniteGroup | None = None
) -> tuple[PartialMap, int]:
    """Read a map file: a header "s=<s>" (optionally "p=<p>") and rows
    "x y z -> g" (into a table group) or "x y z -> x' y' z'" (into Heisenberg).

    Returns:
        (the map, s)
    """
    path = Path(path)
    lines = [(i + 1, line.strip()) for i, line in enumerate(path.read_text().splitlines())]
    lines = [(n, line) for n, line in lines if line and not line.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: empty map file")
    lineno, header = lines[0]
    try:
        fields = dict(part.split("=", 1) for part in header.split())
        s = int(fields["s"])
        raw_p = fields.get("p", p)
        p = int(raw_p) if raw_p is not None else None
    except (KeyError, ValueError) as e:
        raise ValueError(f"{path}:{lineno}: expected 's=<s>' header, got {header!r}") from e
    if p is None:
        raise ValueError(f"{path}: domain prime unknown (add 'p=<p>' to the header)")
    domain_group = Heisenberg(p)

    image_of: dict[int, int] = {}
    for lineno, line in lines[1:]:
        left, sep, right = line.partition("->")
        if not sep:
            raise ValueError(f"{path}:{lineno}: expected 'x y z -> image'")
        rhs = right.split()
        try:
            key = domain_group.encode(domain_group.parse_element(left.split()))
            if codomain is None:
                if len(rhs) != 3:
                    raise ValueError("table-group images need a table group for the codomain")
                codomain = Heisenberg(p)
            image = codomain.encode(codomain.parse_element(rhs))
        except ValueError as e:
            raise ValueError(f"{path}:{lineno}: {e}") from e
        if key in image_of:
            raise ValueError(f"{path}:{lineno}: element mapped twice")
        image_of[key] = image
    if not image_of:
        raise ValueError(f"{path}: map file has no rows")
    domain = GroupSet.from_ids(domain_group, list(image_of))
    return PartialMap.from_ids(domain, codomain, image_of), s


def write_map_file(pi: PartialMap, s: int, path: Path) -> None:
    group = pi.domain.group
    if not isinstance(group, Heisenberg):
        raise ValueError("Map files describe maps on subsets of Heisenberg groups")
    lines = [f"s={s} p={group.p}"]
    for dom, img in zip(pi.domain.ids.tolist(), pi.images.tolist(), strict=True):
        described = pi.codomain.describe(img)
        rhs = " ".join(str(c) for c in described) if isinstance(described, list) else str(described)
        lines.append(f"{' '.join(str(c) for c in group.describe(dom))} -> {rhs}")
    Path(path).write_text("\n".join(lines) + "\n")
