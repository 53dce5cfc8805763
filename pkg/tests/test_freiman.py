"""Unit tests for Freiman checks, word enumeration and model audits."""

from itertools import combinations, product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heisenberg_freiman.config import Budgets
from heisenberg_freiman.freiman import (
    FiberAnchor,
    MissingAnchorError,
    NotFreimanHomomorphismError,
    PartialMap,
    brute_force_pair_check,
    check_freiman_homomorphism,
    check_freiman_isomorphism,
    enumerate_signed_words,
    evaluate_word,
    integer_surrogate,
    max_feasible_s,
    max_feasible_size,
    model_audit,
    read_map_file,
    sign_vectors,
    witness_is_valid,
    write_map_file,
)
from heisenberg_freiman.groups import Heisenberg, TableGroup
from heisenberg_freiman.model_registry import ModelRegistry
from heisenberg_freiman.sets import BudgetExceededError, GroupSet, build_slab, heisenberg_set

SMALL_GROUPS = [
    TableGroup.cyclic(4),
    TableGroup.cyclic(6),
    TableGroup.symmetric(3),
    TableGroup.direct_product(TableGroup.cyclic(2), TableGroup.cyclic(4)),
]


def mod_map(modulus: int) -> PartialMap:
    """A = {0, 1, 2} in the integers, reduced mod `modulus`."""
    group, A = integer_surrogate([0, 1, 2], 2)
    return PartialMap.from_function(A, TableGroup.cyclic(modulus), lambda ids: ids % modulus)


# --- partial maps ---


def test_partial_map_from_ids_and_lookup():
    """Test images, lookups outside the domain and the image set."""
    z6 = TableGroup.cyclic(6)
    A = GroupSet.from_ids(z6, [1, 4])
    pi = PartialMap.from_ids(A, z6, {1: 2, 4: 2})
    assert pi.image_of(4) == 2
    assert pi.image_set().ids.tolist() == [2]
    assert not pi.is_injective()
    assert pi.collision() == (1, 4)
    with pytest.raises(KeyError):
        pi.image_ids(np.array([0]))
    with pytest.raises(ValueError, match="no image"):
        PartialMap.from_ids(A, z6, {1: 2})
    with pytest.raises(ValueError, match="injective"):
        pi.inverse()


def test_partial_map_inverse_and_restrict():
    """Test the inverse of an injective map and restriction."""
    z6 = TableGroup.cyclic(6)
    A = GroupSet.from_ids(z6, [0, 1, 2])
    pi = PartialMap.from_ids(A, z6, {0: 5, 1: 3, 2: 4})
    inv = pi.inverse()
    assert inv.domain.ids.tolist() == [3, 4, 5]
    assert inv.images.tolist() == [1, 2, 0]
    assert pi.restrict(np.array([2, 0])).images.tolist() == [5, 4]


def test_partial_map_rejects_bad_images():
    """Test images outside the codomain."""
    z3 = TableGroup.cyclic(3)
    with pytest.raises(ValueError, match="outside"):
        PartialMap(GroupSet.from_ids(z3, [0]), z3, np.array([7]))


def test_integer_surrogate_order():
    """Test that the cyclic group is larger than 2 s max|a|."""
    group, A = integer_surrogate([0, 1, 2], 2)
    assert group.order == 9
    assert A.ids.tolist() == [0, 1, 2]
    group, A = integer_surrogate([-3, 1], 3)
    assert group.order == 19
    assert A.ids.tolist() == [1, 16]


# --- word enumeration ---


def test_sign_vectors_order():
    """Test that + comes before -."""
    assert sign_vectors(2) == [(1, 1), (1, -1), (-1, 1), (-1, -1)]


def test_evaluate_word():
    """Test a word in S3 and in Heisenberg(5)."""
    h = Heisenberg(5)
    a, b = h.element(1, 1, 0).packed_id, h.element(4, 4, 1).packed_id
    assert evaluate_word(h, [a, b], (1, 1)) == h.identity_id
    assert evaluate_word(h, [a, a], (1, -1)) == h.identity_id


def test_enumerate_two_central_elements():
    """Test 16 words over 5 values for {[0,0,1], [0,0,2]} at s = 2."""
    A = heisenberg_set(5, [(0, 0, 1), (0, 0, 2)])
    index = enumerate_signed_words(A, 2)
    assert index.words_total == 16
    assert index.values.tolist() == [0, 1, 2, 3, 4]
    assert sum(index.value_counts().values()) == 16


def test_enumerate_identity_only():
    """Test that words over {identity} all evaluate to the identity."""
    A = GroupSet.from_ids(Heisenberg(5), [0])
    index = enumerate_signed_words(A, 3)
    assert index.values.tolist() == [0]
    assert index.multiplicity.tolist() == [8]


def test_enumerate_representatives_decode_to_their_value():
    """Test that each representative word evaluates to its value."""
    A = GroupSet.from_ids(TableGroup.symmetric(3), [1, 2, 3])
    index = enumerate_signed_words(A, 3)
    assert index.words_total == 6**3
    for value, rep in zip(index.values.tolist(), index.representative.tolist(), strict=True):
        signs, letters = index.decode(rep)
        assert evaluate_word(A.group, letters, signs) == value


def test_enumerate_threads_do_not_change_index():
    """Test the threaded enumeration."""
    A = build_slab(5, 1)
    one = enumerate_signed_words(A, 2)
    four = enumerate_signed_words(A, 2, threads=4)
    assert np.array_equal(one.values, four.values)
    assert np.array_equal(one.multiplicity, four.multiplicity)
    assert np.array_equal(one.representative, four.representative)


def test_word_budget_reports_feasible_s():
    """Test the budget error and its largest feasible s."""
    A = heisenberg_set(5, [(0, 0, 1), (0, 0, 2)])
    with pytest.raises(BudgetExceededError, match="largest feasible s is 3") as info:
        enumerate_signed_words(A, 4, budget=100)
    assert info.value.max_feasible_s == 3
    assert max_feasible_s(2, 100) == 3
    assert max_feasible_size(6, 10_000_000) == 7


# --- homomorphism and isomorphism checks ---


def test_identity_map_is_isomorphism():
    """Test the identity for several s."""
    pi = PartialMap.identity(heisenberg_set(5, [(0, 0, 1), (1, 0, 0), (0, 1, 0), (1, 1, 1)]))
    for s in (2, 3, 6):
        verdict = check_freiman_isomorphism(pi, s)
        assert verdict.is_isomorphism
        assert verdict.witness is None
    assert check_freiman_homomorphism(pi, 2).words_checked == 64


def test_mod_three_is_homomorphism_but_not_isomorphism():
    """Test 1 + 2 = 0 + 0 mod 3 while 3 != 0 in the integers."""
    pi = mod_map(3)
    assert check_freiman_homomorphism(pi, 2).is_homomorphism
    verdict = check_freiman_isomorphism(pi, 2)
    assert verdict.mode == "isomorphism"
    assert verdict.is_homomorphism
    assert verdict.is_isomorphism is False
    assert verdict.direction == "inverse"
    assert verdict.witness.signs == [1, 1]
    assert verdict.witness.a_word == [0, 0]
    assert verdict.witness.b_word == [1, 2]
    assert witness_is_valid(pi.inverse(), verdict.witness)


def test_mod_five_is_isomorphism():
    """Test that sums of two elements of {0, 1, 2} stay distinct mod 5."""
    assert check_freiman_isomorphism(mod_map(5), 2).is_isomorphism


def test_constant_map_fails_injectivity():
    """Test the injectivity direction of the isomorphism check."""
    A = GroupSet.from_ids(TableGroup.cyclic(6), [1, 2])
    pi = PartialMap.from_function(A, TableGroup.cyclic(2), lambda ids: ids * 0)
    verdict = check_freiman_isomorphism(pi, 2)
    assert verdict.is_homomorphism
    assert verdict.direction == "injectivity"
    assert verdict.witness.a_word == [1, 1]
    assert verdict.witness.b_word == [2, 1]


def test_forward_witness_is_first_violation():
    """Test a forward failure and its witness."""
    h = Heisenberg(5)
    A = heisenberg_set(5, [(0, 0, 0), (0, 0, 1), (0, 0, 2)])
    images = {0: 0, 1: 1, 2: h.element(1, 0, 0).packed_id}
    pi = PartialMap.from_ids(A, h, images)
    verdict = check_freiman_homomorphism(pi, 2)
    assert not verdict.is_homomorphism
    assert verdict.direction == "forward"
    assert verdict.witness.signs == [1, 1]
    # [0,0,2] = [0,0,0][0,0,2] first collides with [0,0,1][0,0,1]
    assert verdict.witness.a_word == [0, 2]
    assert verdict.witness.b_word == [1, 1]
    assert witness_is_valid(pi, verdict.witness)


def test_empty_domain_rejected():
    """Test a map on the empty set."""
    z3 = TableGroup.cyclic(3)
    pi = PartialMap(GroupSet.from_ids(z3, []), z3, np.empty(0, dtype=np.int64))
    with pytest.raises(ValueError, match="empty domain"):
        check_freiman_homomorphism(pi, 2)


# --- oracle equivalence ---


def test_class_checker_matches_brute_force_exhaustively():
    """Test every map from a subset of size <= 3 of Z4 into S3 at s = 2."""
    domain_group, target = TableGroup.cyclic(4), TableGroup.symmetric(3)
    for k in (1, 2, 3):
        for ids in combinations(range(4), k):
            A = GroupSet.from_ids(domain_group, ids)
            for images in product(range(6), repeat=k):
                pi = PartialMap(A, target, np.array(images, dtype=np.int64))
                fast = check_freiman_homomorphism(pi, 2)
                slow = brute_force_pair_check(pi, 2)
                assert fast.is_homomorphism == slow.is_homomorphism
                if fast.witness is not None:
                    assert witness_is_valid(pi, fast.witness)


@st.composite
def small_maps(draw):
    source = draw(st.sampled_from(SMALL_GROUPS))
    target = draw(st.sampled_from(SMALL_GROUPS))
    ids = draw(st.sets(st.integers(0, source.order - 1), min_size=1, max_size=3))
    images = draw(st.lists(st.integers(0, target.order - 1), min_size=len(ids), max_size=len(ids)))
    return PartialMap(GroupSet.from_ids(source, sorted(ids)), target, np.array(images, dtype=np.int64))


@settings(max_examples=200, deadline=None)
@given(small_maps(), st.integers(2, 3))
def test_class_checker_matches_brute_force_randomly(pi, s):
    """Test agreement with the pairwise definition on random small maps."""
    fast = check_freiman_homomorphism(pi, s)
    assert fast.is_homomorphism == brute_force_pair_check(pi, s).is_homomorphism
    assert (fast.witness is None) == fast.is_homomorphism
    if fast.witness is not None:
        assert witness_is_valid(pi, fast.witness)


@settings(max_examples=50, deadline=None)
@given(small_maps())
def test_homomorphism_is_monotone_in_s(pi):
    """Test that passing at s = 3 implies passing at s = 2."""
    if check_freiman_homomorphism(pi, 3).is_homomorphism:
        assert check_freiman_homomorphism(pi, 2).is_homomorphism


@settings(max_examples=50, deadline=None)
@given(st.sets(st.integers(0, 5), min_size=1, max_size=3), st.integers(0, 5))
def test_composition_with_quotient_preserves_freiman(ids, shift):
    """Test sigma o pi for the quotients Z6 -> Z3 and Z6 -> Z2."""
    z6 = TableGroup.cyclic(6)
    A = GroupSet.from_ids(z6, sorted(ids))
    # translation is Freiman for every s
    pi = PartialMap.from_function(A, z6, lambda x: (x + shift) % 6)
    assert check_freiman_homomorphism(pi, 3).is_homomorphism
    for q in (2, 3):
        sigma = pi.compose(lambda x, q=q: x % q, TableGroup.cyclic(q))
        assert check_freiman_homomorphism(sigma, 3).is_homomorphism


def test_brute_force_budget():
    """Test the pair budget of the brute-force oracle."""
    pi = PartialMap.identity(build_slab(5, 1))
    with pytest.raises(BudgetExceededError, match="brute-force budget"):
        brute_force_pair_check(pi, 3)


# --- model audit ---


ANCHOR = FiberAnchor(u=0, v=0, z1=0, z=1)


def test_audit_identity_embedding_of_slab():
    """Test h = [0,0,1] of order 5 and <A0> = H(5)."""
    A0 = build_slab(5, 2)
    report = model_audit(ModelRegistry.build("identity", A0), ANCHOR)
    assert report.freiman6_ok
    assert report.freiman_scope == "restricted"
    assert report.h == [0, 0, 1]
    assert report.h_order == 5
    assert report.order_p_element == [0, 0, 1]
    assert report.generated_subgroup_size == 125
    assert report.p_divides_order
    assert report.size_at_least_p3
    assert report.double_commutators_trivial
    assert report.class_two_on_generators
    assert report.image_abelian is False
    assert not report.abelian_contradiction


def test_audit_full_scope_for_small_sets():
    """Test that small sets are checked in full."""
    A = heisenberg_set(5, [(0, 0, 0), (0, 0, 1), (1, 0, 0)])
    report = model_audit(PartialMap.identity(A), ANCHOR)
    assert report.freiman_scope == "full"
    assert report.freiman_scope_size == 3
    assert report.s == 6
    assert report.freiman_levels == {k: True for k in range(1, 7)}
    # (2 * 3)^k signed words at every length k = 1..6
    assert report.words_checked == sum(6**k for k in range(1, 7))


def test_audit_at_word_length_seven():
    """Test that s = 7 is checked and recorded with every level below it."""
    A = heisenberg_set(5, [(0, 0, 0), (0, 0, 1), (1, 0, 0)])
    report = model_audit(PartialMap.identity(A), ANCHOR, s=7)
    assert report.s == 7
    assert report.freiman_scope == "full"
    assert report.freiman_levels == {k: True for k in range(1, 8)}
    assert report.words_checked == sum(6**k for k in range(1, 8))


def test_audit_restricted_scope_shrinks_with_s():
    """Test that a longer word length leaves fewer elements under the same budget."""
    A0 = build_slab(7, 2)
    pi = PartialMap.identity(A0)
    budgets = Budgets(audit_words=50_000)
    six = model_audit(pi, ANCHOR, s=6, budgets=budgets, scope_ids=A0.ids)
    seven = model_audit(pi, ANCHOR, s=7, budgets=budgets, scope_ids=A0.ids)
    # 6^6 and 4^7 fit 50000, 8^6 and 6^7 do not
    assert (six.s, six.freiman_scope_size) == (6, 3)
    assert (seven.s, seven.freiman_scope_size) == (7, 2)


def test_audit_rejects_short_word_length():
    """Test that s below 6 is refused."""
    pi = PartialMap.identity(build_slab(5, 1))
    with pytest.raises(ValueError, match="s >= 6"):
        model_audit(pi, ANCHOR, s=5)


def test_audit_trivial_model():
    """Test the constant map: h is the identity and the image is abelian."""
    A0 = build_slab(5, 2)
    report = model_audit(ModelRegistry.build("trivial", A0), ANCHOR)
    assert report.h_order == 1
    assert report.order_p_element is None
    assert report.generated_subgroup_size == 1
    assert report.p_divides_order is False
    assert report.abelian_contradiction


@pytest.mark.parametrize("model", ["center-quotient", "x-projection"])
def test_audit_abelian_codomain_flags_contradiction(model):
    """Test that |A| > p^2 with an abelian image is flagged."""
    A0 = build_slab(5, 2)
    report = model_audit(ModelRegistry.build(model, A0), ANCHOR)
    assert report.double_commutators_trivial
    assert report.image_abelian
    assert report.abelian_contradiction


def test_audit_refuses_non_freiman_map():
    """Test that the audit stops on a map that is not Freiman 6."""
    h = Heisenberg(5)
    A = heisenberg_set(5, [(0, 0, 0), (0, 0, 1), (0, 0, 2)])
    pi = PartialMap.from_ids(A, h, {0: 0, 1: 1, 2: h.element(1, 0, 0).packed_id})
    with pytest.raises(NotFreimanHomomorphismError, match="shortest failing word length is 2") as info:
        model_audit(pi, ANCHOR)
    assert not info.value.verdict.is_homomorphism
    assert info.value.verdict.s == 2


def test_audit_missing_anchor():
    """Test anchors outside A and equal anchor heights."""
    pi = PartialMap.identity(build_slab(5, 2))
    with pytest.raises(MissingAnchorError, match="not in A"):
        model_audit(pi, FiberAnchor(u=3, v=0, z1=0, z=1))
    with pytest.raises(MissingAnchorError, match="must differ"):
        model_audit(pi, FiberAnchor(u=0, v=0, z1=2, z=2))


def test_audit_small_budgets_sample_and_skip_closure():
    """Test the sampled double commutators and a closure over budget."""
    # 98^2 pairs exceed the audit budget, the two anchors' 4^6 words do not
    A0 = build_slab(7, 2)
    budgets = Budgets(audit_words=5000, closure=10, triple_samples=500)
    report = model_audit(PartialMap.identity(A0), ANCHOR, budgets=budgets)
    assert report.freiman_scope_size == 2
    assert report.double_commutator_method == "sampled"
    assert report.double_commutators_trivial
    assert report.generated_subgroup_size is None
    assert any(note.startswith("closure:") for note in report.stage_notes)


# --- map files ---


def test_map_file_round_trip_heisenberg(tmp_path):
    """Test a map into Heisenberg(p)."""
    A = heisenberg_set(5, [(0, 0, 1), (1, 2, 3)])
    pi = PartialMap.identity(A)
    path = tmp_path / "id.map"
    write_map_file(pi, 6, path)
    assert path.read_text().splitlines()[0] == "s=6 p=5"
    loaded, s = read_map_file(path)
    assert s == 6
    assert loaded.domain == A
    assert loaded.images.tolist() == pi.images.tolist()


def test_map_file_into_table_group(tmp_path):
    """Test "x y z -> g" rows with a table codomain."""
    path = tmp_path / "z3.map"
    path.write_text("s=2\n0 0 0 -> 0\n0 0 1 -> 2\n")
    loaded, s = read_map_file(path, p=5, codomain=TableGroup.cyclic(3))
    assert s == 2
    assert loaded.images.tolist() == [0, 2]


@pytest.mark.parametrize(
    "content, message",
    [
        ("s=2\n0 0 0 -> 0 0 0\n", "domain prime unknown"),
        ("t=2 p=5\n", "s=<s>"),
        ("s=2 p=5\n0 0 0 0 0 0\n", "->"),
        ("s=2 p=5\n0 0 0 -> 0 0 0\n0 0 0 -> 0 0 1\n", "mapped twice"),
        ("s=2 p=5\n0 0 0 -> 1\n", "table group"),
        ("s=2 p=5\n", "no rows"),
    ],
)
def test_map_file_errors(tmp_path, content, message):
    """Test map file parse errors."""
    path = tmp_path / "bad.map"
    path.write_text(content)
    with pytest.raises(ValueError, match=message):
        read_map_file(path)
