"""Unit tests for group sets, product sets, slabs and fibers."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heisenberg_freiman.groups import HeisElement, Heisenberg, TableGroup
from heisenberg_freiman.sets import (
    PATTERN_CENTER,
    PATTERN_FIRST_STEP,
    BudgetExceededError,
    GroupSet,
    SignedWordPattern,
    build_A0,
    build_slab,
    doubling_stats,
    extract_fibers,
    heisenberg_set,
    inverse_set,
    product_set,
    read_set_file,
    sample_subset,
    signed_product_set,
    slab_width,
    write_set_file,
)

H5 = Heisenberg(5)
subsets_of_h5 = st.sets(st.integers(min_value=0, max_value=124), min_size=1, max_size=30)

# --- GroupSet tests ---


def test_group_set_dedupes_and_sorts():
    """Test that ids are stored sorted and unique."""
    A = GroupSet.from_ids(H5, [7, 3, 7, 0])
    assert A.ids.tolist() == [0, 3, 7]
    assert A.size == 3
    assert len(A) == 3


def test_group_set_rejects_ids_outside_group():
    """Test range validation of packed ids."""
    with pytest.raises(ValueError, match="outside"):
        GroupSet.from_ids(H5, [125])


def test_group_set_membership():
    """Test element and id membership, including elements of another group."""
    A = heisenberg_set(5, [(1, 2, 3), (0, 0, 0)])
    assert H5.element(1, 2, 3) in A
    assert H5.element(1, 2, 4) not in A
    assert HeisElement(1, 2, 3, 7) not in A
    assert A.contains_id(0)
    assert A.contains_ids(np.array([0, 1])).tolist() == [True, False]
    assert A.describe() == [[0, 0, 0], [1, 2, 3]]


def test_group_set_equality_and_subset():
    """Test equality across construction paths."""
    A = heisenberg_set(5, [(0, 0, 1), (0, 0, 2)])
    B = GroupSet.from_ids(H5, [2, 1])
    assert A == B
    assert A.issubset(GroupSet.whole(H5))
    assert not GroupSet.whole(H5).issubset(A)
    assert A != GroupSet.from_ids(Heisenberg(7), [1, 2])


# --- product set tests ---


@pytest.mark.parametrize("p, m", [(5, 2), (7, 3), (11, 4), (13, 5)])
def test_slab_doubling_identity(p, m):
    """Test |A0 A0| = (2m - 1) p^2 while 2m - 1 <= p."""
    A0 = build_slab(p, m)
    report = doubling_stats(A0)
    assert report.size_A == m * p * p
    assert report.size_AA == (2 * m - 1) * p * p
    assert report.ratio == Fraction(2 * m - 1, m)
    assert report.small_squaring


def test_doubling_examples():
    """Test the 50/75 and 147/245 examples."""
    assert doubling_stats(build_slab(5, 2)).ratio == Fraction(75, 50)
    report = doubling_stats(build_slab(7, 3))
    assert (report.size_A, report.size_AA) == (147, 245)


def test_slab_square_is_wider_slab():
    """Test that the square of a slab is the slab of width 2m - 1."""
    assert product_set(build_slab(7, 2), build_slab(7, 2)) == build_slab(7, 3)


@settings(max_examples=30, deadline=None)
@given(subsets_of_h5, subsets_of_h5)
def test_product_set_matches_naive(xs, ys):
    """Test vectorised products against the double loop."""
    X = GroupSet.from_ids(H5, sorted(xs))
    Y = GroupSet.from_ids(H5, sorted(ys))
    naive = {H5.mul(H5.decode(a), H5.decode(b)).packed_id for a in xs for b in ys}
    assert product_set(X, Y).ids.tolist() == sorted(naive)


@settings(max_examples=20, deadline=None)
@given(subsets_of_h5)
def test_product_set_independent_of_threads(xs):
    """Test that partitioning the left operand does not change the result."""
    X = GroupSet.from_ids(H5, sorted(xs))
    A = build_slab(5, 2)
    assert product_set(X, A, threads=4) == product_set(X, A, threads=1)


def test_product_set_budget():
    """Test the budget guard and that it names the bound."""
    A = build_slab(5, 2)
    with pytest.raises(BudgetExceededError, match="budget 100"):
        product_set(A, A, budget=100)


def test_product_set_rejects_mixed_groups():
    """Test sets from different groups."""
    with pytest.raises(ValueError, match="different groups"):
        product_set(build_slab(5, 1), build_slab(7, 1))


def test_product_set_in_table_group():
    """Test products in S3: a transposition times itself is the identity."""
    s3 = TableGroup.symmetric(3)
    X = GroupSet.from_ids(s3, [1])
    assert product_set(X, X).ids.tolist() == [s3.mul(1, 1)]


def test_inverse_set():
    """Test X^-1 on the center and on a generic pair."""
    center = GroupSet.from_ids(H5, H5.center_ids())
    assert inverse_set(center) == center
    X = heisenberg_set(5, [(1, 1, 0)])
    assert inverse_set(X) == heisenberg_set(5, [(4, 4, 1)])


# --- signed word patterns ---


def test_signed_pattern_parse_and_render():
    """Test the two accepted spellings."""
    assert SignedWordPattern.parse("++--+") == PATTERN_FIRST_STEP
    assert SignedWordPattern.parse("+1,+1,-1,-1,+1,-1") == PATTERN_CENTER
    assert str(PATTERN_CENTER) == "++--+-"
    with pytest.raises(ValueError, match="Bad sign pattern"):
        SignedWordPattern.parse("+*")
    with pytest.raises(ValueError):
        SignedWordPattern(())


@pytest.mark.parametrize("p", [5, 7])
def test_center_covered_by_slab_words(p):
    """Test that A^2 A^-2 A A^-1 contains the center for a width-2 slab."""
    A = build_slab(p, 2)
    B = signed_product_set(A, PATTERN_CENTER)
    center = GroupSet.from_ids(A.group, A.group.center_ids())
    assert center.issubset(B)


def test_signed_product_single_sign():
    """Test that a one-letter pattern is the set or its inverse."""
    A = heisenberg_set(5, [(1, 0, 0)])
    assert signed_product_set(A, SignedWordPattern((1,))) == A
    assert signed_product_set(A, SignedWordPattern((-1,))) == inverse_set(A)


# --- slabs and sampling ---


def test_slab_width_and_A0():
    """Test m = ceil(p^alpha) and |A0| = m p^2."""
    assert slab_width(5, Fraction(43, 100)) == 2
    assert slab_width(101, Fraction(1011, 1100)) == 70
    A0 = build_A0(5, Fraction(43, 100))
    assert A0.size == 50
    assert A0 == build_slab(5, 2)


def test_build_A0_rejects_bad_alpha():
    """Test the alpha range and the slab fit."""
    with pytest.raises(ValueError, match=r"\[0, 1\)"):
        build_A0(5, Fraction(1))
    with pytest.raises(ValueError, match="not prime"):
        build_A0(6, Fraction(1, 2))
    with pytest.raises(ValueError, match="1 <= m <= p"):
        build_slab(5, 6)


def test_sample_subset_is_reproducible():
    """Test the sampled size and that a seed fixes the sample."""
    A0 = build_slab(5, 2)
    first = sample_subset(A0, Fraction(1, 2), seed=3)
    assert first.size == 8
    assert first.issubset(A0)
    assert first == sample_subset(A0, Fraction(1, 2), seed=3)


def test_sample_subset_theta_one_keeps_everything():
    """Test theta = 1."""
    A0 = build_slab(5, 3)
    assert sample_subset(A0, Fraction(1), seed=0) is A0


def test_sample_subset_rejects_theta():
    """Test theta outside (0, 1]."""
    with pytest.raises(ValueError, match=r"\(0, 1\]"):
        sample_subset(build_slab(5, 1), Fraction(0), seed=0)


# --- fibers ---


def test_extract_fibers_small_set():
    """Test the three fibers of a three-element set."""
    A = heisenberg_set(5, [(0, 0, 0), (1, 0, 0), (0, 1, 0)])
    fibers = extract_fibers(A)
    assert (fibers.X, fibers.y0, fibers.z0) == ((0, 1), 0, 0)
    assert (fibers.Y, fibers.x0, fibers.z0p) == ((0, 1), 0, 0)
    assert (fibers.Z, fibers.u, fibers.v) == ((0,), 0, 0)
    assert fibers.summary()["size_X"] == 2


def test_extract_fibers_ties_go_to_smallest_base():
    """Test tie breaking on equal fiber sizes."""
    A = heisenberg_set(5, [(2, 3, 4), (1, 1, 1)])
    fibers = extract_fibers(A)
    assert (fibers.u, fibers.v, fibers.Z) == (1, 1, (1,))
    assert (fibers.y0, fibers.z0, fibers.X) == (1, 1, (1,))


def test_extract_fibers_of_slab_are_full():
    """Test that a slab has full y and z fibers and an x fiber of width m."""
    fibers = extract_fibers(build_slab(7, 3))
    assert fibers.X == (0, 1, 2)
    assert fibers.Y == tuple(range(7))
    assert fibers.Z == tuple(range(7))


def test_extract_fibers_requires_heisenberg():
    """Test table-group sets are refused."""
    with pytest.raises(ValueError, match="Heisenberg"):
        extract_fibers(GroupSet.whole(TableGroup.cyclic(3)))


# --- set files ---


def test_set_file_round_trip(tmp_path):
    """Test writing then reading a set file."""
    A = heisenberg_set(7, [(1, 2, 3), (6, 6, 6)])
    path = tmp_path / "a.txt"
    write_set_file(A, path)
    assert path.read_text().splitlines() == ["p=7", "1 2 3", "6 6 6"]
    assert read_set_file(path) == A


def test_set_file_rejects_duplicates(tmp_path):
    """Test duplicate elements are reported with both line numbers."""
    path = tmp_path / "dup.txt"
    path.write_text("p=5\n# comment\n1 2 3\n1 2 3\n")
    with pytest.raises(ValueError, match="dup.txt:4: duplicate of line 3"):
        read_set_file(path)


@pytest.mark.parametrize(
    "content, message",
    [
        ("q=5\n1 2 3\n", "p=<prime>"),
        ("p=6\n1 2 3\n", "not prime"),
        ("p=5\n1 2 9\n", "outside"),
        ("p=5\n1 2\n", "x y z"),
        ("p=5\n", "no elements"),
    ],
)
def test_set_file_errors(tmp_path, content, message):
    """Test the parse errors of set files."""
    path = tmp_path / "bad.txt"
    path.write_text(content)
    with pytest.raises(ValueError, match=message):
        read_set_file(path)
