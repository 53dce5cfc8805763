"""Tests for the harness pipelines and the exponent calculator."""

from fractions import Fraction

import pytest

from heisenberg_freiman.config import ConfigError, HarnessConfig
from heisenberg_freiman.pipeline import (
    TheoremReport,
    alpha0,
    alpha_s7,
    compute_m_of_z,
    constants,
    gamma_bounds,
    green_ruzsa_f,
    model_exponent,
    phi_theta,
    run_full_harness,
    run_harness,
    run_s7_harness,
    run_step1,
    run_step2,
    slab_fits,
    validate_witness,
)
from heisenberg_freiman.sets import build_slab, heisenberg_set


def by_name(report: TheoremReport) -> dict:
    return {q.name: q for q in report.inequalities}


# --- constants ---


def test_constants_examples():
    """Test 15/14, 10/11 and 33/32."""
    assert phi_theta(Fraction(13, 14)) == Fraction(15, 14)
    assert alpha0(Fraction(43, 44)) == Fraction(10, 11)
    assert model_exponent(Fraction(43, 44), Fraction(1, 100)) + Fraction(1, 100) == Fraction(33, 32)
    assert alpha_s7(Fraction(1)) == 0
    assert phi_theta(Fraction(1)) == Fraction(3, 2)


def test_alpha_s7_at_lower_boundary_is_one():
    """Test that theta = 11/12 gives alpha = 1, outside [0, 1)."""
    assert alpha_s7(Fraction(11, 12)) == 1
    with pytest.raises(ConfigError, match="alpha"):
        HarnessConfig(p=5, theta=Fraction(11, 12), pipeline="s7").validate()


def test_gamma_bounds_at_theta_one():
    """Test that alpha cancels at theta = 1."""
    assert gamma_bounds(Fraction(1), Fraction(2, 3)) == (Fraction(1, 2), Fraction(1, 2), Fraction(1, 3))


def test_constants_report():
    """Test the full report at theta = 43/44."""
    report = constants(Fraction(43, 44), Fraction(1, 100))
    assert report.alpha0_theta == Fraction(10, 11)
    assert report.alpha_used == Fraction(10, 11) + Fraction(1, 100)
    assert report.gamma_max == min(report.gamma_bounds)
    assert report.model_exponent == Fraction(33, 32) - Fraction(1, 100)
    assert report.theta_above_32_33
    assert report.theta_above_23_24
    assert report.alpha_used_below_one
    assert report.undefined == []
    assert report.green_ruzsa_value == 120**40


def test_constants_mark_undefined_fields():
    """Test theta = 8/11, where neither alpha formula is defined."""
    report = constants(Fraction(8, 11), Fraction(1, 100))
    assert report.alpha_s7 is None
    assert report.alpha0_theta is None
    assert "alpha_s7" in report.undefined
    assert "alpha0_theta" in report.undefined
    assert report.phi_theta == (12 * Fraction(8, 11) - 9) / 2


def test_green_ruzsa_f():
    """Test (10 s K)^(10 K^2) as a term."""
    term = green_ruzsa_f(6, Fraction(2))
    assert (term.base, term.exponent) == (Fraction(120), Fraction(40))
    assert constants(Fraction(1), Fraction(1, 100), K=Fraction(1, 2)).green_ruzsa_value is None


def test_slab_fits():
    """Test ceil(p^alpha) <= p."""
    assert slab_fits(5, Fraction(203, 300))
    assert slab_fits(101, Fraction(1011, 1100))
    assert not slab_fits(5, Fraction(3, 2))


# --- step 1 ---


def test_step1_on_a_central_fiber():
    """Test A = [0, 0, F]: one-element X and Y, no exceptions."""
    A = heisenberg_set(5, [(0, 0, z) for z in range(5)])
    result = run_step1(A, HarnessConfig(p=5, theta=Fraction(1)), m=1)
    assert result.fibers.X == (0,)
    assert result.fibers.Z == tuple(range(5))
    assert result.report.exceptions.e == []
    assert result.report.coverage_checked
    assert result.report.coverage_ok
    assert all(q.holds for q in result.inequalities if q.required)


@pytest.mark.parametrize("p", [5, 7])
def test_step1_on_a_width_two_slab(p):
    """Test A0 with m = 2: every height is covered and A^2A^-2A reaches each [u, v, t]."""
    result = run_step1(build_slab(p, 2), HarnessConfig(p=p, theta=Fraction(1)), m=2)
    assert result.report.exceptions.e == []
    assert result.report.coverage_checked
    assert result.report.coverage_ok
    assert result.report.uncovered == []


# --- step 2 ---


def test_m_of_z_examples():
    """Test the direct scans, including the empty-maximum convention."""
    assert compute_m_of_z({0}, [2], 1, 5) == {2: 3}
    assert compute_m_of_z({3}, [2], 1, 5) == {2: 1}
    assert compute_m_of_z(set(), [1, 2, 3], 0, 5) == {1: 5, 2: 5, 3: 5}
    with pytest.raises(ValueError, match="must not lie in Z1"):
        compute_m_of_z({0}, [1, 2], 1, 5)


def test_step2_without_exceptions():
    """Test E empty, Z = F_5: T = p and the first witness (t=2, z=1, z'=2)."""
    report = run_step2([], range(5), 5)
    assert report.z1 == 0
    assert report.T == 5
    assert report.Z1_prime == []
    assert report.Z1_tilde == [1, 2, 3, 4]
    assert (report.witness.t, report.witness.z, report.witness.zprime) == (2, 1, 2)
    assert report.witness_violations == []
    assert report.s_counts[:2] == [0, 4]


def test_step2_with_one_exception():
    """Test p = 11, E = {0}, Z = {1..8}."""
    report = run_step2([0], range(1, 9), 11)
    assert report.T == 3
    assert report.Z1_prime == [6, 8]
    assert (report.witness.t, report.witness.z, report.witness.zprime) == (2, 2, 3)
    assert report.witness_violations == []
    assert sum(report.s_counts) > 0
    assert len(report.Z1_tilde) >= len(report.Z1) / 2


@pytest.mark.parametrize(
    "E, Z, z1, failure",
    [
        ([], [3], None, "Z1 empty"),
        ([], [], None, "Z empty"),
        ([], [1, 2], 4, "not in Z"),
    ],
)
def test_step2_failures(E, Z, z1, failure):
    """Test the recorded failure reasons."""
    report = run_step2(E, Z, 5, z1)
    assert report.witness is None
    assert failure in report.failure


def test_step2_explicit_z1():
    """Test a configured z1."""
    report = run_step2([], range(5), 5, z1=3)
    assert report.z1 == 3
    assert 3 not in report.Z1


def test_validate_witness_catches_tampering():
    """Test that a corrupted witness is re-checked independently."""
    report = run_step2([], range(5), 5)
    bad = report.witness.model_copy(update={"zprime": 3})
    assert "zprime != z1 + t(z - z1)" in validate_witness(bad, [], 5)
    bad = report.witness.model_copy(update={"t": 9})
    assert "t outside 1..T" in validate_witness(bad, [], 5)
    # with E = {0, 1}, z' - z = 1 lies in E - E
    assert "zprime - z lies in E - E" in validate_witness(report.witness, [0, 1], 5)


# --- s6 harness ---


def test_s6_harness_at_p5():
    """Test the small-p run: E empty, witness found, chain replayed, <A0> = H(5)."""
    report = run_full_harness(HarnessConfig(p=5, theta=Fraction(1)))
    assert report.verdict == "consistent", report.consistency_failures
    assert report.stage_errors == []
    assert (report.slab_width, report.size_A0, report.size_A) == (3, 75, 75)
    assert report.exceptions.e == []
    assert report.step1.coverage_ok
    assert (report.step2.witness.t, report.step2.witness.z, report.step2.witness.zprime) == (2, 1, 2)
    step3 = report.step3
    assert step3.chain_ok
    assert [s.j for s in step3.chain] == [1, 2, 3, 4, 5]
    assert step3.h == [0, 0, 1]
    assert step3.h_power_p_identity
    assert step3.audit.generated_subgroup_size == 125
    assert step3.audit.size_at_least_p3
    assert step3.audit.order_p_element == [0, 0, 1]
    assert step3.audit.s == 6
    assert report.constants.s == 6
    inequalities = by_name(report)
    assert inequalities["alpha_above_alpha0"].holds
    assert inequalities["cauchy_schwarz_coverage"].holds
    assert inequalities["second_step_half"].holds
    assert report.reevaluation_mismatches() == []


def test_s6_harness_with_center_quotient_flags_contradiction():
    """Test an abelian codomain: the chain is trivial and the audit flags |A| > p^2."""
    report = run_full_harness(HarnessConfig(p=5, theta=Fraction(1), model="center-quotient"))
    audit = report.step3.audit
    assert report.step3.h_power_p_identity
    assert audit.order_p_element is None
    assert audit.image_abelian
    assert audit.abelian_contradiction


def test_s6_harness_unknown_model_is_a_stage_error():
    """Test that a bad model id is recorded, not raised."""
    report = run_full_harness(HarnessConfig(p=5, theta=Fraction(1), model="nope"))
    assert [e.stage for e in report.stage_errors] == ["step3"]
    assert "Unknown model" in report.stage_errors[0].error


def test_harness_rejects_theta_outside_range():
    """Test theta = 9/10 for the s6 pipeline."""
    with pytest.raises(ConfigError, match="outside the s6 range"):
        run_full_harness(HarnessConfig(p=5, theta=Fraction(9, 10)))


def test_harness_report_round_trips_through_json():
    """Test that the JSON report reloads with identical, re-evaluable inequalities."""
    report = run_full_harness(HarnessConfig(p=5, theta=Fraction(1)))
    reloaded = TheoremReport.model_validate_json(report.model_dump_json())
    assert reloaded.reevaluation_mismatches() == []
    assert reloaded.inequalities == report.inequalities
    assert reloaded.model_dump() == report.model_dump()


def test_harness_is_deterministic():
    """Test that the same config gives the same report."""
    config = HarnessConfig(p=7, theta=Fraction(43, 44), seed=3)
    assert run_harness(config).model_dump_json() == run_harness(config).model_dump_json()


def test_s6_harness_at_p101():
    """Test the end-to-end run at p = 101, theta = 43/44."""
    report = run_full_harness(HarnessConfig(p=101, theta=Fraction(43, 44), seed=1))
    assert report.slab_width == 70
    assert report.verdict == "consistent", report.consistency_failures
    assert by_name(report)["alpha_above_alpha0"].holds
    assert report.reevaluation_mismatches() == []
    assert not report.step1.coverage_checked


# --- s7 harness ---


def test_s7_harness_at_p5():
    """Test N(t) > 0, center coverage and the lambda chain at theta = 1."""
    report = run_s7_harness(HarnessConfig(p=5, theta=Fraction(1), pipeline="s7"))
    assert report.verdict == "consistent", report.consistency_failures
    assert report.slab_width == 1
    s7 = report.s7
    assert s7.N_positive_everywhere
    assert s7.N_lower_bound.implies_positive
    assert s7.center_coverage_ok
    assert s7.parseval.exact_holds
    assert s7.vinogradov.holds
    assert s7.lambda_chain.chain_ok
    assert s7.lambda_chain.g_order_is_p
    assert s7.audit.h_order == 5
    assert s7.audit.s == 7
    assert s7.audit.freiman_levels == {k: True for k in range(1, 8)}
    assert report.constants.s == 7
    assert by_name(report)["s7_theta_relation"].holds


@pytest.mark.parametrize("p", [5, 7])
def test_s7_harness_with_width_two_slab(p):
    """Test the slab A0 with m = 2."""
    report = run_harness(HarnessConfig(p=p, theta=Fraction(1), pipeline="s7", slab_width=2))
    assert report.size_A == 2 * p * p
    assert report.s7.N_positive_everywhere
    assert report.s7.center_coverage_ok
    assert report.verdict == "consistent", report.consistency_failures


def test_pipeline_aliases():
    """Test the older pipeline names."""
    config = HarnessConfig.from_dict({"p": 5, "theta": "1", "pipeline": "section3"})
    assert config.pipeline == "s7"
    assert HarnessConfig.from_dict({"p": 5, "theta": "1", "pipeline": "section4"}).pipeline == "s6"
