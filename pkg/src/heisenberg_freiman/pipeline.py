"""The two harness pipelines, run on a concrete prime.

s6: fibers of A, the exception set E of the r-table, a progression witness
    z1, z, z' = z1 + t(z - z1) avoiding E, the replay of the power chain
    pi([0,0,j(z - z1)]) = h^j through explicit A^2 A^-2 A representations, and
    an audit of the codomain model.
s7: fibers, positivity of the N-table (center coverage by A^2 A^-2 A A^-1),
    the lambda-power chain g_{lambda d} = g_d^lambda through explicit
    representations, and the same audit.

Every quantitative step is recorded as an Inequality; asymptotic statements
that fail at the configured prime are data, while algebraic facts that fail
make the report inconsistent.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, Field

from heisenberg_freiman.config import Budgets, HarnessConfig
from heisenberg_freiman.counting import (
    ExceptionReport,
    NLowerBound,
    ParsevalReport,
    RepCountTable,
    VinogradovReport,
    N_lower_bound,
    additive_energy,
    difference_set,
    energy_bound,
    exception_set,
    rep_counts_N,
    rep_counts_r,
    verify_parseval,
    verify_vinogradov,
)
from heisenberg_freiman.exact import ceil_power
from heisenberg_freiman.freiman import (
    AuditReport,
    FiberAnchor,
    PartialMap,
    evaluate_word,
    model_audit,
)
from heisenberg_freiman.groups import FiniteGroup, Heisenberg
from heisenberg_freiman.reports import Inequality, Rational, StageError, Term, record
from heisenberg_freiman.sets import (
    PATTERN_CENTER,
    PATTERN_FIRST_STEP,
    Fibers,
    GroupSet,
    build_slab,
    extract_fibers,
    sample_subset,
    signed_product_set,
    slab_width,
)

logger = logging.getLogger(__name__)

# Direct product-set coverage checks run up to this prime
DIRECT_COVERAGE_MAX_P = 11

# Small-doubling constant of A0 used for the Green-Ruzsa bound
DEFAULT_K = Fraction(2)

THETA_ALPHA_BELOW_ONE = Fraction(32, 33)
THETA_SECOND_STEP = Fraction(23, 24)
THETA_S7 = Fraction(11, 12)

# Freiman order each pipeline works at
PIPELINE_S = {"s6": 6, "s7": 7}


# =============================================================================
# Constants
# =============================================================================


def phi_theta(theta: Fraction) -> Fraction:
    """Exponent of |A| in |G| >= |A|^phi for the s7 argument."""
    return (12 * Fraction(theta) - 9) / 2


def alpha_s7(theta: Fraction) -> Fraction:
    """The alpha with theta = (8 + 3 alpha)/(8 + 4 alpha)."""
    theta = Fraction(theta)
    if 4 * theta - 3 <= 0:
        raise ValueError(f"alpha_s7 undefined for theta={theta} <= 3/4")
    return 8 * (1 - theta) / (4 * theta - 3)


def alpha0(theta: Fraction) -> Fraction:
    """Smallest slab exponent for which the progression witness exists."""
    theta = Fraction(theta)
    if 11 * theta - 8 <= 0:
        raise ValueError(f"alpha0 undefined for theta={theta} <= 8/11")
    return (24 - 22 * theta) / (11 * theta - 8)


def gamma_bounds(theta: Fraction, alpha: Fraction) -> tuple[Fraction, Fraction, Fraction]:
    """The three upper bounds on gamma from the second-step counting."""
    d = (2 + alpha) * theta
    return (
        (d - (1 + alpha)) / 2,
        (4 * d - (7 + 4 * alpha)) / 2,
        (2 * d - (3 + 2 * alpha)) / 3,
    )


def model_exponent(theta: Fraction, epsilon: Fraction) -> Fraction:
    return 3 * (11 * Fraction(theta) - 8) / 8 - Fraction(epsilon)


def green_ruzsa_f(s: int, K: Fraction) -> Term:
    """f(s, K) = (10 s K)^(10 K^2)."""
    K = Fraction(K)
    return Term.power(10 * s * K, 10 * K * K)


class ConstantsReport(BaseModel):
    """Exact exponents and thresholds; fields whose formula is undefined are None."""

    theta: Rational
    epsilon: Rational
    s: int
    K: Rational
    phi_theta: Rational
    alpha_s7: Rational | None = None
    alpha0_theta: Rational | None = None
    alpha_used: Rational | None = None
    gamma_bounds: list[Rational] = Field(default_factory=list)
    gamma_max: Rational | None = None
    model_exponent: Rational
    density_exponent: Rational | None = None
    log_ratio_floor: Rational | None = None
    theta_above_32_33: bool
    theta_above_23_24: bool
    theta_at_least_11_12: bool
    alpha_used_below_one: bool | None = None
    green_ruzsa_f: Term
    green_ruzsa_value: int | None = None
    undefined: list[str] = Field(default_factory=list)


def constants(theta: Fraction, epsilon: Fraction, s: int = 6, K: Fraction = DEFAULT_K) -> ConstantsReport:
    """Evaluate every exponent formula at (theta, epsilon) exactly."""
    theta, epsilon, K = Fraction(theta), Fraction(epsilon), Fraction(K)
    undefined = []
    a7 = a0 = used = gmax = density = floor = None
    bounds: list[Fraction] = []
    try:
        a7 = alpha_s7(theta)
    except ValueError:
        undefined.append("alpha_s7")
    try:
        a0 = alpha0(theta)
        used = a0 + epsilon
        bounds = list(gamma_bounds(theta, used))
        gmax = min(bounds)
        density = (2 + used) * theta
        floor = 8 * theta / (11 * theta - 8)
    except ValueError:
        undefined.extend(["alpha0_theta", "alpha_used", "gamma_max", "density_exponent"])
    f = green_ruzsa_f(s, K)
    f_value = None
    if f.exponent.denominator == 1 and f.base.denominator == 1:
        f_value = int(f.base) ** int(f.exponent)
    return ConstantsReport(
        theta=theta,
        epsilon=epsilon,
        s=s,
        K=K,
        phi_theta=phi_theta(theta),
        alpha_s7=a7,
        alpha0_theta=a0,
        alpha_used=used,
        gamma_bounds=bounds,
        gamma_max=gmax,
        model_exponent=model_exponent(theta, epsilon),
        density_exponent=density,
        log_ratio_floor=floor,
        theta_above_32_33=theta > THETA_ALPHA_BELOW_ONE,
        theta_above_23_24=theta > THETA_SECOND_STEP,
        theta_at_least_11_12=theta >= THETA_S7,
        alpha_used_below_one=None if used is None else used < 1,
        green_ruzsa_f=f,
        green_ruzsa_value=f_value,
        undefined=undefined,
    )


# =============================================================================
# Representations in A^2 A^-2 A and A^2 A^-2 A A^-1
# =============================================================================


@dataclass(frozen=True)
class Representations:
    """Explicit words for [u,v,w] and [0,0,t] built from the fibers.

    With a = [x, y0, z0], b = [x0, y, z0p], c = [u, v, zz], d = [u, v, zz'],
    a b a^-1 b^-1 c = [u, v, xy + zz - x0 y0] and
    a b a^-1 b^-1 c d^-1 = [0, 0, xy + zz - zz' - x0 y0].
    """

    group: Heisenberg
    fibers: Fibers
    products: dict[int, tuple[int, int]]

    @classmethod
    def of(cls, group: Heisenberg, fibers: Fibers) -> "Representations":
        p = group.p
        products: dict[int, tuple[int, int]] = {}
        for x in fibers.X:
            for y in fibers.Y:
                products.setdefault(x * y % p, (x, y))
        return cls(group, fibers, products)

    def _ab(self, x: int, y: int) -> list[int]:
        f, g = self.fibers, self.group
        return [g.element(x, f.y0, f.z0).packed_id, g.element(f.x0, y, f.z0p).packed_id]

    def fiber_id(self, z: int) -> int:
        return self.group.element(self.fibers.u, self.fibers.v, z).packed_id

    def first_step(self, w: int) -> list[int] | None:
        """Letters [a, b, a, b, c] of [u, v, w] under PATTERN_FIRST_STEP."""
        f, p = self.fibers, self.group.p
        shift = f.x0 * f.y0
        for zz in f.Z:
            pair = self.products.get((w - zz + shift) % p)
            if pair is not None:
                a, b = self._ab(*pair)
                return [a, b, a, b, self.fiber_id(zz)]
        return None

    def center(self, t: int) -> list[int] | None:
        """Letters [a, b, a, b, c, d] of [0, 0, t] under PATTERN_CENTER."""
        f, p = self.fibers, self.group.p
        shift = f.x0 * f.y0
        for zz in f.Z:
            for zzp in f.Z:
                pair = self.products.get((t - zz + zzp + shift) % p)
                if pair is not None:
                    a, b = self._ab(*pair)
                    return [a, b, a, b, self.fiber_id(zz), self.fiber_id(zzp)]
        return None


def _image_word(pi: PartialMap, letters: list[int], signs: tuple[int, ...]) -> int:
    return evaluate_word(pi.codomain, pi.image_ids(np.array(letters)).tolist(), signs)


# =============================================================================
# Step 1
# =============================================================================


class Step1Report(BaseModel):
    fibers: dict
    x0y0: int
    exceptions: ExceptionReport
    coverage_checked: bool
    coverage_ok: bool | None = None
    uncovered: list[int] = Field(default_factory=list)


@dataclass(frozen=True)
class Step1Result:
    fibers: Fibers
    table: RepCountTable
    report: Step1Report
    inequalities: list[Inequality]


def run_step1(A: GroupSet, config: HarnessConfig, m: int) -> Step1Result:
    """Fibers, r-table and exceptions of A; direct coverage at small p.

    Raises:
        ValueError: If a fiber is empty
    """
    p = config.p
    fibers = extract_fibers(A)
    if not (fibers.X and fibers.Y and fibers.Z):
        raise ValueError("empty fiber")
    table = rep_counts_r(fibers.X, fibers.Y, fibers.Z, fibers.x0, fibers.y0, p)
    exceptions = exception_set(table)
    alpha = config.alpha
    size_A = A.size
    sx, sy, sz = len(fibers.X), len(fibers.Y), len(fibers.Z)
    n = sx * sy * sz
    energy = exceptions.energy

    inequalities = [
        record("fiber_x_pigeonhole", "|X| >= |A|/p^2", sx, ">=", Fraction(size_A, p * p), required=True),
        record("fiber_y_pigeonhole", "|Y| >= |A|/(m p)", sy, ">=", Fraction(size_A, m * p), required=True),
        record("fiber_z_pigeonhole", "|Z| >= |A|/(m p)", sz, ">=", Fraction(size_A, m * p), required=True),
        record("fiber_y_density", "|Y| >= |A|/p^(1+alpha)", sy, ">=", Term.power(p, -(1 + alpha), size_A)),
        record("fiber_z_density", "|Z| >= |A|/p^(1+alpha)", sz, ">=", Term.power(p, -(1 + alpha), size_A)),
        record("energy_bound", "sum r(t)^2 <= (|X||Y||Z|)^2/p + 2p|X||Y||Z|", energy, "<=", energy_bound(sx, sy, sz, p)),
        record(
            "cauchy_schwarz_coverage",
            "|C| >= (|X||Y||Z|)^2 / sum r(t)^2",
            exceptions.covered_size,
            ">=",
            Fraction(n * n, energy),
            required=True,
        ),
        record("exception_bound", "|E| <= 2p^3/(|X||Y||Z|)", len(exceptions.e), "<=", Fraction(2 * p**3, n)),
        record(
            "exception_difference_set",
            "|E - E| <= |E|^2",
            len(exceptions.e_minus_e),
            "<=",
            len(exceptions.e) ** 2,
            required=True,
        ),
    ]

    coverage_ok = None
    uncovered: list[int] = []
    checked = p <= DIRECT_COVERAGE_MAX_P
    if checked:
        B = signed_product_set(A, PATTERN_FIRST_STEP, budget=config.budgets.product_set, threads=config.budgets.threads)
        group = A.group
        in_E = set(exceptions.e)
        targets = [t for t in range(p) if t not in in_E]
        ids = np.array([group.element(fibers.u, fibers.v, t).packed_id for t in targets], dtype=np.int64)
        present = B.contains_ids(ids)
        uncovered = [t for t, ok in zip(targets, present.tolist(), strict=True) if not ok]
        coverage_ok = not uncovered
        if uncovered:
            logger.error(f"[u,v,t] missing from A^2A^-2A for t outside E: {uncovered}")

    report = Step1Report(
        fibers=fibers.summary(),
        x0y0=fibers.x0 * fibers.y0 % p,
        exceptions=exceptions,
        coverage_checked=checked,
        coverage_ok=coverage_ok,
        uncovered=uncovered,
    )
    logger.info(f"Step 1 at p={p}: |E|={len(exceptions.e)}")
    return Step1Result(fibers, table, report, inequalities)


# =============================================================================
# Step 2
# =============================================================================


def compute_m_of_z(E: set[int] | list[int], Z1: list[int], z1: int, p: int) -> dict[int, int]:
    """m(z) = (first j >= 2 with z1 + j(z - z1) in E) - 1, or p if no j <= p hits E.

    When j = 2 already lands in E the maximum is empty and m(z) = 1.
    """
    E = {e % p for e in E}
    if z1 % p in {z % p for z in Z1}:
        raise ValueError(f"z1={z1} must not lie in Z1")
    table = {}
    for z in Z1:
        step = (z - z1) % p
        m = p
        for j in range(2, p + 1):
            if (z1 + j * step) % p in E:
                m = j - 1
                break
        table[z] = m
    return table


class ProgressionWitness(BaseModel):
    """z' = z1 + t(z - z1) with z, z' in the tilde set and z' - z outside E - E."""

    z1: int
    z: int
    t: int
    zprime: int
    m_table: dict[int, int]
    T: int
    Z1_tilde: list[int]


class Step2Report(BaseModel):
    z1: int | None = None
    Z1: list[int] = Field(default_factory=list)
    T: int | None = None
    Z1_prime: list[int] = Field(default_factory=list)
    Z1_tilde: list[int] = Field(default_factory=list)
    e_minus_e_size: int = 0
    s_counts: list[int] = Field(default_factory=list)
    witness: ProgressionWitness | None = None
    failure: str | None = None
    witness_violations: list[str] = Field(default_factory=list)


def s_counts(Z_tilde: list[int], E_minus_E: set[int], z1: int, T: int, p: int) -> list[int]:
    """s(t) for t = 1..T: pairs z != z' in the tilde set with z' = z1 + t(z - z1), z' - z outside E - E."""
    members = set(Z_tilde)
    counts = []
    for t in range(1, T + 1):
        count = 0
        for z in Z_tilde:
            zp = (z1 + t * (z - z1)) % p
            if zp != z and zp in members and (zp - z) % p not in E_minus_E:
                count += 1
        counts.append(count)
    return counts


def validate_witness(witness: ProgressionWitness, E: list[int] | set[int], p: int) -> list[str]:
    """Re-check every witness invariant; returns the violated ones."""
    violations = []
    E_minus_E = set(difference_set(E, p))
    tilde = set(witness.Z1_tilde)
    if witness.zprime != (witness.z1 + witness.t * (witness.z - witness.z1)) % p:
        violations.append("zprime != z1 + t(z - z1)")
    if (witness.zprime - witness.z) % p in E_minus_E:
        violations.append("zprime - z lies in E - E")
    if witness.z not in tilde or witness.zprime not in tilde:
        violations.append("z or zprime outside the tilde set")
    if witness.z == witness.zprime:
        violations.append("z == zprime")
    if not 1 <= witness.t <= witness.T:
        violations.append("t outside 1..T")
    return violations


def run_step2(E: list[int] | set[int], Z: list[int] | tuple[int, ...], p: int, z1: int | None = None) -> Step2Report:
    """Search the progression witness by its definition.

    T = [|Z1| / (2|E|)], and T = p when E is empty; Z1' collects the z with
    m(z) <= T except that nothing is excluded when E is empty.
    """
    Z = sorted({z % p for z in Z})
    E = sorted({e % p for e in E})
    if not Z:
        return Step2Report(failure="Z empty")
    z1 = Z[0] if z1 is None else z1 % p
    if z1 not in Z:
        return Step2Report(z1=z1, failure=f"z1={z1} not in Z")
    Z1 = [z for z in Z if z != z1]
    if not Z1:
        return Step2Report(z1=z1, failure="Z1 empty")

    m_table = compute_m_of_z(E, Z1, z1, p)
    if E:
        T = len(Z1) // (2 * len(E))
        Z1_prime = [z for z in Z1 if m_table[z] <= T]
    else:
        T = p
        Z1_prime = []
    Z1_tilde = [z for z in Z1 if z not in set(Z1_prime)]
    E_minus_E = set(difference_set(E, p))
    report = Step2Report(
        z1=z1,
        Z1=Z1,
        T=T,
        Z1_prime=Z1_prime,
        Z1_tilde=Z1_tilde,
        e_minus_e_size=len(E_minus_E),
        s_counts=s_counts(Z1_tilde, E_minus_E, z1, T, p),
    )

    tilde = set(Z1_tilde)
    for t in range(1, T + 1):
        for z in Z1_tilde:
            zp = (z1 + t * (z - z1)) % p
            if zp != z and zp in tilde and (zp - z) % p not in E_minus_E:
                witness = ProgressionWitness(
                    z1=z1, z=z, t=t, zprime=zp, m_table=m_table, T=T, Z1_tilde=Z1_tilde
                )
                report.witness = witness
                report.witness_violations = validate_witness(witness, E, p)
                logger.info(f"Step 2 witness: t={t}, z={z}, z'={zp} (T={T})")
                return report
    report.failure = "no progression witness with t <= T"
    logger.warning(f"Step 2 found no witness at p={p} (|E|={len(E)}, T={T})")
    return report


# =============================================================================
# Step 3
# =============================================================================


class ChainStep(BaseModel):
    j: int
    w: int
    case: Literal["base", "j-1", "j-t"]
    holds: bool


class Step3Report(BaseModel):
    model: str
    h: Any
    chain: list[ChainStep] = Field(default_factory=list)
    chain_ok: bool
    skipped_in_E: list[int] = Field(default_factory=list)
    h_power_p_identity: bool
    inconsistencies: list[str] = Field(default_factory=list)
    audit: AuditReport | None = None
    audit_error: str | None = None


def run_step3(
    A: GroupSet,
    witness: ProgressionWitness,
    pi: PartialMap,
    fibers: Fibers,
    E: list[int] | set[int],
    *,
    model: str = "identity",
    s: int = PIPELINE_S["s6"],
    budgets: Budgets | None = None,
    seed: int = 0,
) -> Step3Report:
    """Replay pi([0,0,j(z - z1)]) = h^j for every j with z1 + j(z - z1) outside E.

    The image of [u, v, w] for w outside A is pi evaluated letterwise on its
    A^2 A^-2 A representation. Step j uses step j-1 when z1 + (j-1)(z - z1) is
    outside E (always for j <= t) and step j-t otherwise.
    """
    group = A.group
    p = group.p
    E = {e % p for e in E}
    G: FiniteGroup = pi.codomain
    reps = Representations.of(group, fibers)
    z1, z, t = witness.z1, witness.z, witness.t
    step = (z - z1) % p

    base = int(pi.image_ids(np.array([reps.fiber_id(z1)]))[0])
    top = int(pi.image_ids(np.array([reps.fiber_id(z)]))[0])
    zprime_img = int(pi.image_ids(np.array([reps.fiber_id(witness.zprime)]))[0])
    h = G.mul_ids(G.inv_ids(np.array(base)), np.array(top))
    base_inv = G.inv_ids(np.array(base))

    # value[j] = image of [u, v, z1 + j(z - z1)]
    value: dict[int, int] = {0: base, 1: top}
    power = {0: G.identity_id, 1: int(h)}
    chain = [ChainStep(j=1, w=z, case="base", holds=True)]
    skipped, inconsistencies, scope = [], [], [reps.fiber_id(z1), reps.fiber_id(z), reps.fiber_id(witness.zprime)]

    for j in range(2, p + 1):
        power[j] = int(G.mul_ids(np.array(power[j - 1]), h))
        w = (z1 + j * step) % p
        if w in E:
            skipped.append(j)
            continue
        letters = reps.first_step(w)
        if letters is None:
            inconsistencies.append(f"no A^2A^-2A representation for w={w} outside E")
            continue
        scope.extend(letters)
        value[j] = _image_word(pi, letters, PATTERN_FIRST_STEP.signs)
        if j <= t or (j - 1) in value:
            case = "j-1"
            expected = G.mul_ids(np.array(value[j - 1]), h) if (j - 1) in value else None
        elif (j - t) in value:
            case = "j-t"
            expected = G.mul_ids(G.mul_ids(np.array(value[j - t]), base_inv), np.array(zprime_img))
        else:
            inconsistencies.append(f"induction step unavailable at j={j}")
            continue
        if expected is None:
            inconsistencies.append(f"induction step unavailable at j={j}")
            continue
        # pi([0,0,j(z - z1)]) = pi([u,v,z1])^-1 value[j] must equal h^j
        chain_value = int(G.mul_ids(base_inv, np.array(value[j])))
        holds = int(expected) == value[j] and chain_value == power[j]
        chain.append(ChainStep(j=j, w=w, case=case, holds=holds))

    h_power_p = power[p] == G.identity_id
    chain_ok = all(c.holds for c in chain) and not inconsistencies
    report = Step3Report(
        model=model,
        h=G.describe(int(h)),
        chain=chain,
        chain_ok=chain_ok,
        skipped_in_E=skipped,
        h_power_p_identity=h_power_p,
        inconsistencies=inconsistencies,
    )
    try:
        report.audit = model_audit(
            pi,
            FiberAnchor(fibers.u, fibers.v, z1, z),
            s=s,
            budgets=budgets,
            scope_ids=np.array(list(dict.fromkeys(scope)), dtype=np.int64),
            seed=seed,
        )
    except ValueError as e:
        report.audit_error = str(e)
        logger.warning(f"Audit of model '{model}' refused: {e}")
    logger.info(f"Step 3 with model '{model}': chain {'ok' if chain_ok else 'broken'}, h^p = 1: {h_power_p}")
    return report


# =============================================================================
# s7 extras
# =============================================================================


class LambdaChainReport(BaseModel):
    i: int
    j: int
    d: int
    g: Any
    g_order_is_p: bool
    chain_ok: bool
    failures: list[int] = Field(default_factory=list)
    missing_representations: list[int] = Field(default_factory=list)


def lambda_chain(pi: PartialMap, fibers: Fibers, i: int, j: int) -> LambdaChainReport:
    """g_{lambda d} = g_d^lambda for lambda = 1..p, d = i - j, each g_t read off
    the A^2 A^-2 A A^-1 representation of [0, 0, t]."""
    group = pi.domain.group
    p = group.p
    G = pi.codomain
    reps = Representations.of(group, fibers)
    d = (i - j) % p
    g_values: dict[int, int] = {}
    missing = []
    for lam in range(1, p + 1):
        t = lam * d % p
        letters = reps.center(t)
        if letters is None:
            missing.append(t)
            continue
        g_values[lam] = _image_word(pi, letters, PATTERN_CENTER.signs)
    failures = []
    if 1 not in g_values:
        return LambdaChainReport(i=i, j=j, d=d, g=None, g_order_is_p=False, chain_ok=False, missing_representations=missing)
    g = np.array(g_values[1])
    power = np.array(G.identity_id)
    order_p = False
    for lam in range(1, p + 1):
        power = G.mul_ids(power, g)
        if lam in g_values and g_values[lam] != int(power):
            failures.append(lam)
        if int(power) == G.identity_id:
            order_p = lam == p
            if lam < p:
                break
    return LambdaChainReport(
        i=i,
        j=j,
        d=d,
        g=G.describe(g_values[1]),
        g_order_is_p=order_p,
        chain_ok=not failures and not missing,
        failures=failures,
        missing_representations=missing,
    )


class S7Report(BaseModel):
    N_positive_everywhere: bool
    N_min: int
    N_lower_bound: NLowerBound
    center_coverage_checked: bool
    center_coverage_ok: bool | None = None
    vinogradov: VinogradovReport
    parseval: ParsevalReport
    lambda_chain: LambdaChainReport | None = None
    audit: AuditReport | None = None
    audit_error: str | None = None


# =============================================================================
# Harness
# =============================================================================


class TheoremReport(BaseModel):
    """Everything a harness run established, in exact arithmetic."""

    config: dict
    constants: ConstantsReport
    slab_width: int | None = None
    size_A0: int | None = None
    size_A: int | None = None
    fibers: dict | None = None
    exceptions: ExceptionReport | None = None
    step1: Step1Report | None = None
    step2: Step2Report | None = None
    step3: Step3Report | None = None
    s7: S7Report | None = None
    inequalities: list[Inequality] = Field(default_factory=list)
    stage_errors: list[StageError] = Field(default_factory=list)
    consistency_failures: list[str] = Field(default_factory=list)
    verdict: Literal["consistent", "inconsistent"] = "consistent"

    def reevaluation_mismatches(self) -> list[str]:
        """Names of inequalities whose stored status differs from recomputation."""
        return [q.name for q in self.inequalities if q.reevaluate() != q.holds]


def _build_A(config: HarnessConfig) -> tuple[int, GroupSet, GroupSet]:
    m = config.slab_width or slab_width(config.p, config.alpha)
    A0 = build_slab(config.p, m)
    return m, A0, sample_subset(A0, config.theta, config.seed)


def _build_model(name: str, A: GroupSet) -> PartialMap:
    from heisenberg_freiman.model_registry import ModelRegistry

    return ModelRegistry.build(name, A)


def _size_inequalities(config: HarnessConfig, m: int, A0: GroupSet, A: GroupSet, consts: ConstantsReport) -> list[Inequality]:
    p, theta = config.p, config.theta
    alpha = config.alpha
    size = A.size
    out = [
        record("sample_density", "|A| >= |A0|^theta", size, ">=", Term.power(A0.size, theta), required=True),
        record("slab_lower_bound", "|A0| >= p^(2+alpha)", A0.size, ">=", Term.power(p, 2 + alpha), required=config.slab_width is None),
        record("size_above_p_squared", "|A| > p^2", size, ">", p * p),
        record(
            "p_cubed_vs_density",
            "p^3 >= |A|^(3/(2+alpha))",
            p**3,
            ">=",
            Term.power(size, Fraction(3) / (2 + alpha)),
        ),
    ]
    if config.pipeline == "s6":
        out += [
            record("alpha_above_alpha0", "alpha > alpha0(theta)", alpha, ">", consts.alpha0_theta, required=True),
            record(
                "density_vs_model_exponent",
                "|A|^(3/(2+alpha)) >= |A|^(3(11 theta - 8)/8 - epsilon)",
                Term.power(size, Fraction(3) / (2 + alpha)),
                ">=",
                Term.power(size, consts.model_exponent),
            ),
        ]
    else:
        out += [
            record("s7_density", "|A| >= p^((8+3 alpha)/4)", size, ">=", Term.power(p, (8 + 3 * alpha) / 4)),
            record(
                "s7_theta_relation",
                "theta = (8+3 alpha)/(8+4 alpha)",
                theta,
                "==",
                (8 + 3 * alpha) / (8 + 4 * alpha),
                required=True,
            ),
            record("s7_phi_bound", "p^3 >= |A|^phi_theta", p**3, ">=", Term.power(size, consts.phi_theta)),
        ]
    return out


def _finish(report: TheoremReport) -> TheoremReport:
    failures = list(report.consistency_failures)
    failures += [f"required inequality {q.name} fails" for q in report.inequalities if q.required and not q.holds]
    failures += [f"inequality {name} does not re-evaluate" for name in report.reevaluation_mismatches()]
    if report.step1 and report.step1.coverage_ok is False:
        failures.append("A^2A^-2A misses [u,v,t] for some t outside E")
    if report.step2 and report.step2.witness_violations:
        failures += [f"witness: {v}" for v in report.step2.witness_violations]
    if report.step3 and report.step3.inconsistencies:
        failures += [f"step 3: {v}" for v in report.step3.inconsistencies]
    if report.s7 and report.s7.center_coverage_ok is False and report.s7.N_positive_everywhere:
        failures.append("N(t) > 0 everywhere but the center is not covered")
    report.consistency_failures = failures
    report.verdict = "inconsistent" if failures else "consistent"
    logger.info(f"Harness verdict: {report.verdict} ({len(report.inequalities)} inequalities)")
    return report


def run_full_harness(config: HarnessConfig) -> TheoremReport:
    """The s6 pipeline. Stage failures are recorded, never raised."""
    config.validate()
    consts = constants(config.theta, config.epsilon, s=PIPELINE_S["s6"])
    report = TheoremReport(config=config.echo(), constants=consts)
    try:
        m, A0, A = _build_A(config)
    except ValueError as e:
        report.stage_errors.append(StageError(stage="build", error=str(e)))
        return _finish(report)
    report.slab_width, report.size_A0, report.size_A = m, A0.size, A.size
    report.inequalities += _size_inequalities(config, m, A0, A, consts)

    try:
        step1 = run_step1(A, config, m)
    except ValueError as e:
        report.stage_errors.append(StageError(stage="step1", error=str(e)))
        return _finish(report)
    report.step1 = step1.report
    report.fibers = step1.fibers.summary()
    report.exceptions = step1.report.exceptions
    report.inequalities += step1.inequalities
    E = step1.report.exceptions.e

    step2 = run_step2(E, step1.fibers.Z, config.p, config.z1)
    report.step2 = step2
    if consts.gamma_max is not None:
        report.inequalities.append(
            record("exceptions_below_gamma", "|E| < p^gamma_max", len(E), "<", Term.power(config.p, consts.gamma_max))
        )
    if step2.T is not None:
        report.inequalities.append(
            record("second_step_half", "|Z1 tilde| >= |Z1|/2", len(step2.Z1_tilde), ">=", Fraction(len(step2.Z1), 2), required=True)
        )
        report.inequalities.append(
            record(
                "second_step_density",
                "|Z1 tilde| >= |A|/(2 p^(1+alpha))",
                len(step2.Z1_tilde),
                ">=",
                Term.power(config.p, -(1 + config.alpha), Fraction(A.size, 2)),
            )
        )
    if step2.witness is None:
        report.stage_errors.append(StageError(stage="step2", error=step2.failure or "no witness"))
        return _finish(report)

    try:
        pi = _build_model(config.model, A)
        report.step3 = run_step3(
            A,
            step2.witness,
            pi,
            step1.fibers,
            E,
            model=config.model,
            s=PIPELINE_S["s6"],
            budgets=config.budgets,
            seed=config.seed,
        )
    except (ValueError, KeyError) as e:
        report.stage_errors.append(StageError(stage="step3", error=str(e)))
    return _finish(report)


def run_s7_harness(config: HarnessConfig) -> TheoremReport:
    """The s7 pipeline: N-table positivity and the lambda-power chain."""
    config.validate()
    consts = constants(config.theta, config.epsilon, s=PIPELINE_S["s7"])
    report = TheoremReport(config=config.echo(), constants=consts)
    try:
        m, A0, A = _build_A(config)
    except ValueError as e:
        report.stage_errors.append(StageError(stage="build", error=str(e)))
        return _finish(report)
    report.slab_width, report.size_A0, report.size_A = m, A0.size, A.size
    report.inequalities += _size_inequalities(config, m, A0, A, consts)

    p = config.p
    try:
        fibers = extract_fibers(A)
    except ValueError as e:
        report.stage_errors.append(StageError(stage="fibers", error=str(e)))
        return _finish(report)
    report.fibers = fibers.summary()
    sx, sy, sz = len(fibers.X), len(fibers.Y), len(fibers.Z)
    N = rep_counts_N(fibers.X, fibers.Y, fibers.Z, fibers.x0, fibers.y0, p)
    bound = N_lower_bound(sx, sy, sz, p)
    report.inequalities.append(record("s7_fiber_product", "|X||Y||Z|^2 >= p^3", sx * sy * sz * sz, ">=", p**3))

    checked = p <= DIRECT_COVERAGE_MAX_P
    coverage_ok = None
    if checked:
        B = signed_product_set(A, PATTERN_CENTER, budget=config.budgets.product_set, threads=config.budgets.threads)
        coverage_ok = bool(B.contains_ids(A.group.center_ids()).all())
    if bound.implies_positive and not N.positive_everywhere():
        report.consistency_failures.append("N lower bound is positive but some N(t) = 0")

    s7 = S7Report(
        N_positive_everywhere=N.positive_everywhere(),
        N_min=int(N.counts.min()),
        N_lower_bound=bound,
        center_coverage_checked=checked,
        center_coverage_ok=coverage_ok,
        vinogradov=verify_vinogradov(fibers.X, fibers.Y, p),
        parseval=verify_parseval(fibers.Z, p),
    )
    if not s7.parseval.exact_holds:
        report.consistency_failures.append("Parseval identity fails exactly")
    report.s7 = s7

    if sz < 2:
        report.stage_errors.append(StageError(stage="lambda_chain", error="|Z| < 2"))
        return _finish(report)
    i, j = fibers.Z[1], fibers.Z[0]
    try:
        pi = _build_model(config.model, A)
        s7.lambda_chain = lambda_chain(pi, fibers, i, j)
        try:
            s7.audit = model_audit(
                pi,
                FiberAnchor(fibers.u, fibers.v, j, i),
                s=PIPELINE_S["s7"],
                budgets=config.budgets,
                seed=config.seed,
            )
        except ValueError as e:
            s7.audit_error = str(e)
    except (ValueError, KeyError) as e:
        report.stage_errors.append(StageError(stage="lambda_chain", error=str(e)))
    return _finish(report)


def run_harness(config: HarnessConfig) -> TheoremReport:
    return run_s7_harness(config) if config.pipeline == "s7" else run_full_harness(config)


def slab_fits(p: int, alpha: Fraction) -> bool:
    """ceil(p^alpha) <= p."""
    return ceil_power(p, alpha) <= p
