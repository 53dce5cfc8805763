"""Report primitives shared by every module.

Exact rationals travel through pydantic models as "num/den" strings. An
inequality is stored together with its operands, each an exact term
coefficient * base^exponent, so any recorded verdict can be recomputed from
the JSON alone.
"""

import logging
from fractions import Fraction
from typing import Annotated, Literal

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PlainSerializer,
    PlainValidator,
    WithJsonSchema,
)

from heisenberg_freiman.exact import compare_terms, fraction_str, parse_rational

logger = logging.getLogger(__name__)

Rational = Annotated[
    Fraction,
    PlainValidator(parse_rational),
    PlainSerializer(fraction_str, return_type=str),
    WithJsonSchema({"type": "string", "pattern": r"^-?\d+/\d+$"}),
]

Relation = Literal["<", "<=", ">", ">=", "=="]

_RELATIONS = {
    "<": lambda c: c < 0,
    "<=": lambda c: c <= 0,
    ">": lambda c: c > 0,
    ">=": lambda c: c >= 0,
    "==": lambda c: c == 0,
}


class Term(BaseModel):
    """An exact value coefficient * base^exponent."""

    model_config = ConfigDict(frozen=True)

    coefficient: Rational = Fraction(1)
    base: Rational = Fraction(1)
    exponent: Rational = Fraction(1)

    @classmethod
    def of(cls, value: Fraction | int) -> "Term":
        """A plain rational value."""
        return cls(coefficient=Fraction(value))

    @classmethod
    def power(
        cls, base: Fraction | int, exponent: Fraction | int, coefficient=1
    ) -> "Term":
        return cls(
            coefficient=Fraction(coefficient),
            base=Fraction(base),
            exponent=Fraction(exponent),
        )

    def as_tuple(self) -> tuple[Fraction, Fraction, Fraction]:
        return (self.coefficient, self.base, self.exponent)


class Inequality(BaseModel):
    """A recorded comparison lhs <relation> rhs.

    `required` marks algebraic facts that can never fail on correct data
    (Cauchy-Schwarz, pigeonhole); the others are asymptotic statements that
    are recorded as data at the configured prime.
    """

    name: str
    statement: str
    lhs: Term
    rhs: Term
    relation: Relation
    holds: bool
    required: bool = False

    def reevaluate(self) -> bool:
        """Recompute the verdict from the recorded operands."""
        return evaluate(self.lhs, self.rhs, self.relation)


def evaluate(lhs: Term, rhs: Term, relation: Relation) -> bool:
    return _RELATIONS[relation](compare_terms(lhs.as_tuple(), rhs.as_tuple()))


def record(
    name: str,
    statement: str,
    lhs: Term | Fraction | int,
    relation: Relation,
    rhs: Term | Fraction | int,
    *,
    required: bool = False,
) -> Inequality:
    """Evaluate and record an inequality."""
    lhs_term = lhs if isinstance(lhs, Term) else Term.of(lhs)
    rhs_term = rhs if isinstance(rhs, Term) else Term.of(rhs)
    holds = evaluate(lhs_term, rhs_term, relation)
    if not holds:
        level = logging.ERROR if required else logging.WARNING
        logger.log(level, f"Inequality {name} fails: {statement}")
    return Inequality(
        name=name,
        statement=statement,
        lhs=lhs_term,
        rhs=rhs_term,
        relation=relation,
        holds=holds,
        required=required,
    )


class StageError(BaseModel):
    """A pipeline stage that could not complete."""

    stage: str
    error: str


class ReportEnvelope(BaseModel):
    """What every CLI command writes."""

    tool_version: str
    command: str
    config: dict = Field(default_factory=dict)
    payload: dict = Field(default_factory=dict)
    sidecars: list[str] = Field(default_factory=list)
