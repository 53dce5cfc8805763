"""Quotient by the center: [x, y, z] -> (x, y), a table of Z_p x Z_p.

A group homomorphism, so a Freiman s-homomorphism for every s; its image is
abelian of order at most p^2, which the audit reports as a contradiction for
|A| > p^2.
"""

import logging

from heisenberg_freiman.freiman import PartialMap
from heisenberg_freiman.groups import TableGroup
from heisenberg_freiman.model_builder import ModelBuilderPlugin
from heisenberg_freiman.model_registry import PRIORITY, ModelRegistry
from heisenberg_freiman.sets import GroupSet

logger = logging.getLogger(__name__)

# The codomain is a Cayley table of order p^2
MAX_P = 31


def _drop_center(p: int):
    # (x p + y) p + z -> x p + y
    return lambda ids: ids // p


class CenterQuotient(ModelBuilderPlugin):
    def build(self, A: GroupSet) -> PartialMap:
        group = self.require_heisenberg(A, max_p=MAX_P)
        p = group.p
        target = TableGroup.quotient(group, _drop_center(p), name=f"{group!r}/Z")
        logger.debug(f"Center quotient of {group!r}: table of order {target.order}")
        return PartialMap.from_function(A, target, _drop_center(p))


ModelRegistry.register(
    id="center-quotient",
    builder=CenterQuotient,
    description="Heisenberg(p) modulo its center, as a table of Z_p x Z_p",
    priority=PRIORITY["BUILTIN"],
)
