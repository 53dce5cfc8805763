"""Projection [x, y, z] -> x into Z_p."""

from heisenberg_freiman.freiman import PartialMap
from heisenberg_freiman.groups import TableGroup
from heisenberg_freiman.model_builder import ModelBuilderPlugin
from heisenberg_freiman.model_registry import PRIORITY, ModelRegistry
from heisenberg_freiman.sets import GroupSet


class XProjection(ModelBuilderPlugin):
    def build(self, A: GroupSet) -> PartialMap:
        p = self.require_heisenberg(A).p
        return PartialMap.from_function(A, TableGroup.cyclic(p), lambda ids: ids // (p * p))


ModelRegistry.register(
    id="x-projection",
    builder=XProjection,
    description="First coordinate, into the cyclic group Z_p",
    priority=PRIORITY["BUILTIN"],
)
