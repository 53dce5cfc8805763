"""Identity embedding: A into Heisenberg(p) itself.

The canonical concrete model; every structural consequence the audit looks
for is visible in it, with <A> of order p^3 as soon as A is not abelian.
"""

from heisenberg_freiman.freiman import PartialMap
from heisenberg_freiman.model_builder import ModelBuilderPlugin
from heisenberg_freiman.model_registry import PRIORITY, ModelRegistry
from heisenberg_freiman.sets import GroupSet


class IdentityEmbedding(ModelBuilderPlugin):
    def build(self, A: GroupSet) -> PartialMap:
        self.require_heisenberg(A)
        return PartialMap.identity(A)


ModelRegistry.register(
    id="identity",
    builder=IdentityEmbedding,
    description="A embedded in its own Heisenberg group",
    priority=PRIORITY["BUILTIN"],
)
