"""Constant map onto the identity of Heisenberg(p)."""

import numpy as np

from heisenberg_freiman.freiman import PartialMap
from heisenberg_freiman.model_builder import ModelBuilderPlugin
from heisenberg_freiman.model_registry import PRIORITY, ModelRegistry
from heisenberg_freiman.sets import GroupSet


class TrivialModel(ModelBuilderPlugin):
    def build(self, A: GroupSet) -> PartialMap:
        group = self.require_heisenberg(A)
        return PartialMap.from_function(
            A, group, lambda ids: np.full(ids.shape, group.identity_id, dtype=np.int64)
        )


ModelRegistry.register(
    id="trivial",
    builder=TrivialModel,
    description="Every element to the identity",
    priority=PRIORITY["BUILTIN"],
)
