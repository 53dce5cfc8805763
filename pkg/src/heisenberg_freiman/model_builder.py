"""Model Builder Plugin Base Class

Base class for codomain models: maps from a subset A of Heisenberg(p) into
some finite group G, audited as candidate Freiman models of A.

Example:
    class SignModel(ModelBuilderPlugin):
        def build(self, A: GroupSet) -> PartialMap:
            target = TableGroup.cyclic(2)
            return PartialMap.from_function(A, target, lambda ids: ids % 2)

    ModelRegistry.register(
        id="sign",
        builder=SignModel,
        description="Parity of the packed id",
        priority=PRIORITY["COMMUNITY"],
    )
"""

import logging
from abc import ABC, abstractmethod

from heisenberg_freiman.freiman import PartialMap
from heisenberg_freiman.groups import Heisenberg
from heisenberg_freiman.sets import GroupSet

logger = logging.getLogger(__name__)


class ModelBuilderPlugin(ABC):
    """Base class for codomain model plugins."""

    @abstractmethod
    def build(self, A: GroupSet) -> PartialMap:
        """Map A into the model's codomain group.

        Args:
            A: Subset of a Heisenberg group

        Returns:
            The map, defined on all of A

        Raises:
            ValueError: If the model cannot be built for this A
        """
        raise NotImplementedError("ModelBuilderPlugin.build() must be implemented by subclass")

    def require_heisenberg(self, A: GroupSet, max_p: int | None = None) -> Heisenberg:
        """Check that A lives in Heisenberg(p), optionally with p <= max_p.

        Raises:
            ValueError: If it does not
        """
        group = A.group
        if not isinstance(group, Heisenberg):
            raise ValueError(f"{type(self).__name__} needs a subset of a Heisenberg group")
        if max_p is not None and group.p > max_p:
            raise ValueError(f"{type(self).__name__} supports p <= {max_p}, got p={group.p}")
        return group
