"""Model Registry - Plugin System for Codomain Models

Built-in models and user plugins register through the same API and are looked
up by id from the harness config (`model: identity`) or the `audit` command.

Usage:
    from heisenberg_freiman.model_registry import ModelRegistry, PRIORITY

    ModelRegistry.register(
        id="identity",
        builder=IdentityEmbedding,
        description="A embedded in Heisenberg(p)",
        priority=PRIORITY["BUILTIN"],
    )
    pi = ModelRegistry.build("identity", A)
"""

import logging
from typing import ClassVar

from heisenberg_freiman.freiman import PartialMap
from heisenberg_freiman.sets import GroupSet

logger = logging.getLogger(__name__)

# Priority levels (higher priority = listed first)
PRIORITY = {
    "BUILTIN": 100,
    "OFFICIAL": 50,
    "COMMUNITY": 10,
}


class ModelRegistry:
    """Registry for codomain model builders."""

    _models: ClassVar[dict[str, dict]] = {}

    @classmethod
    def register(
        cls,
        id: str,
        builder: type | None = None,
        description: str = "",
        priority: int = PRIORITY["COMMUNITY"],
    ) -> None:
        """Register a model builder.

        Args:
            id: Unique model identifier
            builder: Builder class (must extend ModelBuilderPlugin)
            description: One-line description for listings
            priority: Priority level (higher = listed first)

        Raises:
            ValueError: If config is invalid
        """
        from heisenberg_freiman.model_builder import ModelBuilderPlugin

        if not id:
            raise ValueError("ModelRegistry.register: id is required")
        if not builder:
            raise ValueError(f'ModelRegistry.register: builder is required for "{id}"')
        if not isinstance(builder, type) or not issubclass(builder, ModelBuilderPlugin):
            raise ValueError(
                f'ModelRegistry.register: builder must be a ModelBuilderPlugin subclass for "{id}"'
            )

        if id in cls._models:
            logger.warning(f'ModelRegistry: Overwriting existing model "{id}"')

        cls._models[id] = {
            "id": id,
            "builder": builder,
            "description": description,
            "priority": priority,
        }
        logger.debug(f"[ModelRegistry] Registered model: {id}")

    @classmethod
    def get_all_models(cls) -> list[dict]:
        """All registered models, highest priority first."""
        return sorted(cls._models.values(), key=lambda m: (-m["priority"], m["id"]))

    @classmethod
    def get_model_by_id(cls, model_id: str) -> dict | None:
        return cls._models.get(model_id)

    @classmethod
    def build(cls, model_id: str, A: GroupSet) -> PartialMap:
        """Build the map of a registered model on A.

        Raises:
            KeyError: If no model has this id
        """
        # Built-in models register on import
        import heisenberg_freiman.models  # noqa: F401

        config = cls._models.get(model_id)
        if config is None:
            known = ", ".join(sorted(cls._models))
            raise KeyError(f"Unknown model '{model_id}' (known: {known})")
        pi = config["builder"]().build(A)
        logger.info(f"Built model '{model_id}': |A|={A.size} into {pi.codomain!r}")
        return pi
