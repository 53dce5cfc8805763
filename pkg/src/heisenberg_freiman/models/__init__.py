"""Built-in codomain models.

Importing this package registers every model with the ModelRegistry.
"""

from heisenberg_freiman.models import (
    center_quotient,  # noqa: F401
    identity_embedding,  # noqa: F401
    trivial,  # noqa: F401
    x_projection,  # noqa: F401
)
