"""HTTP service wrapping the core package.

`handlers` holds the command implementations shared with the CLI;
`app` exposes them as FastAPI endpoints with pydantic schemas.
"""

from .handlers import (
    handle_evaluate,
    handle_gen_data,
    handle_health,
    handle_metric,
    handle_sweep,
    handle_train,
)

__all__ = [
    "handle_evaluate",
    "handle_gen_data",
    "handle_health",
    "handle_metric",
    "handle_sweep",
    "handle_train",
]
