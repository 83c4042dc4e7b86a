"""
DroneCAST Utilities
"""
from utils.logger import get_logger, log_execution
from utils.rng import StreamPool, derive_key, stream

__all__ = [
    "get_logger",
    "log_execution",
    "StreamPool",
    "derive_key",
    "stream",
]


# Lazy import; telemetry pulls in the logger at module load
def get_tracer():
    from utils.telemetry import get_tracer as _get_tracer
    return _get_tracer()
