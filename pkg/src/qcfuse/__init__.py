"""Chunk-level KV cache fusion with query-centric selective recomputation.

Everything in this package runs on a seeded toy transformer and a virtual
clock, so benchmark and service behavior is reproducible bit for bit.
"""

from qcfuse.model import ModelConfig, init_weights

__all__ = ["ModelConfig", "init_weights"]
__version__ = "0.1.0"
