"""Confidentiality-preserving image search over Paillier and AES-GCM.

Three client/server schemes share one fixed-point feature encoding and one
cost ledger, so their client-side work can be compared operation for
operation.
"""

from . import encoding, envelope, paillier
from ._backend import name as backend_name
from .protocols import Scheme

__version__ = "0.1.0"

__all__ = ["Scheme", "backend_name", "encoding", "envelope", "paillier", "__version__"]
