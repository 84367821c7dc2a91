"""Free probability and random-matrix tools for partially transposed block matrices."""

from . import certify, freecalc, ncpart, randmat
from .errors import DomainError, FreePTError, ResourceError

__version__ = "0.1.0"

__all__ = ["certify", "freecalc", "ncpart", "randmat", "DomainError", "FreePTError", "ResourceError"]
