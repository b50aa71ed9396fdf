"""clonebench: simulated PUFs, fuzzy extraction, secret unknown ciphers, acoustic
structural identities, the enrollment/identification protocol, and the cloning
attacks that separate clonable designs from clone-resistant ones."""

from .bitstring import BitString
from .environment import NOMINAL, EnvironmentConditions
from .rng import fresh_seed, substream

__version__ = "0.1.0"

__all__ = [
    "BitString",
    "EnvironmentConditions",
    "NOMINAL",
    "substream",
    "fresh_seed",
    "__version__",
]
