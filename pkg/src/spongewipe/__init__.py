"""Force-adaptive sponge wiping at desk scale.

Subsystems: `nn` (tiny autodiff engine), `sim` (compliant-contact sponge
simulator), `pipeline` (dataset generation and preprocessing), `models`
(property encoder, trajectory decoder, force feedback loop), `control`
(episode executors for the three controllers), `evaluate` (metrics, scenario
matrix, ablations) and `cli`.
"""

from .rng import Rng

__all__ = ["Rng"]
__version__ = "0.1.0"
