"""kpzlab: seeded simulation laboratory for discrete KPZ-class growth models.

Coupled exclusion ensembles with label-quotient couplings, a directed lattice
metric with its variational formula, multi-type label dynamics, random-walk
web distances, a stationary-horizon calculus, and a statistical audit harness
tying them together.  Every random object is derived deterministically from a
master seed, so simulation outputs are byte-for-byte reproducible.
"""

__version__ = "0.1.0"

from .lattice import (
    GridFunction,
    HeightFunction,
    NarrowWedgeCombo,
    ParticleConfig,
    diamond,
    height_from_particles,
    narrow_wedge,
    particles_from_height,
    rescale_height,
    srw_envelope,
)

__all__ = [
    "GridFunction",
    "HeightFunction",
    "NarrowWedgeCombo",
    "ParticleConfig",
    "diamond",
    "height_from_particles",
    "narrow_wedge",
    "particles_from_height",
    "rescale_height",
    "srw_envelope",
]
