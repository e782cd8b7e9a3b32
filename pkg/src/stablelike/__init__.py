"""
Simulation and numerical verification of variable-order stable-like jump processes.

Subpackages: ``quadops`` (quadrature for the operator and its coupling
operator, drift profiles, assumption checks) and ``simulate`` (thinning
sampler for marginal and coupled paths).  ``analyze`` turns their output
into regularity verdicts and ``cli`` drives configured experiments.
"""

__version__ = "0.1.0"

from .fields import bounded_function
from .geometry import ComponentTag, CoupledKernel, reflect, tilde_n
from .model import (IndexField, KernelField, MatrixField, OperatorSpec, ReferenceFunction,
                    bass_weight, continuity_modulus_A, make_bass_spec, make_constant_spec,
                    make_sde_spec, psi, sphere_area)

__all__ = [
    "__version__", "bounded_function", "ComponentTag", "CoupledKernel", "reflect", "tilde_n",
    "IndexField", "KernelField", "MatrixField", "OperatorSpec", "ReferenceFunction",
    "bass_weight", "continuity_modulus_A", "make_bass_spec", "make_constant_spec",
    "make_sde_spec", "psi", "sphere_area",
]
