"""Torsion (phi, Gamma)-modules over multivariable Laurent series rings mod p^n."""

from .scalars import ContextError, DomainError, PadicExponent, PrecCtx, PrecisionError, Scalar
from .laurent import LaurentSeries, NotAUnit, Window, compare_at, invert
from .operators import GammaElement, delta_element, gamma_apply, phi, psi, residue, sharp
from .pgmodule import (
    ModuleElement,
    NotEtale,
    PhiGammaModule,
    check_relations,
    dual_module,
    etale_check,
    mod_gamma,
    mod_phi,
    mod_psi,
    mod_torsion,
    pairing,
)
from .complexes import (
    CohomologyReport,
    Flavor,
    KoszulComplex,
    TruncationBox,
    Unstable,
    apply_differential,
    assemble,
    build,
    cohomology,
    complex_pairing,
    euler_characteristic,
)

__all__ = [
    "CohomologyReport", "ContextError", "DomainError", "Flavor", "GammaElement", "KoszulComplex",
    "LaurentSeries", "ModuleElement", "NotAUnit", "NotEtale", "PadicExponent", "PhiGammaModule",
    "PrecCtx", "PrecisionError", "Scalar", "TruncationBox", "Unstable", "Window", "apply_differential",
    "assemble", "build", "check_relations", "cohomology", "compare_at", "complex_pairing", "delta_element",
    "dual_module", "etale_check", "euler_characteristic", "gamma_apply", "invert", "mod_gamma", "mod_phi",
    "mod_psi", "mod_torsion", "pairing", "phi", "psi", "residue", "sharp",
]
