"""Steady-state dynamical mean-field theory of the driven-dissipative
Bose-Hubbard model, with a Lindblad exact-diagonalization impurity solver."""

__version__ = "0.1.0"

from .bath import BathParams, FitReport, chi_distance, eval_hybridization, fit_bath
from .dmft import (
    DmftConfig,
    DmftSolution,
    bethe_update,
    default_grid,
    dmft_loop,
    impurity_self_energy,
    initial_bath,
    make_grid,
    weiss_field,
)
from .fock import CompositeBasis, SiteSpec, build_composite_basis, site_annihilator
from .lindblad import AimModel, BathSite, vectorize_lindbladian
from .spectral import (
    Eigensystem,
    ImpuritySolution,
    KeldyshGF,
    Observables,
    SteadyState,
    eigendecompose,
    impurity_greens,
    local_observables,
    solve_impurity,
    spectral_functions,
    steady_state,
    steady_state_kernel,
)
from .zeno import EffectiveRates, SweepResult, build_zeno_dimer, effective_rates, sweep_zeno

__all__ = [
    "__version__",
    "AimModel",
    "BathParams",
    "BathSite",
    "CompositeBasis",
    "DmftConfig",
    "DmftSolution",
    "EffectiveRates",
    "Eigensystem",
    "FitReport",
    "ImpuritySolution",
    "KeldyshGF",
    "Observables",
    "SiteSpec",
    "SteadyState",
    "SweepResult",
    "bethe_update",
    "build_composite_basis",
    "build_zeno_dimer",
    "chi_distance",
    "default_grid",
    "dmft_loop",
    "effective_rates",
    "eigendecompose",
    "eval_hybridization",
    "fit_bath",
    "impurity_greens",
    "impurity_self_energy",
    "initial_bath",
    "local_observables",
    "make_grid",
    "site_annihilator",
    "solve_impurity",
    "spectral_functions",
    "steady_state",
    "steady_state_kernel",
    "sweep_zeno",
    "vectorize_lindbladian",
    "weiss_field",
]
