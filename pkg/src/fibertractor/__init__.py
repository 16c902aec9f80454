"""Optical forces, optical binding and tractor forces for polarizable beads
in a two-mode waveguide, from a 4-port scattering-matrix model."""

__version__ = "0.1.0"

from .chain import (
    ChainConfig,
    FieldState,
    Injection,
    fabry_perot_oracle,
    solve_chain,
    to_transfer,
    transfer_closed_form,
)
from .equilibria import (
    EquilibriumPoint,
    PairForces,
    StabilityMap,
    binding_cutoff,
    binding_distance_curve,
    find_equilibria,
    force_vs_distance,
    scan_stability_region,
)
from .exceptions import ConvergenceError, DomainError, SingularTransferError, TwoModeModelInvalid
from .force import (
    ForceResult,
    chain_forces,
    closed_form_2p,
    closed_form_4p,
    particle_force,
    tractor_threshold,
)
from .paraxial import (
    BeadSpec,
    CouplingEstimate,
    WaveguideSpec,
    accumulated_phase,
    estimate_coupling,
    guided_modes,
    reflection_coeffs,
    to_scatter_params,
    transmission_coeffs,
)
from .scatter import (
    GeneralFourPortParams,
    ModePair,
    ScatterMatrix,
    SimpleFourPortParams,
    build_four_port,
    build_general_four_port,
    build_two_port,
    check_unitarity,
    propagation_matrix,
)
