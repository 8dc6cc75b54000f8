"""Sliding-mode reaching-law synthesis on polytopic plants."""

from ._core import (
    Error,
    InvalidInput,
    InvalidParameter,
    NumericalFailure,
    PolytopicSystem,
    SimConfig,
    SimulationDiverged,
    SynthesisInfeasible,
    UvcDesign,
    VscDesign,
    certify_gain_uvc,
    certify_gain_vsc,
    empirical_vs_bound,
    in_omega_uvc,
    in_omega_vsc,
    reaching_bound_uvc,
    reaching_bound_vsc,
    rov_polytope,
    simulate,
    synth_uvc,
    synth_vsc,
    verify_uvc,
    verify_vsc,
    visual_servo_polytope,
)

__all__ = [name for name in dir() if not name.startswith("_")]
