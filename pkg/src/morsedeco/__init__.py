"""Decoherence of Morse-oscillator wave packets coupled to a thermal bath of
oscillators, in the basis of the bound vibrational states."""

__version__ = "0.1.0"

from .bath import EnvironmentSpec, build_dissipator, calibrate_lambda  # noqa: E402
from .dynamics import TrajectoryConfig, evolve, thermal_state  # noqa: E402
from .morse import (MorseModel, StateVector, coherent_state, eigenstate,  # noqa: E402
                    harmonic_model, small_oscillation_period)

__all__ = [
    "EnvironmentSpec", "MorseModel", "StateVector", "TrajectoryConfig", "build_dissipator",
    "calibrate_lambda", "coherent_state", "eigenstate", "evolve", "harmonic_model",
    "small_oscillation_period", "thermal_state",
]
