"""Cavity reflection phase gates mediated by a Rydberg-dressed atomic ensemble."""

from .model import (AngularModel, CloudGeometry, EnsembleRealization, PhysicsParams,
                    cavity_coupling, dipolar_coupling, homogeneous_realization,
                    physics_preset, sample_ensemble)
from .reflection import (FrequencyGrid, ReflectionSpectrum, blockade_radius, eit_linewidth,
                         f_B, f_E, reflection_approx, reflection_full)
from .fidelity import (PhotonSpectrum, fidelity_atom_atom, fidelity_atom_photon,
                       overlap_T, overlap_T2)
from .dynamics import GaussianPulse, PulseRecord, integrate_dynamics, transfer_function

__version__ = "0.1.0"
