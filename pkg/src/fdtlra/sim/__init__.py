"""Planar aerial-manipulator plant, disturbances, integration and residual logging."""
from .dataset import ResidualLog, ResidualSample, load_plant_yaml, read_csv, save_plant_yaml, write_csv
from .disturbance import NoiseState, PayloadSchedule, advance_noise, disturbance
from .integrate import (GeneralizedState, advance, forward_dynamics, measure_velocity, step,
                        step_reference, total_energy)
from .plant import (PlantModel, coriolis_matrix, end_effector, end_effector_jacobian, gravity_vector,
                    kinetic_energy, mass_matrix, mass_matrix_derivatives, potential_energy)
from .residual import compute_residual, mbar_diagonal, residual_terms
from .trajectory import ReferenceTrajectory, mean_path_speed, reference_trajectory

__all__ = [
    "GeneralizedState", "NoiseState", "PayloadSchedule", "PlantModel", "ReferenceTrajectory",
    "ResidualLog", "ResidualSample", "advance", "advance_noise", "compute_residual", "coriolis_matrix",
    "disturbance", "end_effector", "end_effector_jacobian", "forward_dynamics", "gravity_vector",
    "kinetic_energy", "load_plant_yaml", "mass_matrix", "mass_matrix_derivatives", "mbar_diagonal",
    "mean_path_speed", "measure_velocity", "potential_energy", "read_csv", "reference_trajectory",
    "residual_terms", "save_plant_yaml", "step", "step_reference", "total_energy", "write_csv",
]
