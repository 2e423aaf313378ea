"""Configuration, sweeps, optimization over Omega and result export."""

from .config import PRESETS, load, resolve
from .sweep import (Optimum, ScalingFit, SweepPoint, SweepResult, SweepSpec, atom_budget,
                    fit_scaling, golden_section, minimize_on_grid, minimize_over_omega, run_sweep)
from .records import load_run_record, rerun, spectrum_csv_text, write_sweep
