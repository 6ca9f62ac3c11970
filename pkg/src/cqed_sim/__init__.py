"""Cavity-QED simulation of spin-selective emitters sharing one optical cavity mode."""

__version__ = "0.1.0"

from .model import (CavityParams, ConfigError, EmitterParams, NumericalError, SystemConfig,
                    ZeemanModel, cooperativity, purcell_linewidth, transition_frequencies, validate)
from .spectrum import (TransmissionSpectrum, extinction, steady_state_oracle,
                       transmission_amplitude, transmission_poles, transmission_spectrum)
from .dispersive import (CollectiveModes, collective_modes, effective_matrix, exchange_rate,
                         field_sweep)
from .readout import (ReadoutParams, ReadoutResult, count_histograms, optimal_threshold,
                      semi_analytic_fidelity, simulate_readout, simulate_trial)
from .fit import FitProblem, FitResult, fit, model_T, residual
from .config_io import load_config
