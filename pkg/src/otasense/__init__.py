"""Dual-functional MIMO beamforming simulator: radar sensing plus
over-the-air computation, with a conic design pipeline and Monte Carlo
experiment harness."""

from .model import (SystemConfig, ChannelSet, SymbolBlock, validate_config,
                    draw_channels, draw_symbols, transmit, receive_at_sensor,
                    receive_at_ap, dbm_to_watts, load_scenario, save_scenario,
                    substream)
from .sensing import (SufficientStatistic, TrmEstimate, matched_filter, mle_trm,
                      sensing_mse_closed, sensing_feasible, empirical_sensing_mse)
from .conic import (ConicBlock, ConicProblem, ConicSolution, LinearConstraint,
                    solve_conic, export_conic, embed_hermitian, unembed_hermitian)
from .beamform import (BeamformerSet, DesignResult, zero_forcing, alpha_star,
                       radar_beamformer, build_sdp_shared, build_sdp_separated,
                       gaussian_randomization, antenna_selection_baseline, design,
                       default_eta)
from .aircomp import AirCompReport, aircomp_mse_closed, aircomp_mse_empirical
from .localization import (Geometry, phase_delay_matrix, synth_trm, beta_hat,
                           theta_hat, local_position, modulate, demodulate,
                           aoa_baseline, run_localization)
from . import errors, harness

__version__ = "0.1.0"
