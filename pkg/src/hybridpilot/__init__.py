"""Hybrid TM/TS pilot design for multi-cell massive MIMO uplink.

Desk-scale link simulation (LS estimation, MF detection, genie SINR
ledger), closed-form rate approximations and the design-triple optimiser.
"""

from .designer import (DesignConstants, OptimizerResult, classify_alpha, classify_tau, lambda_opt,
                       optimize_alpha, optimize_tau, solve_p1, tm_only_design, ts_only_design)
from .estimator import ChannelEstimate, contaminated_ls_estimate, ls_estimate, mse_empirical, mse_theoretical
from .pilots import FrameDesign, PilotBook, TransmitFrame, assemble_frame, build_pilot_book, received_matrix
from .rates import RateInputs, RateReport, UserRate, asymptotic_rate, empirical_rate, rate_approx, sinr_approx
from .receiver import (DetectionOutput, SinrEstimate, correlation_zeta, data_aided_iterate, empirical_sinr,
                       hard_decide, mf_detect)
from .scenario import (ChannelRealization, NetworkScenario, large_scale_fading, make_scenario, place_users,
                       sample_channel)

__version__ = "0.1.0"

__all__ = [
    "ChannelEstimate", "ChannelRealization", "DesignConstants", "DetectionOutput", "FrameDesign",
    "NetworkScenario", "OptimizerResult", "PilotBook", "RateInputs", "RateReport", "SinrEstimate",
    "TransmitFrame", "UserRate", "assemble_frame", "asymptotic_rate", "build_pilot_book", "classify_alpha",
    "classify_tau", "contaminated_ls_estimate", "correlation_zeta", "data_aided_iterate", "empirical_rate",
    "empirical_sinr", "hard_decide", "lambda_opt", "large_scale_fading", "ls_estimate", "make_scenario",
    "mf_detect", "mse_empirical", "mse_theoretical", "optimize_alpha", "optimize_tau", "place_users",
    "rate_approx", "received_matrix", "sample_channel", "sinr_approx", "solve_p1", "tm_only_design",
    "ts_only_design",
]
