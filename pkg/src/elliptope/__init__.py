"""Rank-constrained ascent for max <A, X> over the elliptope, with optimality certificates."""

from .certify import Certificate, certify, dual_certificate, multipliers, theorem_gap_report
from .instances import fixtures, gen_goe, gen_maxcut, gen_sbm, gen_z2sync
from .manifold import objective, random_point, riemannian_grad
from .refsdp import ReferenceValue, brute_force_sdp, sdp_reference
from .solver import SolverConfig, SolveReport, coordinate_ascent, multi_restart, riemannian_ascent
from .symmat import SymMatrix, min_eig, op_norm, read_matrix_market, write_matrix_market

__version__ = "0.1.0"

__all__ = [
    "Certificate", "certify", "dual_certificate", "multipliers", "theorem_gap_report",
    "fixtures", "gen_goe", "gen_maxcut", "gen_sbm", "gen_z2sync",
    "objective", "random_point", "riemannian_grad",
    "ReferenceValue", "brute_force_sdp", "sdp_reference",
    "SolverConfig", "SolveReport", "coordinate_ascent", "multi_restart", "riemannian_ascent",
    "SymMatrix", "min_eig", "op_norm", "read_matrix_market", "write_matrix_market",
]
