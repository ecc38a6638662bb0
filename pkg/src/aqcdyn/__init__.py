"""Open-system dynamics of stabilizer codes under energy-gap protection, decoupling and cooling."""

__version__ = "0.1.0"

from .pauli import PauliOperator, PauliParseError, parse_pauli, symplectic_product, commutes
from .codes import (
    StabilizerCode, ErrorModel, CorrectabilityTable, Syndrome, classify, get_code, registry_names,
)
from .graph import SyndromeGraph, build_graph, varpi, export_graph
from .baths import LorentzDrude, OhmicBath, ClassicalBath, TabulatedBath, markov_rate, correlation_quantum
from .suppression import leakage_rates, p0_dynamics, DDSchedule, EGPModulation, DDModulation
from .correction import CorrectionConfig, RateMatrix, build_rate_matrix, integrate
from .stability import LumpedChain, ConcatenatedCodeParams, analyse, scan, mc_hitting_oracle

__all__ = [
    "PauliOperator", "PauliParseError", "parse_pauli", "symplectic_product", "commutes",
    "StabilizerCode", "ErrorModel", "CorrectabilityTable", "Syndrome", "classify", "get_code",
    "registry_names", "SyndromeGraph", "build_graph", "varpi", "export_graph",
    "LorentzDrude", "OhmicBath", "ClassicalBath", "TabulatedBath", "markov_rate", "correlation_quantum",
    "leakage_rates", "p0_dynamics", "DDSchedule", "EGPModulation", "DDModulation",
    "CorrectionConfig", "RateMatrix", "build_rate_matrix", "integrate",
    "LumpedChain", "ConcatenatedCodeParams", "analyse", "scan", "mc_hitting_oracle",
]
