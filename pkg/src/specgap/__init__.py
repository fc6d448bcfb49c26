"""Desk-scale checks of a translation-invariant 1D spectral-gap construction."""

from .core import ChainSpec, ExactScalar, LocalTerm, SparseOperator, assemble
from .path_laplacian import EigenInterval, bracket_min_eigenvalue, charpoly_eval
from .marker import FalloffSpec, build_marker, check_block_theorem
from .qpe_sim import PhaseEncoding, encode_phase, truncation_overlap
from .tm_model import TMDefinition, get_machine, run_bounded
from .history_state import SegmentModel, chain_ground_energy, segment_energy
from .assembly import AssemblyConfig, build_total, total_spectrum_model

__version__ = "0.1.0"
