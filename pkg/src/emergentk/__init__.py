"""Evolution generators along a Hamiltonian parameter, their gauges and singularities."""

from .epgauge import EPVicinityGauge, build_stilde, build_wtilde, continuous_k_near_ep, rescale_columns, wep_check
from .kgen import (
    HamiltonianFamily,
    LinearK,
    TimeK,
    brute_force_k,
    eigenbasis_m,
    gauge_residual,
    pde_residual,
    regular_dp_k,
    residual_gauge_basis,
    solve_adiabatic,
)
from .linalg import PointClass, Spectrum, classify_point, commutator, eigendecompose, jordanize_single_block
from .scan import ScanConfig, ScanRecord, fit_divergence, scan, verify
from .transport import (
    EigenPair,
    MetricState,
    eigenstate_fidelity,
    evolve_metric_q,
    susceptibility_from_k,
    susceptibility_oracle,
    transport_state_q,
)

__version__ = "0.1.0"
