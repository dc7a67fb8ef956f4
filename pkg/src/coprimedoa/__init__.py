"""Gridless super-resolution DOA estimation for co-prime sensor arrays.

The pipeline: simulate snapshots on a co-prime geometry, lift the sample
covariance onto the virtual difference coarray, solve the total-variation
dual semidefinite program for a certificate polynomial, read the source
directions off its unit-modulus points, refine amplitudes and noise power
with a small l1 program, and detect the source count from the amplitude
gap structure.  Classical spatial-smoothing MUSIC and on-grid basis
pursuit run on the same coarray statistic for comparison.
"""

__version__ = "0.1.0"

from .baselines import (
    SmoothedCovariance,
    dsr_estimate,
    music_spectrum,
    root_music,
    spatial_smooth,
)
from .coarray import (
    CoarrayVector,
    DoaMapping,
    VirtualMeasurement,
    doa_to_tau,
    sample_covariance,
    tau_to_doa,
    to_super_resolution,
    virtualize,
)
from .conic import (
    DualCertificate,
    L1Solution,
    SdpProblem,
    SdpSolverError,
    SocpProblem,
    solve_dual_sdp,
    solve_l1_socp,
)
from .detection import DetectionResult, csorte, sorte, sorte_eigen
from .geometry import (
    ArrayGeometry,
    LagSet,
    build_coprime,
    difference_set,
    steering_matrix,
)
from .simulate import (
    SnapshotMatrix,
    SourceScene,
    exact_covariance,
    generate_snapshots,
)
from .statcheck import (
    TailCheckReport,
    emn_tail_check,
    fejer_kernel,
    smoothed_l1_error,
    spike_train_l1,
    tail_check_xx,
    tail_check_xy,
)
from .superres import (
    DegenerateCertificateError,
    RefinementInfeasibleError,
    SpectrumEstimate,
    Spike,
    atom_matrix,
    csr_estimate,
    dual_polynomial,
    find_support,
    refine,
)

__all__ = [name for name in dir() if not name.startswith("_")]
