"""Desk-scale SDP duality-gap toolkit.

Solves regularized primal-dual pairs, certifies facial reduction chains
with singularity-degree bounds, and numerically traces the limiting
value function that connects the primal and dual optimal values across
a nonzero duality gap.
"""

__version__ = "0.1.0"

from .linalg import (
    BlockSplit,
    SymMatrix,
    congruence,
    identity,
    is_psd,
    max_eig,
    min_eig,
    schur_complement,
    smat,
    svec,
)
from .model import (
    DualizedInstance,
    PerturbedPair,
    SdpInstance,
    dualize,
    make_instance,
    objective_and_residuals,
    perturb,
)
from .sdpa import read_sdpa, write_sdpa
from .solver import SolveOptions, SolveResult, Status, solve, solve_pair
from .facial import (
    FaceChain,
    PerturbationS,
    ReducedInstance,
    decompose_perturbation,
    facial_reduction,
    find_reducing_direction,
    reduce_to_rd,
    singularity_degree,
    w_of_S,
)
from .tracer import (
    GapProfile,
    TSchedule,
    bar_v,
    default_theta_grid,
    extrapolate,
    structure_report,
    tilde_v,
    trace_theta,
    value_at,
)
from .harness import (
    BoundConstants,
    build_rd1,
    build_rd2,
    estimate_constants,
    verify_l12_bound,
    verify_m_bound,
    verify_sandwich,
)
from .gallery import (
    CexParams,
    GalleryEntry,
    cex_feasible_point,
    get_entry,
    ramana_gap,
    ramana_limit_value,
    sd2_gap,
    strongly_feasible_control,
)
