"""Rank-bounded robust PCA solved with a Gauss-Newton proximal step."""

from .errors import (
    ConfigError,
    InfinitePsnr,
    InvalidMode,
    NonFiniteError,
    RankDeficientInput,
    RpcaError,
    ShapeMismatch,
    SingularGram,
    StepsizeWarning,
    ZeroTruth,
)
from .matrix import (
    MeasurementOperator,
    frobenius_norm,
    inner_product,
    moreau_envelope,
    moreau_grad,
    read_mask,
    read_matrix,
    soft_threshold,
    write_mask,
    write_matrix,
)
from .metrics import MetricReport, psnr, relative_change, relative_error_to_truth
from .prng import Prng
from .prox import (
    Factorization,
    GnSettings,
    gauss_newton_topspace,
    nuclear_norm,
    nuclear_norm_of_factor,
    prox_oracle_full_svd,
    prox_rank_nuclear,
    thin_svd,
)
from .solvers import (
    ApgState,
    SolveReport,
    SolverConfig,
    fb_step,
    objective_E,
    objective_F,
    solve_admm,
    solve_apg,
    solve_fb,
    solve_shen_baseline,
)
from .synth import (
    SyntheticSpec,
    add_gaussian,
    corrupt_image,
    corrupt_sparse,
    make_low_rank,
    make_mask,
    make_problem,
)

__version__ = "0.1.0"
