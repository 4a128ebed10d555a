"""Network utility maximization over user-cluster activity fractions."""
from .association import (
    assignment,
    fractional_user_count,
    supported_clusters,
    unique_association,
    user_constraint_slack,
)
from .kkt import KktReport, kkt_residuals
from .oracle import OracleResult, lattice_oracle
from .problems import (
    CELLULAR,
    MACRO_BAND,
    MCS,
    SPLIT,
    UCS,
    Allocation,
    OrphanUserError,
    build_ucs,
    num_constraint_violation,
    partition_order,
    partition_size,
    solve_cellular,
    solve_mcs,
    solve_orthogonal_split,
    solve_ucs,
)
