"""Central tolerance table.

Every invariant check and every test reads from here; nothing hardcodes a
tolerance inline.  Values marked "abs" compare absolute deviations, "rel"
compare deviations scaled by (1 + magnitude of the quantity).
"""

# --- symmetric-function core ------------------------------------------------
EIG_ORTHO_MAX = 1e-12          # abs, ||Q^T Q - I||_max
EIG_RECON_REL = 1e-10          # rel, ||Q D Q^T - M||_max <= tol*(1+||M||_max)
EIG_MAX_SWEEPS = 50            # cyclic Jacobi sweep budget (bug sentinel)
EIG_OFF_TOL = 1e-14            # rel, off-diagonal convergence threshold
EULER_IDENTITY_REL = 1e-10     # sum_i lam_i * sigma_partial = k * sigma_k
SIGMA1_SQ_IDENTITY = 1e-12     # rel, sigma_1^2 = |lam|^2 + 2 on sigma_2 = 1
GRAD_NORM_IDENTITY_REL = 1e-10  # rel, |Df|^2 = (n-1) sigma_1^2 - 2
SIGMA_DENOM_FLOOR = 1e-300     # abs, quotient singularity guard

# --- sigma_2 operator --------------------------------------------------------
OPERATOR_POINT_TOL = 1e-9      # abs, |sigma_2 - 1| at construction
EVAL_F_CROSS_REL = 1e-10       # rel, trace formula vs eigenvalue route
FROBENIUS_PAIR_REL = 1e-12     # rel, diagonalization oracle agreement

# --- Jacobi certificate -------------------------------------------------------
SAMPLE_SIGMA2_TOL = 1e-10      # abs, |sigma_2 - 1| for constraint samples
SEMICONVEXITY_SLACK = 1e-12    # abs, min lam >= -K - slack
SAMPLER_SIGMA1_FLOOR = 1e-6    # abs, reject sigma_1(rest) below this
SAMPLER_STARVE_WINDOW = 20000  # draws before the acceptance-rate check
SAMPLER_STARVE_RATE = 1e-3     # minimal acceptance rate over the window
TANGENCY_TOL = 1e-10           # rel, |sum f_i c_iik| <= tol*(1+|f||c|)
TANGENT_PRECONDITION = 1e-9    # rel, |<Df,t>| <= tol*|Df||t|
GRAM_IDENTITY_TOL = 1e-10      # abs, Eq-style closed forms for |E|^2 etc.
DISCRIMINANT_SLACK = 1e-10     # abs, tr^2 - 4 det >= -slack
REDUCTION_ORACLE_TOL = 1e-8    # rel, closed-form (tr, det) vs projected form
DET_BOUND_SLACK = 1e-8         # rel, lhs >= rhs - slack*(1+|lhs|)
EXCESS_FLOOR = -1e-9           # abs, certificate margin floor
SUPERHARMONIC_IDENTITY = 1e-12  # rel, two routes to Delta_F e^{-b/3}
DECOMPOSITION_IDENTITY = 1e-10  # rel, excess = (6*sum + sum_i Q_i)/(s1+J)
REGROUP_IDENTITY = 1e-12       # rel, 6*distinct + 3*paired + diag = full
PROJECTION_IDEMPOTENT = 1e-14  # rel, projecting a tangent tensor is a no-op
RANK_TOL = 1e-12               # rel, Gram-rank detection in the 2x2 oracle

# --- Legendre-Lewy transform --------------------------------------------------
TRANSFORM_RESIDUAL_TOL = 1e-9  # abs, conformal-equation residual on-manifold
TRACE_IDENTITY_TOL = 1e-10     # rel, Delta u + n*Kbar = sum 1/mu_i
QUOTIENT_IDENTITY_TOL = 1e-9   # rel, q = (A1 - A2 a^3)^{-1} on-manifold
RESIDUAL_FACTOR_TOL = 1e-10    # rel, sigma_n*(sigma_2(lam)-1) = -residual
RECIPROCAL_IDENTITY = 1e-12    # rel, a^3 * sum 1/mu_i = 1
Q_CONCAVITY_SLACK = 1e-10      # abs, midpoint concavity of q
Q_FD_REL = 1e-6                # rel, exact dq/dmu_i vs central differences
MU_RANGE_TOL = 1e-6            # abs, 0 < mu < 1 slack for grid fields

# --- finite-difference solver ---------------------------------------------------
STENCIL_QUADRATIC_EXACT = 1e-12  # abs, D^2_h of a quadratic
LINEARIZATION_FD_REL = 1e-5      # rel, assembled operator vs directional diff
NEWTON_DAMPING_FLOOR = 2.0 ** -20
BRANCH_SIGMA1_FLOOR = 2.0 ** 0.5 / 2.0   # project back if sigma_1 dips below
LINSOLVE_DIRECT_MAX_M = 129      # direct factorization up to this m
LINSOLVE_CG_RTOL = 1e-12
PIPELINE_RESIDUAL = 1e-9         # quadratic round-trip residual budget
PROPORTIONALITY_TOL = 1e-10      # rel, H-route vs sigma_n * G-route assembly
REPORT_RESIDUAL_MATCH = 1e-14    # abs, report residual vs recomputation
