# ==========================================
# REGIME MOMENTUM - DEFAULT CONFIGURATION
# ==========================================
# Defaults for every parameter block. A run config (JSON) only needs to
# list the values it changes; see configs/demo.json.

CONFIG_SCHEMA_VERSION = 1       # Expected "schema_version" in run configs

# ------------------------------------------
# RUN
# ------------------------------------------
DEFAULT_SEED = 20240601         # Root seed; every stage draws a named substream
DEFAULT_OUTPUT_DIR = "results"  # Artifact directory
DEFAULT_WORKERS = 1             # Thread pool size for independent cells/blocks
SIM_BLOCK_SIZE = 2000           # Paths per random block (block = substream)

# ------------------------------------------
# DATA
# ------------------------------------------
MISSING_POLICY = "drop-row"     # "drop-row" or "forward-fill"
DATE_COLUMN = None              # None = first column
MIN_STATS_LENGTH = 4            # Shortest series with a defined kurtosis

# ------------------------------------------
# PCA
# ------------------------------------------
PCA_COMPONENTS = 30             # Retained components (capped at N assets)
PCA_CORRELATION = False         # True = correlation-matrix PCA
PCA_UNIVERSE = "factors"        # Rank "factors" (score portfolios) or "assets"

# ------------------------------------------
# MOMENTUM BACKTEST
# ------------------------------------------
DAYS_PER_WEEK = 5               # "Two weeks" = 10 trading days
SCHEMES_WEEKS = [(2, 2), (3, 2), (4, 2), (2, 3), (2, 4)]  # (formation, holding) in weeks
QUANTILE = 0.25                 # Top/bottom fraction per leg
TURNOVER_CAP = 0.04             # Max sum of |weight changes| per rebalance
COST_BPS = 0.0                  # Cost per unit turnover (basis points)
ROLLING_WINDOW = 252            # One trading year
RATIO_SUITE = [
    "Cumulative Return", "Sharpe",
    "STARR(0.5)", "STARR(0.75)", "STARR(0.9)", "STARR(0.95)", "STARR(0.99)",
    "Rachev(0.99,0.99)", "Rachev(0.95,0.95)", "Rachev(0.91,0.91)",
    "CVaR(0.95)", "CVaR(0.99)",
]
ROLLING_SUITE = ["Sharpe", "STARR(0.99)", "Rachev(0.99,0.99)", "CVaR(0.99)"]
FORWARD_SCENARIOS = 1000        # Scenarios per date for forward-looking ratios
FORWARD_STRIDE = 5              # Evaluate forward-looking ratios every k dates

# ------------------------------------------
# RISK METRICS
# ------------------------------------------
AXIOM_TRIALS = 1000             # Randomized paired samples per axiom
AXIOM_SAMPLE_SIZE = 250         # Observations per sample
AXIOM_SLACK = 1e-10             # Relative tolerance before a violation counts

# ------------------------------------------
# VOLATILITY MODELS
# ------------------------------------------
FIGARCH_TRUNCATION = 1000       # ARCH(∞) truncation lag
INIT_VARIANCE_WINDOW = 50       # Sample variance window when non-stationary
QMLE_MAX_ITER = 4000            # Nelder-Mead iterations per restart
QMLE_MAX_RESTARTS = 5           # Restarts until improvement < QMLE_RESTART_TOL
QMLE_RESTART_TOL = 1e-8
NIG_REFERENCE_DRAWS = 200_000   # Draws used to tabulate NIG quantiles for the copula
MIN_SCENARIOS = 100

# ------------------------------------------
# REGIMES
# ------------------------------------------
REGIME_SOURCE = "bundled"       # "bundled" (fixture matrices), "labels" or "hmm"
TRANSITION_SMOOTHING = False    # Add-one smoothing when counting transitions
HMM_MAX_ITER = 500
HMM_TOL = 1e-8
HMM_VARIANCE_FLOOR = 1e-10
FIGARCH_FIT = True              # Per-leg ARFIMA-FIGARCH QMLE written next to the bundled table
FIGARCH_MIN_OBS = 500           # Shortest series the QMLE accepts

# ------------------------------------------
# DYNAMIC PROGRAM
# ------------------------------------------
CRRA_GAMMA = -5.0               # U(W) = W^γ/γ
RISK_FREE = 0.0                 # Per-period risk-free rate
HORIZON = 504                   # Two years of daily periods
GRID_NODES = 200                # Log-spaced variance nodes
GRID_SPAN = 50.0                # Grid covers [h̄/span, span·h̄]
PI_SEARCH = 101                 # Coarse π grid before golden-section refinement
GOLDEN_TOL = 1e-5               # Golden-section bracket width
QUAD_NODES = 41                 # Gauss-Hermite nodes for E_z[·]
EXTRAPOLATION_WARN = 1e-3       # Warn when this share of h' mass is off-grid
LEVERAGE = 0.0                  # ℓ in the GJR state recursion
DP_LEGS = ["winners", "losers", "momentum"]

# ------------------------------------------
# WEALTH SIMULATION
# ------------------------------------------
SIM_PATHS = 10_000
INITIAL_WEALTH = 1.0
CONSTANT_ARMS = [0.0, 0.25, 0.5, 0.75, 1.0]

# ------------------------------------------
# FRONTIER
# ------------------------------------------
SCENARIOS = 10_000              # One-step-ahead scenarios
FRONTIER_POINTS = 50
CVAR_LEVELS = [0.95, 0.99]
FRONTIER_MAX_ASSETS = 30        # Columns fed to the frontier stage
RIDGE = 1e-10                   # Added to a singular covariance (flagged)
PG_MAX_ITER = 20_000            # Projected-gradient iterations per subproblem
PG_TOL = 1e-10                  # Stop when no weight moves more than this

# ------------------------------------------
# SYNTHETIC DATA
# ------------------------------------------
SYNTHETIC_ASSETS = 12
SYNTHETIC_HORIZON = 1000
SYNTHETIC_FACTOR_SHARE = 0.5    # Share of shock variance from the common factor
SYNTHETIC_START = "2017-01-02"
SYNTHETIC_LEG = "momentum"      # Parameter column used for the simulated world
