import math

# Probabilities at or below this are exact zeros.
ZERO_PROB = 1e-15
PMF_SUM_TOLERANCE = 1e-12
MI_CLAMP_TOLERANCE = 1e-12

LOG2_E = 1.0 / math.log(2.0)
# Caps D(W_x || q) when q vanishes on the support of W_x.
DIVERGENCE_CAP = 60.0
TIE_TOLERANCE = 1e-9

# Branch labels of min{I(X;Y) + R0, I(X;Y,Y1)}.
BRANCH_LINK = "link"
BRANCH_BROADCAST = "broadcast"
BRANCH_TIE = "tie"
BRANCH_REPORT_TOLERANCE = 1e-6

STALL_PATIENCE = 200
# Exact penalty on I(Y1;Yhat1|Y) - R0 in the input step of the compress-and-forward search.
PENALTY_WEIGHT = 1.0
# Link constraint counts as active within this distance of R0.
ACTIVE_LINK_TOLERANCE = 1e-6
FEASIBILITY_SLACK = 1e-12

MAX_CODEBOOK_WORDS = 2**24
MAX_SIM_BLOCK_LENGTH = 20
MAX_SIM_WORDS = 2**20
MAX_SIM_TRIALS = 10**6
MAX_BIN_BITS = 62
DEFAULT_EPS = 0.25

# Master seeds used by the published Monte Carlo runs.
MASTER_SEEDS = (20240611, 7919, 104729)

SCHEMA_CAPACITY = "relaycap.capacity/1"
SCHEMA_GAUSSIAN_CAPACITY = "relaycap.gaussian-capacity/1"
SCHEMA_GAUSSIAN_PARAMETRIC = "relaycap.gaussian-parametric/1"
SCHEMA_SIM_REPORT = "relaycap.sim-report/1"
SCHEMA_RATE_POINT = "relaycap.rate-point/1"
SCHEMA_VALIDATE = "relaycap.validate/1"
SCHEMA_MANIFEST = "relaycap.manifest/1"
# Channel files stay plain input JSON; their schema travels in the manifest.
SCHEMA_CHANNEL = "relaycap.channel/1"
SCHEMA_STATE_CHANNEL = "relaycap.state-channel/1"

FLOAT_FORMAT = ".12g"
PROB_FORMAT = ".17g"

OPEN_PROBLEM_MESSAGE = (
    "rho=0 (independent noises) is an open problem: its capacity C(R0) is unknown, "
    "only rho in {-1, +1} is supported"
)

TOOL_VERSION = "0.1.0"

CAPACITY_CSV_HEADER = (
    "schema",
    "r0",
    "capacity",
    "active_branch",
    "link_term",
    "broadcast_term",
    "converged",
    "status",
)
GAUSSIAN_CAPACITY_CSV_HEADER = ("schema", "r0", "capacity", "cf_rate")
GAUSSIAN_PARAMETRIC_CSV_HEADER = ("schema", "sigma2", "r0", "rstar", "rstar_minus_r0")
