"""
Library constants and enums
"""

from enum import Enum, IntEnum


class Mechanism(str, Enum):
    """Link function of the synthetic generator"""
    LINEAR = "linear"
    LEAKY_RELU = "leaky-relu"


class InterventionKind(str, Enum):
    """Intervention family applied to intervened environments"""
    IMPERFECT_EDGE = "imperfect-edge"
    PERFECT_EDGE = "perfect-edge"
    IMPERFECT_NODE = "imperfect-node"
    PERFECT_NODE = "perfect-node"

    @property
    def is_perfect(self) -> bool:
        return self in (InterventionKind.PERFECT_EDGE, InterventionKind.PERFECT_NODE)

    @property
    def is_node_level(self) -> bool:
        return self in (InterventionKind.IMPERFECT_NODE, InterventionKind.PERFECT_NODE)


class FitMode(str, Enum):
    """Solver family"""
    LINEAR = "linear"
    NONLINEAR = "nonlinear"


class Method(str, Enum):
    """Benchmark method names"""
    INVARGC_LINEAR = "invargc-linear"
    INVARGC_NONLINEAR = "invargc-nonlinear"
    VAR_LASSO = "var-lasso"


class ZInit(str, Enum):
    """Latent trajectory initialization"""
    RESIDUAL_PCA = "residual-pca"
    RANDOM = "random"


class ThresholdKind(str, Enum):
    """Binarization rule"""
    ABSOLUTE = "absolute"
    RELATIVE = "relative"


class CellStatus(str, Enum):
    """Benchmark cell outcome"""
    OK = "ok"
    FAILED = "failed"


class ExitCode(IntEnum):
    """Process exit codes"""
    OK = 0
    SELF_TEST_FAILED = 1
    VALIDATION = 2
    IO = 3
    DIVERGENCE = 4
    BENCHMARK_FAILED = 5


# Generator constants
SPECTRAL_RADIUS_TARGET = 0.9
MIN_INTERVENTION_SHIFT = 0.25
LATENT_DYNAMICS_RANGE = (0.5, 0.9)
LATENT_CHILDREN = 2
INTERVENTION_ATTEMPTS = 200
Z_INIT_JITTER = 0.01

# Dataset file names
MANIFEST_FILE = "manifest.json"
GRAPH_FILE = "graph.json"
ENV_FILE_TEMPLATE = "env_{k}.csv"
CSV_FLOAT_FORMAT = "%.17g"

# Error Messages
ERROR_MESSAGES = {
    "ALPHA_RANGE": "alpha must lie strictly inside (0, 1)",
    "TOO_FEW_CHILDREN": "at least 2 observed variables are required to attach a latent confounder",
    "TOO_FEW_EDGES": "n_intervened_edges exceeds the number of edges available for intervention",
    "NON_FINITE_SERIES": "non-finite value encountered during simulation",
    "NO_NODE_TARGET": "no observed variable has a parent, node-level intervention impossible",
}
