import time
from typing import Annotated, Any, Literal

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    field_validator,
)

from .constants import PMF_SUM_TOLERANCE, ZERO_PROB


def _as_float_array(value: Any):
    array = np.array(value, dtype=float)
    array.flags.writeable = False
    return array


def _as_int_array(value: Any):
    array = np.array(value, dtype=np.int64)
    array.flags.writeable = False
    return array


FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_as_float_array),
    PlainSerializer(lambda a: a.tolist(), return_type=list, when_used="json"),
]
IntArray = Annotated[
    np.ndarray,
    BeforeValidator(_as_int_array),
    PlainSerializer(lambda a: a.tolist(), return_type=list, when_used="json"),
]


def _check_probabilities(
    probs: np.ndarray,
    what: str,
):
    if probs.size == 0:
        raise ValueError(f"{what} must have at least one entry")
    if not np.all(np.isfinite(probs)):
        raise ValueError(f"{what} has non-finite entries")
    if np.any(probs < -ZERO_PROB):
        raise ValueError(f"{what} has negative entries")


class Pmf(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    probs: FloatArray

    @field_validator("probs")
    @classmethod
    def _valid(
        cls,
        probs: np.ndarray,
    ):
        if probs.ndim != 1:
            raise ValueError("a pmf is a vector")
        _check_probabilities(probs, "pmf")
        if abs(probs.sum() - 1.0) > PMF_SUM_TOLERANCE:
            raise ValueError(f"pmf sums to {probs.sum()!r}, not 1")
        return _as_float_array(np.clip(probs, 0.0, None))

    @classmethod
    def uniform(
        cls,
        size: int,
    ):
        return cls(probs=np.full(size, 1.0 / size))

    @classmethod
    def point_mass(
        cls,
        size: int,
        index: int,
    ):
        probs = np.zeros(size)
        probs[index] = 1.0
        return cls(probs=probs)

    @property
    def size(self):
        return self.probs.shape[0]


class JointPmf(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    probs: FloatArray

    @field_validator("probs")
    @classmethod
    def _valid(
        cls,
        probs: np.ndarray,
    ):
        if probs.ndim < 1:
            raise ValueError("a joint pmf needs at least one axis")
        _check_probabilities(probs, "joint pmf")
        if abs(probs.sum() - 1.0) > PMF_SUM_TOLERANCE:
            raise ValueError(f"joint pmf has total mass {probs.sum()!r}, not 1")
        return _as_float_array(np.clip(probs, 0.0, None))

    @property
    def dims(self):
        return list(self.probs.shape)

    @property
    def ndim(self):
        return self.probs.ndim


class TestChannel(BaseModel):
    """Conditional law p(yhat1|y1); rows indexed by y1, columns by yhat1."""

    __test__ = False
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: FloatArray

    @field_validator("matrix")
    @classmethod
    def _valid(
        cls,
        matrix: np.ndarray,
    ):
        if matrix.ndim != 2:
            raise ValueError("a test channel is a matrix")
        _check_probabilities(matrix, "test channel")
        sums = matrix.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > PMF_SUM_TOLERANCE):
            raise ValueError(f"test channel rows sum to {sums.tolist()}")
        return _as_float_array(np.clip(matrix, 0.0, None))

    @property
    def size_y1(self):
        return self.matrix.shape[0]

    @property
    def size_y1hat(self):
        return self.matrix.shape[1]


class OptimizerConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    tolerance: float = Field(default=1e-9, gt=0)
    max_iterations: int = Field(default=2000, ge=1)
    restarts: int = Field(default=4, ge=1)
    seed: int = 0
    step_scale: float = Field(default=0.25, gt=0)


class RatePoint(BaseModel):
    r0: float = Field(ge=0)
    rate: float = Field(ge=0)
    argmax_input: list[float]
    witness: TestChannel | None = None
    link_cost: float | None = None
    link_term: float | None = None
    broadcast_term: float | None = None
    active_branch: Literal["link", "broadcast", "tie"] | None = None
    converged: bool = True
    iterations: int = 0
    theorem1: float | None = None
    gap: float | None = None
    error: str | None = None


class RateCurve(BaseModel):
    points: list[RatePoint]

    @property
    def r0s(self):
        return [point.r0 for point in self.points]

    @property
    def rates(self):
        return [point.rate for point in self.points]


class DecodeResult(BaseModel):
    status: Literal["ok", "EmptyList", "Ambiguous", "EmptyBinMatch"]
    index: int | None = None
    list_size: int = 0
    bin_matches: int = 0
    undefined_lookups: int = 0


class SimReport(BaseModel):
    schema_version: str
    trials: int
    err_a: int = 0
    err_b: int = 0
    err_c: int = 0
    err_unattributed: int = 0
    errors: int = 0
    pe_hat: float = 0.0
    wilson95: tuple[float, float] = (0.0, 1.0)
    empty_list: int = 0
    ambiguous: int = 0
    empty_bin_match: int = 0
    undefined_lookups: int = 0
    n: int
    rate: float
    effective_rate: float
    r0: float
    bin_bits: int
    num_words: int
    eps: float
    master_seed: int
    fixed_codebook: bool = False


class RunManifest(BaseModel):
    schema_version: str
    command: str
    input_files: list[str] = []
    parameters: dict[str, Any] = {}
    seeds: list[int] = []
    tool_version: str
    started_at: float = Field(default_factory=time.time)
    duration_s: float = 0.0


class Task(BaseModel):
    idx: int
    name: str
    args: dict[str, Any] = {}


class TaskResult(BaseModel):
    idx: int
    name: str
    ok: bool
    value: Any = None
    error: str | None = None
