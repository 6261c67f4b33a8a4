import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .constants import OPEN_PROBLEM_MESSAGE, PMF_SUM_TOLERANCE, PROB_FORMAT, ZERO_PROB
from .errors import (
    DimensionMismatch,
    NotDeterministic,
    RowNotNormalized,
    StateNotRecoverable,
    SymbolOutOfRange,
    UnsupportedCorrelation,
)
from .schemas import FloatArray, IntArray, JointPmf, Pmf


class DiscreteRelayChannel(BaseModel):
    """p(y, y1 | x), axis order x, y, y1."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    transition: FloatArray

    @field_validator("transition")
    @classmethod
    def _shape(
        cls,
        transition: np.ndarray,
    ):
        if transition.ndim != 3 or 0 in transition.shape:
            raise ValueError(f"transition must be a non-empty x*y*y1 tensor, got {transition.shape}")
        if not np.all(np.isfinite(transition)) or np.any(transition < 0):
            raise ValueError("transition probabilities must be finite and nonnegative")
        return transition

    @property
    def size_x(self):
        return self.transition.shape[0]

    @property
    def size_y(self):
        return self.transition.shape[1]

    @property
    def size_y1(self):
        return self.transition.shape[2]


class RelayFunction(BaseModel):
    """y1 = f(x, y) on the positive-probability domain, -1 elsewhere."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    table: IntArray

    def __call__(
        self,
        x: int,
        y: int,
    ):
        value = int(self.table[x, y])
        return None if value < 0 else value

    def apply(
        self,
        xs: np.ndarray,
        ys: np.ndarray,
    ):
        # broadcasts; -1 marks an undefined lookup
        return self.table[np.asarray(xs), np.asarray(ys)]

    def as_dict(self):
        return {
            (int(x), int(y)): int(self.table[x, y])
            for x, y in zip(*np.nonzero(self.table >= 0))
        }

    def describe(self):
        return ", ".join(f"f({x},{y})={y1}" for (x, y), y1 in sorted(self.as_dict().items()))


class StateChannel(BaseModel):
    """Channel p(y|x,s) with state S ~ p(s) independent of the input."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    state_pmf: FloatArray
    law: FloatArray

    @field_validator("state_pmf")
    @classmethod
    def _state_pmf(
        cls,
        state_pmf: np.ndarray,
    ):
        return Pmf(probs=state_pmf).probs

    @field_validator("law")
    @classmethod
    def _law(
        cls,
        law: np.ndarray,
    ):
        if law.ndim != 3:
            raise ValueError(f"state channel law must be an x*s*y tensor, got {law.shape}")
        sums = law.sum(axis=2)
        if np.any(law < 0) or np.any(np.abs(sums - 1.0) > PMF_SUM_TOLERANCE):
            raise ValueError("every p(.|x,s) must be a pmf")
        return law

    def to_relay_channel(self):
        if self.law.shape[1] != self.state_pmf.shape[0]:
            raise DimensionMismatch(
                f"state pmf has {self.state_pmf.shape[0]} states, law has {self.law.shape[1]}"
            )
        # relay output is the state: p(y, s | x) = p(s) p(y | x, s)
        transition = np.einsum("s,xsy->xys", self.state_pmf, self.law)
        return DiscreteRelayChannel(transition=transition)


class GaussianRelaySpec(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    power: float = Field(alias="P", gt=0)
    noise: float = Field(alias="N", gt=0)
    rho: float

    @field_validator("rho")
    @classmethod
    def _supported(
        cls,
        rho: float,
    ):
        if rho == 0:
            raise UnsupportedCorrelation(OPEN_PROBLEM_MESSAGE)
        if rho not in (-1.0, 1.0):
            raise UnsupportedCorrelation(
                f"rho={rho} is not supported: closed forms exist only for rho in {{-1, +1}}"
            )
        return float(rho)

    @property
    def snr(self):
        return self.power / self.noise


def validate(
    ch: DiscreteRelayChannel,
):
    totals = ch.transition.sum(axis=(1, 2))
    for x, total in enumerate(totals):
        if abs(total - 1.0) > PMF_SUM_TOLERANCE:
            raise RowNotNormalized(x, float(total))

    table = np.full((ch.size_x, ch.size_y), -1, dtype=np.int64)
    for x in range(ch.size_x):
        for y in range(ch.size_y):
            support = np.flatnonzero(ch.transition[x, y] > ZERO_PROB)
            if support.size > 1:
                raise NotDeterministic(x, y, int(support[0]), int(support[1]))
            if support.size == 1:
                table[x, y] = support[0]
    return RelayFunction(table=table)


def bsc_state_channel(
    p: float,
):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"crossover probability {p} is outside [0, 1]")
    transition = np.zeros((2, 2, 2))
    for x in range(2):
        for s in range(2):
            transition[x, x ^ s, s] = p if s else 1.0 - p
    return DiscreteRelayChannel(transition=transition)


def bsc_state_as_state_channel(
    p: float,
):
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"crossover probability {p} is outside [0, 1]")
    law = np.zeros((2, 2, 2))
    for x in range(2):
        for s in range(2):
            law[x, s, x ^ s] = 1.0
    return StateChannel(state_pmf=[1.0 - p, p], law=law)


def random_relay_channel(
    size_x: int,
    size_y: int,
    size_y1: int,
    rng: np.random.Generator,
    sparsity: float = 0.0,
):
    """Random channel whose relay output is a function of (x, y)."""
    p_y = rng.dirichlet(np.ones(size_y), size=size_x)
    if sparsity > 0:
        p_y = np.where(rng.random(p_y.shape) < sparsity, 0.0, p_y)
        for x in range(size_x):
            if p_y[x].sum() == 0:
                p_y[x, rng.integers(size_y)] = 1.0
        p_y /= p_y.sum(axis=1, keepdims=True)
    f = rng.integers(size_y1, size=(size_x, size_y))
    transition = np.zeros((size_x, size_y, size_y1))
    xs, ys = np.meshgrid(np.arange(size_x), np.arange(size_y), indexing="ij")
    transition[xs, ys, f] = p_y
    return DiscreteRelayChannel(transition=transition)


def induced_joint(
    px: Pmf,
    ch: DiscreteRelayChannel,
):
    if px.size != ch.size_x:
        raise DimensionMismatch(f"input pmf has {px.size} symbols, channel has {ch.size_x}")
    return JointPmf(probs=px.probs[:, None, None] * ch.transition)


def sample(
    ch: DiscreteRelayChannel,
    xs: Sequence[int],
    rng: np.random.Generator | int,
):
    xs = np.asarray(xs, dtype=np.int64)
    if xs.size and (xs.min() < 0 or xs.max() >= ch.size_x):
        raise SymbolOutOfRange(f"input symbols must lie in [0, {ch.size_x})")
    rng = np.random.default_rng(rng)
    flat = ch.transition.reshape(ch.size_x, -1)
    cdf = np.cumsum(flat, axis=1)
    # the last positive cell of each row absorbs rounding in the cumulative sum
    last = flat.shape[1] - 1 - np.argmax((flat > ZERO_PROB)[:, ::-1], axis=1)
    cdf[np.arange(ch.size_x), last] = np.inf
    u = rng.random(xs.size)
    cells = np.argmax(u[:, None] < cdf[xs], axis=1)
    return cells // ch.size_y1, cells % ch.size_y1


def _gaussian_rho_minus_one(
    spec: GaussianRelaySpec,
):
    if spec.rho != -1.0:
        raise UnsupportedCorrelation(
            "the compress-and-forward closed forms are stated for rho=-1 only"
        )


def gaussian_c0(
    spec: GaussianRelaySpec,
):
    return 0.5 * math.log2(1.0 + spec.snr)


def gaussian_cf_rstar(
    spec: GaussianRelaySpec,
    sigma2: float,
):
    _gaussian_rho_minus_one(spec)
    if sigma2 <= 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    p, n = spec.power, spec.noise
    return 0.5 * math.log2(((p + n) * sigma2 + 4 * p * n) / (n * sigma2))


def gaussian_cf_r0(
    spec: GaussianRelaySpec,
    sigma2: float,
):
    _gaussian_rho_minus_one(spec)
    if sigma2 <= 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    p, n = spec.power, spec.noise
    return 0.5 * math.log2(1.0 + 4 * p * n / ((p + n) * sigma2))


def gaussian_invert_r0(
    spec: GaussianRelaySpec,
    r0: float,
):
    _gaussian_rho_minus_one(spec)
    if r0 <= 0:
        raise ValueError(f"R0 must be positive to invert, got {r0}")
    p, n = spec.power, spec.noise
    return 4 * p * n / ((p + n) * math.expm1(2.0 * r0 * math.log(2.0)))


def gaussian_capacity(
    spec: GaussianRelaySpec,
    r0: float,
):
    if r0 < 0:
        raise ValueError(f"R0 must be nonnegative, got {r0}")
    if spec.rho == 1.0:
        # Y1 = Y: the relay is useless
        return gaussian_c0(spec)
    return gaussian_c0(spec) + r0


def gaussian_cf_rate(
    spec: GaussianRelaySpec,
    r0: float,
):
    """Compress-and-forward rate with Yhat1 = Y1 + U sized so that I(Y1;Yhat1|Y) = r0."""
    _gaussian_rho_minus_one(spec)
    if r0 < 0:
        raise ValueError(f"R0 must be nonnegative, got {r0}")
    if r0 == 0:
        return gaussian_c0(spec)
    return gaussian_cf_rstar(spec, gaussian_invert_r0(spec, r0))


def check_state_recoverable(
    state_ch: StateChannel,
):
    try:
        return validate(state_ch.to_relay_channel())
    except NotDeterministic as e:
        raise StateNotRecoverable(e.x, e.y, e.y1a, e.y1b) from e


class _ChannelFile(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    size_x: int = Field(alias="sizeX", ge=1)
    size_y: int = Field(alias="sizeY", ge=1)
    size_y1: int = Field(alias="sizeY1", ge=1)
    transition: list[list[list[float]]]


class _StateChannelFile(BaseModel):
    state_pmf: list[float] = Field(alias="ps")
    law: list[list[list[float]]] = Field(alias="channel")


def _format_probs(
    array: np.ndarray,
):
    if array.ndim == 0:
        return format(float(array), PROB_FORMAT)
    return [_format_probs(row) for row in array]


def parse_channel(
    text: str,
):
    spec = _ChannelFile.model_validate_json(text)
    ch = DiscreteRelayChannel(transition=spec.transition)
    if (ch.size_x, ch.size_y, ch.size_y1) != (spec.size_x, spec.size_y, spec.size_y1):
        raise DimensionMismatch(
            f"declared sizes ({spec.size_x}, {spec.size_y}, {spec.size_y1}) "
            f"do not match transition shape {ch.transition.shape}"
        )
    return ch


def dump_channel(
    ch: DiscreteRelayChannel,
):
    return json.dumps(
        {
            "sizeX": ch.size_x,
            "sizeY": ch.size_y,
            "sizeY1": ch.size_y1,
            "transition": _format_probs(ch.transition),
        },
        indent=2,
    )


def parse_state_channel(
    text: str,
):
    spec = _StateChannelFile.model_validate_json(text)
    return StateChannel(state_pmf=spec.state_pmf, law=spec.law)


def dump_state_channel(
    state_ch: StateChannel,
):
    return json.dumps(
        {
            "ps": _format_probs(state_ch.state_pmf),
            "channel": _format_probs(state_ch.law),
        },
        indent=2,
    )


def parse_gaussian(
    text: str,
):
    return GaussianRelaySpec.model_validate_json(text)


def load_channel(
    path: str | Path,
):
    return parse_channel(Path(path).read_text(encoding="utf-8"))


def load_state_channel(
    path: str | Path,
):
    return parse_state_channel(Path(path).read_text(encoding="utf-8"))


def load_gaussian(
    path: str | Path,
):
    return parse_gaussian(Path(path).read_text(encoding="utf-8"))
