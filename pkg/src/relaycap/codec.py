"""Hash-and-forward: random codebook, relay binning, list decoding with a hash check."""

import math
import time
from collections import Counter
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr
from scipy.stats import binomtest

from .channel import DiscreteRelayChannel, RelayFunction, induced_joint, sample, validate
from .constants import (
    DEFAULT_EPS,
    MAX_BIN_BITS,
    MAX_CODEBOOK_WORDS,
    MAX_SIM_BLOCK_LENGTH,
    MAX_SIM_TRIALS,
    MAX_SIM_WORDS,
    SCHEMA_SIM_REPORT,
)
from .errors import DimensionMismatch, GuardViolation, SimulationFailed, SymbolOutOfRange
from .info import is_jointly_typical, jointly_typical_rows, marginal
from .scheduler import Scheduler
from .schemas import DecodeResult, IntArray, JointPmf, Pmf, SimReport, Task
from .trace import log_event

_TRIALS_PER_TASK = 250


class Codebook(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n: int = Field(ge=1)
    num_words: int = Field(ge=1)
    words: IntArray
    gen_seed: int
    source_px: list[float]


class BinHash(BaseModel):
    """Seeded GF(2)-affine hash h(u) = A bits(u) + c of length-n relay sequences.

    For u != v, Pr[h(u) = h(v)] = 2^-bin_bits exactly over the seed, and h(u) is uniform.
    """

    model_config = ConfigDict(frozen=True)

    hash_seed: int
    n: int = Field(ge=1)
    bin_bits: int = Field(ge=0, le=MAX_BIN_BITS)
    alphabet_size: int = Field(ge=1)

    _matrix: np.ndarray = PrivateAttr()
    _offset: np.ndarray = PrivateAttr()

    @property
    def symbol_bits(self):
        return max(1, (self.alphabet_size - 1).bit_length())

    def model_post_init(
        self,
        context,
    ):
        rng = np.random.default_rng(self.hash_seed)
        self._matrix = rng.integers(0, 2, size=(self.bin_bits, self.n * self.symbol_bits), dtype=np.int64)
        self._offset = rng.integers(0, 2, size=self.bin_bits, dtype=np.int64)

    def bins(
        self,
        sequences: np.ndarray,
    ):
        sequences = np.asarray(sequences, dtype=np.int64)
        if sequences.ndim != 2 or sequences.shape[1] != self.n:
            raise DimensionMismatch(f"expected sequences of length {self.n}, got {sequences.shape}")
        if sequences.size and (sequences.min() < 0 or sequences.max() >= self.alphabet_size):
            raise SymbolOutOfRange(f"relay symbols must lie in [0, {self.alphabet_size})")
        if self.bin_bits == 0:
            return np.zeros(sequences.shape[0], dtype=np.uint64)
        shifts = np.arange(self.symbol_bits, dtype=np.int64)
        bits = ((sequences[..., None] >> shifts) & 1).reshape(sequences.shape[0], -1)
        hashed = (bits @ self._matrix.T + self._offset) % 2
        weights = np.left_shift(np.uint64(1), np.arange(self.bin_bits, dtype=np.uint64))
        return (hashed.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)


def _codeword_bits(
    n: int,
    rate: float,
):
    # 2^ceil(nR) words: the measured rate is never below the nominal one
    return math.ceil(round(n * rate, 9))


def bin_bits_for(
    n: int,
    r0: float,
):
    # floor(n R0): never exceeds the link budget
    return math.floor(round(n * r0, 9))


def build_codebook(
    px: Pmf,
    n: int,
    rate: float,
    seed: int,
):
    if n < 1:
        raise ValueError(f"block length must be >= 1, got {n}")
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")
    bits = _codeword_bits(n, rate)
    if 2**bits > MAX_CODEBOOK_WORDS:
        raise GuardViolation(f"2^{bits} codewords exceed the limit of {MAX_CODEBOOK_WORDS}")
    rng = np.random.default_rng(seed)
    words = rng.choice(px.size, size=(2**bits, n), p=px.probs)
    return Codebook(
        n=n,
        num_words=2**bits,
        words=words,
        gen_seed=seed,
        source_px=px.probs.tolist(),
    )


def relay_forward(
    y1s: Sequence[int],
    h: BinHash,
):
    y1s = np.asarray(y1s, dtype=np.int64)
    if y1s.shape != (h.n,):
        raise DimensionMismatch(f"relay sequence has shape {y1s.shape}, hash expects ({h.n},)")
    return int(h.bins(y1s[None, :])[0])


def collision_count(
    candidates: np.ndarray,
    true_seq: Sequence[int],
    h: BinHash,
):
    """Candidate relay sequences that differ from the true one but land in its bin."""
    candidates = np.asarray(candidates, dtype=np.int64).reshape(-1, h.n)
    true_seq = np.asarray(true_seq, dtype=np.int64)
    differs = np.any(candidates != true_seq[None, :], axis=1)
    same_bin = h.bins(candidates) == np.uint64(relay_forward(true_seq, h))
    return int(np.sum(differs & same_bin))


def _list_decode(
    ys: np.ndarray,
    cb: Codebook,
    f: RelayFunction,
    joint_xy: JointPmf,
    eps: float,
):
    members = np.flatnonzero(jointly_typical_rows(cb.words, ys, joint_xy, eps))
    relay = f.apply(cb.words[members], ys[None, :])
    defined = np.all(relay >= 0, axis=1)
    return members[defined], relay[defined], int(np.sum(~defined))


def haf_decode(
    ys: Sequence[int],
    bin_idx: int,
    cb: Codebook,
    f: RelayFunction,
    joint_xy: JointPmf,
    eps: float,
    h: BinHash,
):
    ys = np.asarray(ys, dtype=np.int64)
    if ys.shape != (cb.n,) or h.n != cb.n:
        raise DimensionMismatch(f"block lengths disagree: ys {ys.shape}, codebook {cb.n}, hash {h.n}")
    members, relay, undefined = _list_decode(ys, cb, f, joint_xy, eps)
    if members.size == 0:
        return DecodeResult(status="EmptyList", undefined_lookups=undefined)

    matches = members[h.bins(relay) == np.uint64(bin_idx)]
    status = "ok" if matches.size == 1 else ("EmptyBinMatch" if matches.size == 0 else "Ambiguous")
    return DecodeResult(
        status=status,
        index=int(matches[0]) if status == "ok" else None,
        list_size=int(members.size),
        bin_matches=int(matches.size),
        undefined_lookups=undefined,
    )


def _seed_of(
    seq: np.random.SeedSequence,
):
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def _run_trials(
    ch: DiscreteRelayChannel,
    px: Pmf,
    f: RelayFunction,
    joint_xy: JointPmf,
    n: int,
    rate: float,
    bin_bits: int,
    eps: float,
    trial_seqs: list[np.random.SeedSequence],
    fixed: tuple[Codebook, BinHash] | None,
):
    counts: Counter[str] = Counter()
    for trial_seq in trial_seqs:
        codebook_seq, hash_seq, noise_seq = trial_seq.spawn(3)
        if fixed is None:
            cb = build_codebook(px, n, rate, _seed_of(codebook_seq))
            h = BinHash(hash_seed=_seed_of(hash_seq), n=n, bin_bits=bin_bits, alphabet_size=ch.size_y1)
        else:
            cb, h = fixed

        rng = np.random.default_rng(noise_seq)
        w = int(rng.integers(cb.num_words))
        x = cb.words[w]
        ys, y1s = sample(ch, x, rng)
        b_true = relay_forward(y1s, h)
        result = haf_decode(ys, b_true, cb, f, joint_xy, eps, h)

        counts["undefined_lookups"] += result.undefined_lookups
        if result.status == "EmptyList":
            counts["empty_list"] += 1
        elif result.status == "Ambiguous":
            counts["ambiguous"] += 1
        elif result.status == "EmptyBinMatch":
            counts["empty_bin_match"] += 1
        if result.status == "ok" and result.index == w:
            continue

        counts["errors"] += 1
        # precedence a > b > c
        if not is_jointly_typical(x, ys, joint_xy, eps):
            counts["err_a"] += 1
            continue
        members, relay, _ = _list_decode(ys, cb, f, joint_xy, eps)
        wrong = relay[members != w]
        if collision_count(wrong, y1s, h) > 0:
            counts["err_b"] += 1
        elif np.any(np.all(wrong == y1s[None, :], axis=1)):
            counts["err_c"] += 1
        else:
            counts["err_unattributed"] += 1
    return counts


def simulate_haf(
    ch: DiscreteRelayChannel,
    px: Pmf,
    n: int,
    rate: float,
    r0: float,
    eps: float = DEFAULT_EPS,
    trials: int = 1000,
    master_seed: int = 0,
    fixed_codebook: bool = False,
    workers: int | None = None,
    execution_start: float | None = None,
):
    execution_start = execution_start or time.time()
    if not 1 <= n <= MAX_SIM_BLOCK_LENGTH:
        raise GuardViolation(f"block length {n} is outside [1, {MAX_SIM_BLOCK_LENGTH}]")
    if not 1 <= trials <= MAX_SIM_TRIALS:
        raise GuardViolation(f"trial count {trials} is outside [1, {MAX_SIM_TRIALS}]")
    if rate <= 0 or r0 < 0 or eps <= 0:
        raise ValueError("need rate > 0, r0 >= 0 and eps > 0")
    num_words = 2 ** _codeword_bits(n, rate)
    if num_words > MAX_SIM_WORDS:
        raise GuardViolation(f"{num_words} codewords exceed the simulation limit of {MAX_SIM_WORDS}")
    bin_bits = bin_bits_for(n, r0)
    if bin_bits > MAX_BIN_BITS:
        raise GuardViolation(f"{bin_bits} bin bits exceed the limit of {MAX_BIN_BITS}")

    f = validate(ch)
    joint_xy = marginal(induced_joint(px, ch), [0, 1])

    root = np.random.SeedSequence(master_seed)
    fixed_codebook_seq, fixed_hash_seq, trials_root = root.spawn(3)
    fixed = None
    if fixed_codebook:
        fixed = (
            build_codebook(px, n, rate, _seed_of(fixed_codebook_seq)),
            BinHash(hash_seed=_seed_of(fixed_hash_seq), n=n, bin_bits=bin_bits, alphabet_size=ch.size_y1),
        )
    trial_seqs = trials_root.spawn(trials)

    log_event(
        execution_start,
        "🎲",
        "SIMULATOR",
        f"Running {trials} trials: n={n}, {num_words} words, {bin_bits} bin bits, eps={eps}",
    )
    tasks = [
        Task(idx=i, name="trials", args={"start": start, "stop": min(start + _TRIALS_PER_TASK, trials)})
        for i, start in enumerate(range(0, trials, _TRIALS_PER_TASK))
    ]
    results = Scheduler(workers).schedule_tasks(
        tasks=tasks,
        handlers={
            "trials": lambda start, stop: _run_trials(
                ch, px, f, joint_xy, n, rate, bin_bits, eps, trial_seqs[start:stop], fixed
            ),
        },
        execution_start=execution_start,
    )
    failed = [result.error for result in results if not result.ok]
    if failed:
        raise SimulationFailed(f"simulation chunk failed: {failed[0]}")
    counts: Counter[str] = sum((result.value for result in results), Counter())

    errors = counts["errors"]
    interval = binomtest(errors, trials).proportion_ci(confidence_level=0.95, method="wilson")
    return SimReport(
        schema_version=SCHEMA_SIM_REPORT,
        trials=trials,
        err_a=counts["err_a"],
        err_b=counts["err_b"],
        err_c=counts["err_c"],
        err_unattributed=counts["err_unattributed"],
        errors=errors,
        pe_hat=errors / trials,
        wilson95=(float(interval.low), float(interval.high)),
        empty_list=counts["empty_list"],
        ambiguous=counts["ambiguous"],
        empty_bin_match=counts["empty_bin_match"],
        undefined_lookups=counts["undefined_lookups"],
        n=n,
        rate=rate,
        effective_rate=_codeword_bits(n, rate) / n,
        r0=r0,
        bin_bits=bin_bits,
        num_words=num_words,
        eps=eps,
        master_seed=master_seed,
        fixed_codebook=fixed_codebook,
    )
