"""Deterministic leveled SIMD ciphertext emulator.

Value semantics are noiseless: a ciphertext is a fixed-length float64
slot vector and decryption returns it exactly. Budget semantics are
strict: multiplications require a remaining level, rescaling consumes
one, and the per-op trace makes depth and operation counts testable.
There is no randomness anywhere.
"""

import threading
from dataclasses import dataclass

import numpy as np

from hemlr.errors import (
    LevelExhausted,
    LevelMismatch,
    NothingToRescale,
    PayloadTooLarge,
    ScaleMismatch,
)

OP_KINDS = ("Add", "Mult", "cMult", "ReScale", "Rot", "Enc", "Dec", "Bootstrap")


@dataclass(frozen=True)
class HeParams:
    """Scheme shape: slot count and the multiplicative budget.

    slots = 2^(logN-1); max_level = floor(logQ / logp). The preset used
    throughout the experiments is logN=16, logQ=990, logp=45, giving
    32768 slots and 22 levels.
    """

    logN: int = 16
    logQ: int = 990
    logp: int = 45

    def __post_init__(self):
        if self.logN < 2 or self.logp <= 0 or self.logQ < self.logp:
            raise ValueError("need logN >= 2 and logQ >= logp > 0")

    @property
    def slots(self) -> int:
        return 1 << (self.logN - 1)

    @property
    def max_level(self) -> int:
        return self.logQ // self.logp


@dataclass(frozen=True)
class CiphertextSim:
    """Slot vector plus level/scale bookkeeping.

    payload_len remembers how many slots the original plaintext filled
    so decryption can trim the zero padding; slot-moving operations
    widen it to the full vector.
    """

    values: np.ndarray
    level: int
    scale_bits: int
    payload_len: int
    id: int

    def __post_init__(self):
        self.values.setflags(write=False)


class OpTrace:
    """Per-op counters; increments are atomic, counts never decrease."""

    def __init__(self):
        self._lock = threading.Lock()
        self.counts = {k: 0 for k in OP_KINDS}

    def bump(self, kind: str) -> None:
        with self._lock:
            self.counts[kind] += 1

    def snapshot(self) -> dict:
        with self._lock:
            return dict(self.counts)

    def restore(self, counts: dict) -> None:
        with self._lock:
            for k in OP_KINDS:
                self.counts[k] = int(counts.get(k, 0))

    @staticmethod
    def delta(before: dict, after: dict) -> dict:
        return {k: after[k] - before[k] for k in after if after[k] != before[k]}


class HeContext:
    """Factory and operation set for emulated ciphertexts.

    Every public operation increments exactly one trace counter. The
    level-alignment helper is bookkeeping glue (values unchanged, level
    dropped to match) and is deliberately outside the counted set.
    """

    def __init__(self, params: HeParams):
        self.params = params
        self.trace = OpTrace()
        self._next_id = 0
        self._min_level_seen = params.max_level
        self._id_lock = threading.Lock()

    # -- internals ---------------------------------------------------------

    def _make(self, values: np.ndarray, level: int, scale_bits: int,
              payload_len: int) -> CiphertextSim:
        with self._id_lock:
            cid = self._next_id
            self._next_id += 1
            if level < self._min_level_seen:
                self._min_level_seen = level
        return CiphertextSim(values=values, level=level, scale_bits=scale_bits,
                             payload_len=payload_len, id=cid)

    def _as_slot_vector(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64).ravel()
        if v.size > self.params.slots:
            raise PayloadTooLarge(f"{v.size} values > {self.params.slots} slots")
        out = np.zeros(self.params.slots)
        out[: v.size] = v
        return out

    @staticmethod
    def _require_same_level(a: CiphertextSim, b: CiphertextSim) -> None:
        if a.level != b.level:
            raise LevelMismatch(f"levels {a.level} != {b.level}; align first")

    @staticmethod
    def _require_same_scale(a: CiphertextSim, b: CiphertextSim) -> None:
        if a.scale_bits != b.scale_bits:
            raise ScaleMismatch(f"scales {a.scale_bits} != {b.scale_bits}")

    def _require_mult_budget(self, a: CiphertextSim) -> None:
        if a.level < 1:
            raise LevelExhausted("no multiplicative level left")

    # -- the operation set ---------------------------------------------------

    def enc(self, v) -> CiphertextSim:
        vec = self._as_slot_vector(v)
        self.trace.bump("Enc")
        return self._make(vec, self.params.max_level, self.params.logp,
                          payload_len=np.asarray(v).size)

    def dec(self, ct: CiphertextSim) -> np.ndarray:
        self.trace.bump("Dec")
        return ct.values[: ct.payload_len].copy()

    def add(self, a: CiphertextSim, b: CiphertextSim) -> CiphertextSim:
        self._require_same_level(a, b)
        self._require_same_scale(a, b)
        self.trace.bump("Add")
        return self._make(a.values + b.values, a.level, a.scale_bits,
                          max(a.payload_len, b.payload_len))

    def sub(self, a: CiphertextSim, b: CiphertextSim) -> CiphertextSim:
        """Subtraction is an addition of the negation; counted as Add."""
        self._require_same_level(a, b)
        self._require_same_scale(a, b)
        self.trace.bump("Add")
        return self._make(a.values - b.values, a.level, a.scale_bits,
                          max(a.payload_len, b.payload_len))

    def mult(self, a: CiphertextSim, b: CiphertextSim) -> CiphertextSim:
        self._require_same_level(a, b)
        self._require_mult_budget(a)
        self.trace.bump("Mult")
        return self._make(a.values * b.values, a.level,
                          a.scale_bits + b.scale_bits,
                          max(a.payload_len, b.payload_len))

    def cmult(self, k, a: CiphertextSim) -> CiphertextSim:
        """Multiply by a plaintext constant (scalar or vector)."""
        self._require_mult_budget(a)
        kv = np.asarray(k, dtype=np.float64)
        if kv.ndim:
            kv = self._as_slot_vector(kv)
        self.trace.bump("cMult")
        return self._make(a.values * kv, a.level,
                          a.scale_bits + self.params.logp, a.payload_len)

    def cadd(self, k, a: CiphertextSim) -> CiphertextSim:
        """Add a plaintext constant encoded at the ciphertext's scale;
        counted as Add."""
        kv = np.asarray(k, dtype=np.float64)
        if kv.ndim:
            kv = self._as_slot_vector(kv)
        self.trace.bump("Add")
        return self._make(a.values + kv, a.level, a.scale_bits, a.payload_len)

    def rescale(self, a: CiphertextSim) -> CiphertextSim:
        if a.scale_bits <= self.params.logp:
            raise NothingToRescale(f"scale {a.scale_bits} <= {self.params.logp}")
        if a.level < 1:
            raise LevelExhausted("cannot rescale at level 0")
        self.trace.bump("ReScale")
        return self._make(a.values.copy(), a.level - 1,
                          a.scale_bits - self.params.logp, a.payload_len)

    def rot(self, a: CiphertextSim, k: int) -> CiphertextSim:
        """Cyclic left shift of the slot vector by k."""
        k = int(k) % self.params.slots
        self.trace.bump("Rot")
        return self._make(np.roll(a.values, -k), a.level, a.scale_bits,
                          self.params.slots)

    def bootstrap(self, a: CiphertextSim) -> CiphertextSim:
        """Level reset; values untouched in the noiseless model."""
        self.trace.bump("Bootstrap")
        return self._make(a.values.copy(), self.params.max_level,
                          a.scale_bits, a.payload_len)

    # -- uncounted bookkeeping glue -----------------------------------------

    def mod_down(self, a: CiphertextSim, level: int) -> CiphertextSim:
        """Drop to a lower level without touching values. Not counted:
        in the noiseless model this is bookkeeping, not computation."""
        if level >= a.level:
            return a
        return self._make(a.values.copy(), level, a.scale_bits, a.payload_len)

    def level_align(self, a: CiphertextSim, b: CiphertextSim):
        lo = min(a.level, b.level)
        return self.mod_down(a, lo), self.mod_down(b, lo)

    # -- checkpoint support ---------------------------------------------------

    def adopt(self, values, level: int, scale_bits: int,
              payload_len: int) -> CiphertextSim:
        """Rebuild a ciphertext from checkpointed state; not an operation,
        so no counter moves."""
        vec = self._as_slot_vector(values)
        return self._make(vec, level, scale_bits, payload_len)

    def restore_accounting(self, counts: dict, min_level_seen: int) -> None:
        """Resume op counters and depth tracking from a checkpoint."""
        self.trace.restore(counts)
        with self._id_lock:
            if min_level_seen < self._min_level_seen:
                self._min_level_seen = min_level_seen

    # -- reporting ------------------------------------------------------------

    def max_depth_consumed(self) -> int:
        return self.params.max_level - self._min_level_seen

    def trace_json_dict(self) -> dict:
        return {
            "per_op_counts": self.trace.snapshot(),
            "max_depth_consumed": self.max_depth_consumed(),
        }
