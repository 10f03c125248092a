"""Binary-symmetric-channel exchange with identical linear codes.

Both end nodes encode with the same binary linear code, so the relay
observes codeword1 XOR codeword2 XOR noise.  Linearity makes the XOR of
two codewords another codeword of the same code, so the relay can run a
plain single-codeword decoder and forward the result; each end node then
XOR-cancels its own part.  This is the group-structure mechanism the
lattice scheme lifts to the reals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np

from . import harness
from .errors import GuardExceededError, ValidationError
from .rng import generator

ML_GUARD_K = 16  # brute-force decoding enumerates 2^k codewords


@dataclass(eq=False)
class BinaryLinearCode:
    generator: np.ndarray
    parity_check: np.ndarray | None = None

    def __post_init__(self) -> None:
        G = np.asarray(self.generator, dtype=np.int64) % 2
        if G.ndim != 2:
            raise ValidationError("generator must be a k x n matrix")
        self.generator = G
        if self.k > ML_GUARD_K:
            raise GuardExceededError(f"k={self.k} exceeds brute-force guard {ML_GUARD_K}")
        msgs = _all_bit_vectors(self.k)
        self.codewords = msgs @ G % 2
        self.messages = msgs
        if len({row.tobytes() for row in self.codewords.astype(np.uint8)}) != 2 ** self.k:
            raise ValidationError("generator is not full rank over GF(2)")

    @property
    def k(self) -> int:
        return int(self.generator.shape[0])

    @property
    def n(self) -> int:
        return int(self.generator.shape[1])

    def encode(self, message: np.ndarray) -> np.ndarray:
        message = np.asarray(message, dtype=np.int64) % 2
        if message.shape[-1] != self.k:
            raise ValidationError(f"message length {message.shape[-1]} != k={self.k}")
        return message @ self.generator % 2

    def ml_decode(self, word: np.ndarray) -> np.ndarray:
        """Minimum-Hamming-distance decode; ties go to the lowest message index."""
        word = np.asarray(word, dtype=np.int64) % 2
        dists = np.count_nonzero(self.codewords != word[None, :], axis=1)
        return self.messages[int(np.argmin(dists))].copy()


def _all_bit_vectors(k: int) -> np.ndarray:
    idx = np.arange(2 ** k)
    return (idx[:, None] >> np.arange(k)[None, :]) & 1


def hamming74() -> BinaryLinearCode:
    """The [7,4] Hamming code in systematic form."""
    P = np.array([[1, 1, 0], [1, 0, 1], [0, 1, 1], [1, 1, 1]])
    G = np.hstack([np.eye(4, dtype=np.int64), P])
    H = np.hstack([P.T, np.eye(3, dtype=np.int64)])
    return BinaryLinearCode(generator=G, parity_check=H)


def random_code(n: int, k: int, seed: int) -> BinaryLinearCode:
    """Systematic [I_k | A] code with random parity part; always rank k."""
    if not 1 <= k <= min(n, ML_GUARD_K):
        raise ValidationError(f"need 1 <= k <= min(n, {ML_GUARD_K})")
    A = generator(seed).integers(0, 2, size=(k, n - k))
    return BinaryLinearCode(generator=np.hstack([np.eye(k, dtype=np.int64), A]))


@dataclass(frozen=True)
class BscParams:
    p_cross: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_cross < 0.5:
            raise ValidationError(f"crossover must be in [0, 0.5), got {self.p_cross}")


def binary_entropy(p: float) -> float:
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def bsc_exchange_rate_bound(params: BscParams) -> float:
    """1 - H2(p): the exchange rate the identical-linear-code scheme achieves."""
    return 1.0 - binary_entropy(params.p_cross)


@dataclass(eq=False)
class BscRoundtrip:
    """Outcome of one relay round on the binary channel."""

    u_a: np.ndarray
    u_b: np.ndarray
    relay_decoded: np.ndarray        # message bits of the decoded XOR codeword
    relay_error: bool
    u_b_hat_at_a: np.ndarray
    u_a_hat_at_b: np.ndarray
    end_error_a: bool
    end_error_b: bool

    @property
    def error(self) -> bool:
        return self.end_error_a or self.end_error_b


def bsc_relay_roundtrip(
    u_a: np.ndarray,
    u_b: np.ndarray,
    code: BinaryLinearCode,
    params: BscParams,
    rng: np.random.Generator | int,
) -> BscRoundtrip:
    """Uplink XOR decode at the relay, broadcast, XOR-cancel at the ends.

    The relay re-encodes its decoded XOR message for the downlink; both
    downlink legs see independent flips from the same stream.  `rng` may
    be a Generator or a plain integer seed.
    """
    if isinstance(rng, (int, np.integer)):
        rng = generator(int(rng))
    u_a = np.asarray(u_a, dtype=np.int64) % 2
    u_b = np.asarray(u_b, dtype=np.int64) % 2
    x1 = code.encode(u_a)
    x2 = code.encode(u_b)
    flips = rng.random(code.n) < params.p_cross
    y_relay = x1 ^ x2 ^ flips.astype(np.int64)

    m_relay = code.ml_decode(y_relay)
    relay_error = bool(np.any(m_relay != (u_a ^ u_b)))

    x_relay = code.encode(m_relay)
    y_a = x_relay ^ (rng.random(code.n) < params.p_cross).astype(np.int64)
    y_b = x_relay ^ (rng.random(code.n) < params.p_cross).astype(np.int64)

    u_b_hat = code.ml_decode(y_a) ^ u_a
    u_a_hat = code.ml_decode(y_b) ^ u_b
    return BscRoundtrip(
        u_a=u_a, u_b=u_b, relay_decoded=m_relay, relay_error=relay_error,
        u_b_hat_at_a=u_b_hat, u_a_hat_at_b=u_a_hat,
        end_error_a=bool(np.any(u_b_hat != u_b)),
        end_error_b=bool(np.any(u_a_hat != u_a)),
    )


# ---------------------------------------------------------------------------
# Harness experiment
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _cached_code(name: str, n: int, k: int, seed: int) -> BinaryLinearCode:
    if name == "hamming74":
        return hamming74()
    if name == "random":
        return random_code(n, k, seed)
    raise ValidationError(f"unknown code {name!r}; known: hamming74, random")


def bsc_trial(params: Mapping, rng: np.random.Generator) -> Mapping[str, int]:
    """params: p, code ("hamming74" | "random"), and n/k/code_seed for random."""
    code = _cached_code(
        str(params.get("code", "hamming74")),
        int(params.get("n", 7)), int(params.get("k", 4)),
        int(params.get("code_seed", 0)),
    )
    bp = BscParams(float(params["p"]))
    u_a = rng.integers(0, 2, size=code.k)
    u_b = rng.integers(0, 2, size=code.k)
    out = bsc_relay_roundtrip(u_a, u_b, code, bp, rng)
    return {
        "relay_error": int(out.relay_error),
        "end_error": int(out.error),
        "union_error": int(out.relay_error or out.error),
    }


harness.register_experiment("bsc", bsc_trial)

BSC_ERROR_KEYS = ("relay_error", "end_error", "union_error")
