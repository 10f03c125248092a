"""Two-way exchange through a relay with nested-lattice compute-and-forward.

Uplink: both end nodes map message indices onto codebook points, subtract
their dithers mod the coarse lattice, and transmit simultaneously.  The
relay scales the superposition by the MMSE coefficient
alpha = 2P/(2P + sigma2), re-adds the dithers, folds mod the coarse
lattice, and quantizes to the fine lattice.  In noiseless arithmetic this
collapses exactly to (t1 + t2) mod coarse, so the relay learns only the
modulo sum.  Downlink: the sum point reaches the end nodes (either as an
ideally coded index, or retransmitted through AWGN and lattice-decoded),
and each node cancels its own point mod the coarse lattice to recover the
other message.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Mapping

import numpy as np

from . import harness
from .errors import ValidationError
from .lattice import (
    Dither,
    LatticePoint,
    NestedLatticePair,
    dither_from_rng,
    dither_sample,
    encode_message,
    make_pair,
    mod_coarse,
    modulo_diff,
    modulo_sum,
    quantize_fine,
)
from .rng import TAG_DITHER, TAG_NOISE, derive_seed, generator


@dataclass(frozen=True)
class ChannelParams:
    """Per-dimension power and noise variance with the derived MMSE quantities.

    sigma2 = 0 is the exact noiseless limit, where the scaling coefficient
    is forced to 1 and the relay algebra is exact.
    """

    power: float
    sigma2: float

    def __post_init__(self) -> None:
        if self.power <= 0:
            raise ValidationError(f"power must be positive, got {self.power}")
        if self.sigma2 < 0:
            raise ValidationError(f"noise variance must be >= 0, got {self.sigma2}")

    @classmethod
    def from_snr_db(cls, snr_db: float | None, power: float = 1.0) -> "ChannelParams":
        """snr_db=None means noiseless."""
        if snr_db is None:
            return cls(power=power, sigma2=0.0)
        return cls(power=power, sigma2=power / 10.0 ** (snr_db / 10.0))

    @property
    def snr(self) -> float:
        return math.inf if self.sigma2 == 0 else self.power / self.sigma2

    @property
    def snr_db(self) -> float:
        return math.inf if self.sigma2 == 0 else 10.0 * math.log10(self.snr)

    @property
    def alpha_opt(self) -> float:
        """MMSE scaling 2P/(2P + sigma2); equals 1 in the noiseless limit."""
        return 2.0 * self.power / (2.0 * self.power + self.sigma2)

    @property
    def sigma2_eq(self) -> float:
        """Equivalent-noise variance 2*P*sigma2/(2P + sigma2) at alpha_opt."""
        return 2.0 * self.power * self.sigma2 / (2.0 * self.power + self.sigma2)


def sigma2_eq_of_alpha(alpha: float, params: ChannelParams) -> float:
    """Equivalent-noise variance alpha^2*sigma2 + (1-alpha)^2*2P for any scaling."""
    return alpha ** 2 * params.sigma2 + (1.0 - alpha) ** 2 * 2.0 * params.power


class BroadcastMode(Enum):
    DIRECT_LATTICE_RELAY = "direct"
    INDEX_FORWARD_IDEAL = "index"


@dataclass(eq=False)
class ExchangeTranscript:
    """Everything observable in one uplink + downlink round."""

    u_a: int
    u_b: int
    t1: LatticePoint
    t2: LatticePoint
    d1: Dither
    d2: Dither
    x1: np.ndarray
    x2: np.ndarray
    y_relay: np.ndarray
    relay_decoded: LatticePoint
    recovered_at_a: LatticePoint | None
    recovered_at_b: LatticePoint | None
    u_b_hat_at_a: int | None
    u_a_hat_at_b: int | None
    relay_error: bool
    broadcast_failed: bool
    end_error_a: bool
    end_error_b: bool

    @property
    def error(self) -> bool:
        """Union error: either node failed to recover the other's message."""
        return self.end_error_a or self.end_error_b


def encode_node(u: int, d: Dither, pair: NestedLatticePair) -> np.ndarray:
    """Transmit signal (t_u - d) mod coarse; uniform over the cell, power P."""
    t = encode_message(u, pair)
    return mod_coarse(t.coords - d.values, pair.coarse)


def relay_decode_sum(
    y_relay: np.ndarray,
    d1: Dither,
    d2: Dither,
    params: ChannelParams,
    pair: NestedLatticePair,
) -> LatticePoint:
    """Estimate (t1 + t2) mod coarse from the relay observation."""
    pre = mod_coarse(params.alpha_opt * np.asarray(y_relay, dtype=float)
                     + d1.values + d2.values, pair.coarse)
    return quantize_fine(pre, pair)


def recover_at_node(
    t_hat: LatticePoint, own: LatticePoint, pair: NestedLatticePair
) -> LatticePoint:
    """(t_hat - own) mod coarse; inverts the modulo sum given one summand."""
    return modulo_diff(t_hat, own, pair)


def run_session(
    u_a: int,
    u_b: int,
    params: ChannelParams,
    pair: NestedLatticePair,
    mode: BroadcastMode = BroadcastMode.INDEX_FORWARD_IDEAL,
    seed: int = 0,
    session: int = 0,
) -> ExchangeTranscript:
    """One full exchange round with seed-derived dithers and noise.

    Dither streams derive from (seed, session, node id), modeling dithers
    known at every node through seed sharing.  Errors are recorded in the
    transcript, never raised.
    """
    d1 = dither_sample(derive_seed(seed, session, TAG_DITHER, 1), pair.coarse)
    d2 = dither_sample(derive_seed(seed, session, TAG_DITHER, 2), pair.coarse)
    noise_rng = generator(seed, session, TAG_NOISE)
    return _session_core(u_a, u_b, params, pair, mode, d1, d2, noise_rng)


def _session_core(
    u_a: int,
    u_b: int,
    params: ChannelParams,
    pair: NestedLatticePair,
    mode: BroadcastMode,
    d1: Dither,
    d2: Dither,
    noise_rng: np.random.Generator,
) -> ExchangeTranscript:
    t1 = encode_message(u_a, pair)
    t2 = encode_message(u_b, pair)
    x1 = mod_coarse(t1.coords - d1.values, pair.coarse)
    x2 = mod_coarse(t2.coords - d2.values, pair.coarse)

    sigma = math.sqrt(params.sigma2)
    y_relay = x1 + x2
    if sigma > 0:
        y_relay = y_relay + noise_rng.normal(0.0, sigma, size=pair.n)

    t_hat = relay_decode_sum(y_relay, d1, d2, params, pair)
    t_true = modulo_sum(t1, t2, pair)
    relay_error = t_hat.index != t_true.index

    broadcast_failed = False
    if mode is BroadcastMode.INDEX_FORWARD_IDEAL:
        # Ideal downlink code: reliable iff the codebook rate clears the
        # point-to-point capacity (1/2) log2(1 + snr).
        capacity = math.inf if params.sigma2 == 0 else 0.5 * math.log2(1.0 + params.snr)
        if pair.rate < capacity:
            t_at_a = t_hat
            t_at_b = t_hat
        else:
            broadcast_failed = True
            t_at_a = None
            t_at_b = None
    else:
        # Relay retransmits the sum point; each node lattice-decodes it and
        # then cancels its own point.
        t_at_a = _direct_downlink(t_hat, sigma, pair, noise_rng)
        t_at_b = _direct_downlink(t_hat, sigma, pair, noise_rng)

    if t_at_a is None or t_at_b is None:
        rec_a = rec_b = None
        u_b_hat = u_a_hat = None
        end_a = end_b = True
    else:
        rec_a = recover_at_node(t_at_a, t1, pair)
        rec_b = recover_at_node(t_at_b, t2, pair)
        u_b_hat = rec_a.index
        u_a_hat = rec_b.index
        end_a = u_b_hat != u_b
        end_b = u_a_hat != u_a

    return ExchangeTranscript(
        u_a=u_a, u_b=u_b, t1=t1, t2=t2, d1=d1, d2=d2, x1=x1, x2=x2,
        y_relay=y_relay, relay_decoded=t_hat,
        recovered_at_a=rec_a, recovered_at_b=rec_b,
        u_b_hat_at_a=u_b_hat, u_a_hat_at_b=u_a_hat,
        relay_error=relay_error, broadcast_failed=broadcast_failed,
        end_error_a=end_a, end_error_b=end_b,
    )


def _direct_downlink(
    t_hat: LatticePoint, sigma: float, pair: NestedLatticePair,
    noise_rng: np.random.Generator,
) -> LatticePoint:
    y = t_hat.coords.copy()
    if sigma > 0:
        y = y + noise_rng.normal(0.0, sigma, size=pair.n)
    return quantize_fine(mod_coarse(y, pair.coarse), pair)


# ---------------------------------------------------------------------------
# Harness experiment
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _cached_pair(n: int, q: int, k: int, power: float, gen_rows: tuple | None) -> NestedLatticePair:
    gen = None if gen_rows is None else np.asarray(gen_rows)
    return make_pair(n=n, q=q, k=k, power=power, generator_matrix=gen)


def pair_from_params(params: Mapping) -> NestedLatticePair:
    gen = params.get("generator")
    gen_rows = tuple(tuple(int(v) for v in row) for row in gen) if gen is not None else None
    return _cached_pair(
        int(params["n"]), int(params["q"]), int(params.get("k", 1)),
        float(params.get("power", 1.0)), gen_rows,
    )


def lattice_exchange_trial(params: Mapping, rng: np.random.Generator) -> Mapping[str, int]:
    """One exchange round; message, dithers, and noise all from `rng`.

    params: n, q, k, snr_db (None for noiseless), power, mode ("index"|"direct"),
    optional generator rows.
    """
    pair = pair_from_params(params)
    ch = ChannelParams.from_snr_db(params.get("snr_db"), float(params.get("power", 1.0)))
    mode = BroadcastMode(params.get("mode", "index"))
    u_a = int(rng.integers(pair.size))
    u_b = int(rng.integers(pair.size))
    d1 = dither_from_rng(rng, pair.coarse)
    d2 = dither_from_rng(rng, pair.coarse)
    tr = _session_core(u_a, u_b, ch, pair, mode, d1, d2, rng)
    return {
        "relay_error": int(tr.relay_error),
        "end_error": int(tr.error),
        "union_error": int(tr.relay_error or tr.error),
    }


harness.register_experiment("lattice", lattice_exchange_trial)

LATTICE_ERROR_KEYS = ("relay_error", "end_error", "union_error")


def session_batch_record(report: harness.TrialReport) -> dict:
    """JSON-lines summary schema for an exchange batch."""
    p = report.params
    return {
        "seed": report.master_seed,
        "snr_db": p.get("snr_db"),
        "n": p.get("n"),
        "q": p.get("q"),
        "k": p.get("k"),
        "relay_errors": int(report.counts.get("relay_error", 0)),
        "end_errors": int(report.counts.get("end_error", 0)),
        "trials": report.trials,
    }
