"""Construction-A nested lattice pairs and their modulo arithmetic.

The coarse (shaping) lattice is the scaled integer lattice gamma*q*Z^n,
whose Voronoi region is the half-open hypercube [-gamma*q/2, gamma*q/2)^n
and whose second moment per dimension is (gamma*q)^2/12.  Choosing
gamma = sqrt(12*P)/q makes that second moment equal the transmit power P.

The fine (coding) lattice is gamma*(C + q*Z^n) for a linear code
C = {u*G mod q : u in Z_q^k}.  The codebook is the set of fine points
inside the coarse Voronoi cell; with a systematic generator it has
exactly q^k elements for any modulus q.  All codebook algebra is exact:
points carry integer coordinates in units of gamma ("units"), and the
mod-q fold of an integer vector is computed in integer arithmetic, so
group identities hold with zero tolerance.  A parallel exact-rational
path (`mod_units_exact`) covers non-integer vectors via Fractions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatchError, GuardExceededError, ValidationError
from .rng import generator

ENUMERATION_GUARD = 1 << 20  # max codebook size q**k


# ---------------------------------------------------------------------------
# Coarse lattice
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoarseLattice:
    """Scaled integer lattice gamma*q*Z^n used for shaping and power control."""

    n: int
    q: int
    gamma: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError(f"dimension must be positive, got {self.n}")
        if self.q < 2:
            raise ValidationError(f"modulus must be >= 2, got {self.q}")
        if self.gamma <= 0:
            raise ValidationError(f"shaping scale must be positive, got {self.gamma}")

    @classmethod
    def for_power(cls, n: int, q: int, power: float) -> "CoarseLattice":
        """Pick gamma so the cube second moment equals `power`."""
        if power <= 0:
            raise ValidationError(f"power must be positive, got {power}")
        return cls(n=n, q=q, gamma=math.sqrt(12.0 * power) / q)

    @property
    def cell(self) -> float:
        """Side length gamma*q of the Voronoi hypercube."""
        return self.gamma * self.q

    @property
    def second_moment(self) -> float:
        """Per-dimension second moment (gamma*q)^2 / 12 of the cube."""
        return self.cell ** 2 / 12.0

    @property
    def volume(self) -> float:
        return self.cell ** self.n

    def check_dim(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise DimensionMismatchError(
                f"vector length {x.shape[-1]} does not match lattice dimension {self.n}"
            )
        return x


def mod_coarse(x: np.ndarray, coarse: CoarseLattice) -> np.ndarray:
    """Fold x into the half-open cube [-cell/2, cell/2)^n componentwise.

    Identical to subtracting the nearest coarse lattice point, with the
    upper face excluded so the result is unique for every input.
    """
    x = coarse.check_dim(x)
    cell = coarse.cell
    y = x - cell * np.floor(x / cell + 0.5)
    # Guard against float rounding landing exactly on the excluded face.
    y = np.where(y >= cell / 2, y - cell, y)
    y = np.where(y < -cell / 2, y + cell, y)
    return y


def centered_units(u: np.ndarray, q: int) -> np.ndarray:
    """Integer fold of u into [-q/2, q/2) mod q, exact for any parity of q."""
    u = np.asarray(u)
    return (u + q // 2) % q - q // 2


def mod_units_exact(values: Iterable, q: int) -> tuple[Fraction, ...]:
    """Exact-rational fold into [-q/2, q/2), for zero-tolerance algebra.

    Accepts ints or Fractions (coordinates measured in units of gamma);
    returns Fractions.  Mirrors `mod_coarse` without any floating point.
    """
    out = []
    half = Fraction(1, 2)
    for v in values:
        f = Fraction(v)
        out.append(f - q * math.floor(f / q + half))
    return tuple(out)


# ---------------------------------------------------------------------------
# Dither
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dither:
    """Uniform offset over the coarse Voronoi cube, reproducible from its seed."""

    values: np.ndarray
    seed: int | None = None


def dither_sample(seed: int, coarse: CoarseLattice) -> Dither:
    """Draw one dither vector uniformly over [-cell/2, cell/2)^n from `seed`."""
    rng = generator(seed)
    half = coarse.cell / 2.0
    return Dither(values=rng.uniform(-half, half, size=coarse.n), seed=seed)


def dither_from_rng(rng: np.random.Generator, coarse: CoarseLattice) -> Dither:
    """Dither drawn from a live stream (no standalone seed recorded)."""
    half = coarse.cell / 2.0
    return Dither(values=rng.uniform(-half, half, size=coarse.n), seed=None)


# ---------------------------------------------------------------------------
# Nested pair and codebook
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class LatticePoint:
    """A codebook point: float coordinates plus exact integer gamma-units."""

    coords: np.ndarray
    units: tuple[int, ...]
    index: int | None = None


def _enumerate_messages(q: int, k: int) -> np.ndarray:
    """All q^k messages, ordered by base-q index (least significant digit first)."""
    m = q ** k
    idx = np.arange(m)
    digits = np.empty((m, k), dtype=np.int64)
    for j in range(k):
        digits[:, j] = idx % q
        idx = idx // q
    return digits


@dataclass(eq=False)
class NestedLatticePair:
    """Coarse shaping lattice plus a mod-q linear code defining the fine lattice."""

    coarse: CoarseLattice
    generator_matrix: np.ndarray
    codebook_units: np.ndarray = field(init=False, repr=False)
    codebook_coords: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        G = np.asarray(self.generator_matrix, dtype=np.int64) % self.coarse.q
        if G.ndim != 2 or G.shape[1] != self.coarse.n:
            raise ValidationError(
                f"generator must be k x n with n={self.coarse.n}, got shape {G.shape}"
            )
        self.generator_matrix = G
        q, k = self.coarse.q, G.shape[0]
        if q ** k > ENUMERATION_GUARD:
            raise GuardExceededError(
                f"codebook size {q}^{k} exceeds enumeration guard {ENUMERATION_GUARD}"
            )
        msgs = _enumerate_messages(q, k)
        codewords = msgs @ G % q
        self.codebook_units = centered_units(codewords, q)
        self.codebook_coords = self.coarse.gamma * self.codebook_units.astype(float)
        self._index_of = {
            tuple(int(c) for c in row): i for i, row in enumerate(self.codebook_units)
        }
        if len(self._index_of) != q ** k:
            raise ValidationError(
                "generator does not produce q^k distinct codewords; "
                "use a systematic (full-rank) generator"
            )
        # Full code <=> fine lattice is gamma*Z^n; quantization then separates
        # per coordinate, which keeps uncoded high-rate instances fast.
        self._is_full_code = len(self._index_of) == q ** self.coarse.n

    @property
    def n(self) -> int:
        return self.coarse.n

    @property
    def q(self) -> int:
        return self.coarse.q

    @property
    def k(self) -> int:
        return int(self.generator_matrix.shape[0])

    @property
    def size(self) -> int:
        return self.codebook_units.shape[0]

    @property
    def rate(self) -> float:
        """Coding rate (k/n) log2 q in bits per dimension."""
        return self.k / self.n * math.log2(self.q)

    @property
    def nesting_ratio(self) -> int:
        """Fine points per coarse cell, V(coarse)/V(fine) = q^k."""
        return self.size

    def index_of_units(self, units: Sequence[int]) -> int:
        return self._index_of[tuple(int(u) for u in units)]

    def point_from_index(self, index: int) -> LatticePoint:
        units = tuple(int(u) for u in self.codebook_units[index])
        return LatticePoint(
            coords=self.codebook_coords[index].copy(), units=units, index=index
        )

    def to_descriptor(self) -> dict:
        """JSON-serializable description {n, q, k, G rows, P}."""
        return {
            "n": self.n,
            "q": self.q,
            "k": self.k,
            "generator": self.generator_matrix.tolist(),
            "power": self.coarse.second_moment,
        }

    @classmethod
    def from_descriptor(cls, desc: dict) -> "NestedLatticePair":
        coarse = CoarseLattice.for_power(desc["n"], desc["q"], desc["power"])
        return cls(coarse=coarse, generator_matrix=np.asarray(desc["generator"]))


def systematic_generator(n: int, k: int, q: int, seed: int | None = None) -> np.ndarray:
    """Systematic generator [I_k | A]; guarantees q^k distinct codewords.

    With seed=None the parity part is the fixed pattern A[i,j] = (i+j+1) mod q;
    with a seed it is drawn uniformly.
    """
    if not 1 <= k <= n:
        raise ValidationError(f"need 1 <= k <= n, got k={k}, n={n}")
    G = np.zeros((k, n), dtype=np.int64)
    G[:, :k] = np.eye(k, dtype=np.int64)
    if n > k:
        if seed is None:
            i, j = np.indices((k, n - k))
            G[:, k:] = (i + j + 1) % q
        else:
            G[:, k:] = generator(seed).integers(0, q, size=(k, n - k))
    return G


def make_pair(
    n: int,
    q: int,
    k: int,
    power: float = 1.0,
    generator_matrix: Sequence[Sequence[int]] | None = None,
    seed: int | None = None,
) -> NestedLatticePair:
    """Convenience constructor from plain parameters."""
    coarse = CoarseLattice.for_power(n, q, power)
    if generator_matrix is None:
        generator_matrix = systematic_generator(n, k, q, seed=seed)
    return NestedLatticePair(coarse=coarse, generator_matrix=np.asarray(generator_matrix))


# ---------------------------------------------------------------------------
# Codebook operations
# ---------------------------------------------------------------------------

def encode_message(index: int, pair: NestedLatticePair) -> LatticePoint:
    """Bijective base-q map from an integer message index to a codebook point."""
    if not 0 <= index < pair.size:
        raise ValidationError(f"message index {index} outside [0, {pair.size})")
    return pair.point_from_index(index)


def wrapped_sq_distances(x: np.ndarray, pair: NestedLatticePair) -> np.ndarray:
    """Squared torus distance from x to every codebook point.

    Because the coarse lattice is a coordinate product, the minimum over
    all coarse translates separates per component into a centered fold.
    """
    x = pair.coarse.check_dim(x)
    diffs = mod_coarse(x[None, :] - pair.codebook_coords, pair.coarse)
    return np.einsum("ij,ij->i", diffs, diffs)


def quantize_fine(x: np.ndarray, pair: NestedLatticePair) -> LatticePoint:
    """Nearest fine-lattice point to x, folded into the coarse cell.

    Distance is measured to every fine representative (codebook point plus
    coarse translates); exact ties resolve to the lowest codebook index.
    """
    x = pair.coarse.check_dim(x)
    if pair._is_full_code:
        units = centered_units(np.rint(x / pair.coarse.gamma).astype(np.int64), pair.q)
        return pair.point_from_index(pair.index_of_units(units))
    idx = int(np.argmin(wrapped_sq_distances(x, pair)))
    return pair.point_from_index(idx)


def modulo_sum(a: LatticePoint, b: LatticePoint, pair: NestedLatticePair) -> LatticePoint:
    """(a + b) mod coarse, computed exactly in integer gamma-units."""
    units = centered_units(
        np.asarray(a.units, dtype=np.int64) + np.asarray(b.units, dtype=np.int64),
        pair.q,
    )
    return pair.point_from_index(pair.index_of_units(units))


def modulo_diff(a: LatticePoint, b: LatticePoint, pair: NestedLatticePair) -> LatticePoint:
    """(a - b) mod coarse, exact; inverse of `modulo_sum` in its second slot."""
    units = centered_units(
        np.asarray(a.units, dtype=np.int64) - np.asarray(b.units, dtype=np.int64),
        pair.q,
    )
    return pair.point_from_index(pair.index_of_units(units))


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeDiagnostics:
    second_moment: float          # exact, coarse cube
    volume: float                 # exact, coarse cube
    normalized_second_moment: float
    covering_radius_est: float    # Monte Carlo lower estimate, fine lattice
    effective_radius: float       # same-volume ball radius, fine lattice


def _unit_ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def diagnostics(
    pair: NestedLatticePair, samples: int = 2000, seed: int = 0
) -> LatticeDiagnostics:
    """Exact cube statistics plus sampled covering radius of the fine lattice.

    The covering-radius estimate is the max distance from `samples` uniform
    points in the coarse cell to their nearest fine point, a lower bound
    that tightens as samples grow.
    """
    coarse = pair.coarse
    sigma2 = coarse.second_moment
    vol = coarse.volume
    nsm = sigma2 / vol ** (2.0 / coarse.n)
    rng = generator(seed)
    half = coarse.cell / 2.0
    pts = rng.uniform(-half, half, size=(samples, coarse.n))
    worst = 0.0
    for p in pts:
        d2 = float(np.min(wrapped_sq_distances(p, pair)))
        if d2 > worst:
            worst = d2
    fine_volume = vol / pair.size
    r_eff = (fine_volume / _unit_ball_volume(coarse.n)) ** (1.0 / coarse.n)
    return LatticeDiagnostics(
        second_moment=sigma2,
        volume=vol,
        normalized_second_moment=nsm,
        covering_radius_est=math.sqrt(worst),
        effective_radius=r_eff,
    )
