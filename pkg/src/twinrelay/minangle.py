"""Ball-intersection codebooks, shell projection, and minimum-angle decoding.

Codewords are points of a translated scaled integer lattice inside the
closed ball of radius sqrt(n*P).  The receiver cares only about the sum
x1 + x2, which for large n concentrates on a thin shell around radius
sqrt(2*n*P); the minimum-angle decoder projects candidates onto that
shell and picks the one at the smallest angle to the received vector,
discarding radial information.  Off-shell sums are counted as automatic
decoder losses, mirroring the union-bound accounting that motivates the
decoder, and are also reported separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Mapping

import numpy as np

from . import harness
from .errors import DirectionCollisionError, GuardExceededError, ValidationError

BALL_GUARD = 100_000        # max points per ball codebook
PAIR_GUARD = 10_000_000     # max enumerated codeword pairs
_CONC_BATCH = 1000          # pair draws per concentration trial


@dataclass(frozen=True)
class ShellSpec:
    """Thin spherical shell around radius sqrt(2*n*P) with half-width delta."""

    n: int
    power: float
    delta: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError(f"dimension must be >= 1, got {self.n}")
        if not 0.0 < self.delta < 2.0 * self.power:
            raise ValidationError(
                f"delta must lie in (0, 2P) = (0, {2 * self.power}), got {self.delta}"
            )

    @property
    def r_inner(self) -> float:
        return math.sqrt(self.n * (2.0 * self.power - self.delta))

    @property
    def r_target(self) -> float:
        return math.sqrt(self.n * 2.0 * self.power)

    @property
    def r_outer(self) -> float:
        return math.sqrt(self.n * (2.0 * self.power + self.delta))

    def contains_sq(self, norm_sq) -> np.ndarray:
        lo = self.n * (2.0 * self.power - self.delta)
        hi = self.n * (2.0 * self.power + self.delta)
        arr = np.asarray(norm_sq)
        return (arr >= lo) & (arr <= hi)


def sin_theta(power: float, sigma2: float, delta: float = 0.0) -> float:
    """Asymptotic sine of the noise cone half-angle: sqrt(s2/(2P - delta + s2))."""
    return math.sqrt(sigma2 / (2.0 * power - delta + sigma2))


@dataclass(eq=False)
class BallCodebook:
    """Points of gamma*Z^n + s inside the closed ball of radius sqrt(n*P)."""

    gamma: float
    translation: np.ndarray
    power: float
    units: np.ndarray = field(init=False, repr=False)
    points: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        s = np.asarray(self.translation, dtype=float)
        n = s.shape[0]
        if self.gamma <= 0 or self.power <= 0:
            raise ValidationError("gamma and power must be positive")
        self.translation = s
        radius = math.sqrt(n * self.power)
        # Bounding-box sweep: every coordinate of an in-ball point satisfies
        # |gamma*m + s_i| <= radius, so the integer ranges below are complete.
        ranges = []
        box_count = 1
        for i in range(n):
            lo = math.ceil((-radius - s[i]) / self.gamma)
            hi = math.floor((radius - s[i]) / self.gamma)
            ranges.append(range(lo, hi + 1))
            box_count *= max(0, hi - lo + 1)
        if box_count > 20 * BALL_GUARD:
            raise GuardExceededError(f"bounding box of {box_count} points is too large")
        units = np.array([m for m in product(*ranges)], dtype=np.int64).reshape(-1, n)
        pts = self.gamma * units + s
        keep = np.einsum("ij,ij->i", pts, pts) <= n * self.power + 1e-12
        self.units = units[keep]
        self.points = pts[keep]
        if self.size > BALL_GUARD:
            raise GuardExceededError(f"ball codebook size {self.size} exceeds {BALL_GUARD}")
        if self.size == 0:
            raise ValidationError("ball codebook is empty; increase power or shrink gamma")

    @property
    def n(self) -> int:
        return int(self.translation.shape[0])

    @property
    def size(self) -> int:
        return int(self.units.shape[0])


def half_cell_codebook(n: int, gamma: float, power: float) -> BallCodebook:
    """Default construction: translation at the center of the fundamental cell."""
    return BallCodebook(gamma=gamma, translation=np.full(n, gamma / 2.0), power=power)


@dataclass(eq=False)
class SumCodebook:
    """All pairwise sums of two ball codebooks, partitioned by shell membership."""

    shell: ShellSpec
    sum_units: np.ndarray        # distinct sums, integer units
    sum_points: np.ndarray       # distinct sums, coordinates
    pair_counts: np.ndarray      # pairs mapping to each distinct sum
    on_shell: np.ndarray         # bool per distinct sum
    m1: int
    m2: int

    @classmethod
    def from_codebooks(
        cls, cb1: BallCodebook, cb2: BallCodebook, shell: ShellSpec
    ) -> "SumCodebook":
        if cb1.n != cb2.n:
            raise ValidationError("codebook dimensions differ")
        total = cb1.size * cb2.size
        if total > PAIR_GUARD:
            raise GuardExceededError(f"{total} pairs exceed guard {PAIR_GUARD}")
        combined = (cb1.units[:, None, :] + cb2.units[None, :, :]).reshape(total, cb1.n)
        uniq, counts = np.unique(combined, axis=0, return_counts=True)
        offset = cb1.translation + cb2.translation
        pts = cb1.gamma * uniq + offset
        norms = np.einsum("ij,ij->i", pts, pts)
        return cls(
            shell=shell, sum_units=uniq, sum_points=pts,
            pair_counts=counts, on_shell=shell.contains_sq(norms),
            m1=cb1.size, m2=cb2.size,
        )

    @property
    def pairs_total(self) -> int:
        return self.m1 * self.m2

    @property
    def pairs_on_shell(self) -> int:
        return int(self.pair_counts[self.on_shell].sum())

    @property
    def pairs_off_shell(self) -> int:
        return int(self.pair_counts[~self.on_shell].sum())

    def shell_points(self) -> np.ndarray:
        return self.sum_points[self.on_shell]


def project_to_shell(x: np.ndarray, spec: ShellSpec) -> np.ndarray:
    """Scale x onto the inner shell sphere of radius sqrt(n(2P - delta))."""
    x = np.asarray(x, dtype=float)
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        raise ValidationError("cannot project the zero vector")
    return (spec.r_inner / norm) * x


def min_angle_decode(y: np.ndarray, points: np.ndarray, spec: ShellSpec | None = None) -> int:
    """Index of the candidate at minimum angle to y; ties to the lowest index.

    Equivalent to nearest-projection decoding: the angle to a point equals
    the angle to its shell projection, so candidates may be passed either
    raw or projected.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValidationError("candidate set must be a non-empty 2-D array")
    y = np.asarray(y, dtype=float)
    cosines = points @ y / np.linalg.norm(points, axis=1)
    return int(np.argmax(cosines))


def check_distinct_directions(points: np.ndarray, tol: float = 1e-9) -> None:
    """Abort if two distinct candidates share a direction (angle decoding ambiguous)."""
    pts = np.asarray(points, dtype=float)
    unit = pts / np.linalg.norm(pts, axis=1, keepdims=True)
    gram = unit @ unit.T
    np.fill_diagonal(gram, 0.0)
    i, j = np.unravel_index(int(np.argmax(gram)), gram.shape)
    if gram[i, j] >= 1.0 - tol:
        raise DirectionCollisionError(
            f"sum points {i} and {j} are collinear (cos = {gram[i, j]:.12f}); "
            "choose different translations or a thinner shell"
        )


# ---------------------------------------------------------------------------
# Concentration of x1 + x2 on the shell
# ---------------------------------------------------------------------------

def ball_sample(rng: np.random.Generator, n: int, radius: float, count: int) -> np.ndarray:
    """Uniform draws from the n-ball via direction + radial inverse CDF."""
    g = rng.normal(size=(count, n))
    norms = np.linalg.norm(g, axis=1, keepdims=True)
    directions = g / norms
    radii = radius * rng.random(count) ** (1.0 / n)
    return directions * radii[:, None]


def concentration_trial(params: Mapping, rng: np.random.Generator) -> Mapping[str, int]:
    """One batch of uniform ball pairs; counts sums falling off the shell."""
    n = int(params["n"])
    power = float(params.get("power", 1.0))
    delta = float(params["delta"])
    batch = int(params.get("batch", _CONC_BATCH))
    shell = ShellSpec(n=n, power=power, delta=delta)
    radius = math.sqrt(n * power)
    u = ball_sample(rng, n, radius, batch)
    v = ball_sample(rng, n, radius, batch)
    s = u + v
    norms = np.einsum("ij,ij->i", s, s)
    off = int(np.count_nonzero(~shell.contains_sq(norms)))
    return {"off_shell": off, "samples": batch}


harness.register_experiment("concentration", concentration_trial)


@dataclass(frozen=True)
class ConcentrationResult:
    n: int
    power: float
    delta: float
    samples: int
    off_shell: int
    fraction: float
    ci_low: float
    ci_high: float


def concentration_experiment(
    n: int, power: float, delta: float, samples: int, seed: int, workers: int = 1
) -> ConcentrationResult:
    """Monte Carlo estimate of the off-shell fraction of uniform ball-pair sums.

    Samples are drawn in fixed batches of 1000 pairs per derived stream;
    `samples` rounds up to a whole number of batches.
    """
    if samples < 1000:
        raise ValidationError("need at least 1000 samples")
    trials = (samples + _CONC_BATCH - 1) // _CONC_BATCH
    spec = harness.ExperimentSpec(
        name="concentration",
        params={"n": n, "power": power, "delta": delta, "batch": _CONC_BATCH},
        error_keys=(),
    )
    report = harness.run_trials(spec, trials=trials, master_seed=seed, workers=workers)
    total = int(report.counts["samples"])
    off = int(report.counts["off_shell"])
    lo, hi = harness.wilson_interval(off, total)
    return ConcentrationResult(
        n=n, power=power, delta=delta, samples=total, off_shell=off,
        fraction=off / total, ci_low=lo, ci_high=hi,
    )


def concentration_exact(cb1: BallCodebook, cb2: BallCodebook, delta: float) -> float:
    """Exact off-shell pair fraction for enumerated codebooks."""
    shell = ShellSpec(n=cb1.n, power=cb1.power, delta=delta)
    sums = SumCodebook.from_codebooks(cb1, cb2, shell)
    return sums.pairs_off_shell / sums.pairs_total


# ---------------------------------------------------------------------------
# Decoder error rate experiment
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def _decoder_instance(n: int, gamma: float, power: float, delta: float,
                      s1: tuple | None, s2: tuple | None):
    t1 = np.full(n, gamma / 2.0) if s1 is None else np.asarray(s1, dtype=float)
    t2 = np.full(n, gamma / 2.0) if s2 is None else np.asarray(s2, dtype=float)
    cb1 = BallCodebook(gamma=gamma, translation=t1, power=power)
    cb2 = BallCodebook(gamma=gamma, translation=t2, power=power)
    shell = ShellSpec(n=n, power=power, delta=delta)
    sums = SumCodebook.from_codebooks(cb1, cb2, shell)
    shell_pts = sums.shell_points()
    if shell_pts.shape[0] == 0:
        raise ValidationError("no sum points on the shell; widen delta")
    if shell_pts.shape[0] > 1:
        check_distinct_directions(shell_pts)
    # Map each (i, j) pair to its row in the distinct-sum table.
    order = {tuple(int(v) for v in row): r for r, row in enumerate(sums.sum_units)}
    pair_to_sum = np.empty((cb1.size, cb2.size), dtype=np.int64)
    for i in range(cb1.size):
        for j in range(cb2.size):
            pair_to_sum[i, j] = order[tuple(int(v) for v in (cb1.units[i] + cb2.units[j]))]
    shell_row_of_sum = np.full(sums.sum_units.shape[0], -1, dtype=np.int64)
    shell_row_of_sum[sums.on_shell] = np.arange(int(sums.on_shell.sum()))
    return cb1, cb2, sums, shell_pts, pair_to_sum, shell_row_of_sum


def minangle_trial(params: Mapping, rng: np.random.Generator) -> Mapping[str, int]:
    """One random pair through AWGN, angle-decoded among on-shell sums.

    Reports the union-bound total error (off-shell sums count as losses),
    the on-shell-conditioned error, and an unrestricted nearest-sum ML
    reference decoded over every distinct sum.
    """
    n = int(params["n"])
    gamma = float(params.get("gamma", 1.0))
    power = float(params["power"])
    sigma2 = float(params["sigma2"])
    delta = float(params["delta"])
    s1 = params.get("s1")
    s2 = params.get("s2")
    cb1, cb2, sums, shell_pts, pair_to_sum, shell_row = _decoder_instance(
        n, gamma, power, delta,
        tuple(s1) if s1 is not None else None,
        tuple(s2) if s2 is not None else None,
    )
    i = int(rng.integers(cb1.size))
    j = int(rng.integers(cb2.size))
    true_sum_row = int(pair_to_sum[i, j])
    y = cb1.points[i] + cb2.points[j]
    if sigma2 > 0:
        y = y + rng.normal(0.0, math.sqrt(sigma2), size=n)

    ml_row = int(np.argmin(np.einsum("ij,ij->i", sums.sum_points - y, sums.sum_points - y)))
    ml_error = int(ml_row != true_sum_row)

    if sums.on_shell[true_sum_row]:
        decoded_shell = min_angle_decode(y, shell_pts)
        wrong = int(decoded_shell != shell_row[true_sum_row])
        return {"angle_error": wrong, "angle_error_on_shell": wrong,
                "off_shell": 0, "ml_error": ml_error}
    return {"angle_error": 1, "angle_error_on_shell": 0,
            "off_shell": 1, "ml_error": ml_error}


harness.register_experiment("minangle", minangle_trial)

MINANGLE_ERROR_KEYS = ("angle_error", "ml_error")


@dataclass(frozen=True)
class MinAngleStats:
    n: int
    gamma: float
    power: float
    sigma2: float
    delta: float
    theta: float
    trials: int
    errors: int
    errors_on_shell: int
    off_shell_trials: int
    ml_errors: int
    m1: int
    m2: int
    msum_on_shell: int

    def to_dict(self) -> dict:
        return {
            "n": self.n, "gamma": self.gamma, "P": self.power,
            "sigma2": self.sigma2, "delta": self.delta, "theta": self.theta,
            "trials": self.trials, "errors": self.errors,
            "errors_on_shell": self.errors_on_shell,
            "off_shell_trials": self.off_shell_trials,
            "ml_errors": self.ml_errors,
            "M1": self.m1, "M2": self.m2, "Msum_on_shell": self.msum_on_shell,
        }


def min_angle_error_rate(
    n: int,
    gamma: float,
    power: float,
    sigma2: float,
    trials: int,
    seed: int,
    delta: float | None = None,
    workers: int = 1,
) -> MinAngleStats:
    """Monte Carlo sum-decode error of the minimum-angle decoder.

    delta defaults to 0.1*P.  The run aborts up front if two on-shell sums
    share a direction.
    """
    if delta is None:
        delta = 0.1 * power
    params = {"n": n, "gamma": gamma, "power": power, "sigma2": sigma2, "delta": delta}
    _, _, sums, shell_pts, _, _ = _decoder_instance(n, gamma, power, delta, None, None)
    spec = harness.ExperimentSpec(name="minangle", params=params,
                                  error_keys=MINANGLE_ERROR_KEYS)
    report = harness.run_trials(spec, trials=trials, master_seed=seed, workers=workers)
    theta = math.asin(sin_theta(power, sigma2, delta)) if sigma2 > 0 else 0.0
    return MinAngleStats(
        n=n, gamma=gamma, power=power, sigma2=sigma2, delta=delta, theta=theta,
        trials=report.trials,
        errors=int(report.counts.get("angle_error", 0)),
        errors_on_shell=int(report.counts.get("angle_error_on_shell", 0)),
        off_shell_trials=int(report.counts.get("off_shell", 0)),
        ml_errors=int(report.counts.get("ml_error", 0)),
        m1=sums.m1, m2=sums.m2,
        msum_on_shell=int(np.count_nonzero(sums.on_shell)),
    )
