"""Closed-form exchange rates, the time-sharing envelope, and curve export.

All rates are in bits per transmitter per channel use of each phase, as
functions of the linear uplink/downlink SNR.  The envelope concavifies
max(R_jd, R_lattice) over linear SNR: operating the joint-decoding
scheme a fraction beta of the time at SNR s_lo and the lattice scheme
the rest at s_hi, with beta*s_lo + (1-beta)*s_hi equal to the average
SNR, traces the common tangent between the two curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .errors import ValidationError

LN2 = math.log(2.0)


def _check_snr(snr: float) -> float:
    if snr < 0:
        raise ValidationError(f"snr must be >= 0, got {snr}")
    return float(snr)


def rate_upper(snr: float) -> float:
    """Cut-set bound (1/2) log2(1 + snr)."""
    return 0.5 * math.log2(1.0 + _check_snr(snr))


def rate_lattice(snr: float) -> float:
    """Lattice scheme rate max(0, (1/2) log2(1/2 + snr)); zero below snr = 1/2."""
    return max(0.0, 0.5 * math.log2(0.5 + _check_snr(snr)))


def rate_joint_decoding(snr: float) -> float:
    """Time-shared joint decoding at doubled power: (1/4) log2(1 + 2 snr)."""
    return 0.25 * math.log2(1.0 + 2.0 * _check_snr(snr))


def rate_anc(snr: float) -> float:
    """Amplify-and-forward baseline (1/2) log2(1 + snr^2/(3 snr + 1))."""
    s = _check_snr(snr)
    return 0.5 * math.log2(1.0 + s * s / (3.0 * s + 1.0))


def rate_pure_nc(snr: float) -> float:
    """Three-slot store-and-forward network coding: (1/3) log2(1 + snr).

    The 2n channel uses split into three equal slots (uplink A, uplink B,
    XOR broadcast), each carrying the same k bits over 2n/3 uses; per the
    two-phase normalization of n uses each, that is (1/3) log2(1 + snr).
    """
    return (1.0 / 3.0) * math.log2(1.0 + _check_snr(snr))


def _d_rate_jd(s: float) -> float:
    return 1.0 / (2.0 * LN2 * (1.0 + 2.0 * s))


def _d_rate_lattice(s: float) -> float:
    return 1.0 / (2.0 * LN2 * (0.5 + s))


@lru_cache(maxsize=1)
def _tangent_points(tol: float = 1e-12) -> tuple[float, float, float]:
    """Solve the common tangent of R_jd and R_lattice over linear snr.

    Equal slopes force s_hi = 2*s_lo + 1/2; the remaining chord condition
    g(s_lo) = R_lattice(s_hi) - R_jd(s_lo) - slope*(s_hi - s_lo) = 0 is
    solved by bisection plus a Newton polish.  Returns (s_lo, s_hi, slope).
    """

    def g(s_lo: float) -> float:
        s_hi = 2.0 * s_lo + 0.5
        slope = _d_rate_jd(s_lo)
        return rate_lattice(s_hi) - rate_joint_decoding(s_lo) - slope * (s_hi - s_lo)

    lo, hi = 0.55, 5.0
    glo, ghi = g(lo), g(hi)
    if glo * ghi > 0:
        raise RuntimeError("tangency bracket failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if glo * gm <= 0:
            hi, ghi = mid, gm
        else:
            lo, glo = mid, gm
        if hi - lo < 1e-13:
            break
    s = 0.5 * (lo + hi)
    for _ in range(8):  # Newton polish with a numerical derivative
        h = 1e-7
        deriv = (g(s + h) - g(s - h)) / (2.0 * h)
        if deriv == 0:
            break
        s = s - g(s) / deriv
    if abs(g(s)) > tol:
        raise RuntimeError(f"tangency solve residual {g(s):.3e} above {tol:.0e}")
    return s, 2.0 * s + 0.5, _d_rate_jd(s)


def crossover_window() -> tuple[float, float]:
    """dB window inside which time sharing beats both pure schemes."""
    s_lo, s_hi, _ = _tangent_points()
    return 10.0 * math.log10(s_lo), 10.0 * math.log10(s_hi)


def envelope(snr: float) -> tuple[float, float]:
    """Best time-shared rate at `snr` and the joint-decoding share beta*.

    Outside the tangent window this equals the better pure scheme with
    beta* pinned to 1 (below) or 0 (above).
    """
    s = _check_snr(snr)
    s_lo, s_hi, slope = _tangent_points()
    if s <= s_lo:
        return rate_joint_decoding(s), 1.0
    if s >= s_hi:
        return rate_lattice(s), 0.0
    beta = (s_hi - s) / (s_hi - s_lo)
    return rate_joint_decoding(s_lo) + slope * (s - s_lo), beta


@dataclass(frozen=True)
class RatePoint:
    snr: float
    snr_db: float
    upper: float
    lattice: float
    jd: float
    anc: float
    pure_nc: float
    envelope: float
    beta_star: float


def rate_point(snr_db: float) -> RatePoint:
    snr = 10.0 ** (snr_db / 10.0)
    env, beta = envelope(snr)
    return RatePoint(
        snr=snr, snr_db=snr_db,
        upper=rate_upper(snr), lattice=rate_lattice(snr),
        jd=rate_joint_decoding(snr), anc=rate_anc(snr),
        pure_nc=rate_pure_nc(snr), envelope=env, beta_star=beta,
    )


@dataclass(frozen=True)
class GridSpec:
    snr_db_min: float
    snr_db_max: float
    step_db: float

    def __post_init__(self) -> None:
        if self.step_db <= 0:
            raise ValidationError(f"grid step must be positive, got {self.step_db}")
        if self.snr_db_max < self.snr_db_min:
            raise ValidationError("grid max below min")

    def points(self) -> list[float]:
        count = int(math.floor((self.snr_db_max - self.snr_db_min) / self.step_db + 1e-9)) + 1
        return [self.snr_db_min + i * self.step_db for i in range(count)]


@dataclass(frozen=True)
class RateCurve:
    grid: GridSpec
    points: tuple[RatePoint, ...]


CSV_HEADER = "snr_db,upper,lattice,jd,envelope,anc,purenc,beta_star"


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def rate_curve(grid: GridSpec) -> RateCurve:
    return RateCurve(grid=grid, points=tuple(rate_point(db) for db in grid.points()))


def curve_csv(curve: RateCurve) -> str:
    lines = [CSV_HEADER]
    for p in curve.points:
        lines.append(",".join(_fmt(v) for v in (
            p.snr_db, p.upper, p.lattice, p.jd, p.envelope, p.anc, p.pure_nc, p.beta_star,
        )))
    return "\n".join(lines) + "\n"


def emit_curve(grid: GridSpec, path: str) -> RateCurve:
    """Write the CSV (header plus one row per grid point) and return the curve."""
    curve = rate_curve(grid)
    text = curve_csv(curve)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return curve
