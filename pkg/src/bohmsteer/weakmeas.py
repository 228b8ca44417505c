"""Weak-measurement apparatus: forward model and the inverse pipeline.

Forward: a momentum-dependent polarisation phase phi = zeta k_x/k + phi0
sorts photons into right/left circular ports with probabilities
(1 +- sin phi)/2, imaged onto two strips of the camera.

Inverse: fit lobe centers of H- and V-conditioned exposures, cut 321-pixel
windows around the midpoints, normalise each port by its own total and
take arcsin of the contrast. Camera imaging is inverted, so window element
i is sensor pixel [c] - i and sits at x = (c - [c] + i) * pitch / beta.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, stats

HALF_WINDOW = 160
PIXEL_PITCH_MM = 0.013


class FitError(RuntimeError):
    category = "fit"


class WindowError(ValueError):
    category = "window"


class NoNeighborError(LookupError):
    category = "no-neighbor"


@dataclass(frozen=True)
class CouplingModel:
    zeta: float = 336.0
    phi0: float = 0.0

    def __post_init__(self):
        if not self.zeta > 0:
            raise ValueError(f"zeta must be positive, got {self.zeta}")


def phase_of_momentum(k_ratio, model: CouplingModel):
    return model.zeta * np.asarray(k_ratio, dtype=float) + model.phi0


@dataclass(frozen=True)
class SensorLayout:
    """Geometry of one camera strip. ``midline`` is the (fractional) sensor
    pixel onto which x = 0 is imaged."""

    n_pixels: int = 512
    midline: float = 255.5
    pixel_pitch_mm: float = PIXEL_PITCH_MM
    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("magnification beta must be positive")
        if not self.pixel_pitch_mm > 0:
            raise ValueError("pixel pitch must be positive")

    def positions_m(self) -> np.ndarray:
        j = np.arange(self.n_pixels)
        return (self.midline - j) * self.pixel_pitch_mm * 1e-3 / self.beta


@dataclass
class DetectorImage:
    counts: np.ndarray
    plane_z: float
    pixel_pitch_mm: float = PIXEL_PITCH_MM
    magnification_beta: float = 1.0
    center_offset: float | None = None
    seed: int | None = None
    port: str = "R"
    label: str = ""

    def __post_init__(self):
        self.counts = np.asarray(self.counts)
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        if not self.pixel_pitch_mm > 0:
            raise ValueError("pixel pitch must be positive")

    @property
    def total(self) -> float:
        return float(np.sum(self.counts))


def expected_images(field, z: float, model: CouplingModel, photon_budget: float,
                    layout: SensorLayout = SensorLayout()):
    """Noiseless mean counts (mu_R, mu_L) on the two strips; they sum to the budget."""
    if not photon_budget > 0:
        raise ValueError("photon budget must be positive")
    x = layout.positions_m()
    rho = field.state.density(x, z)
    k_ratio = np.ma.filled(field.k_ratio(x, z, strict=False), 0.0)
    phi = phase_of_momentum(k_ratio, model)
    bright = rho > 1e-6 * rho.max()
    if np.any(np.abs(phi[bright]) >= np.pi / 2):
        warnings.warn("polarisation phase leaves the principal arcsin branch", RuntimeWarning)
    scale = photon_budget / (2.0 * rho.sum())
    return scale * rho * (1 + np.sin(phi)), scale * rho * (1 - np.sin(phi))


def synthesize_images(field, z: float, model: CouplingModel, photon_budget: float,
                      rng_seed: int, layout: SensorLayout = SensorLayout(), label: str = ""):
    """Poisson-sampled (R, L) detector images at plane ``z``."""
    mu_r, mu_l = expected_images(field, z, model, photon_budget, layout)
    rng = np.random.default_rng(rng_seed)
    common = dict(plane_z=float(z), pixel_pitch_mm=layout.pixel_pitch_mm,
                  magnification_beta=layout.beta, seed=rng_seed, label=label)
    return (DetectorImage(rng.poisson(mu_r), port="R", **common),
            DetectorImage(rng.poisson(mu_l), port="L", **common))


def _gauss(i, a, c, s, b):
    return a * np.exp(-((i - c) ** 2) / s**2) + b


def fit_gaussian_center(image: DetectorImage) -> float:
    """Least-squares A exp(-(i-c)^2/s^2) + b over all pixels; returns c."""
    y = np.asarray(image.counts, dtype=float)
    i = np.arange(y.size, dtype=float)
    b0 = float(np.median(np.concatenate([y[:8], y[-8:]])))
    w = np.clip(y - b0, 0, None)
    if w.sum() <= 0:
        raise FitError("image has no signal above background")
    c0 = float(np.sum(i * w) / w.sum())
    s0 = max(float(np.sqrt(2 * np.sum(w * (i - c0) ** 2) / w.sum())), 1.0)
    try:
        popt, _ = optimize.curve_fit(_gauss, i, y, p0=(w.max(), c0, s0, b0), maxfev=10000)
    except RuntimeError as exc:
        raise FitError(str(exc)) from exc
    resid = np.linalg.norm(y - _gauss(i, *popt))
    if resid > 0.5 * np.linalg.norm(y):
        raise FitError(f"residual norm {resid:.3g} exceeds half the signal norm")
    return float(popt[1])


@dataclass
class WindowedPair:
    """321-pixel windows of both ports, element i at offset i - 160."""

    raw_r: np.ndarray
    raw_l: np.ndarray
    center_r: float
    center_l: float
    pixel_pitch_mm: float
    beta: float

    @property
    def norm_r(self) -> np.ndarray:
        return self.raw_r / self.raw_r.sum()

    @property
    def norm_l(self) -> np.ndarray:
        return self.raw_l / self.raw_l.sum()

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-HALF_WINDOW, HALF_WINDOW + 1)

    def positions_mm(self) -> np.ndarray:
        return pixel_to_position(self.center_r, self.offsets, self.beta, self.pixel_pitch_mm)


def _window(counts: np.ndarray, center: float) -> np.ndarray:
    base = math.floor(center)
    lo, hi = base - HALF_WINDOW, base + HALF_WINDOW
    if lo < 0 or hi >= counts.size:
        raise WindowError(f"window [{lo}, {hi}] extends beyond the {counts.size}-pixel sensor")
    # element i <-> sensor pixel base - i
    return np.asarray(counts[lo: hi + 1][::-1], dtype=float)


def window_and_normalize(image_r: DetectorImage, image_l: DetectorImage,
                         centers_r: tuple[float, float], centers_l: tuple[float, float]) -> WindowedPair:
    """Cut windows around R_c = mean(centers_r) and L_c = mean(centers_l).

    ``centers_r`` are (x1, x2), the right-port centers fitted under the H
    and V projections; ``centers_l`` are (x3, x4).
    """
    r_c = 0.5 * (centers_r[0] + centers_r[1])
    l_c = 0.5 * (centers_l[0] + centers_l[1])
    return WindowedPair(_window(image_r.counts, r_c), _window(image_l.counts, l_c),
                        r_c, l_c, image_r.pixel_pitch_mm, image_r.magnification_beta)


@dataclass
class MomentumProfile:
    """Per-pixel <k_x>_w / k with missing pixels masked."""

    positions_m: np.ndarray
    k_ratio: np.ma.MaskedArray
    clipped: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    plane_z: float = float("nan")

    @property
    def n_clipped(self) -> int:
        return int(np.count_nonzero(self.clipped))


def extract_weak_momentum(pair: WindowedPair, model: CouplingModel,
                          count_floor: float = 10.0) -> MomentumProfile:
    n_r, n_l = pair.norm_r, pair.norm_l
    total = n_r + n_l
    missing = (pair.raw_r + pair.raw_l) < count_floor
    with np.errstate(invalid="ignore", divide="ignore"):
        arg = np.where(total > 0, (n_r - n_l) / np.where(total > 0, total, 1.0), 0.0)
    clipped = (np.abs(arg) > 1.0) & ~missing
    if np.any(clipped):
        warnings.warn(f"{int(clipped.sum())} arcsin arguments clipped to +-1", RuntimeWarning)
    k = np.arcsin(np.clip(arg, -1.0, 1.0)) / model.zeta - model.phi0 / model.zeta
    return MomentumProfile(pair.positions_mm() * 1e-3, np.ma.masked_array(k, mask=missing), clipped)


def interpolate_momentum(positions, values, query, bandwidth: float, reach: float = 5.0):
    """Gaussian-kernel (Nadaraya-Watson) estimate at ``query``.

    A query on a valid pixel center returns that pixel's value. ``values`` may
    be a masked array; masked pixels are ignored.
    """
    positions = np.asarray(positions, dtype=float)
    values = np.ma.asarray(values)
    valid = ~np.ma.getmaskarray(values)
    px, pv = positions[valid], np.asarray(values.data, dtype=float)[valid]
    q = np.atleast_1d(np.asarray(query, dtype=float))
    out = np.empty(q.size)
    order = np.argsort(px)
    px, pv = px[order], pv[order]
    tol = 1e-9 * bandwidth
    for n, xq in enumerate(q):
        lo = np.searchsorted(px, xq - reach * bandwidth)
        hi = np.searchsorted(px, xq + reach * bandwidth, side="right")
        if hi <= lo:
            raise NoNeighborError(f"no valid momentum sample within {reach} bandwidths of x={xq:.6g}")
        xs, vs = px[lo:hi], pv[lo:hi]
        d = xs - xq
        hit = np.abs(d) <= tol
        if np.any(hit):
            out[n] = vs[np.argmax(hit)]
            continue
        wts = np.exp(-0.5 * (d / bandwidth) ** 2)
        out[n] = np.dot(wts, vs) / wts.sum()
    return out if np.ndim(query) else float(out[0])


def pixel_to_position(center: float, i, beta: float, pixel_pitch_mm: float = PIXEL_PITCH_MM):
    """Window element i -> transverse position in mm at the equivalent object plane."""
    if not beta > 0:
        raise ValueError("magnification beta must be positive")
    frac = center - math.floor(center)
    return (frac + np.asarray(i, dtype=float)) * pixel_pitch_mm / beta


@dataclass(frozen=True)
class CalibrationSweep:
    tilt_angles: np.ndarray  # rad
    intensity_r: np.ndarray
    intensity_l: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.tilt_angles, dtype=float)
        if t.size > 1 and not np.all(np.diff(t) >= 0):
            raise ValueError("tilt angles must be sorted")
        if not (len(t) == len(self.intensity_r) == len(self.intensity_l)):
            raise ValueError("sweep arrays differ in length")


@dataclass(frozen=True)
class CalibrationResult:
    model: CouplingModel
    zeta_stderr: float
    phi0_stderr: float
    n_points: int


def make_calibration_sweep(zeta: float = 336.0, phi0: float = 0.0,
                           start_deg: float = -0.48, stop_deg: float = 0.60, step_deg: float = 0.03,
                           photons: float | None = None, seed: int | None = None,
                           principal_only: bool = False) -> CalibrationSweep:
    """Tilt sweep through the coupling element; noiseless unless ``photons`` is given."""
    n = int(round((stop_deg - start_deg) / step_deg)) + 1
    tilt = np.deg2rad(start_deg + step_deg * np.arange(n))
    phi = zeta * tilt + phi0
    if principal_only:
        keep = np.abs(phi) < np.pi / 2
        tilt, phi = tilt[keep], phi[keep]
    i_r, i_l = 0.5 * (1 + np.sin(phi)), 0.5 * (1 - np.sin(phi))
    if photons is not None:
        rng = np.random.default_rng(seed)
        i_r, i_l = rng.poisson(photons * i_r), rng.poisson(photons * i_l)
    return CalibrationSweep(tilt, np.asarray(i_r, float), np.asarray(i_l, float))


def unfold_arcsin(y: np.ndarray, anchor: int) -> np.ndarray:
    """Recover a smooth phase from its folded arcsin samples.

    The anchor and its immediate neighbours are taken on the principal branch;
    every further sample picks whichever preimage of sin lies nearest the
    linear extrapolation of the two samples before it.
    """
    y = np.asarray(y, dtype=float)
    phi = np.full(y.size, np.nan)
    lo, hi = max(anchor - 1, 0), min(anchor + 1, y.size - 1)
    phi[lo: hi + 1] = y[lo: hi + 1]

    def pick(target, yj):
        turns = np.arange(-1, 2)
        same = yj + 2 * np.pi * (np.round((target - yj) / (2 * np.pi)) + turns)
        mirror = np.pi - yj + 2 * np.pi * (np.round((target - np.pi + yj) / (2 * np.pi)) + turns)
        cands = np.concatenate([same, mirror])
        return cands[np.argmin(np.abs(cands - target))]

    for j in range(hi + 1, y.size):
        slope = phi[j - 1] - phi[j - 2] if j - 2 >= 0 else 0.0
        phi[j] = pick(phi[j - 1] + slope, y[j])
    for j in range(lo - 1, -1, -1):
        slope = phi[j + 1] - phi[j + 2] if j + 2 < y.size else 0.0
        phi[j] = pick(phi[j + 1] + slope, y[j])
    return phi


def calibrate_zeta(sweep: CalibrationSweep, mode: str = "unwrap") -> CalibrationResult:
    """Straight-line fit of arcsin((I_R - I_L)/(I_R + I_L)) against tilt.

    ``mode="unwrap"`` unfolds the arcsin sequence assuming continuity between
    adjacent tilts; ``mode="principal"`` fits the raw arcsin values and is only
    valid when every phase lies inside (-pi/2, pi/2).
    """
    tilt = np.asarray(sweep.tilt_angles, dtype=float)
    if tilt.size < 2 or np.ptp(tilt) == 0:
        raise FitError("degenerate sweep: all tilt angles coincide")
    i_r = np.asarray(sweep.intensity_r, dtype=float)
    i_l = np.asarray(sweep.intensity_l, dtype=float)
    y = np.arcsin(np.clip((i_r - i_l) / (i_r + i_l), -1.0, 1.0))
    if mode == "unwrap":
        y = unfold_arcsin(y, int(np.argmin(np.abs(tilt))))
    elif mode != "principal":
        raise ValueError(f"unknown calibration mode {mode!r}")
    fit = stats.linregress(tilt, y)
    return CalibrationResult(CouplingModel(float(fit.slope), float(fit.intercept)),
                             float(fit.stderr), float(fit.intercept_stderr), int(tilt.size))


# -- file format -----------------------------------------------------------

_MAGIC = "# bohmsteer detector image v1"


def _fmt(v: float) -> str:
    return repr(float(v))


def write_image(path, image: DetectorImage) -> None:
    from .io import atomic_write_text
    counts = np.asarray(image.counts)
    if not np.all(counts == np.round(counts)):
        raise ValueError("only integer counts can be written")
    lines = [
        _MAGIC,
        f"plane_z_m = {_fmt(image.plane_z)}",
        f"pixel_pitch_mm = {_fmt(image.pixel_pitch_mm)}",
        f"beta = {_fmt(image.magnification_beta)}",
        f"center_offset = {'none' if image.center_offset is None else _fmt(image.center_offset)}",
        f"seed = {'none' if image.seed is None else int(image.seed)}",
        f"port = {image.port}",
        f"label = {image.label}",
        "counts:",
    ]
    body = "\n".join(" ".join(str(int(c)) for c in counts[k:k + 16])
                     for k in range(0, counts.size, 16))
    atomic_write_text(path, "\n".join(lines) + "\n" + body + "\n")


def read_image(path) -> DetectorImage:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    head, sep, body = text.partition("counts:\n")
    if not sep or not head.startswith(_MAGIC):
        raise ValueError(f"{path}: not a detector image file")
    meta = {}
    for line in head.splitlines()[1:]:
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()
    none_or = lambda v, f: None if v == "none" else f(v)  # noqa: E731
    return DetectorImage(
        counts=np.array(body.split(), dtype=np.int64),
        plane_z=float(meta["plane_z_m"]),
        pixel_pitch_mm=float(meta["pixel_pitch_mm"]),
        magnification_beta=float(meta["beta"]),
        center_offset=none_or(meta["center_offset"], float),
        seed=none_or(meta["seed"], int),
        port=meta.get("port", "R"),
        label=meta.get("label", ""),
    )

