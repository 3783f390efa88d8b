"""Forward model of a VIPA spectrometer focal plane.

A virtually imaged phased-array is a tilted solid etalon entered through an
uncoated window; the multiply reflected beam behaves as a finite stack of
virtual sources.  This module evaluates the resulting focal-plane intensity
pattern (Gaussian envelopes times a finite-source interference factor), the
local dispersion law mapping focal-plane position to wavelength shift, and
the etalon figures of merit (FSR, finesse, frequency resolution).

All functions are pure; see :mod:`spectro.units` for the unit conventions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidLayoutError
from .units import C_MM_PER_NS, MM_PER_NM, MM_PER_UM, dlambda_pm_to_dnu_mhz, dnu_mhz_to_dlambda_pm

# Paraxial small-angle model; larger internal angles are rejected outright.
MAX_INTERNAL_ANGLE_RAD = 0.1
MAX_VIRTUAL_SOURCES = 10**6


@dataclass(frozen=True)
class VipaSpec:
    """Etalon geometry and coatings.

    R / r are the power reflectivities of the input (high-reflector) and
    output (partial) coatings, n_r the refractive index, t the plate
    separation in mm and L the plate length in mm.
    """

    R: float
    r: float
    n_r: float
    t: float
    L: float

    def __post_init__(self):
        if not 0.0 < self.r <= self.R < 1.0:
            raise ValueError(f"reflectivities must satisfy 0 < r <= R < 1, got R={self.R}, r={self.r}")
        if self.n_r < 1.0:
            raise ValueError(f"refractive index must be >= 1, got {self.n_r}")
        if self.t <= 0.0 or self.L <= 0.0:
            raise ValueError(f"etalon dimensions must be positive, got t={self.t}, L={self.L}")

    @property
    def rr(self) -> float:
        """Round-trip reflectivity product R*r."""
        return self.R * self.r


@dataclass(frozen=True)
class OpticalLayout:
    """One concrete spectrometer design around a given etalon.

    lambda0: center wavelength (nm); W: 1/e^2 radius of the collimated input
    beam (mm); theta_in: internal incidence angle (rad); f_in / f_x / f_y:
    focal lengths of the line-focusing and output lenses (mm).
    """

    lambda0: float
    W: float
    theta_in: float
    f_in: float
    f_x: float
    f_y: float

    def __post_init__(self):
        for name in ("lambda0", "W", "f_in", "f_x", "f_y"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.theta_in <= MAX_INTERNAL_ANGLE_RAD:
            raise InvalidLayoutError(
                f"theta_in={self.theta_in} rad outside the small-angle validity range "
                f"(0, {MAX_INTERNAL_ANGLE_RAD}]"
            )


@dataclass(frozen=True)
class IntensityGrid:
    """Relative focal-plane intensity sampled on a rectangular grid.

    values[iy, ix] is the (unnormalized) intensity at (y_um[iy], x_um[ix]).
    """

    x_um: np.ndarray
    y_um: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.x_um) <= 0) or (len(self.y_um) > 1 and np.any(np.diff(self.y_um) <= 0)):
            raise ValueError("grid axes must be strictly increasing")
        if self.values.shape != (len(self.y_um), len(self.x_um)):
            raise ValueError("values shape must be (len(y), len(x))")
        if np.any(self.values < 0.0):
            raise ValueError("intensity values must be non-negative")


def external_angle(vipa: VipaSpec, layout: OpticalLayout) -> float:
    """Incidence angle outside the etalon, theta = n_r * theta_in."""
    return vipa.n_r * layout.theta_in


def virtual_source_count(vipa: VipaSpec, layout: OpticalLayout) -> int:
    """Number of virtual sources N = floor(L / (2 t tan(theta_in)))."""
    if layout.theta_in <= 0.0:
        raise InvalidLayoutError("theta_in must be positive")
    n = math.floor(vipa.L / (2.0 * vipa.t * math.tan(layout.theta_in)))
    if n < 1:
        raise InvalidLayoutError(
            f"geometry admits no complete round trip (N={n}); increase L or reduce theta_in"
        )
    if n > MAX_VIRTUAL_SOURCES:
        raise InvalidLayoutError(f"virtual source count {n} exceeds practical bounds")
    return n


def phase(vipa: VipaSpec, layout: OpticalLayout, x_um, lambda_nm):
    """Round-trip phase at focal-plane position x for wavelength lambda.

    Constant term 4 pi t n_r cos(theta_in) / lambda, a linear term from the
    angular walk-off and a quadratic lens term; x in um, lambda in nm.
    """
    lam = np.asarray(lambda_nm, dtype=float) * MM_PER_NM
    x = np.asarray(x_um, dtype=float) * MM_PER_UM
    t, n_r = vipa.t, vipa.n_r
    th_in = layout.theta_in
    th = external_angle(vipa, layout)
    f_x = layout.f_x
    return (
        4.0 * np.pi * t * n_r * np.cos(th_in) / lam
        - 4.0 * np.pi * t * np.tan(th_in) * np.cos(th) * x / (lam * f_x)
        - 2.0 * np.pi * t * np.cos(th_in) * x * x / (n_r * lam * f_x * f_x)
    )


def interference_factor(rr: float, n_sources: int, phi):
    """Finite-stack interference factor.

    ([1 - (Rr)^(N+1)]^2 + 4 (Rr)^(N+1) sin^2((N+1) phi / 2)) /
    ((1 - Rr)^2 + 4 Rr sin^2(phi / 2)); 2-pi periodic in phi, converging to
    the Airy denominator form as N grows.
    """
    if not 0.0 < rr < 1.0:
        raise ValueError(f"need 0 < Rr < 1, got {rr}")
    q = rr ** (n_sources + 1)
    phi = np.asarray(phi, dtype=float)
    num = (1.0 - q) ** 2 + 4.0 * q * np.sin((n_sources + 1) * phi / 2.0) ** 2
    den = (1.0 - rr) ** 2 + 4.0 * rr * np.sin(phi / 2.0) ** 2
    return num / den


def output_intensity(vipa: VipaSpec, layout: OpticalLayout, x_um, y_um, lambda_nm):
    """Relative output intensity at (x, y) for wavelength lambda.

    Product of the y focus Gaussian (waist lambda f_y / (pi W)), the x
    envelope Gaussian of 1/e^2 half-width f_x W / f_in, and the interference
    factor evaluated at the local round-trip phase.  Values are relative: the
    pattern is defined only up to an overall constant.
    """
    lam = np.asarray(lambda_nm, dtype=float) * MM_PER_NM
    x = np.asarray(x_um, dtype=float) * MM_PER_UM
    y = np.asarray(y_um, dtype=float) * MM_PER_UM
    env_y = np.exp(-2.0 * np.pi**2 * layout.W**2 * y * y / (lam * lam * layout.f_y**2))
    env_x = np.exp(-2.0 * layout.f_in**2 * x * x / (layout.f_x**2 * layout.W**2))
    n = virtual_source_count(vipa, layout)
    return env_y * env_x * interference_factor(vipa.rr, n, phase(vipa, layout, x_um, lambda_nm))


def intensity_grid(
    vipa: VipaSpec,
    layout: OpticalLayout,
    lambda_nm: float,
    x_range_um: tuple[float, float],
    y_range_um: tuple[float, float] | None = None,
    resolution: int = 512,
) -> IntensityGrid:
    """Sample the output intensity on a rectangular grid.

    ``resolution`` is the number of samples per axis.  ``y_range_um=None``
    produces a single-row grid at y=0 (the detector-row slice).
    """
    if resolution <= 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    if x_range_um[0] >= x_range_um[1]:
        raise ValueError(f"x range must be non-degenerate, got {x_range_um}")
    xs = np.linspace(x_range_um[0], x_range_um[1], resolution)
    if y_range_um is None:
        ys = np.array([0.0])
    else:
        if y_range_um[0] >= y_range_um[1]:
            raise ValueError(f"y range must be non-degenerate, got {y_range_um}")
        ys = np.linspace(y_range_um[0], y_range_um[1], resolution)
    vals = output_intensity(vipa, layout, xs[None, :], ys[:, None], lambda_nm)
    return IntensityGrid(x_um=xs, y_um=ys, values=vals)


def resonance_aligned_wavelength(vipa: VipaSpec, layout: OpticalLayout, detuning_mhz: float = 0.0) -> float:
    """Operating wavelength of an etalon tuned so a transmission order hits lambda0.

    A rounded incident angle rarely makes lambda0 exactly resonant at x=0;
    experimentally the comb is brought onto the laser line by sub-linewidth
    tuning of the optical thickness.  This returns the x=0-resonant
    wavelength closest to lambda0 (at most half an FSR away, a relative
    offset of order 1e-5), shifted by the requested detuning; use it when
    evaluating intensity patterns that represent the tuned instrument.
    """
    two_tn = 2.0 * vipa.t * vipa.n_r * math.cos(layout.theta_in) / MM_PER_NM  # in nm
    m = max(round(two_tn / layout.lambda0), 1)
    lam_res = two_tn / m
    return lam_res + 1e-3 * dnu_mhz_to_dlambda_pm(detuning_mhz, layout.lambda0)


def fsr_ghz(vipa: VipaSpec, layout: OpticalLayout) -> float:
    """Free spectral range c / (2 n_r t cos(theta)) in GHz."""
    return C_MM_PER_NS / (2.0 * vipa.n_r * vipa.t * math.cos(external_angle(vipa, layout)))


def finesse(vipa: VipaSpec) -> float:
    """Reflectivity finesse pi sqrt(Rr) / (1 - Rr)."""
    return math.pi * math.sqrt(vipa.rr) / (1.0 - vipa.rr)


def fwhm_freq_mhz(vipa: VipaSpec, layout: OpticalLayout) -> float:
    """Transmission-peak FWHM, c (1 - Rr) / (2 pi n_r t cos(theta) sqrt(Rr)), in MHz."""
    return 1e3 * fsr_ghz(vipa, layout) / finesse(vipa)


def dispersion_shift_pm(vipa: VipaSpec, layout: OpticalLayout, x_um):
    """Wavelength of the local transmission peak relative to the x=0 peak.

    dlambda(x) = -lambda0 * (tan(theta_in) cos(theta) / (n_r cos(theta_in)) * x/f_x
    + x^2 / (2 n_r^2 f_x^2)), returned in pm.  Positive x corresponds to
    shorter wavelength (higher frequency).
    """
    x = np.asarray(x_um, dtype=float) * MM_PER_UM
    n_r = vipa.n_r
    th_in = layout.theta_in
    th = external_angle(vipa, layout)
    lin = np.tan(th_in) * np.cos(th) / (n_r * np.cos(th_in)) * x / layout.f_x
    quad = x * x / (2.0 * n_r * n_r * layout.f_x * layout.f_x)
    return -layout.lambda0 * (lin + quad) * 1e3


def dispersion_shift_mhz(vipa: VipaSpec, layout: OpticalLayout, x_um):
    """Frequency detuning whose transmission peak sits at position x, in MHz."""
    return dlambda_pm_to_dnu_mhz(dispersion_shift_pm(vipa, layout, x_um), layout.lambda0)


def peak_position_um(vipa: VipaSpec, layout: OpticalLayout, dnu_mhz: float) -> float:
    """Focal-plane position where a mode detuned by dnu peaks (inverse dispersion).

    Solves the quadratic dispersion law for x; the root continuous with the
    small-shift linear branch is returned.
    """
    dlam_pm = dnu_mhz_to_dlambda_pm(dnu_mhz, layout.lambda0)
    k = -dlam_pm / (layout.lambda0 * 1e3)  # relative wavelength shift, sign folded in
    n_r = vipa.n_r
    th_in = layout.theta_in
    th = external_angle(vipa, layout)
    a = math.tan(th_in) * math.cos(th) / (n_r * math.cos(th_in))
    b = 1.0 / (2.0 * n_r * n_r)
    disc = a * a + 4.0 * b * k
    if disc < 0.0:
        raise InvalidLayoutError(f"detuning {dnu_mhz} MHz has no focal-plane image in this layout")
    x_mm = layout.f_x * (-a + math.sqrt(disc)) / (2.0 * b)
    return x_mm / MM_PER_UM


def profile_fwhm_um(x_um: np.ndarray, values: np.ndarray) -> float:
    """FWHM of a single-peaked 1-D profile via interpolated half-max crossings."""
    values = np.asarray(values, dtype=float)
    i_max = int(np.argmax(values))
    half = values[i_max] / 2.0
    if values[i_max] <= 0.0:
        raise ValueError("profile has no positive peak")
    left = i_max
    while left > 0 and values[left] > half:
        left -= 1
    right = i_max
    while right < len(values) - 1 and values[right] > half:
        right += 1
    if values[left] > half or values[right] > half:
        raise ValueError("half maximum not bracketed by the sampled window")

    def cross(i0, i1):
        f = (half - values[i0]) / (values[i1] - values[i0])
        return x_um[i0] + f * (x_um[i1] - x_um[i0])

    return cross(right - 1, right) - cross(left + 1, left)


def grid_to_csv(grid: IntensityGrid, path) -> None:
    """Write a grid as CSV; 1-row grids use the x_um,intensity slice format."""
    with open(path, "w", encoding="utf-8") as fh:
        if len(grid.y_um) == 1:
            fh.write("x_um,intensity\n")
            for x, v in zip(grid.x_um, grid.values[0]):
                fh.write(f"{x:.17g},{v:.17g}\n")
        else:
            fh.write("x_um,y_um,intensity\n")
            for iy, y in enumerate(grid.y_um):
                for ix, x in enumerate(grid.x_um):
                    fh.write(f"{x:.17g},{y:.17g},{grid.values[iy, ix]:.17g}\n")


def grid_from_csv(path) -> IntensityGrid:
    """Inverse of :func:`grid_to_csv`."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        rows = [tuple(float(tok) for tok in line.split(",")) for line in fh if line.strip()]
    if header == "x_um,intensity":
        xs = np.array([r[0] for r in rows])
        vals = np.array([[r[1] for r in rows]])
        return IntensityGrid(x_um=xs, y_um=np.array([0.0]), values=vals)
    xs = np.array(sorted({r[0] for r in rows}))
    ys = np.array(sorted({r[1] for r in rows}))
    vals = np.zeros((len(ys), len(xs)))
    xi = {x: i for i, x in enumerate(xs)}
    yi = {y: i for i, y in enumerate(ys)}
    for x, y, v in rows:
        vals[yi[y], xi[x]] = v
    return IntensityGrid(x_um=xs, y_um=ys, values=vals)
