"""Inverse solvers for the spectrometer design equations.

Given an etalon and a set of design targets (center wavelength, frequency
mode spacing, spatial shift per mode, optional frequency resolution) these
solvers produce the incident angle, the x focal length, the admissible
input-lens focal-length interval set by the aperture clipping condition, and
the etalon thickness required for a target transmission linewidth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import vipa as vp
from .errors import InfeasibleDesignError
from .units import C_MM_PER_NS, MM_PER_NM, MM_PER_UM, dnu_mhz_to_dlambda_pm

RAD_PER_DEG = math.pi / 180.0


@dataclass(frozen=True)
class DesignGoal:
    """Targets the solved layout has to meet.

    lambda0 (nm), delta_nu (MHz) mode spacing, pitch (um) spatial shift per
    mode, W (mm) collimated beam radius, y_element (um) detector element
    height.  fwhm_target (MHz) optionally asks for an etalon thickness giving
    that transmission linewidth.  theta_in_target (rad) optionally pins the
    incident angle to a known setting; without it the smallest exactly
    resonant angle whose clipping interval is non-empty is selected.
    """

    lambda0: float
    delta_nu: float
    pitch: float
    W: float = 1.0
    y_element: float = 30.0
    fwhm_target: float | None = None
    theta_in_target: float | None = None

    def __post_init__(self):
        if self.lambda0 <= 0.0 or self.delta_nu <= 0.0 or self.pitch <= 0.0:
            raise ValueError("lambda0, delta_nu and pitch must all be positive")
        if self.W <= 0.0 or self.y_element <= 0.0:
            raise ValueError("W and y_element must be positive")
        if self.fwhm_target is not None and self.fwhm_target <= 0.0:
            raise ValueError("fwhm_target must be positive when given")
        if self.theta_in_target is not None and not 0.0 < self.theta_in_target <= vp.MAX_INTERNAL_ANGLE_RAD:
            raise ValueError("theta_in_target outside the model validity range")


@dataclass(frozen=True)
class DesignResult:
    """Solved layout parameters plus diagnostics.

    theta_in is the design angle actually used for the focal-length solves;
    (m, theta_in_resonant) is the adjacent exact resonance order, for which
    m * lambda0 = 2 t n_r cos(theta_in_resonant) holds to machine precision.
    """

    theta_in: float
    m: int
    theta_in_resonant: float
    f_x: float
    f_in_interval: tuple[float, float] | None
    f_y_max: float
    t_used: float
    t_required: float | None = None
    diagnostics: dict[str, float] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        lo, hi = self.f_in_interval if self.f_in_interval is not None else (None, None)
        return {
            "theta_in_deg": self.theta_in / RAD_PER_DEG,
            "m": self.m,
            "f_x_mm": self.f_x,
            "f_in_min_mm": lo,
            "f_in_max_mm": hi,
            "f_y_max_mm": self.f_y_max,
            "t_mm": self.t_used,
            "diagnostics": dict(self.diagnostics),
        }


def _order_of(vipa: vp.VipaSpec, lambda0_nm: float, theta_in: float) -> float:
    """Real-valued resonance order 2 t n_r cos(theta_in) / lambda0."""
    return 2.0 * vipa.t * vipa.n_r * math.cos(theta_in) / (lambda0_nm * MM_PER_NM)


def _angle_of_order(vipa: vp.VipaSpec, lambda0_nm: float, m: int) -> float:
    arg = m * lambda0_nm * MM_PER_NM / (2.0 * vipa.t * vipa.n_r)
    if arg > 1.0:
        raise InfeasibleDesignError(f"order {m} exceeds the normal-incidence order")
    return math.acos(arg)


def solve_incident_angle(
    vipa: vp.VipaSpec, lambda0_nm: float, theta_min: float, theta_max: float
) -> tuple[float, int]:
    """Smallest exactly resonant incident angle within [theta_min, theta_max].

    Resonance at x=0 requires m * lambda0 = 2 t n_r cos(theta_in) for integer
    m; the order m decreases as the angle grows, so the smallest feasible
    angle belongs to the largest integer order mapping into the bracket.
    """
    if not 0.0 < theta_min < theta_max <= vp.MAX_INTERNAL_ANGLE_RAD:
        raise ValueError(
            f"bracket must satisfy 0 < theta_min < theta_max <= {vp.MAX_INTERNAL_ANGLE_RAD} rad"
        )
    m_hi = math.floor(_order_of(vipa, lambda0_nm, theta_min))
    m_lo = math.ceil(_order_of(vipa, lambda0_nm, theta_max))
    if m_hi < m_lo:
        near_low = _angle_of_order(vipa, lambda0_nm, m_hi) / RAD_PER_DEG
        near_high = _angle_of_order(vipa, lambda0_nm, m_lo - 1) / RAD_PER_DEG
        raise InfeasibleDesignError(
            "no resonant order falls inside the angle bracket "
            f"[{theta_min / RAD_PER_DEG:.4f}, {theta_max / RAD_PER_DEG:.4f}] deg; "
            f"nearest candidates are {near_high:.4f} deg (order {m_lo - 1}) and "
            f"{near_low:.4f} deg (order {m_hi})"
        )
    return _angle_of_order(vipa, lambda0_nm, m_hi), m_hi


def solve_fx(
    vipa: vp.VipaSpec, theta_in: float, lambda0_nm: float, delta_nu_mhz: float, pitch_um: float
) -> float:
    """Focal length f_x placing a delta_nu detuning exactly pitch away.

    The dispersion law is quadratic in 1/f_x; only one root is positive, and
    it corresponds to the weak-focusing branch where the linear term
    dominates.
    """
    if delta_nu_mhz <= 0.0 or pitch_um <= 0.0:
        raise ValueError("delta_nu and pitch must be positive")
    n_r = vipa.n_r
    th = n_r * theta_in
    a = math.tan(theta_in) * math.cos(th) / (n_r * math.cos(theta_in))
    b = 1.0 / (2.0 * n_r * n_r)
    # relative wavelength-shift magnitude at x = pitch
    k = -dnu_mhz_to_dlambda_pm(delta_nu_mhz, lambda0_nm) / (lambda0_nm * 1e3)
    x = pitch_um * MM_PER_UM
    u = (-a + math.sqrt(a * a + 4.0 * b * k)) / (2.0 * b * x)
    if not (u > 0.0 and math.isfinite(u)):
        raise InfeasibleDesignError(
            f"no positive focal length maps {delta_nu_mhz} MHz onto {pitch_um} um"
        )
    return 1.0 / u


def clipping_residual(vipa: vp.VipaSpec, theta_in: float, lambda0_nm: float, W_mm: float, f_in_mm):
    """Aperture margin t tan(theta_in) - w0 sqrt(1 + lambda^2 t^2 / (pi^2 w0^4 n_r^2)).

    w0 = f_in lambda / (pi W) is the line-focus waist at the entrance plate;
    non-negative residual means the focused beam clears the entrance window.
    """
    lam = lambda0_nm * MM_PER_NM
    w0 = np.asarray(f_in_mm, dtype=float) * lam / (math.pi * W_mm)
    rhs = w0 * np.sqrt(1.0 + lam * lam * vipa.t * vipa.t / (math.pi**2 * w0**4 * vipa.n_r**2))
    return vipa.t * math.tan(theta_in) - rhs


def solve_fin_interval(
    vipa: vp.VipaSpec,
    theta_in: float,
    lambda0_nm: float,
    W_mm: float,
    tol_mm: float = 0.1,
) -> tuple[float, float] | None:
    """Interval of f_in where the focused beam clears the entrance aperture.

    The clipping residual is negative for both very short and very long
    focal lengths; the two sign changes are located on a dense scan and each
    root bisected to tol_mm.  ``None`` means no focal length works.
    """
    if W_mm <= 0.0:
        raise ValueError("W must be positive")
    lam = lambda0_nm * MM_PER_NM
    # upper root is bounded by w0 < t tan(theta), i.e. f_in < pi W t tan(theta) / lambda
    f_hi = 1.2 * math.pi * W_mm * vipa.t * math.tan(theta_in) / lam
    grid = np.linspace(min(tol_mm, f_hi / 4096.0), f_hi, 4096)
    res = clipping_residual(vipa, theta_in, lambda0_nm, W_mm, grid)
    sign_change = np.nonzero(np.diff(np.signbit(res)))[0]
    if len(sign_change) < 2:
        return None

    def bisect(lo, hi):
        r_lo = clipping_residual(vipa, theta_in, lambda0_nm, W_mm, lo)
        while hi - lo > tol_mm:
            mid = 0.5 * (lo + hi)
            r_mid = clipping_residual(vipa, theta_in, lambda0_nm, W_mm, mid)
            if (r_mid < 0.0) == (r_lo < 0.0):
                lo, r_lo = mid, r_mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    i0, i1 = sign_change[0], sign_change[-1]
    return bisect(grid[i0], grid[i0 + 1]), bisect(grid[i1], grid[i1 + 1])


def solve_thickness(
    vipa: vp.VipaSpec, fwhm_target_mhz: float, cos_theta: float = 1.0
) -> float:
    """Etalon thickness giving the requested transmission FWHM (exact inversion).

    Uses the coatings and index of ``vipa``; its thickness is ignored.
    """
    if fwhm_target_mhz <= 0.0:
        raise ValueError("fwhm_target must be positive")
    rr = vipa.rr
    return (
        C_MM_PER_NS
        * 1e3
        * (1.0 - rr)
        / (2.0 * math.pi * vipa.n_r * cos_theta * math.sqrt(rr) * fwhm_target_mhz)
    )


def solve_fy_max(lambda0_nm: float, W_mm: float, y_element_um: float) -> float:
    """Largest f_y keeping the 1/e^2 full width 2 lambda f_y / (pi W) within one element."""
    return math.pi * W_mm * (y_element_um * MM_PER_UM) / (2.0 * lambda0_nm * MM_PER_NM)


def _default_theta(vipa: vp.VipaSpec, goal: DesignGoal) -> float:
    """Smallest resonant angle with a non-empty clipping interval."""
    m = math.floor(_order_of(vipa, goal.lambda0, 0.0))
    while m >= 1:
        theta = _angle_of_order(vipa, goal.lambda0, m)
        if theta > vp.MAX_INTERNAL_ANGLE_RAD:
            break
        if theta > 0.0 and solve_fin_interval(vipa, theta, goal.lambda0, goal.W) is not None:
            return theta
        m -= 1
    raise InfeasibleDesignError("no resonant angle clears the entrance aperture for this beam")


def full_design(vipa: vp.VipaSpec, goal: DesignGoal) -> DesignResult:
    """Compose the individual solvers into one spectrometer design.

    Order of operations: optional thickness inversion for a target linewidth,
    incident-angle selection, f_x from the dispersion law, the admissible
    f_in interval, the f_y upper bound, then forward-model diagnostics
    (linewidth, FSR, virtual source count, focal-plane spot FWHM and the
    fraction of a mode's weight landing outside its own element).
    """
    t_required = None
    vipa_eff = vipa
    if goal.fwhm_target is not None:
        t_required = solve_thickness(vipa, goal.fwhm_target)
        vipa_eff = replace(vipa, t=t_required)

    if goal.theta_in_target is not None:
        theta = goal.theta_in_target
    else:
        theta = _default_theta(vipa_eff, goal)
    m = min(round(_order_of(vipa_eff, goal.lambda0, theta)), math.floor(_order_of(vipa_eff, goal.lambda0, 0.0)))
    theta_res = _angle_of_order(vipa_eff, goal.lambda0, m)

    fsr_mhz = 1e3 * C_MM_PER_NS / (2.0 * vipa_eff.n_r * vipa_eff.t * math.cos(vipa_eff.n_r * theta))
    if goal.delta_nu >= fsr_mhz:
        raise InfeasibleDesignError(
            f"mode spacing {goal.delta_nu} MHz is not below the FSR ({fsr_mhz:.1f} MHz); "
            "modes would alias across orders"
        )

    f_x = solve_fx(vipa_eff, theta, goal.lambda0, goal.delta_nu, goal.pitch)
    f_in_interval = solve_fin_interval(vipa_eff, theta, goal.lambda0, goal.W)
    f_y_max = solve_fy_max(goal.lambda0, goal.W, goal.y_element)

    # forward-model diagnostics on the solved layout
    f_in_diag = 0.5 * (f_in_interval[0] + f_in_interval[1]) if f_in_interval else f_x
    layout = vp.OpticalLayout(
        lambda0=goal.lambda0, W=goal.W, theta_in=theta, f_in=f_in_diag, f_x=f_x, f_y=f_y_max
    )
    half_span = 6.0 * goal.pitch
    lam_aligned = vp.resonance_aligned_wavelength(vipa_eff, layout)
    grid = vp.intensity_grid(vipa_eff, layout, lam_aligned, (-half_span, half_span), None, 4096)
    prof = grid.values[0]
    x_fwhm = vp.profile_fwhm_um(grid.x_um, prof)
    total = np.trapezoid(prof, grid.x_um)
    x_pk = grid.x_um[int(np.argmax(prof))]
    inside = (grid.x_um >= x_pk - goal.pitch / 2.0) & (grid.x_um <= x_pk + goal.pitch / 2.0)
    frac_outside = 1.0 - np.trapezoid(prof[inside], grid.x_um[inside]) / total

    diagnostics = {
        "theta_in_resonant_deg": theta_res / RAD_PER_DEG,
        "resonance_order_residual": abs(
            m * goal.lambda0 * MM_PER_NM - 2.0 * vipa_eff.t * vipa_eff.n_r * math.cos(theta)
        )
        / (m * goal.lambda0 * MM_PER_NM),
        "fwhm_freq_mhz": vp.fwhm_freq_mhz(vipa_eff, layout),
        "fsr_ghz": vp.fsr_ghz(vipa_eff, layout),
        "n_virtual_sources": float(vp.virtual_source_count(vipa_eff, layout)),
        "x_fwhm_um": x_fwhm,
        "mode_fraction_outside_element": float(frac_outside),
        "f_x_roundtrip_rel_err": abs(
            abs(float(vp.dispersion_shift_mhz(vipa_eff, layout, goal.pitch))) - goal.delta_nu
        )
        / goal.delta_nu,
    }
    return DesignResult(
        theta_in=theta,
        m=m,
        theta_in_resonant=theta_res,
        f_x=f_x,
        f_in_interval=f_in_interval,
        f_y_max=f_y_max,
        t_used=vipa_eff.t,
        t_required=t_required,
        diagnostics=diagnostics,
    )
