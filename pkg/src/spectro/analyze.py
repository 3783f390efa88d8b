"""Reductions from event streams to spatial-mode results.

Pipeline: per-element time histograms -> windowed integration into a spatial
profile -> Lorentzian profile fit -> mode-shift estimates, plus a per-pulse
maximum-likelihood frequency-mode classifier and a peak-to-peak crosstalk
metric.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InsufficientDataError,
    MalformedInputError,
    UndefinedMetricError,
)
from .simulate import EventList, SpadArraySpec

CROSSTALK_FLOOR_DB = -300.0


@dataclass(frozen=True)
class TimeHistogram:
    """Per-element arrival-time histogram, counts normalized per pulse."""

    element: int
    bin_edges: np.ndarray
    counts_per_pulse: np.ndarray


@dataclass(frozen=True)
class SpatialProfile:
    """Mean counts per pulse per element inside a time window."""

    elements: np.ndarray
    mean_counts_per_pulse: np.ndarray
    window: tuple[float, float]

    def __post_init__(self):
        if len(self.elements) != len(self.mean_counts_per_pulse):
            raise ValueError("elements and counts must have equal length")

    def normalized(self) -> "SpatialProfile":
        total = float(np.sum(self.mean_counts_per_pulse))
        if total <= 0.0:
            raise ValueError("cannot normalize an all-zero profile")
        return SpatialProfile(self.elements, self.mean_counts_per_pulse / total, self.window)

    def peak_element(self) -> int:
        return int(self.elements[int(np.argmax(self.mean_counts_per_pulse))])


@dataclass(frozen=True)
class LorentzianFit:
    """Fitted peak f(e) = amplitude * gamma^2 / ((e - center)^2 + gamma^2) + offset."""

    center: float
    gamma: float
    amplitude: float
    offset: float
    sse: float
    converged: bool
    n_iter: int = 0
    stderr: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ShiftEstimate:
    detuning: float
    shift_elements: float
    stderr: float
    converged: bool


@dataclass(frozen=True)
class ModeDecision:
    """Outcome of single-shot classification; no_detection when the pulse was empty."""

    assigned_detuning: float | None
    confidence: float
    per_mode_likelihoods: np.ndarray
    no_detection: bool = False


def build_time_histograms(
    events: EventList, n_pulses: int, array: SpadArraySpec, period: float = 1000.0
) -> list[TimeHistogram]:
    """Per-element time histograms at tagger resolution, divided by n_pulses."""
    if n_pulses < 1:
        raise ValueError("n_pulses must be >= 1")
    if len(events) and (events.element.min() < 0 or events.element.max() >= array.n_elements):
        bad = int(events.element[(events.element < 0) | (events.element >= array.n_elements)][0])
        raise MalformedInputError(f"event references element {bad} outside the {array.n_elements}-element row")
    res = array.time_resolution
    n_bins = int(round(period / res))
    edges = np.arange(n_bins + 1, dtype=float) * res
    counts = np.zeros((array.n_elements, n_bins))
    if len(events):
        bins = np.floor(events.time_tag / res).astype(np.int64)
        if bins.min() < 0 or bins.max() >= n_bins:
            raise MalformedInputError("event time tag outside the record period")
        np.add.at(counts, (events.element, bins), 1.0)
    counts /= float(n_pulses)
    return [TimeHistogram(element=e, bin_edges=edges, counts_per_pulse=counts[e]) for e in range(array.n_elements)]


def integrate_window(histograms: list[TimeHistogram], window: tuple[float, float]) -> SpatialProfile:
    """Sum counts of bins whose start lies in [t_lo, t_hi) for every element."""
    t_lo, t_hi = window
    if t_lo >= t_hi:
        raise ValueError(f"window must be increasing, got {window}")
    edges = histograms[0].bin_edges
    if t_lo < edges[0] or t_hi > edges[-1]:
        raise ValueError(f"window {window} exceeds the record [{edges[0]}, {edges[-1]}]")
    mask = (edges[:-1] >= t_lo) & (edges[:-1] < t_hi)
    elements = np.array([h.element for h in histograms], dtype=np.int64)
    totals = np.array([float(h.counts_per_pulse[mask].sum()) for h in histograms])
    return SpatialProfile(elements=elements, mean_counts_per_pulse=totals, window=(t_lo, t_hi))


def estimate_dark_floor(histograms: list[TimeHistogram], window: tuple[float, float]) -> float:
    """Mean counts/pulse/bin outside the signal window (constant-floor estimate)."""
    edges = histograms[0].bin_edges
    mask = (edges[:-1] < window[0]) | (edges[:-1] >= window[1])
    if not np.any(mask):
        raise ValueError("window leaves no out-of-window bins to estimate the floor")
    return float(np.mean([h.counts_per_pulse[mask].mean() for h in histograms]))


def subtract_dark_floor(profile: SpatialProfile, floor_per_bin: float, array: SpadArraySpec) -> SpatialProfile:
    """Remove the estimated constant dark floor from a windowed profile."""
    n_bins = (profile.window[1] - profile.window[0]) / array.time_resolution
    return SpatialProfile(
        elements=profile.elements,
        mean_counts_per_pulse=profile.mean_counts_per_pulse - floor_per_bin * n_bins,
        window=profile.window,
    )


def lorentzian(e, center, gamma, amplitude, offset):
    """Peak model amplitude * gamma^2 / ((e - center)^2 + gamma^2) + offset."""
    return amplitude * gamma * gamma / ((e - center) ** 2 + gamma * gamma) + offset


def fit_lorentzian(profile: SpatialProfile, weighting: str = "uniform") -> LorentzianFit:
    """Least-squares Lorentzian fit by damped Gauss-Newton.

    Initialization: center at the peak element, amplitude max-min, gamma one
    element, offset at the minimum.  Steps that would raise the SSE (or make
    gamma or amplitude non-physical) are halved, so the SSE is monotone
    non-increasing; convergence when the relative SSE improvement drops
    below 1e-10, up to 500 iterations.  ``weighting="poisson"`` scales
    residuals by 1/sqrt(max(y, ymin)).
    """
    e = np.asarray(profile.elements, dtype=float)
    y = np.asarray(profile.mean_counts_per_pulse, dtype=float)
    if int(np.count_nonzero(y)) < 5:
        raise InsufficientDataError(
            f"need >= 5 non-zero elements for a 4-parameter fit, got {int(np.count_nonzero(y))}"
        )
    if weighting not in ("uniform", "poisson"):
        raise ValueError(f"unknown weighting {weighting!r}")
    if weighting == "poisson":
        w = 1.0 / np.sqrt(np.maximum(y, max(y[y > 0].min(), 1e-12)))
    else:
        w = np.ones_like(y)

    theta = np.array([e[int(np.argmax(y))], 1.0, float(y.max() - y.min()), float(y.min())])

    def residuals(th):
        return w * (lorentzian(e, *th) - y)

    def jacobian(th):
        center, gamma, amplitude, _ = th
        d = e - center
        den = d * d + gamma * gamma
        j = np.empty((len(e), 4))
        j[:, 0] = amplitude * gamma * gamma * 2.0 * d / (den * den)
        j[:, 1] = 2.0 * amplitude * gamma * d * d / (den * den)
        j[:, 2] = gamma * gamma / den
        j[:, 3] = 1.0
        return w[:, None] * j

    r = residuals(theta)
    sse = float(r @ r)
    converged = False
    it = 0
    for it in range(1, 501):
        j = jacobian(theta)
        try:
            step, *_ = np.linalg.lstsq(j, -r, rcond=None)
        except np.linalg.LinAlgError:
            break
        scale = 1.0
        new_theta, new_sse, new_r = theta, sse, r
        for _ in range(40):
            cand = theta + scale * step
            if cand[1] > 0.0 and cand[2] >= 0.0:
                cr = residuals(cand)
                cs = float(cr @ cr)
                if cs <= sse:
                    new_theta, new_sse, new_r = cand, cs, cr
                    break
            scale *= 0.5
        if new_sse >= sse and np.array_equal(new_theta, theta):
            converged = True  # no admissible descent step left
            break
        improvement = (sse - new_sse) / sse if sse > 0.0 else 0.0
        theta, sse, r = new_theta, new_sse, new_r
        if improvement < 1e-10:
            converged = True
            break

    stderr: dict[str, float] = {}
    j = jacobian(theta)
    dof = max(len(e) - 4, 1)
    try:
        cov = np.linalg.inv(j.T @ j) * (sse / dof)
        names = ("center", "gamma", "amplitude", "offset")
        stderr = {n: float(math.sqrt(max(cov[i, i], 0.0))) for i, n in enumerate(names)}
    except np.linalg.LinAlgError:
        converged = False

    return LorentzianFit(
        center=float(theta[0]),
        gamma=float(abs(theta[1])),
        amplitude=float(theta[2]),
        offset=float(theta[3]),
        sse=sse,
        converged=converged and math.isfinite(sse),
        n_iter=it,
        stderr=stderr,
    )


def estimate_shifts(fits: list[LorentzianFit], detunings) -> list[ShiftEstimate]:
    """Fit-center shifts relative to the detuning closest to zero.

    Standard errors combine both fit uncertainties in quadrature; a fit that
    failed to converge is flagged and carries an infinite error.
    """
    if len(fits) < 2:
        raise ValueError("need at least two fits to estimate shifts")
    if len(fits) != len(detunings):
        raise ValueError("fits and detunings must pair up")
    ref = int(np.argmin(np.abs(np.asarray(detunings, dtype=float))))
    ref_fit = fits[ref]
    out = []
    for det, fit in zip(detunings, fits):
        ok = fit.converged and ref_fit.converged
        se = math.inf
        if ok and fit.stderr and ref_fit.stderr:
            se = math.hypot(fit.stderr.get("center", math.inf), ref_fit.stderr.get("center", math.inf))
        out.append(
            ShiftEstimate(
                detuning=float(det),
                shift_elements=fit.center - ref_fit.center,
                stderr=se if ok else math.inf,
                converged=ok,
            )
        )
    return out


def classify_mode(
    pulse_events: EventList, templates: list[SpatialProfile], detunings=None
) -> ModeDecision:
    """Maximum-likelihood frequency-mode assignment for a single pulse.

    Model: independent Poisson counts per element with rates proportional to
    the (normalized) template; with equal priors and equal template totals
    the decision reduces to sum_e k_e log T_m(e).  Ties resolve to the lower
    mode index; an empty pulse yields a no-detection outcome.
    """
    if not templates:
        raise ValueError("templates must be non-empty")
    axis = templates[0].elements
    t_matrix = []
    for t in templates:
        if not np.array_equal(t.elements, axis):
            raise ValueError("templates must share one element axis")
        total = float(np.sum(t.mean_counts_per_pulse))
        if abs(total - 1.0) > 1e-6:
            raise ValueError("templates must be normalized (use SpatialProfile.normalized())")
        t_matrix.append(np.asarray(t.mean_counts_per_pulse, dtype=float))
    t_matrix = np.vstack(t_matrix)
    labels = np.asarray(detunings, dtype=float) if detunings is not None else np.arange(len(templates), dtype=float)
    if len(labels) != len(templates):
        raise ValueError("detunings and templates must pair up")

    n_modes = len(templates)
    if len(pulse_events) == 0:
        uniform = np.full(n_modes, 1.0 / n_modes)
        return ModeDecision(None, 0.0, uniform, no_detection=True)

    pos = np.searchsorted(axis, pulse_events.element)
    if np.any(pos >= len(axis)) or np.any(axis[np.minimum(pos, len(axis) - 1)] != pulse_events.element):
        raise ValueError("pulse events reference elements outside the template axis")
    k = np.bincount(pos, minlength=len(axis)).astype(float)

    with np.errstate(divide="ignore", invalid="ignore"):
        logt = np.log(t_matrix)
        # k * logt is masked wherever k == 0, including 0 * -inf cells
        loglik = np.where(k > 0, k * logt, 0.0).sum(axis=1)
    if not math.isfinite(loglik.max()):
        # every template assigns zero weight to some observed element
        uniform = np.full(n_modes, 1.0 / n_modes)
        return ModeDecision(float(labels[0]), float(uniform[0]), uniform)
    loglik -= loglik.max()
    post = np.exp(loglik)
    post /= post.sum()
    best = int(np.argmax(post))
    return ModeDecision(float(labels[best]), float(post[best]), post)


def crosstalk_metric(profile_a: SpatialProfile, profile_b: SpatialProfile) -> float:
    """Leakage of profile_b into profile_a's peak element, in dB.

    10 log10(b at a's peak element / b at its own peak element); floored at
    -300 dB when b carries nothing at a's peak.
    """
    if not np.array_equal(profile_a.elements, profile_b.elements):
        raise ValueError("profiles must share one element axis")
    b = np.asarray(profile_b.mean_counts_per_pulse, dtype=float)
    own = float(b[int(np.argmax(b))])
    if own <= 0.0:
        raise UndefinedMetricError("profile_b has zero peak counts")
    idx_a = int(np.argmax(profile_a.mean_counts_per_pulse))
    leak = float(b[idx_a])
    if leak <= 0.0:
        return CROSSTALK_FLOOR_DB
    return max(10.0 * math.log10(leak / own), CROSSTALK_FLOOR_DB)


def histograms_to_csv(histograms: list[TimeHistogram], path, elements=None) -> None:
    """Time-histogram export, rows element,time_ns,counts_per_pulse.

    By default only the contiguous element range carrying any counts is
    written (the full row is mostly empty).
    """
    if elements is None:
        nonzero = [h.element for h in histograms if h.counts_per_pulse.any()]
        elements = range(min(nonzero), max(nonzero) + 1) if nonzero else range(0)
    chosen = {h.element: h for h in histograms}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("element,time_ns,counts_per_pulse\n")
        for e in elements:
            h = chosen[e]
            for t, c in zip(h.bin_edges[:-1], h.counts_per_pulse):
                fh.write(f"{e},{t:.17g},{c:.17g}\n")


def profile_to_csv(profile: SpatialProfile, fit: LorentzianFit | None, path) -> None:
    """Spatial-profile export, rows element,mean_counts_per_pulse,fit_value."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("element,mean_counts_per_pulse,fit_value\n")
        for e, c in zip(profile.elements, profile.mean_counts_per_pulse):
            fval = lorentzian(float(e), fit.center, fit.gamma, fit.amplitude, fit.offset) if fit else math.nan
            fh.write(f"{e},{c:.17g},{fval:.17g}\n")


def fit_to_json_dict(fit: LorentzianFit) -> dict:
    return {
        "center": fit.center,
        "gamma": fit.gamma,
        "amplitude": fit.amplitude,
        "offset": fit.offset,
        "sse": fit.sse,
        "converged": fit.converged,
        "stderr": dict(fit.stderr),
    }


def shifts_to_json(shifts: list[ShiftEstimate]) -> str:
    rows = [
        {
            "detuning_mhz": s.detuning,
            "shift_elements": s.shift_elements,
            "stderr_elements": s.stderr if math.isfinite(s.stderr) else None,
            "converged": s.converged,
        }
        for s in shifts
    ]
    return json.dumps(rows, indent=2)
