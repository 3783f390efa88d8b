"""Seeded Monte Carlo of weak coherent pulses on a SPAD element row.

Photons per pulse are Poissonian (attenuated laser); detection losses thin
that Poisson multiplicatively.  Each detected photon lands at a focal-plane
position drawn from the spectrometer intensity profile and at a time drawn
from the Gaussian pulse envelope, then is quantized to the tagger resolution
and binned to a detector element.  Dark counts are uniform in time at the
per-element dark count rate.

Determinism contract: every pulse consumes its own random stream derived
from (seed, detuning rank, pulse index), so results are bit-identical no
matter how pulses are chunked across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import vipa as vp
from .errors import DegenerateProfileError, MalformedInputError

ORIGIN_PHOTON = 0
ORIGIN_DARK = 1
_ORIGIN_NAMES = ("photon", "dark")


@dataclass(frozen=True)
class SpadArraySpec:
    """Active detector row geometry and noise figures.

    pde: photon detection efficiency (no default; device and wavelength
    dependent).  element_pitch in um, dcr in counts per element per second,
    time_resolution and dead_time in ns (dead_time 0 disables the filter).
    """

    pde: float
    n_elements: int = 192
    element_pitch: float = 30.24
    pixels_per_element: int = 9
    dcr: float = 10.0
    time_resolution: float = 1.0
    dead_time: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.pde <= 1.0:
            raise ValueError(f"pde must be in (0, 1], got {self.pde}")
        if self.n_elements < 1:
            raise ValueError("n_elements must be >= 1")
        if self.element_pitch <= 0.0:
            raise ValueError("element_pitch must be positive")
        if self.dcr < 0.0:
            raise ValueError("dcr must be non-negative")
        if self.time_resolution <= 0.0:
            raise ValueError("time_resolution must be positive")
        if self.dead_time < 0.0:
            raise ValueError("dead_time must be non-negative")


@dataclass(frozen=True)
class PulseSpec:
    """Gaussian pulse train parameters (times in ns)."""

    fwhm: float = 180.0
    mean_photons: float = 1.0
    n_pulses: int = 2550
    period: float = 1000.0
    center_time: float = 400.0

    def __post_init__(self):
        if self.fwhm <= 0.0:
            raise ValueError("fwhm must be positive")
        if self.mean_photons < 0.0:
            raise ValueError("mean_photons must be non-negative")
        if self.n_pulses < 1:
            raise ValueError("n_pulses must be >= 1")
        if not 0.0 < self.center_time < self.period:
            raise ValueError("center_time must lie inside the record period")

    @property
    def sigma(self) -> float:
        return self.fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class SimScenario:
    """Complete configuration of one simulated measurement.

    detunings are frequency offsets from the layout center wavelength in
    MHz.  eta_chain collects every pre-detector transmission factor (etalon
    throughput, y acceptance, ...); alignment_offset shifts the beam against
    the element grid in um; beam_center_element anchors the undetuned beam
    center on that element.
    """

    vipa: vp.VipaSpec
    layout: vp.OpticalLayout
    array: SpadArraySpec
    pulse: PulseSpec
    detunings: tuple[float, ...]
    seed: int
    alignment_offset: float = 0.0
    eta_chain: float = 1.0
    beam_center_element: int = 100

    def __post_init__(self):
        if not 0.0 < self.eta_chain <= 1.0:
            raise ValueError(f"eta_chain must be in (0, 1], got {self.eta_chain}")
        if len(self.detunings) == 0 or not all(math.isfinite(d) for d in self.detunings):
            raise ValueError("detunings must be a non-empty tuple of finite values")
        if len(set(self.detunings)) != len(self.detunings):
            raise ValueError("detunings must be distinct")

    def detuning_rank(self, detuning_mhz: float) -> int:
        """Rank of a detuning in canonical sorted order (sub-seed derivation)."""
        ordered = sorted(self.detunings)
        if detuning_mhz not in ordered:
            raise ValueError(f"detuning {detuning_mhz} MHz is not part of this scenario")
        return ordered.index(detuning_mhz)


@dataclass(frozen=True)
class DetectionEvent:
    pulse_index: int
    element: int
    time_tag: float
    origin: str


@dataclass
class EventList:
    """Column-oriented store of detection events (one simulated detuning)."""

    pulse_index: np.ndarray
    element: np.ndarray
    time_tag: np.ndarray
    origin: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.pulse_index)

    def __iter__(self):
        for i in range(len(self)):
            org = _ORIGIN_NAMES[self.origin[i]] if self.origin is not None else "unknown"
            yield DetectionEvent(int(self.pulse_index[i]), int(self.element[i]), float(self.time_tag[i]), org)

    @classmethod
    def empty(cls) -> "EventList":
        return cls(
            pulse_index=np.empty(0, dtype=np.int64),
            element=np.empty(0, dtype=np.int64),
            time_tag=np.empty(0, dtype=np.float64),
            origin=np.empty(0, dtype=np.uint8),
        )

    @classmethod
    def concat(cls, parts) -> "EventList":
        parts = list(parts)
        if not parts:
            return cls.empty()
        origin = None
        if all(p.origin is not None for p in parts):
            origin = np.concatenate([p.origin for p in parts])
        return cls(
            pulse_index=np.concatenate([p.pulse_index for p in parts]),
            element=np.concatenate([p.element for p in parts]),
            time_tag=np.concatenate([p.time_tag for p in parts]),
            origin=origin,
        )

    def sorted_canonical(self) -> "EventList":
        """Stable total order: (pulse_index, time_tag, element, origin)."""
        keys = [self.element, self.time_tag, self.pulse_index]
        if self.origin is not None:
            keys.insert(0, self.origin)
        idx = np.lexsort(keys)
        return EventList(
            pulse_index=self.pulse_index[idx],
            element=self.element[idx],
            time_tag=self.time_tag[idx],
            origin=self.origin[idx] if self.origin is not None else None,
        )

    def select(self, mask) -> "EventList":
        return EventList(
            pulse_index=self.pulse_index[mask],
            element=self.element[mask],
            time_tag=self.time_tag[mask],
            origin=self.origin[mask] if self.origin is not None else None,
        )

    def photons(self) -> "EventList":
        if self.origin is None:
            raise ValueError("origin information missing (stripped export?)")
        return self.select(self.origin == ORIGIN_PHOTON)

    def darks(self) -> "EventList":
        if self.origin is None:
            raise ValueError("origin information missing (stripped export?)")
        return self.select(self.origin == ORIGIN_DARK)


@dataclass(frozen=True)
class SpatialDensity:
    """Normalized 1-D focal-plane density (per um) for one detuning."""

    x_um: np.ndarray
    density: np.ndarray

    @property
    def mode_um(self) -> float:
        return float(self.x_um[int(np.argmax(self.density))])


def spatial_pdf(scenario: SimScenario, detuning_mhz: float, n_samples: int = 4096) -> SpatialDensity:
    """Element-row intensity slice around the predicted peak, unit integral.

    The window spans +-6 element pitches around the dispersion-predicted
    peak position and is normalized by the trapezoidal rule.
    """
    if n_samples < 2048:
        raise ValueError("n_samples must be >= 2048 for adequate sampling density")
    layout = scenario.layout
    lam = vp.resonance_aligned_wavelength(scenario.vipa, layout, detuning_mhz)
    x_peak = vp.peak_position_um(scenario.vipa, layout, detuning_mhz)
    half = 6.0 * scenario.array.element_pitch
    xs = np.linspace(x_peak - half, x_peak + half, n_samples)
    vals = vp.output_intensity(scenario.vipa, layout, xs, 0.0, lam)
    total = np.trapezoid(vals, xs)
    if not total > 1e-300:
        raise DegenerateProfileError(f"intensity profile at {detuning_mhz} MHz carries no weight")
    return SpatialDensity(x_um=xs, density=vals / total)


def element_for_position(array: SpadArraySpec, x_det_um):
    """Element index for a detector-frame position; -1 when off the row.

    Element k covers (k*pitch, (k+1)*pitch]; an exact boundary hit belongs
    to the lower element.
    """
    x = np.asarray(x_det_um, dtype=float)
    idx = np.ceil(x / array.element_pitch).astype(np.int64) - 1
    idx[(idx < 0) | (idx >= array.n_elements)] = -1
    return idx


def _beam_anchor_um(scenario: SimScenario) -> float:
    """Detector-frame position of the optical origin (undetuned beam center)."""
    return (scenario.beam_center_element + 0.5) * scenario.array.element_pitch + scenario.alignment_offset


def _pulse_stream(seed: int, det_rank: int, pulse_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=(seed, det_rank, pulse_index)))


def _truncated_gaussian_times(rng, n, pulse: PulseSpec):
    t = rng.normal(pulse.center_time, pulse.sigma, n)
    bad = (t < 0.0) | (t >= pulse.period)
    while np.any(bad):
        t[bad] = rng.normal(pulse.center_time, pulse.sigma, int(bad.sum()))
        bad = (t < 0.0) | (t >= pulse.period)
    return t


def _simulate_chunk(scenario, det_rank, pulse_range, inv_cdf_x, inv_cdf_u):
    array, pulse = scenario.array, scenario.pulse
    res = array.time_resolution
    mu = pulse.mean_photons * scenario.eta_chain * array.pde
    dark_rate = array.n_elements * array.dcr * pulse.period * 1e-9
    anchor = _beam_anchor_um(scenario)

    pulses, elements, tags, origins = [], [], [], []
    for p in pulse_range:
        rng = _pulse_stream(scenario.seed, det_rank, p)
        n_ph = rng.poisson(mu) if mu > 0.0 else 0
        if n_ph:
            u = rng.random(n_ph)
            x_det = np.interp(u, inv_cdf_u, inv_cdf_x) + anchor
            el = element_for_position(array, x_det)
            t = _truncated_gaussian_times(rng, n_ph, pulse)
            keep = el >= 0
            if np.any(keep):
                pulses.append(np.full(int(keep.sum()), p, dtype=np.int64))
                elements.append(el[keep])
                tags.append(np.floor(t[keep] / res) * res)
                origins.append(np.full(int(keep.sum()), ORIGIN_PHOTON, dtype=np.uint8))
        n_dk = rng.poisson(dark_rate) if dark_rate > 0.0 else 0
        if n_dk:
            el = rng.integers(0, array.n_elements, n_dk)
            t = rng.uniform(0.0, pulse.period, n_dk)
            pulses.append(np.full(n_dk, p, dtype=np.int64))
            elements.append(el.astype(np.int64))
            tags.append(np.floor(t / res) * res)
            origins.append(np.full(n_dk, ORIGIN_DARK, dtype=np.uint8))

    if not pulses:
        return EventList.empty()
    return EventList(
        pulse_index=np.concatenate(pulses),
        element=np.concatenate(elements),
        time_tag=np.concatenate(tags),
        origin=np.concatenate(origins),
    )


def _apply_dead_time(events: EventList, dead_time: float) -> EventList:
    """Non-paralyzable dead time per (pulse, element), in time order."""
    order = np.lexsort((events.time_tag, events.element, events.pulse_index))
    keep = np.ones(len(events), dtype=bool)
    last_key = None
    last_t = -np.inf
    for i in order:
        key = (events.pulse_index[i], events.element[i])
        t = events.time_tag[i]
        if key == last_key and t - last_t < dead_time:
            keep[i] = False
        else:
            last_key, last_t = key, t
    return events.select(keep)


def simulate(scenario: SimScenario, detuning_mhz: float, workers: int = 1) -> EventList:
    """Simulate one detuning; output is fully determined by (scenario, detuning).

    ``workers`` only chunks the pulse loop (threads); the canonical sort and
    per-pulse streams make the result identical for any worker count.
    """
    det_rank = scenario.detuning_rank(detuning_mhz)
    pdf = spatial_pdf(scenario, detuning_mhz)
    # inverse-CDF table for position sampling
    dx = np.diff(pdf.x_um)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * dx * (pdf.density[1:] + pdf.density[:-1]))])
    cdf /= cdf[-1]

    n_pulses = scenario.pulse.n_pulses
    workers = max(1, int(workers))
    if workers == 1:
        events = _simulate_chunk(scenario, det_rank, range(n_pulses), pdf.x_um, cdf)
    else:
        bounds = np.linspace(0, n_pulses, workers + 1).astype(int)
        chunks = [range(bounds[i], bounds[i + 1]) for i in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda c: _simulate_chunk(scenario, det_rank, c, pdf.x_um, cdf), chunks))
        events = EventList.concat(parts)
    if scenario.array.dead_time > 0.0:
        events = _apply_dead_time(events, scenario.array.dead_time)
    return events.sorted_canonical()


def run_experiment(scenario: SimScenario, workers: int = 1) -> dict[float, EventList]:
    """Simulate every detuning of the scenario with decorrelated sub-streams."""
    return {d: simulate(scenario, d, workers=workers) for d in scenario.detunings}


def write_events_csv(events: EventList, path, include_origin: bool = False) -> None:
    """Export events as pulse_index,element,time_tag_ns records (origin optional)."""
    with open(path, "w", encoding="utf-8") as fh:
        if include_origin:
            if events.origin is None:
                raise ValueError("origin information missing; cannot write sidecar")
            fh.write("pulse_index,element,time_tag_ns,origin\n")
            for i in range(len(events)):
                fh.write(
                    f"{events.pulse_index[i]},{events.element[i]},"
                    f"{events.time_tag[i]:.17g},{_ORIGIN_NAMES[events.origin[i]]}\n"
                )
        else:
            fh.write("pulse_index,element,time_tag_ns\n")
            for i in range(len(events)):
                fh.write(f"{events.pulse_index[i]},{events.element[i]},{events.time_tag[i]:.17g}\n")


def read_events_csv(path) -> EventList:
    """Parse an event export; malformed lines are reported with their number."""
    pulses, elements, tags, origins = [], [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MalformedInputError(f"{path}: empty file (missing header)")
    header = lines[0].strip()
    if header not in ("pulse_index,element,time_tag_ns", "pulse_index,element,time_tag_ns,origin"):
        raise MalformedInputError(f"{path}: line 1: unrecognized header {header!r}")
    with_origin = header.endswith(",origin")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            if with_origin:
                p, e, t, o = parts
                origins.append(_ORIGIN_NAMES.index(o.strip()))
            else:
                p, e, t = parts
            pulses.append(int(p))
            elements.append(int(e))
            tags.append(float(t))
        except (ValueError, IndexError) as exc:
            raise MalformedInputError(f"{path}: line {lineno}: cannot parse {line!r}") from exc
    return EventList(
        pulse_index=np.asarray(pulses, dtype=np.int64),
        element=np.asarray(elements, dtype=np.int64),
        time_tag=np.asarray(tags, dtype=np.float64),
        origin=np.asarray(origins, dtype=np.uint8) if with_origin else None,
    )
