"""Sectioned key=value run configuration.

One INI file drives every pipeline stage; each section mirrors the fields of
one parameter type (units in the key names).  All sections present in the
file are validated up front so no stage starts work on a bad configuration.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass

from . import repeater as rp
from . import vipa as vp
from .design import RAD_PER_DEG, DesignGoal
from .errors import ConfigError, InvalidLayoutError
from .simulate import PulseSpec, SimScenario, SpadArraySpec

_KNOWN_KEYS = {
    "vipa": {"R", "r", "n_r", "t_mm", "L_mm"},
    "layout": {"lambda0_nm", "W_mm", "theta_in_deg", "f_in_mm", "f_x_mm", "f_y_mm"},
    "goal": {"delta_nu_mhz", "pitch_um", "y_element_um", "fwhm_target_mhz", "theta_in_target_deg"},
    "array": {
        "pde",
        "n_elements",
        "element_pitch_um",
        "pixels_per_element",
        "dcr_cps",
        "time_resolution_ns",
        "dead_time_ns",
    },
    "pulse": {"fwhm_ns", "mean_photons", "n_pulses", "period_ns", "center_time_ns"},
    "scenario": {"detunings_mhz", "alignment_offset_um", "eta_chain", "beam_center_element", "seed"},
    "analysis": {"window_ns", "weighting", "dark_subtract"},
    "profile": {"x_half_range_um", "samples"},
    "herald": {
        "p",
        "alpha_db_per_km",
        "L_link_km",
        "eta_det_single",
        "eta_det_multi",
        "eta_wc",
        "eta_vipa_list",
        "M_max",
    },
    "output": {"out_dir"},
}


@dataclass
class RunConfig:
    """Validated parameter bundle for the command-line pipeline."""

    vipa: vp.VipaSpec | None = None
    layout: vp.OpticalLayout | None = None
    goal: DesignGoal | None = None
    array: SpadArraySpec | None = None
    pulse: PulseSpec | None = None
    detunings: tuple[float, ...] = ()
    alignment_offset: float = 0.0
    eta_chain: float = 1.0
    beam_center_element: int = 100
    seed: int = 0
    window: tuple[float, float] = (200.0, 650.0)
    weighting: str = "uniform"
    dark_subtract: bool = False
    profile_half_range: float = 150.0
    profile_samples: int = 2048
    herald_single: rp.LinkParams | None = None
    herald_multis: dict[str, rp.LinkParams] | None = None
    herald_m_max: int = 250
    out_dir: str = "runs"

    def scenario(self) -> SimScenario:
        self.require("vipa", "layout", "array", "pulse")
        if not self.detunings:
            raise ConfigError("section [scenario] with detunings_mhz is required")
        return SimScenario(
            vipa=self.vipa,
            layout=self.layout,
            array=self.array,
            pulse=self.pulse,
            detunings=self.detunings,
            seed=self.seed,
            alignment_offset=self.alignment_offset,
            eta_chain=self.eta_chain,
            beam_center_element=self.beam_center_element,
        )

    def require(self, *names: str) -> None:
        for n in names:
            if getattr(self, n) is None:
                raise ConfigError(f"section [{n}] is required for this command")


def _floats_csv(raw: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in raw.split(",") if tok.strip())


def load_config(path) -> RunConfig:
    """Parse and validate a run configuration file."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case (R vs r are distinct reflectivities)
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    cfg = RunConfig()
    try:
        if parser.has_section("vipa"):
            s = parser["vipa"]
            cfg.vipa = vp.VipaSpec(
                R=s.getfloat("R"),
                r=s.getfloat("r"),
                n_r=s.getfloat("n_r"),
                t=s.getfloat("t_mm"),
                L=s.getfloat("L_mm"),
            )
        if parser.has_section("layout"):
            s = parser["layout"]
            cfg.layout = vp.OpticalLayout(
                lambda0=s.getfloat("lambda0_nm"),
                W=s.getfloat("W_mm"),
                theta_in=s.getfloat("theta_in_deg") * RAD_PER_DEG,
                f_in=s.getfloat("f_in_mm"),
                f_x=s.getfloat("f_x_mm"),
                f_y=s.getfloat("f_y_mm"),
            )
        if parser.has_section("goal"):
            if cfg.layout is None:
                raise ConfigError("[goal] needs [layout] for lambda0_nm and W_mm")
            s = parser["goal"]
            theta_t = s.getfloat("theta_in_target_deg", fallback=None)
            cfg.goal = DesignGoal(
                lambda0=cfg.layout.lambda0,
                delta_nu=s.getfloat("delta_nu_mhz"),
                pitch=s.getfloat("pitch_um"),
                W=cfg.layout.W,
                y_element=s.getfloat("y_element_um", fallback=30.0),
                fwhm_target=s.getfloat("fwhm_target_mhz", fallback=None),
                theta_in_target=theta_t * RAD_PER_DEG if theta_t is not None else None,
            )
        if parser.has_section("array"):
            s = parser["array"]
            cfg.array = SpadArraySpec(
                pde=s.getfloat("pde"),
                n_elements=s.getint("n_elements", fallback=192),
                element_pitch=s.getfloat("element_pitch_um", fallback=30.24),
                pixels_per_element=s.getint("pixels_per_element", fallback=9),
                dcr=s.getfloat("dcr_cps", fallback=10.0),
                time_resolution=s.getfloat("time_resolution_ns", fallback=1.0),
                dead_time=s.getfloat("dead_time_ns", fallback=0.0),
            )
        if parser.has_section("pulse"):
            s = parser["pulse"]
            cfg.pulse = PulseSpec(
                fwhm=s.getfloat("fwhm_ns", fallback=180.0),
                mean_photons=s.getfloat("mean_photons", fallback=1.0),
                n_pulses=s.getint("n_pulses", fallback=2550),
                period=s.getfloat("period_ns", fallback=1000.0),
                center_time=s.getfloat("center_time_ns", fallback=400.0),
            )
        if parser.has_section("scenario"):
            s = parser["scenario"]
            cfg.detunings = _floats_csv(s.get("detunings_mhz", fallback=""))
            cfg.alignment_offset = s.getfloat("alignment_offset_um", fallback=0.0)
            cfg.eta_chain = s.getfloat("eta_chain", fallback=1.0)
            cfg.beam_center_element = s.getint("beam_center_element", fallback=100)
            cfg.seed = s.getint("seed", fallback=0)
        if parser.has_section("analysis"):
            s = parser["analysis"]
            window = _floats_csv(s.get("window_ns", fallback="200,650"))
            if len(window) != 2 or window[0] >= window[1]:
                raise ConfigError(f"window_ns must be 'lo,hi' with lo < hi, got {window}")
            cfg.window = (window[0], window[1])
            cfg.weighting = s.get("weighting", fallback="uniform")
            if cfg.weighting not in ("uniform", "poisson"):
                raise ConfigError(f"weighting must be 'uniform' or 'poisson', got {cfg.weighting!r}")
            cfg.dark_subtract = s.getboolean("dark_subtract", fallback=False)
        if parser.has_section("profile"):
            s = parser["profile"]
            cfg.profile_half_range = s.getfloat("x_half_range_um", fallback=150.0)
            cfg.profile_samples = s.getint("samples", fallback=2048)
            if cfg.profile_half_range <= 0 or cfg.profile_samples < 2:
                raise ConfigError("[profile] needs x_half_range_um > 0 and samples >= 2")
        if parser.has_section("herald"):
            s = parser["herald"]
            common = dict(
                p=s.getfloat("p"),
                alpha=s.getfloat("alpha_db_per_km", fallback=0.2),
                L_link=s.getfloat("L_link_km", fallback=0.0),
            )
            cfg.herald_single = rp.LinkParams(eta_det=s.getfloat("eta_det_single", fallback=1.0), **common)
            etas = _floats_csv(s.get("eta_vipa_list", fallback="1.0"))
            eta_det_multi = s.getfloat("eta_det_multi", fallback=1.0)
            eta_wc = s.getfloat("eta_wc", fallback=1.0)
            cfg.herald_multis = {
                f"s{i + 2}": rp.LinkParams(eta_det=eta_det_multi, eta_vipa=ev, eta_wc=eta_wc, **common)
                for i, ev in enumerate(etas)
            }
            cfg.herald_m_max = s.getint("M_max", fallback=250)
            if cfg.herald_m_max < 1:
                raise ConfigError("M_max must be >= 1")
        if parser.has_section("output"):
            cfg.out_dir = parser["output"].get("out_dir", fallback="runs")
    except ConfigError:
        raise
    except (ValueError, InvalidLayoutError) as exc:
        raise ConfigError(str(exc)) from exc

    if cfg.detunings and not all(math.isfinite(d) for d in cfg.detunings):
        raise ConfigError("detunings must be finite")
    return cfg
