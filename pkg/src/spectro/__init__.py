"""Design, simulation and analysis toolkit for VIPA + SPAD-array single-photon spectroscopy."""

from .analyze import (
    LorentzianFit,
    ModeDecision,
    ShiftEstimate,
    SpatialProfile,
    TimeHistogram,
    build_time_histograms,
    classify_mode,
    crosstalk_metric,
    estimate_shifts,
    fit_lorentzian,
    integrate_window,
)
from .design import (
    DesignGoal,
    DesignResult,
    full_design,
    solve_fin_interval,
    solve_fx,
    solve_incident_angle,
    solve_thickness,
)
from .repeater import LinkParams, crossover_modes, p_multi, p_single, sweep
from .simulate import (
    DetectionEvent,
    EventList,
    PulseSpec,
    SimScenario,
    SpadArraySpec,
    run_experiment,
    simulate,
    spatial_pdf,
)
from .vipa import (
    IntensityGrid,
    OpticalLayout,
    VipaSpec,
    dispersion_shift_mhz,
    dispersion_shift_pm,
    fsr_ghz,
    fwhm_freq_mhz,
    intensity_grid,
    output_intensity,
    phase,
    virtual_source_count,
)

__version__ = "0.1.0"
