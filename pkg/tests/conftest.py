import math

import pytest

from spectro import OpticalLayout, PulseSpec, SimScenario, SpadArraySpec, VipaSpec

DEG = math.pi / 180.0


@pytest.fixture
def vipa_ref():
    return VipaSpec(R=0.996, r=0.945, n_r=1.46, t=6.74, L=18.0)


@pytest.fixture
def vipa_thick():
    return VipaSpec(R=0.996, r=0.945, n_r=1.46, t=16.5, L=18.0)


@pytest.fixture
def layout_current():
    # as-built lens set for the 6.74 mm etalon
    return OpticalLayout(lambda0=605.9773, W=1.0, theta_in=0.68 * DEG, f_in=400.0, f_x=1000.0, f_y=40.0)


@pytest.fixture
def layout_current_derived():
    # same geometry with the exactly solved f_x
    return OpticalLayout(lambda0=605.9773, W=1.0, theta_in=0.68 * DEG, f_in=400.0, f_x=1016.0, f_y=40.0)


@pytest.fixture
def layout_redesigned():
    return OpticalLayout(lambda0=605.9773, W=1.0, theta_in=0.30 * DEG, f_in=498.0, f_x=449.0, f_y=40.0)


@pytest.fixture
def array_spec():
    return SpadArraySpec(pde=0.5)


@pytest.fixture
def pulse_spec():
    return PulseSpec()


@pytest.fixture
def scenario_current(vipa_ref, layout_current, array_spec, pulse_spec):
    def make(seed=7, detunings=(0.0, 120.0, 240.0), **kw):
        return SimScenario(
            vipa=vipa_ref,
            layout=layout_current,
            array=array_spec,
            pulse=pulse_spec,
            detunings=detunings,
            seed=seed,
            eta_chain=0.69,
            **kw,
        )

    return make
