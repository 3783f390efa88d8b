"""Unit conventions and conversions used at every module boundary.

Fixed conventions: etalon dimensions, focal lengths and beam radii in mm;
focal-plane coordinates in um; wavelengths in nm and wavelength shifts in pm;
frequencies in MHz (FSR in GHz); times in ns.
"""

C_M_PER_S = 299_792_458.0  # speed of light, exact by definition
C_MM_PER_NS = C_M_PER_S * 1e-6

MM_PER_UM = 1e-3
MM_PER_NM = 1e-6
PM_PER_NM = 1e3


def nm_to_pm(value_nm):
    return value_nm * PM_PER_NM


def pm_to_nm(value_pm):
    return value_pm / PM_PER_NM


def dlambda_pm_to_dnu_mhz(dlambda_pm, lambda0_nm):
    """First-order wavelength-shift to frequency-shift conversion.

    dnu = -c * dlambda / lambda0**2; with dlambda in pm and lambda0 in nm the
    prefactors collapse so the result is directly in MHz.
    """
    return -C_M_PER_S * dlambda_pm / (lambda0_nm * lambda0_nm)


def dnu_mhz_to_dlambda_pm(dnu_mhz, lambda0_nm):
    """Inverse of :func:`dlambda_pm_to_dnu_mhz`."""
    return -(lambda0_nm * lambda0_nm) * dnu_mhz / C_M_PER_S
