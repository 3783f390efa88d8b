"""Focal-plane beam profiles of the current and redesigned spectrometers.

Plots the element-row intensity slice for three frequency modes spaced by
120 MHz.  With the 6.74 mm etalon each mode spans more than two detector
elements, so neighboring modes overlap; the 16.5 mm redesign confines a
mode to roughly one element at the same 30 um per 120 MHz dispersion.
"""

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from spectro import OpticalLayout, VipaSpec
from spectro.vipa import intensity_grid, profile_fwhm_um, resonance_aligned_wavelength

DEG = math.pi / 180.0
OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

setups = {
    "current (t = 6.74 mm)": (
        VipaSpec(R=0.996, r=0.945, n_r=1.46, t=6.74, L=18.0),
        OpticalLayout(lambda0=605.9773, W=1.0, theta_in=0.68 * DEG, f_in=400.0, f_x=1000.0, f_y=40.0),
    ),
    "redesigned (t = 16.5 mm)": (
        VipaSpec(R=0.996, r=0.945, n_r=1.46, t=16.5, L=18.0),
        OpticalLayout(lambda0=605.9773, W=1.0, theta_in=0.30 * DEG, f_in=498.0, f_x=449.0, f_y=40.0),
    ),
}

fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
for ax, (title, (vipa, layout)) in zip(axes, setups.items()):
    for det in (0.0, 120.0, 240.0):
        lam = resonance_aligned_wavelength(vipa, layout, det)
        grid = intensity_grid(vipa, layout, lam, (-80.0, 150.0), None, 4096)
        prof = grid.values[0] / grid.values[0].max()
        ax.plot(grid.x_um, prof, label=f"{det:+.0f} MHz")
        if det == 0.0:
            print(f"{title}: FWHM = {profile_fwhm_um(grid.x_um, prof):.1f} um")
    for k in range(-2, 5):
        ax.axvline(k * 30.24 - 15.12, color="0.8", lw=0.6, zorder=0)  # element boundaries
    ax.set_title(title)
    ax.set_xlabel("focal-plane position x (um)")
    ax.legend()
axes[0].set_ylabel("relative intensity")
fig.tight_layout()
fig.savefig(OUT / "beam_profiles.png", dpi=150)
print(f"figure written to {OUT / 'beam_profiles.png'}")

# peak separation per 120 MHz step, measured off the plotted curves
for title, (vipa, layout) in setups.items():
    peaks = []
    for det in (0.0, 120.0):
        lam = resonance_aligned_wavelength(vipa, layout, det)
        grid = intensity_grid(vipa, layout, lam, (-80.0, 150.0), None, 4096)
        peaks.append(grid.x_um[int(np.argmax(grid.values[0]))])
    print(f"{title}: peak separation {peaks[1] - peaks[0]:.2f} um per 120 MHz")
