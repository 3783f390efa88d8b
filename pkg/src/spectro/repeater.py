"""Heralding probabilities for single-photon-interference repeater links.

A mid-link Bell-state measurement heralds entanglement when exactly one
detector fires.  The single-mode success probability per trial is
2 p eta_det 10^(-(alpha L / 2) / 10); a frequency-multiplexed measurement
succeeds when at least one of M modes does, each mode paying the
spectrometer and wavelength-conversion efficiencies on top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import InvalidRegimeError, NeverCrossesError


@dataclass(frozen=True)
class LinkParams:
    """Elementary-link scalars.

    p: photon generation probability per mode; alpha: fiber loss (dB/km);
    L_link: elementary link length (km); M: number of multiplexed modes.
    """

    p: float
    eta_det: float = 1.0
    eta_vipa: float = 1.0
    eta_wc: float = 1.0
    alpha: float = 0.2
    L_link: float = 0.0
    M: int = 1

    def __post_init__(self):
        for name in ("p", "eta_det", "eta_vipa", "eta_wc"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.alpha < 0.0 or self.L_link < 0.0:
            raise ValueError("alpha and L_link must be non-negative")
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")


def half_link_transmission(params: LinkParams) -> float:
    """Fiber transmission to the midpoint, 10^(-(alpha L / 2) / 10)."""
    return 10.0 ** (-(params.alpha * params.L_link / 2.0) / 10.0)


def p_single(params: LinkParams) -> float:
    """Single-mode heralding probability per trial."""
    val = 2.0 * params.p * params.eta_det * half_link_transmission(params)
    if val > 1.0:
        raise InvalidRegimeError(
            f"single-mode success probability {val} exceeds 1; the linearized model is invalid"
        )
    return val


def per_mode_term(params: LinkParams) -> float:
    """Per-mode success probability inside the multiplexed configuration."""
    val = 2.0 * params.p * params.eta_vipa * params.eta_det * params.eta_wc * half_link_transmission(params)
    if not 0.0 <= val <= 1.0:
        raise InvalidRegimeError(f"per-mode success probability {val} outside [0, 1]")
    return val


def p_multi(params: LinkParams) -> float:
    """Probability that at least one of the M multiplexed modes heralds."""
    return 1.0 - (1.0 - per_mode_term(params)) ** params.M


def heralding_rate(probability: float, trial_time_s: float) -> float:
    """Convert a per-trial probability into a rate; the trial time is caller-supplied."""
    if trial_time_s <= 0.0:
        raise ValueError("trial_time_s must be positive")
    return probability / trial_time_s


def crossover_modes(params_single: LinkParams, params_multi: LinkParams) -> int:
    """Smallest M at which the multiplexed configuration strictly outperforms.

    Closed form ceil(ln(1 - P_single) / ln(1 - q)) plus a direct check of the
    neighbors, so p_multi(M-1) <= p_single < p_multi(M) holds exactly.
    """
    ps = p_single(params_single)
    q = per_mode_term(params_multi)
    if q <= 0.0:
        raise NeverCrossesError("per-mode probability is zero; multiplexing can never catch up")
    if q > ps:
        return 1

    def pm(m: int) -> float:
        return 1.0 - (1.0 - q) ** m

    m = max(1, math.ceil(math.log1p(-ps) / math.log1p(-q)))
    while pm(m) <= ps:
        m += 1
    while m > 1 and pm(m - 1) > ps:
        m -= 1
    return m


def sweep(params_single: LinkParams, multis: dict[str, LinkParams], m_values) -> list[dict]:
    """Tabulate p_single and every scenario's p_multi over a range of M."""
    m_values = list(m_values)
    if not m_values:
        raise ValueError("M range must be non-empty")
    ps = p_single(params_single)
    rows = []
    for m in m_values:
        row = {"M": int(m), "p_single": ps}
        for label, lp in multis.items():
            row[f"p_multi_{label}"] = p_multi(replace(lp, M=int(m)))
        rows.append(row)
    return rows


def sweep_to_csv(rows: list[dict], path) -> None:
    labels = [k for k in rows[0] if k.startswith("p_multi_")]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("M,p_single," + ",".join(labels) + "\n")
        for row in rows:
            fh.write(f"{row['M']},{row['p_single']:.17g}," + ",".join(f"{row[k]:.17g}" for k in labels) + "\n")


def reference_scenarios() -> tuple[LinkParams, dict[str, LinkParams]]:
    """The reference comparison set: an SSPD single-mode baseline against
    multiplexed spectrometer detection at three effective efficiencies
    (measured, expected for the current optics, and ideal in-element focus).

    Combined spectrometer+detector efficiency is carried in eta_vipa with
    eta_det folded to 1, since only the product enters the per-mode term.
    """
    base = dict(p=0.01, alpha=0.2, L_link=100.0)
    single = LinkParams(eta_det=0.9, **base)
    multis = {
        "s2": LinkParams(eta_det=1.0, eta_vipa=0.008, eta_wc=0.6, **base),
        "s3": LinkParams(eta_det=1.0, eta_vipa=0.09, eta_wc=0.6, **base),
        "s4": LinkParams(eta_det=1.0, eta_vipa=0.35, eta_wc=0.6, **base),
    }
    return single, multis
