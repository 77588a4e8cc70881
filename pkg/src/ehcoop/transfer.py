"""Per-slot optimal energy transfers and generalized water levels.

The inner problem of the decomposition: for fixed consumed powers
(pb1, pb2) in a single slot, find the transfer that maximizes the slot
rate, the resulting rate, and the marginal water levels.

All functions take consumed powers in mW (equivalently mJ for unit slots)
and read effective noises and efficiencies from the Scenario.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .model import InputError, ModelKind, Scenario, rate

BOUNDARY_TOL = 1e-12


class Regime(enum.Enum):
    NO_TRANSFER = "no-transfer"
    INTERIOR_1 = "interior-1"   # node 1 transfers part of its power
    INTERIOR_2 = "interior-2"
    FULL_1 = "full-1"           # node 1 transfers all of its power
    FULL_2 = "full-2"


@dataclass(frozen=True)
class SlotTransfer:
    delta: tuple
    regime: Regime
    rate_nats: float


def _check_powers(pb1, pb2):
    if pb1 < 0 or pb2 < 0:
        raise InputError("consumed powers must be non-negative")


def applied_rate(model_kind, pb1, pb2, delta, sc) -> float:
    """Slot capacity after applying transfers delta=(d1,d2) to (pb1,pb2)."""
    a1, a2 = sc.transfer_efficiency
    p1 = pb1 - delta[0] + a2 * delta[1]
    p2 = pb2 - delta[1] + a1 * delta[0]
    return rate(model_kind, max(p1, 0.0), max(p2, 0.0), sc)


def twc_transfer(pb1, pb2, sc: Scenario) -> SlotTransfer:
    """Two-way channel: the positive candidate of
    d_k = min(pb_k, [ (n_k+pb_k) - (n_j+pb_j)/a_k ]+ / 2) wins."""
    _check_powers(pb1, pb2)
    n1, n2 = sc.effective_noise_mw
    a1, a2 = sc.transfer_efficiency
    pb = (pb1, pb2)
    nn = (n1, n2)
    aa = (a1, a2)
    raw = [-math.inf, -math.inf]
    for k in range(2):
        j = 1 - k
        if aa[k] > 0:
            raw[k] = 0.5 * ((nn[k] + pb[k]) - (nn[j] + pb[j]) / aa[k])
    cand = [min(pb[k], max(0.0, raw[k])) for k in range(2)]
    if raw[0] > BOUNDARY_TOL and raw[1] > BOUNDARY_TOL:
        # impossible for a1*a2 <= 1; guard against pathological inputs
        raise InputError("both transfer candidates positive; requires a1*a2 > 1")
    if raw[0] >= -BOUNDARY_TOL and raw[0] > raw[1]:
        delta = (cand[0], 0.0)
        regime = Regime.FULL_1 if raw[0] > pb1 + BOUNDARY_TOL else Regime.INTERIOR_1
    elif raw[1] >= -BOUNDARY_TOL:
        delta = (0.0, cand[1])
        regime = Regime.FULL_2 if raw[1] > pb2 + BOUNDARY_TOL else Regime.INTERIOR_2
    else:
        delta = (0.0, 0.0)
        regime = Regime.NO_TRANSFER
    return SlotTransfer(delta, regime, twc_case_rate(pb1, pb2, regime, sc))


def twc_case_rate(pb1, pb2, regime: Regime, sc: Scenario) -> float:
    """The five-case closed form for the optimal-transfer slot rate."""
    n1, n2 = sc.effective_noise_mw
    a1, a2 = sc.transfer_efficiency
    if regime is Regime.NO_TRANSFER:
        return 0.5 * math.log1p(pb1 / n1) + 0.5 * math.log1p(pb2 / n2)
    if regime is Regime.INTERIOR_1:
        s = (n1 + pb1) + (n2 + pb2) / a1
        return math.log(0.5 * s * math.sqrt(a1 / (n1 * n2)))
    if regime is Regime.INTERIOR_2:
        s = (n2 + pb2) + (n1 + pb1) / a2
        return math.log(0.5 * s * math.sqrt(a2 / (n1 * n2)))
    if regime is Regime.FULL_1:
        return 0.5 * math.log1p((pb2 + a1 * pb1) / n2)
    return 0.5 * math.log1p((pb1 + a2 * pb2) / n1)


def _thc_weights(sc):
    # w_k = sigma_k^2 * h_k, up to a common factor: w1:w2 == n2:n1
    n1, n2 = sc.effective_noise_mw
    return n2, n1


def thc_transfer(pb1, pb2, sc: Scenario) -> SlotTransfer:
    """Two-hop channel: transfer equalizes the two received powers."""
    _check_powers(pb1, pb2)
    a1, a2 = sc.transfer_efficiency
    w1, w2 = _thc_weights(sc)
    d1 = d2 = 0.0
    regime = Regime.NO_TRANSFER
    num = w1 * pb1 - w2 * pb2
    if num > BOUNDARY_TOL and a1 > 0:
        d1 = num / (a1 * w2 + w1)
        regime = Regime.INTERIOR_1
    elif num < -BOUNDARY_TOL and a2 > 0:
        d2 = -num / (a2 * w1 + w2)
        regime = Regime.INTERIOR_2
    return SlotTransfer((d1, d2), regime,
                        applied_rate(ModelKind.THC, pb1, pb2, (d1, d2), sc))


def _mac_coeffs(sc):
    # per-user SNR coefficients of the sum-capacity, c_k = 1/n_k
    n1, n2 = sc.effective_noise_mw
    return 1.0 / n1, 1.0 / n2


def mac_sends(sc: Scenario) -> tuple:
    """Whether each user transfers its whole power; a channel constant.

    User k sends iff a_k*c_j > c_k strictly; ties resolve to no transfer.
    """
    c1, c2 = _mac_coeffs(sc)
    a1, a2 = sc.transfer_efficiency
    return a1 * c2 > c1, a2 * c1 > c2


def mac_transfer(pb1, pb2, sc: Scenario) -> SlotTransfer:
    """Multiple access channel: a linear program solved at a corner."""
    _check_powers(pb1, pb2)
    send1, send2 = mac_sends(sc)
    d1 = pb1 if send1 else 0.0
    d2 = pb2 if send2 else 0.0
    if send1 and d1 > 0:
        regime = Regime.FULL_1
    elif send2 and d2 > 0:
        regime = Regime.FULL_2
    else:
        regime = Regime.NO_TRANSFER
    return SlotTransfer((d1, d2), regime,
                        applied_rate(ModelKind.MAC, pb1, pb2, (d1, d2), sc))


def slot_transfer(model_kind, pb1, pb2, sc: Scenario) -> SlotTransfer:
    if model_kind is ModelKind.TWC:
        return twc_transfer(pb1, pb2, sc)
    if model_kind is ModelKind.THC:
        return thc_transfer(pb1, pb2, sc)
    return mac_transfer(pb1, pb2, sc)


def level_rate(model_kind, pb1, pb2, sc: Scenario) -> float:
    """The per-slot objective whose inverse marginal is the water level.

    For the TWC this is the slot capacity itself.  For the THC and MAC the
    level formulas drop the 1/2 factor of the capacity, so this surrogate is
    exactly twice the capacity; the maximizers coincide.
    """
    _check_powers(pb1, pb2)
    n1, n2 = sc.effective_noise_mw
    a1, a2 = sc.transfer_efficiency
    if model_kind is ModelKind.TWC:
        st = twc_transfer(pb1, pb2, sc)
        return st.rate_nats
    if model_kind is ModelKind.THC:
        t1 = (pb1 + a2 * pb2) / (n1 + a2 * n2)
        t2 = (a1 * pb1 + pb2) / (n2 + a1 * n1)
        return math.log1p(min(t1, t2))
    send1, send2 = mac_sends(sc)
    c1, c2 = _mac_coeffs(sc)
    g1 = a1 * c2 if send1 else c1
    g2 = a2 * c1 if send2 else c2
    return math.log1p(g1 * pb1 + g2 * pb2)


def water_level(model_kind, k, pb1, pb2, sc: Scenario) -> float:
    """Generalized water level v_k = 1/(dR/dpb_k) for node k in {1,2}.

    Strictly increasing in own consumed power; +inf where the marginal rate
    is zero (flat directions of the THC min and zero-efficiency transfers).
    """
    _check_powers(pb1, pb2)
    if k not in (1, 2):
        raise InputError("node index k must be 1 or 2")
    n1, n2 = sc.effective_noise_mw
    a1, a2 = sc.transfer_efficiency
    pb = (pb1, pb2)
    nn = (n1, n2)
    aa = (a1, a2)
    ki = k - 1
    j = 1 - ki
    if model_kind is ModelKind.TWC:
        regime = twc_transfer(pb1, pb2, sc).regime
        own = nn[ki] + pb[ki]
        oth = nn[j] + pb[j]
        if regime is Regime.NO_TRANSFER:
            return 2.0 * own
        if regime in (Regime.INTERIOR_1, Regime.INTERIOR_2):
            sender = 0 if regime is Regime.INTERIOR_1 else 1
            if sender == ki:
                return own + oth / aa[ki]
            return own + aa[j] * oth
        sender = 0 if regime is Regime.FULL_1 else 1
        if sender == ki:
            return 2.0 * (pb[ki] + oth / aa[ki])
        return 2.0 * (own + aa[j] * pb[j])
    if model_kind is ModelKind.THC:
        w = _thc_weights(sc)
        if w[ki] * pb[ki] < w[j] * pb[j]:
            return pb[ki] + aa[j] * pb[j] + nn[ki] + aa[j] * nn[j]
        if aa[ki] == 0:
            return math.inf
        return pb[ki] + pb[j] / aa[ki] + nn[ki] + nn[j] / aa[ki]
    send1, send2 = mac_sends(sc)
    c1, c2 = _mac_coeffs(sc)
    g1 = a1 * c2 if send1 else c1
    g2 = a2 * c1 if send2 else c2
    q = g1 * pb1 + g2 * pb2
    g_own = (g1, g2)[ki]
    if g_own == 0:
        return math.inf
    return (1.0 + q) / g_own
