import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phcavity.analysis.cavity import ModeSnapshot, ResonantMode, field_ratio, mode_cqed, mode_volume, split_q
from phcavity.analysis.cqed import (GAMMA_PERP_CS, LAMBDA_CS_D2, cavity_decay_rate, cqed_figures,
                                    critical_atom_number, critical_photon_number, reference_volume, vacuum_rabi)
from phcavity.analysis.resonances import (IllConditionedFit, NoPeakFound, dominant, extract_resonances,
                                          q_from_energy_decay, synthetic_ringdown)

A = 20
DT = 0.5
F0 = 0.297 / A
WINDOW = (0.25 / A, 0.35 / A)
T = np.arange(20000) * DT


# --- resonance extraction ----------------------------------------------------------

@pytest.mark.parametrize("Q", [300, 2078, 30000])
def test_single_ringdown(Q):
    r = extract_resonances(synthetic_ringdown(T, [(F0, Q, 1.0, 0.3)]), DT, WINDOW)
    assert r[0].Q == pytest.approx(Q, rel=0.01)
    assert r[0].frequency == pytest.approx(F0, rel=1e-6)
    assert r[0].amplitude == pytest.approx(1.0, rel=0.01)


def test_two_close_modes():
    x = synthetic_ringdown(T, [(F0, 2078, 1.0, 0.3), (1.03 * F0, 900, 0.6, 1.0)])
    r = sorted(extract_resonances(x, DT, WINDOW), key=lambda p: p.frequency)
    assert len(r) == 2
    assert r[0].Q == pytest.approx(2078, rel=0.05)
    assert r[1].Q == pytest.approx(900, rel=0.05)
    assert r[1].frequency == pytest.approx(1.03 * F0, rel=1e-4)


def test_noisy_signal():
    x = synthetic_ringdown(T, [(F0, 30000, 1.0, 0.3), (1.03 * F0, 900, 0.6, 1.0)], noise=1e-3, rng=1)
    r = dominant(extract_resonances(x, DT, WINDOW))
    assert r.Q == pytest.approx(30000, rel=0.05)


@given(f=st.floats(0.27, 0.33), Q=st.floats(500, 5000), phi=st.floats(-3, 3))
@settings(max_examples=15, deadline=None)
def test_ringdown_property(f, Q, phi):
    x = synthetic_ringdown(T, [(f / A, Q, 1.0, phi)])
    r = dominant(extract_resonances(x, DT, WINDOW))
    assert r.Q == pytest.approx(Q, rel=0.01)
    assert r.a_over_lambda(A) == pytest.approx(f, rel=1e-5)


def test_out_of_window_modes_ignored():
    x = synthetic_ringdown(T, [(F0, 2078, 1.0, 0.0), (0.45 / A, 500, 3.0, 0.0)])
    r = extract_resonances(x, DT, WINDOW)
    assert all(WINDOW[0] <= p.frequency <= WINDOW[1] for p in r)
    assert dominant(r).Q == pytest.approx(2078, rel=0.01)


def test_zero_signal_has_no_peak():
    with pytest.raises(NoPeakFound):
        extract_resonances(np.zeros(1000), DT, WINDOW)


def test_peak_at_window_edge():
    with pytest.raises(IllConditionedFit):
        extract_resonances(synthetic_ringdown(T, [(0.2505 / A, 2078, 1.0, 0.3)]), DT, WINDOW)


def test_dominant_threshold():
    x = synthetic_ringdown(T, [(F0, 2078, 1.0, 0.3)])
    with pytest.raises(NoPeakFound):
        dominant(extract_resonances(x, DT, WINDOW), min_q=1e5)


def test_energy_decay_q():
    Q = 1500.0
    w = 2 * math.pi * F0
    t = np.linspace(0, 4000, 200)
    assert q_from_energy_decay(t, np.exp(-w * t / Q), F0) == pytest.approx(Q)
    assert q_from_energy_decay(t, np.ones_like(t), F0) == math.inf


# --- Q splitting -----------------------------------------------------------------------

def test_split_q_additivity():
    w = 2 * math.pi * F0
    out = split_q(w, np.full(10, 3.0), np.full(10, 2e-4), np.full(10, 8e-4))
    assert 1 / out["Q_flux"] == pytest.approx(1 / out["Q_perp"] + 1 / out["Q_par"])
    assert not out["negative_face"]
    assert split_q(w, np.ones(4), -np.ones(4), np.ones(4))["negative_face"]


def test_toy_cavity_flux_matches_decay():
    # single mode leaking through two channels: W(t) = W0 exp(-w t / Q)
    w, Q, share = 2 * math.pi * F0, 2000.0, 0.3
    t = np.arange(0, 3000, 0.5)
    W = np.exp(-w * t / Q)
    P = w * W / Q
    out = split_q(w, W, share * P, (1 - share) * P)
    assert out["Q_flux"] == pytest.approx(q_from_energy_decay(t, W, F0), rel=0.1)
    assert out["Q_perp"] == pytest.approx(Q / share, rel=0.1)


def test_additivity_error():
    m = ResonantMode(20, 0.3, 1 / (1 / 2000 + 1 / 500), 2000, 500)
    assert m.additivity_error() < 1e-12


# --- mode volume -------------------------------------------------------------------------

def box_snapshot(shape, box, value=1.0, eps=1.0, mirrors=(False, False, False)):
    e = []
    for c in range(3):
        arr = np.zeros(shape, dtype=complex)
        sl = tuple(slice(lo, hi) for lo, hi in box)
        arr[sl] = value if c == 0 else 0.0
        e.append(arr)
    eps_arr = np.full(shape, eps)
    return ModeSnapshot(tuple(e), eps_arr, (eps_arr,) * 3, origin=(0.0, 0.0, 0.0), mirrors=mirrors)


def test_uniform_box_volume():
    snap = box_snapshot((20, 20, 20), ((5, 13), (4, 10), (6, 11)), eps=2.0)
    assert mode_volume(snap) == pytest.approx(8 * 6 * 5)


def test_mirrored_box_volume_counts_images():
    # half-position samples along x are doubled, node samples along y and z doubled off-plane
    snap = box_snapshot((20, 20, 20), ((0, 4), (0, 5), (0, 3)), mirrors=(True, True, True))
    assert mode_volume(snap) == pytest.approx(8 * 9 * 5)


@given(scale=st.floats(1e-6, 1e6))
@settings(max_examples=20, deadline=None)
def test_scale_invariance(scale):
    rng = np.random.default_rng(3)
    shape = (8, 9, 7)
    e = tuple(rng.normal(size=shape) + 1j * rng.normal(size=shape) for _ in range(3))
    eps = rng.uniform(1, 12, size=shape)
    snap = ModeSnapshot(e, eps, (eps,) * 3, origin=(-4.0, -4.0, -3.0))
    mode = ResonantMode(20, 0.3, 1000, 2000, 2000, V_mode=0.2, snapshot=snap)
    big = ResonantMode(20, 0.3, 1000, 2000, 2000, V_mode=0.2, snapshot=snap.scaled(scale))
    assert mode_volume(snap.scaled(scale)) == pytest.approx(mode_volume(snap), rel=1e-12)
    loc = (0.3, -1.2, 0.5)
    assert field_ratio(snap.scaled(scale), loc) == pytest.approx(field_ratio(snap, loc), rel=1e-12)
    a, b = mode_cqed(mode, loc), mode_cqed(big, loc)
    assert b.N0 == pytest.approx(a.N0, rel=1e-12)
    assert b.m0 == pytest.approx(a.m0, rel=1e-12)


def test_field_ratio_peak_is_one():
    snap = box_snapshot((10, 10, 10), ((2, 7), (2, 7), (2, 7)))
    assert field_ratio(snap, (4, 4, 4)) == pytest.approx(1.0)
    assert field_ratio(snap, (9, 9, 9)) == 0.0


# --- cavity QED --------------------------------------------------------------------------

def test_identities_at_gamma():
    gamma = 1.7e7
    assert critical_atom_number(gamma, gamma, gamma) == 2.0
    assert critical_photon_number(gamma, gamma) == 0.25


def test_figures_identities():
    f = cqed_figures(5000, 0.2, 0.6)
    assert f.N0 == pytest.approx(2 * f.kappa * f.gamma_perp / f.g_atom ** 2, rel=1e-14)
    assert f.m0 == pytest.approx((f.gamma_perp / (2 * f.g_atom)) ** 2, rel=1e-14)
    assert f.g_atom <= f.g0
    assert f.kappa == pytest.approx(2 * math.pi * 299792458 / 852e-9 / (4 * math.pi * 5000))


def test_regression_values():
    # hand-evaluated for lambda = 852 nm, gamma_perp = 2.6e6 rad/s, V_mode = 0.19 (lambda/2)^3
    V0 = reference_volume(LAMBDA_CS_D2, GAMMA_PERP_CS)
    assert V0 == pytest.approx(3.33033e-12, rel=1e-5)
    g0 = vacuum_rabi(GAMMA_PERP_CS, V0, 0.19 * (LAMBDA_CS_D2 / 2) ** 3)
    assert g0 == pytest.approx(3.91494e10, rel=1e-5)
    assert cqed_figures(1000, 0.19, 1.0).g0 == pytest.approx(g0)


def test_monotonic_in_q():
    lo, hi = cqed_figures(1000, 0.2, 0.5), cqed_figures(4000, 0.2, 0.5)
    assert hi.N0 < lo.N0
    assert hi.m0 == lo.m0


def test_zero_coupling_is_flagged():
    f = cqed_figures(1000, 0.2, 0.0)
    assert f.unbounded and math.isinf(f.N0) and math.isinf(f.m0)
    assert not f.strong_coupling


def test_strong_coupling_verdict():
    assert cqed_figures(2000, 0.1, 0.5).strong_coupling


@pytest.mark.parametrize("args", [(0, 0.2, 0.5), (1000, -1, 0.5), (1000, 0.2, 1.5)])
def test_invalid_inputs(args):
    with pytest.raises(ValueError):
        cqed_figures(*args)


def test_decay_rate_scales_inverse_q():
    assert cavity_decay_rate(852e-9, 100) == pytest.approx(10 * cavity_decay_rate(852e-9, 1000))
