import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_record
from oracles import CHAIN, PREVS, chain_ok, oracle_labels, random_tuples
from trajvqa.phaseseg import (
    PhaseLabel as P,
    SegThresholds,
    aperture_series,
    classify_frame,
    enforce_order,
    label_frames,
    median_smooth,
    order_violations,
    run_at,
    run_length,
    segment,
)
from trajvqa.trajmodel.synth import random_episode_spec, synthesize

TH = SegThresholds()
labels_st = st.lists(st.sampled_from(list(P)), max_size=60)


def test_threshold_invariants():
    for bad in ({"tau_g": 0.8}, {"tau_f": -1}, {"epsilon": 0}, {"smooth_window": 4}, {"tau_c": 1.0}):
        with pytest.raises(ValueError):
            SegThresholds(**bad)


def test_aperture_series_constant_open():
    rec = make_record(np.zeros((6, 3)), np.zeros(6))
    s, ds = aperture_series(rec, SegThresholds(smooth_window=1))
    assert np.all(s == 0) and np.all(ds == 0)


def test_aperture_series_difference():
    rec = make_record(np.zeros((3, 3)), [0, 0.5, 1.0])
    s, ds = aperture_series(rec, SegThresholds(smooth_window=1))
    assert list(ds) == [0, 0.5, 0.5]


def test_median_removes_impulse():
    assert list(median_smooth([0, 0, 1, 0, 0], 3)) == [0, 0, 0, 0, 0]


@pytest.mark.parametrize(
    "s,ds,f,prev,expected",
    [
        (0.10, -0.05, None, P.TRANSITION, P.APPROACH),
        (0.80, 0.00, 3.0, P.STABILIZE, P.CONTACT),
        (0.50, 0.10, None, P.STABILIZE, P.TRANSITION),
        (0.10, 0.00, None, P.APPROACH, P.STABILIZE),
        (0.80, 0.00, 1.0, P.STABILIZE, P.TRANSITION),
        (0.80, 0.00, None, P.STABILIZE, P.CONTACT),
        (0.90, 0.05, 5.0, P.CONTACT, P.RELEASE),
        (0.10, 0.05, 0.0, P.RELEASE, P.RESET),
        (0.10, 0.00, None, P.TRANSITION, P.TRANSITION),
    ],
)
def test_classify_examples(s, ds, f, prev, expected):
    assert classify_frame(s, ds, f, prev, TH) is expected


def test_kinematic_mode_flips_direction_tests():
    assert classify_frame(0.1, 0.05, None, P.TRANSITION, TH, "kinematic") is P.APPROACH
    assert classify_frame(0.9, -0.05, None, P.CONTACT, TH, "kinematic") is P.RELEASE
    assert classify_frame(0.1, -0.05, None, P.RELEASE, TH, "kinematic") is P.RESET
    # the steady-state cases are shared
    assert classify_frame(0.8, 0.0, None, P.STABILIZE, TH, "kinematic") is P.CONTACT


@pytest.mark.parametrize("mode", ["paper", "kinematic"])
def test_matches_table_oracle_sample(mode):
    s, ds, f, prev = random_tuples(20_000, seed=11)
    expected = oracle_labels(s, ds, f, prev, mode=mode)
    for i in range(len(s)):
        fm = None if math.isnan(f[i]) else float(f[i])
        assert classify_frame(float(s[i]), float(ds[i]), fm, prev[i], TH, mode) is expected[i]


@given(st.floats(0, 1), st.floats(-1, 1), st.one_of(st.none(), st.floats(0, 50)), st.sampled_from(PREVS))
def test_classify_is_total(s, ds, f, prev):
    assert classify_frame(s, ds, f, prev, TH) in set(P)


@given(st.floats(0.75, 1.0), st.floats(-0.02, 0.02), st.floats(0, 20))
def test_force_gating(s, ds, f):
    assert classify_frame(s, ds, None, P.STABILIZE, TH) is P.CONTACT
    assert (classify_frame(s, ds, f, P.STABILIZE, TH) is P.CONTACT) == (f > TH.tau_f)


@pytest.mark.parametrize(
    "labels,expected",
    [
        ([P.APPROACH, P.CONTACT, P.STABILIZE], [P.APPROACH, P.CONTACT, P.TRANSITION]),
        ([P.RESET, P.APPROACH], [P.RESET, P.APPROACH]),
        ([P.APPROACH, P.CONTACT], [P.APPROACH, P.CONTACT]),
        ([P.CONTACT, P.TRANSITION, P.APPROACH], [P.CONTACT, P.TRANSITION, P.TRANSITION]),
    ],
)
def test_enforce_order_examples(labels, expected):
    assert enforce_order(labels) == expected


@given(labels_st)
def test_enforce_order_properties(labels):
    out = enforce_order(labels)
    assert len(out) == len(labels)
    assert chain_ok(out)
    assert not order_violations(out)
    assert enforce_order(out) == out
    for a, b in zip(labels, out):
        assert b is a or b is P.TRANSITION
        if a is P.TRANSITION:
            assert b is P.TRANSITION


@given(labels_st)
def test_run_length_tiles(labels):
    runs = run_length(labels)
    if not labels:
        assert runs == []
        return
    assert runs[0].start_index == 0 and runs[-1].end_index == len(labels) - 1
    for a, b in zip(runs, runs[1:]):
        assert b.start_index == a.end_index + 1 and a.label is not b.label
    for t, lab in enumerate(labels):
        assert run_at(runs, t).label is lab


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_segment_order_on_random_episodes(seed):
    rec, _ = synthesize(random_episode_spec(np.random.default_rng(seed)), seed)
    for mode in ("paper", "kinematic"):
        runs = segment(rec, TH, mode)
        assert chain_ok([r.label for r in runs])
        assert runs[0].start_index == 0 and runs[-1].end_index == rec.T - 1


@given(st.lists(st.floats(0, 1), min_size=1, max_size=40), st.sampled_from([1, 3, 5, 7]))
def test_median_smooth_bounds(x, w):
    y = median_smooth(x, w)
    assert len(y) == len(x)
    assert min(x) <= y.min() and y.max() <= max(x)


def test_static_open_is_single_transition():
    rec = make_record(np.zeros((30, 3)), np.zeros(30))
    runs = segment(rec)
    assert [(r.label, r.start_index, r.end_index) for r in runs] == [(P.TRANSITION, 0, 29)]


def test_contact_follows_stabilize_across_closing_frames():
    s = [0.2, 0.1, 0.0, 0.0, 0.0, 0.3, 0.6, 0.9, 0.9, 0.9]
    ds = np.diff(s, prepend=s[0])
    labels = label_frames(s, ds, [None] * len(s), TH)
    assert labels[1] is P.APPROACH and labels[3] is P.STABILIZE
    assert labels[5] is P.TRANSITION and labels[8] is P.CONTACT


def _nontransition(runs):
    return [(r.label.value, r.start_index) for r in runs if r.label is not P.TRANSITION]


def _sidecar_runs(phases):
    return [(p, i) for i, p in enumerate(phases) if p != "Transition" and (i == 0 or phases[i - 1] != p)]


def test_pickplace_phase_order(pickplace, pickplace_sidecar):
    got = [lab for lab, _ in _nontransition(segment(pickplace))]
    assert got == [lab for lab, _ in _sidecar_runs(pickplace_sidecar["phases"])]
    assert got == ["Approach", "Stabilize", "Contact", "Release", "Reset"]


def test_two_cycle_loops(scripted):
    from trajvqa.trajmodel import load_manifest

    m, side = scripted["twocycle"]
    got = [lab for lab, _ in _nontransition(segment(load_manifest(m)))]
    assert got == [lab for lab, _ in _sidecar_runs(side["phases"])]
    i = got.index("Reset")
    assert "Approach" in got[i + 1:]


def test_order_chain_rank_covers_all_phases():
    assert set(CHAIN) == set(P) - {P.TRANSITION}
