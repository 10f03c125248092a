"""Relay-chain scheduling, the golden table, and numeric execution."""

import json
import os

import pytest

from twinrelay.errors import ScheduleError, ValidationError
from twinrelay.lattice import make_pair
from twinrelay.multihop import (
    anc_multihop_baseline,
    anc_multihop_snr,
    build_schedule,
    render_table,
    run_multihop,
    schedule_json,
    table_json,
    transmits,
)
from twinrelay.rates import rate_anc, rate_lattice

FIXTURE = os.path.join(
    os.path.dirname(__file__), "..", "src", "twinrelay", "data", "table1.json"
)


def test_golden_table_bytes():
    schedule = build_schedule(3, 3)
    with open(FIXTURE) as fh:
        assert table_json(schedule) == fh.read()


def test_golden_table_cells():
    schedule = build_schedule(3, 3)
    with open(FIXTURE) as fh:
        want = json.load(fh)
    got = render_table(schedule)
    assert got == want
    assert sum(len(v) for v in got["slots"].values()) == 30


def test_slot4_states_and_decodes():
    schedule = build_schedule(3, 3)
    slot4 = schedule.slots[3]
    assert slot4.cells["R2"]["state"] == {
        "x_{1,1}": 2, "x_{2,1}": 2, "x_{1,2}": 1, "x_{2,2}": 1,
    }
    assert slot4.cells["A"] == {"role": "decode", "packet": "x_{2,1}"}
    assert slot4.cells["B"] == {"role": "decode", "packet": "x_{1,1}"}


def test_half_duplex_disjoint():
    for L in range(1, 7):
        schedule = build_schedule(L, 5)
        for rec in schedule.slots:
            listeners = set(schedule.nodes) - set(rec.transmitters)
            assert listeners.isdisjoint(rec.transmitters)
            # adjacent nodes never transmit together
            for i, nd in enumerate(schedule.nodes[:-1]):
                nb = schedule.nodes[i + 1]
                assert not (nd in rec.transmitters and nb in rec.transmitters)


def test_two_relay_slot_parity():
    # with two relays: A and R2 open, then R1 and B
    assert transmits("A", 1, 2) and transmits("R2", 1, 2)
    assert not transmits("R1", 1, 2) and not transmits("B", 1, 2)
    assert transmits("R1", 2, 2) and transmits("B", 2, 2)


def test_throughput_one_decode_per_two_slots():
    for L in range(1, 7):
        schedule = build_schedule(L, 8)
        for node in ("A", "B"):
            periods = schedule.steady_state_periods(node)
            assert periods, f"no decodes at {node} for L={L}"
            assert set(periods) == {2}
            first = schedule.first_decode_slot(node)
            assert first in (L + 1, L + 2)
            assert first <= 2 * L + 2


def test_decode_events_have_unit_coefficient():
    schedule = build_schedule(4, 6)
    assert schedule.decode_events
    for ev in schedule.decode_events:
        assert ev.coefficient == 1
        assert ev.packet not in ev.subtracted


def test_schedule_validation():
    with pytest.raises(ValidationError):
        build_schedule(0, 5)
    with pytest.raises(ValidationError):
        build_schedule(2, 0)
    with pytest.raises(ScheduleError):
        build_schedule(3, 10, max_slots=4)


def test_numeric_noiseless_recovers_everything():
    pair = make_pair(n=2, q=8, k=1, power=1.0)
    schedule = build_schedule(3, 20)
    result = run_multihop(schedule, "numeric-noiseless", pair=pair, seed=5)
    assert result.end_decodes == 40
    assert result.end_errors == 0
    assert result.hop_errors == 0
    sym = [(ev.slot, ev.node, ev.packet) for ev in schedule.decode_events]
    num = [(s, nd, p) for s, nd, p, ok in result.recovered]
    assert sym == num


def test_numeric_noiseless_various_sizes():
    for L in (1, 2, 4):
        pair = make_pair(n=3, q=5, k=2, power=1.0)
        result = run_multihop(build_schedule(L, 6), "numeric-noiseless", pair=pair, seed=2)
        assert result.end_errors == 0


def test_numeric_awgn_error_grows_with_hops():
    pair = make_pair(n=2, q=4, k=1, power=1.0)
    sigma2 = 1.0 / 10 ** 0.8  # 8 dB: noisy enough to see per-hop losses
    rates = {}
    for L in (1, 3):
        errs = decs = 0
        for rep in range(300):
            res = run_multihop(build_schedule(L, 4), "numeric-awgn", pair=pair,
                               sigma2=sigma2, seed=1000 * L + rep)
            errs += res.end_errors
            decs += res.end_decodes
        rates[L] = errs / decs
    assert rates[3] >= rates[1] - 0.01


def test_numeric_mode_validation():
    schedule = build_schedule(1, 2)
    with pytest.raises(ValidationError):
        run_multihop(schedule, "numeric-noiseless")
    with pytest.raises(ValidationError):
        run_multihop(schedule, "bogus")
    pair = make_pair(n=1, q=4, k=1, power=1.0)
    with pytest.raises(ValidationError):
        run_multihop(schedule, "numeric-awgn", pair=pair, sigma2=0.0)


def test_schedule_json_shape():
    schedule = build_schedule(2, 3)
    dump = schedule_json(schedule)
    assert dump["relays"] == 2
    assert dump["slots"][0]["transmitters"] == ["A", "R2"]
    assert all("relay_states" in rec for rec in dump["slots"])
    assert dump["decode_events"]


def test_anc_cascade_matches_single_relay_form():
    for snr in (0.5, 2.0, 10.0, 100.0):
        assert anc_multihop_baseline(1, snr) == pytest.approx(rate_anc(snr), abs=1e-12)


def test_anc_cascade_snr_decreasing_in_hops():
    for snr in (1.0, 10.0, 100.0):
        vals = [anc_multihop_snr(L, snr) for L in range(1, 8)]
        assert all(b < a for a, b in zip(vals, vals[1:]))


def test_lattice_multihop_dominates_anc_with_growing_gap():
    snr = 100.0  # 20 dB
    lattice = rate_lattice(snr)
    gaps = [lattice - anc_multihop_baseline(L, snr) for L in range(1, 7)]
    assert all(g > 0 for g in gaps)
    assert all(b > a for a, b in zip(gaps, gaps[1:]))
