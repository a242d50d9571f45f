"""Randomized property suites over generated traces (seed recorded)."""

from __future__ import annotations

import propsuite


def test_cache_invariants_hold_on_random_traces():
    assert propsuite.run_invariant_suite() == propsuite.INVARIANT_TRIALS


def test_displacement_matches_brute_force_lru_oracle():
    assert propsuite.run_lru_oracle_suite() == propsuite.ORACLE_TRIALS


def test_eviction_cascades_never_displace_unpinned_after_pinned():
    assert propsuite.run_pin_cascade_suite() == propsuite.PIN_CASCADE_TRIALS


def test_infinite_capacity_dominates_stack_views():
    assert propsuite.run_infinite_capacity_suite() == propsuite.INFINITE_TRIALS


def test_push_pop_restores_spaces():
    assert propsuite.run_stack_restore_suite() == propsuite.STACK_RESTORE_TRIALS


def test_stack_views_invariant_under_popped_interruptions():
    assert (
        propsuite.run_interruption_invariance_suite()
        == propsuite.INVARIANCE_PAIR_TRIALS
    )


def test_round_trips_and_determinism():
    assert propsuite.run_roundtrip_suite() == propsuite.ROUNDTRIP_TRIALS
