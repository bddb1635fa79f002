"""Majority votes, MCS, misclassification rates and baseline sweeps."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from juryselect.engine import ACTIVE, NONE, RunConfig, RunData, run
from juryselect.labeling import AgentLabeling, Jury
from juryselect.metrics import (
    SweepSpec,
    aggregate_mcs,
    baseline_sweep,
    default_sweep_counts,
    group_rates,
    majority_vote,
    majority_votes,
    mcs,
    misclassification,
    sweep_jury,
)
from juryselect.model import LOW, MID, AgentType, Population

PM = st.sampled_from([-1, 1])


def brute_mcs(votes, props, jury, keep_round):
    """Recount from raw tables with plain Python loops."""
    kept = [t for t in range(len(votes)) if keep_round(props[t])]
    if not kept:
        return None
    hits = 0
    for t in kept:
        total = 0
        for a in jury:
            total += int(votes[t][a])
        hits += (1 if total >= 0 else -1) == props[t][0]
    return 100.0 * hits / len(kept)


class TestMajority:
    def test_examples(self):
        assert majority_vote([1, -1]) == 1
        assert majority_vote([-1, -1, 1]) == -1
        assert majority_vote([-1, 1, -1], []) == 1
        assert majority_vote([-1, 1, -1], Jury.of([1])) == 1

    @settings(max_examples=100, deadline=None)
    @given(st.lists(PM, min_size=1, max_size=12), st.randoms())
    def test_permutation_invariant(self, profile, rnd):
        shuffled = profile[:]
        rnd.shuffle(shuffled)
        assert majority_vote(profile) == majority_vote(shuffled)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(PM, min_size=0, max_size=12))
    def test_opposed_pair_changes_nothing(self, profile):
        assert majority_vote(profile + [1, -1]) == majority_vote(profile)

    def test_rows(self):
        votes = np.array([[1, -1], [-1, -1], [1, 1]])
        assert majority_votes(votes).tolist() == [1, -1, 1]

    def test_out_of_range_jury(self):
        with pytest.raises(ValueError):
            majority_vote([1, 1], [2])


class TestMcs:
    @settings(max_examples=150, deadline=None)
    @given(
        st.integers(1, 8),
        st.integers(1, 5),
        st.data(),
    )
    def test_brute_force_oracle(self, rounds, n, data):
        votes = np.array(data.draw(st.lists(st.lists(PM, min_size=n, max_size=n), min_size=rounds, max_size=rounds)), dtype=np.int8)
        props = np.array(data.draw(st.lists(st.lists(PM, min_size=3, max_size=3), min_size=rounds, max_size=rounds)), dtype=np.int8)
        jury = data.draw(st.lists(st.integers(0, n - 1), unique=True, max_size=n))
        d = RunData(votes, props, Population.from_counts({"A": n}), LOW)
        for f, keep in ((NONE, lambda p: True), (ACTIVE, lambda p: p[1] == 1 and p[2] == 1)):
            expected = brute_mcs(votes.tolist(), props.tolist(), jury, keep)
            got = mcs(d, Jury.of(jury), f)
            if expected is None:
                assert got is None
            else:
                assert got == pytest.approx(expected, abs=1e-12)

    def test_exhaustive_two_agents_two_rounds(self):
        pop = Population.from_counts({"A": 2})
        for cells in itertools.product((-1, 1), repeat=6):
            votes = np.array(cells[:4], dtype=np.int8).reshape(2, 2)
            props = np.array([[cells[4], 1, 1], [cells[5], 1, 1]], dtype=np.int8)
            d = RunData(votes, props, pop, LOW)
            assert mcs(d) == brute_mcs(votes.tolist(), props.tolist(), [0, 1], lambda p: True)

    def test_undefined_is_none(self):
        d = RunData(np.ones((3, 1), dtype=np.int8), np.array([[1, -1, 1]] * 3, dtype=np.int8), Population.from_counts({"A": 1}), LOW)
        assert mcs(d, None, ACTIVE) is None
        assert mcs(d) == 100.0


class TestAggregate:
    def test_identical_values(self):
        rep = aggregate_mcs([90.0, 90.0, 90.0])
        assert rep.mean == 90.0 and rep.sd == 0.0

    def test_two_values(self):
        rep = aggregate_mcs([80.0, 82.0])
        assert rep.mean == 81.0 and rep.sd == pytest.approx(np.sqrt(2))

    def test_undefined_excluded(self):
        rep = aggregate_mcs([70.0, None, 90.0], "x", "ACTIVE")
        assert (rep.mean, rep.runs, rep.undefined) == (80.0, 2, 1)
        assert rep.as_dict()["filter"] == "ACTIVE"

    def test_all_undefined(self):
        rep = aggregate_mcs([None, None])
        assert rep.mean is None and rep.sd is None and rep.undefined == 2


class TestMisclassification:
    pop = Population.preset("B_up")

    def test_perfect(self):
        boot = np.tile(self.pop.authentic_mask, (5, 1))
        assert misclassification(AgentLabeling("GMM", boot), self.pop) == {AgentType.A: 0.0, AgentType.B_UP: 0.0}

    def test_all_inauthentic(self):
        boot = np.zeros((5, 200), dtype=bool)
        rates = misclassification(AgentLabeling("GMM", boot), self.pop)
        assert rates == {AgentType.A: 1.0, AgentType.B_UP: 0.0}

    def test_group_rates_weighting(self):
        pop = Population.from_counts({"A": 10, "B_up": 30, "L_up": 10})
        rates = {AgentType.A: 0.1, AgentType.B_UP: 0.2, AgentType.L_UP: 0.6}
        g = group_rates(rates, pop)
        assert g["authentic"] == 0.1
        assert g["inauthentic"] == pytest.approx((0.2 * 30 + 0.6 * 10) / 40)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            misclassification(AgentLabeling("GMM", np.ones((5, 3), dtype=bool)), self.pop)


@pytest.fixture(scope="module")
def full_corpus():
    return run(RunConfig(Population.preset("Full"), LOW, rounds=300, runs=4, seed=5))


class TestSweep:
    def test_default_counts(self):
        counts = default_sweep_counts()
        assert counts[:6] == (1, 3, 5, 10, 25, 50) and counts[-1] == 1000
        assert default_sweep_counts(20) == (1, 3, 5, 10)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SweepSpec((5, 3), {})
        with pytest.raises(ValueError):
            SweepSpec((0, 3), {})

    def test_jury_composition(self):
        pop = Population.preset("Full")
        jury = sweep_jury(pop, 3, {AgentType.B_UP: 2})
        assert jury.agents == (0, 1, 2, 1000, 1001)
        with pytest.raises(ValueError):
            sweep_jury(pop, 1001, {})

    def test_subsetting_matches_fresh_population(self, full_corpus):
        # Subsetting a shared corpus equals scoring the selected columns directly.
        pop = full_corpus[0].population
        spec = SweepSpec((5, 25), {AgentType.B_UP: 100}, NONE)
        for m, rep in baseline_sweep(spec, full_corpus):
            jury = sweep_jury(pop, m, {AgentType.B_UP: 100})
            direct = [mcs(d.select_agents(jury.ids)) for d in full_corpus]
            assert rep.mean == pytest.approx(np.mean(direct))

    def test_authentic_only_increases(self, full_corpus):
        reps = baseline_sweep(SweepSpec((1, 5, 25, 100), {}), full_corpus)
        means = [r.mean for _, r in reps]
        assert means[-1] >= means[0] and means[-1] > 99.0

    def test_hospitable_curve(self, full_corpus):
        reps = dict(baseline_sweep(SweepSpec((1, 100, 250), {AgentType.B_UP: 100}, ACTIVE), full_corpus))
        assert abs(reps[1].mean - 75.0) < 6.0
        assert reps[250].mean > 99.0

    def test_lone_wolf_weaker_than_booster(self):
        corpus = run(RunConfig(Population.preset("Full"), MID, rounds=300, runs=3, seed=8))
        b = dict(baseline_sweep(SweepSpec((50,), {AgentType.B_UP: 100}), corpus))[50].mean
        lw = dict(baseline_sweep(SweepSpec((50,), {AgentType.L_UP: 100}), corpus))[50].mean
        assert lw > b
