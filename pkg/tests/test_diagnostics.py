import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy import stats

from forensics.diagnostics import (RepeatReport, RepeatRow, binomial_dispersion,
                                   expected_machine_sd, repeat_max_randomness_check,
                                   repeated_counts)
from forensics.domain import MachineRecord


def machines(pid, yes, no=None, voters=10_000):
    no = no if no is not None else [100 - y for y in yes]
    return [MachineRecord(f"{pid}-{i}", pid, y, n, voters) for i, (y, n) in enumerate(zip(yes, no))]


class TestRepeats:
    def test_repeat_at_maximum(self):
        rep = repeated_counts(machines("A", [40, 40, 38], no=[1, 2, 3]))
        assert rep.machines_in_yes_repeats == 2
        assert rep.machines_in_no_repeats == 0
        (row,) = rep.per_precinct_size_rows
        assert (row.machines_per_precinct, row.repeats_not_max, row.repeats_max) == (3, 0, 1)
        assert (row.machines_not_max, row.machines_max) == (0, 2)
        assert row.expected_max_fraction == 0.5

    def test_all_distinct(self):
        rep = repeated_counts(machines("A", [1, 2, 3], no=[7, 8, 9]))
        assert rep.machines_in_yes_repeats == 0 and rep.per_precinct_size_rows == ()

    def test_frequencies_and_both_counts(self):
        ms = (machines("A", [5, 5, 5, 9, 9], no=[1, 1, 2, 3, 4]) + machines("B", [1, 2], no=[3, 3])
              + machines("C", [7]))
        rep = repeated_counts(ms)
        assert rep.total_machines == 8
        assert rep.machines_in_yes_repeats == 5
        assert rep.machines_in_no_repeats == 4
        assert rep.yes_repeat_frequency == 5 / 8
        row5 = [r for r in rep.per_precinct_size_rows if r.machines_per_precinct == 5][0]
        # distinct repeated values: 9 (max) and 5 (not max); machines: 2 and 3
        assert (row5.repeats_not_max, row5.repeats_max) == (1, 1)
        assert (row5.machines_not_max, row5.machines_max) == (3, 2)
        assert rep.distinct_yes_repeats == 2

    def test_same_value_across_precincts_is_not_a_repeat(self):
        rep = repeated_counts(machines("A", [4, 5]) + machines("B", [4, 6]))
        assert rep.machines_in_yes_repeats == 0

    def test_empty(self):
        rep = repeated_counts([])
        assert rep.total_machines == 0 and math.isnan(rep.yes_repeat_frequency)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_reordering_invariant(self, seed):
        r = random.Random(seed)
        ms = [m for i in range(8) for m in machines(f"P{i}", [r.randint(0, 6) for _ in range(r.randint(1, 7))])]
        shuffled = ms[:]
        r.shuffle(shuffled)
        assert repeated_counts(ms) == repeated_counts(shuffled)


def report_with(rows):
    return RepeatReport(0, 0, 0, 0.0, 0.0, tuple(rows))


class TestRepeatMaxCheck:
    def test_two_machines_always_maximum(self):
        rep = repeated_counts([m for i in range(20) for m in machines(f"P{i}", [i, i])])
        (chk,) = repeat_max_randomness_check(rep)
        assert chk.expected_fraction == 1.0 and chk.observed_fraction == 1.0
        assert chk.p_value == 1.0 and chk.expected_in_ci

    def test_three_machine_table_row(self):
        (chk,) = repeat_max_randomness_check(report_with([RepeatRow(3, 58, 66, 0.5, 0, 0, 0)]))
        assert chk.observed_fraction == pytest.approx(66 / 124)
        assert chk.p_value == pytest.approx(stats.binomtest(66, 124, 0.5).pvalue)
        assert chk.p_value > 0.01 and chk.expected_in_ci

    def test_clopper_pearson_bounds(self):
        (chk,) = repeat_max_randomness_check(report_with([RepeatRow(4, 20, 10, 1 / 3, 0, 0, 0)]))
        # exact interval from beta quantiles
        assert_allclose(chk.ci_low, stats.beta.ppf(0.005, 10, 21), rtol=1e-8)
        assert_allclose(chk.ci_high, stats.beta.ppf(0.995, 11, 20), rtol=1e-8)

    def test_needs_rows(self):
        with pytest.raises(ValueError):
            repeat_max_randomness_check(report_with([]))


class TestDispersion:
    def test_equal_machines(self):
        rep = binomial_dispersion(machines("A", [45, 45], no=[55, 55]))
        assert_allclose(rep.standardized_deviations, 0.0)

    def test_hand_arithmetic_plain(self):
        rep = binomial_dispersion(machines("A", [40, 50], no=[60, 50]), finite_population=False)
        assert_allclose(rep.standardized_deviations, [-5 / math.sqrt(24.75), 5 / math.sqrt(24.75)])
        assert_allclose(rep.standardized_deviations[0], -1.005, atol=5e-4)

    def test_hand_arithmetic_finite_population(self):
        rep = binomial_dispersion(machines("A", [40, 50], no=[60, 50]))
        assert_allclose(rep.standardized_deviations[0], -5 / math.sqrt(24.75 * 0.5))

    def test_exclusions_counted(self):
        ms = (machines("S", [10]) + machines("U", [100, 100], no=[0, 0]) + machines("Z", [0, 0, 0])
              + machines("E", [3, 0], no=[2, 0]) + machines("OK", [40, 50, 45], no=[60, 50, 55]))
        rep = binomial_dispersion(ms)
        assert rep.excluded_single_machine_precincts == 1
        assert rep.excluded_degenerate_precincts == 2
        # in E the empty machine has no variance, and the other holds every vote
        # so its deviation from the precinct share is identically zero
        assert rep.excluded_machines == 2 + 2 + 3
        assert rep.n == 3

    def test_histogram_covers_all(self, rng):
        ms = []
        for i in range(200):
            cast = rng.integers(100, 400, 4)
            yes = rng.binomial(cast, 0.45)
            ms += machines(f"P{i}", yes.tolist(), (cast - yes).tolist())
        rep = binomial_dispersion(ms)
        assert rep.counts.sum() == rep.n == 800
        assert rep.counts.size == rep.reference_density.size == rep.bin_edges.size - 1
        centres = (rep.bin_edges[1:] + rep.bin_edges[:-1]) / 2
        assert_allclose(rep.reference_density, stats.norm.pdf(centres))
        rows = list(rep.histogram_rows())
        assert sum(r[2] for r in rows) == 800

    def test_outlier_widens_histogram(self):
        ms = machines("A", [10, 90], no=[90, 10]) + machines("B", [40, 50, 45], no=[60, 50, 55])
        rep = binomial_dispersion(ms)
        assert rep.counts.sum() == rep.n
        assert rep.bin_edges[-1] >= np.abs(rep.standardized_deviations).max()

    def test_finite_population_z_is_unit_variance(self, rng):
        # two equal machines: plain z has variance 1/2, corrected z has variance 1
        z_plain, z_fpc = [], []
        for i in range(3000):
            yes = rng.binomial(300, 0.4, 2)
            ms = machines(f"P{i}", yes.tolist(), (300 - yes).tolist())
            z_plain.append(binomial_dispersion(ms, finite_population=False).standardized_deviations[0])
            z_fpc.append(binomial_dispersion(ms).standardized_deviations[0])
        assert np.var(z_plain) == pytest.approx(0.5, abs=0.05)
        assert np.var(z_fpc) == pytest.approx(1.0, abs=0.08)


def test_expected_machine_sd():
    sd, cv = expected_machine_sd(400, 0.5)
    assert sd == 10.0 and cv == 0.025
