"""
Machine-level diagnostics: repeated YES/NO totals within a precinct and
the within-precinct binomial dispersion of YES counts.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy import stats

from .domain import MachineRecord


@dataclass(frozen=True)
class RepeatRow:
    machines_per_precinct: int
    repeats_not_max: int  # distinct repeated YES values below the precinct maximum
    repeats_max: int  # distinct repeated YES values equal to the precinct maximum
    expected_max_fraction: float
    machines_not_max: int  # machines carrying a repeated non-maximum value
    machines_max: int
    precincts: int

    @property
    def repeats(self) -> int:
        return self.repeats_not_max + self.repeats_max


@dataclass(frozen=True)
class RepeatReport:
    total_machines: int
    machines_in_yes_repeats: int
    machines_in_no_repeats: int
    yes_repeat_frequency: float
    no_repeat_frequency: float
    per_precinct_size_rows: tuple[RepeatRow, ...]

    @property
    def distinct_yes_repeats(self) -> int:
        return sum(r.repeats for r in self.per_precinct_size_rows)


@dataclass(frozen=True)
class RepeatMaxCheck:
    machines_per_precinct: int
    repeats: int
    repeats_max: int
    observed_fraction: float
    expected_fraction: float
    p_value: float
    ci_low: float
    ci_high: float

    @property
    def expected_in_ci(self) -> bool:
        return self.ci_low <= self.expected_fraction <= self.ci_high


@dataclass(frozen=True)
class DispersionReport:
    standardized_deviations: np.ndarray
    fraction_above_2sd: float
    bin_edges: np.ndarray
    counts: np.ndarray
    reference_density: np.ndarray
    excluded_single_machine_precincts: int
    excluded_degenerate_precincts: int
    excluded_machines: int
    finite_population: bool
    ks_statistic: float
    ks_pvalue: float

    @property
    def n(self) -> int:
        return int(self.standardized_deviations.size)

    def histogram_rows(self):
        """(bin_left, bin_right, count, reference_density) per bin."""
        for i, c in enumerate(self.counts):
            yield float(self.bin_edges[i]), float(self.bin_edges[i + 1]), int(c), float(self.reference_density[i])


def _group(machines: Iterable[MachineRecord]) -> dict[str, list[MachineRecord]]:
    groups = defaultdict(list)
    for m in machines:
        groups[m.precinct_id].append(m)
    return groups


def _in_repeats(values) -> int:
    return sum(c for c in Counter(values).values() if c > 1)


def repeated_counts(machines: Iterable[MachineRecord]) -> RepeatReport:
    """Count machines whose YES (or NO) total is shared with another machine
    in the same precinct, and classify each repeated YES value by whether it
    is the precinct's largest YES total."""
    groups = _group(machines)
    total = yes_rep = no_rep = 0
    by_k: dict[int, list[int]] = defaultdict(lambda: [0, 0, 0, 0, 0])
    for group in groups.values():
        k = len(group)
        total += k
        yes = [m.yes_votes for m in group]
        yes_rep += _in_repeats(yes)
        no_rep += _in_repeats(m.no_votes for m in group)
        top = max(yes)
        repeated = {v: c for v, c in Counter(yes).items() if c > 1}
        row = by_k[k]
        row[4] += 1
        for v, c in repeated.items():
            if v == top:
                row[1] += 1
                row[3] += c
            else:
                row[0] += 1
                row[2] += c
    rows = tuple(
        RepeatRow(k, r[0], r[1], 1.0 / (k - 1), r[2], r[3], r[4])
        for k, r in sorted(by_k.items())
        if k >= 2 and r[0] + r[1] > 0
    )
    freq = (lambda x: x / total) if total else (lambda x: math.nan)
    return RepeatReport(total, yes_rep, no_rep, freq(yes_rep), freq(no_rep), rows)


def repeat_max_randomness_check(report: RepeatReport, level: float = 0.01) -> list[RepeatMaxCheck]:
    """Compare, per precinct size k, the share of repeated values that are the
    precinct maximum with 1/(k-1), using an exact binomial test and an exact
    (Clopper-Pearson) ``1 - level`` interval."""
    if not report.per_precinct_size_rows:
        raise ValueError("report has no repeated values")
    out = []
    for row in report.per_precinct_size_rows:
        n, hits = row.repeats, row.repeats_max
        test = stats.binomtest(hits, n, row.expected_max_fraction)
        ci = test.proportion_ci(confidence_level=1 - level, method="exact")
        out.append(RepeatMaxCheck(row.machines_per_precinct, n, hits, hits / n,
                                  row.expected_max_fraction, float(test.pvalue),
                                  float(ci.low), float(ci.high)))
    return out


def expected_machine_sd(votes: float, p: float) -> tuple[float, float]:
    """Binomial sd of a machine's YES count and its coefficient of variation."""
    sd = math.sqrt(votes * p * (1 - p))
    return sd, sd / votes


def binomial_dispersion(machines: Iterable[MachineRecord], finite_population: bool = True,
                        bin_width: float = 0.25) -> DispersionReport:
    """Standardized within-precinct deviations of machine YES counts.

    For a machine with N_m votes cast in a precinct with N votes and YES share
    p, z = (yes_m - N_m p) / sqrt(N_m p (1 - p) c). With ``finite_population``
    (default) c = 1 - N_m / N, the variance of a machine's deviation from a
    mean it contributes to; otherwise c = 1. Single-machine precincts,
    unanimous precincts (p in {0, 1}) and machines with no votes are skipped
    and counted.
    """
    z_all = []
    single = degenerate = skipped = 0
    for group in _group(machines).values():
        if len(group) < 2:
            single += 1
            continue
        yes = np.array([m.yes_votes for m in group], dtype=float)
        cast = np.array([m.votes_cast for m in group], dtype=float)
        total = cast.sum()
        if total <= 0:
            degenerate += 1
            skipped += len(group)
            continue
        p = yes.sum() / total
        if p <= 0 or p >= 1:
            degenerate += 1
            skipped += len(group)
            continue
        var = cast * p * (1 - p)
        if finite_population:
            var = var * (1 - cast / total)
        ok = var > 0
        skipped += int((~ok).sum())
        z_all.append((yes[ok] - cast[ok] * p) / np.sqrt(var[ok]))
    z = np.concatenate(z_all) if z_all else np.empty(0)
    z.setflags(write=False)

    reach = max(4.0, math.ceil(float(np.abs(z).max())) if z.size else 4.0)
    edges = np.arange(-reach, reach + bin_width / 2, bin_width)
    counts, _ = np.histogram(z, bins=edges)
    centres = (edges[:-1] + edges[1:]) / 2
    if z.size:
        frac = float(np.mean(np.abs(z) > 2))
        ks = stats.kstest(z, "norm")
        ks_stat, ks_p = float(ks.statistic), float(ks.pvalue)
    else:
        frac = ks_stat = ks_p = math.nan
    return DispersionReport(z, frac, edges, counts, stats.norm.pdf(centres), single, degenerate,
                            skipped, finite_population, ks_stat, ks_p)
