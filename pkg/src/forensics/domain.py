"""
Core records shared by every analysis: machines, precincts, exit polls and
the joined dataset, plus invariant checking.

Records are frozen dataclasses holding integer counts. Validation never
raises; it returns every broken rule so callers can decide how strict to be.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable

POLLSTERS = ("sumate", "primero_justicia", "merged")

TURNOUT_TOL = 1e-9


@dataclass(frozen=True)
class MachineRecord:
    machine_id: str
    precinct_id: str
    yes_votes: int
    no_votes: int
    registered_voters: int

    @property
    def votes_cast(self) -> int:
        return self.yes_votes + self.no_votes


@dataclass(frozen=True)
class PrecinctRecord:
    """Precinct aggregates.

    ``exit_poll_yes`` and ``exit_poll_total`` are ``None`` for precincts
    without an exit poll; zero is a real poll outcome and never means absent.
    ``turnout`` is derived from the electorate when not given.
    """

    precinct_id: str
    yes_votes: int
    signatures: int
    registered_at_reafirmazo: int
    new_voters: int
    non_voters: int
    exit_poll_yes: int | None = None
    exit_poll_total: int | None = None
    audited: bool = False
    turnout: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.turnout is None:
            object.__setattr__(self, "turnout", self.derived_turnout())

    @property
    def electorate(self) -> int:
        return self.registered_at_reafirmazo + self.new_voters

    @property
    def votes_cast(self) -> int:
        return self.electorate - self.non_voters

    @property
    def no_votes(self) -> int:
        return self.votes_cast - self.yes_votes

    @property
    def polled(self) -> bool:
        return self.exit_poll_yes is not None

    def derived_turnout(self) -> float:
        if self.electorate <= 0:
            return math.nan
        return 1.0 - self.non_voters / self.electorate


@dataclass(frozen=True)
class ExitPollRow:
    precinct_id: str
    poll_yes: int
    poll_total: int
    pollster: str


@dataclass(frozen=True)
class Dataset:
    machines: tuple[MachineRecord, ...] = ()
    precincts: tuple[PrecinctRecord, ...] = ()
    provenance: str = ""
    polls: tuple[ExitPollRow, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "machines", tuple(self.machines))
        object.__setattr__(self, "precincts", tuple(self.precincts))
        object.__setattr__(self, "polls", tuple(self.polls))

    def precinct_map(self) -> dict[str, PrecinctRecord]:
        return {p.precinct_id: p for p in self.precincts}

    def machines_by_precinct(self) -> dict[str, list[MachineRecord]]:
        groups = defaultdict(list)
        for m in self.machines:
            groups[m.precinct_id].append(m)
        return dict(groups)

    def audited_ids(self) -> frozenset[str]:
        return frozenset(p.precinct_id for p in self.precincts if p.audited)

    def with_audited(self, precinct_ids: Iterable[str]) -> "Dataset":
        """Copy with ``audited`` set exactly for ``precinct_ids``."""
        ids = frozenset(precinct_ids)
        precincts = tuple(replace(p, audited=p.precinct_id in ids) for p in self.precincts)
        return replace(self, precincts=precincts)


@dataclass(frozen=True, order=True)
class Violation:
    record: str
    rule: str
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()
    notes: tuple[Violation, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self):
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def rules(self) -> Counter:
        return Counter(v.rule for v in self.violations)


def _check_machine(m: MachineRecord) -> list[Violation]:
    out = []
    tag = f"machine {m.precinct_id}/{m.machine_id}"
    if min(m.yes_votes, m.no_votes, m.registered_voters) < 0:
        out.append(Violation(tag, "negative count"))
    if m.yes_votes + m.no_votes > m.registered_voters:
        out.append(Violation(tag, "tallies exceed registered",
                             f"{m.yes_votes}+{m.no_votes}>{m.registered_voters}"))
    return out


def _check_precinct(p: PrecinctRecord) -> list[Violation]:
    out = []
    tag = f"precinct {p.precinct_id}"
    counts = (p.yes_votes, p.signatures, p.registered_at_reafirmazo, p.new_voters, p.non_voters)
    if min(counts) < 0:
        out.append(Violation(tag, "negative count"))
    if p.yes_votes > p.electorate:
        out.append(Violation(tag, "yes exceeds electorate", f"{p.yes_votes}>{p.electorate}"))
    if p.yes_votes > p.votes_cast:
        out.append(Violation(tag, "yes exceeds votes cast", f"{p.yes_votes}>{p.votes_cast}"))
    expected = p.derived_turnout()
    if not (abs(p.turnout - expected) <= TURNOUT_TOL):
        out.append(Violation(tag, "turnout inconsistent", f"{p.turnout!r} vs {expected!r}"))
    if (p.exit_poll_yes is None) != (p.exit_poll_total is None):
        out.append(Violation(tag, "partial exit poll"))
    elif p.exit_poll_yes is not None:
        if p.exit_poll_total <= 0 or not 0 <= p.exit_poll_yes <= p.exit_poll_total:
            out.append(Violation(tag, "exit poll out of range",
                                 f"{p.exit_poll_yes}/{p.exit_poll_total}"))
    return out


def validate_dataset(d: Dataset) -> ValidationReport:
    """Check every record and cross-record invariant of ``d``.

    Returns a report with one :class:`Violation` per broken rule; an empty
    report means the dataset is consistent. Single-machine precincts are
    valid and only listed in ``notes`` as dispersion-inapplicable.
    """
    violations: list[Violation] = []
    notes: list[Violation] = []

    for m in d.machines:
        violations.extend(_check_machine(m))
    for p in d.precincts:
        violations.extend(_check_precinct(p))

    precinct_counts = Counter(p.precinct_id for p in d.precincts)
    for pid, n in precinct_counts.items():
        if n > 1:
            violations.append(Violation(f"precinct {pid}", "duplicate precinct id", f"{n} records"))

    precincts = d.precinct_map()
    for pid, machines in d.machines_by_precinct().items():
        ids = Counter(m.machine_id for m in machines)
        for mid, n in ids.items():
            if n > 1:
                violations.append(Violation(f"machine {pid}/{mid}", "duplicate machine id"))
        if pid not in precincts:
            for m in machines:
                violations.append(Violation(f"machine {pid}/{m.machine_id}", "unknown precinct"))
            continue
        total = sum(m.yes_votes for m in machines)
        if total != precincts[pid].yes_votes:
            violations.append(Violation(f"precinct {pid}", "machine yes total differs from precinct",
                                        f"{total}!={precincts[pid].yes_votes}"))
        if len(machines) == 1:
            notes.append(Violation(f"precinct {pid}", "dispersion-inapplicable", "single machine"))

    seen = Counter((r.precinct_id, r.pollster) for r in d.polls)
    for r in d.polls:
        tag = f"poll {r.precinct_id}/{r.pollster}"
        if r.precinct_id not in precincts:
            violations.append(Violation(tag, "unknown precinct"))
        if r.pollster not in POLLSTERS:
            violations.append(Violation(tag, "unknown pollster"))
        if r.poll_total <= 0 or not 0 <= r.poll_yes <= r.poll_total:
            violations.append(Violation(tag, "exit poll out of range", f"{r.poll_yes}/{r.poll_total}"))
    for (pid, pollster), n in seen.items():
        if n > 1:
            violations.append(Violation(f"poll {pid}/{pollster}", "duplicate poll row"))

    return ValidationReport(tuple(sorted(violations)), tuple(sorted(notes)))
