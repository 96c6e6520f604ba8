"""
CSV input and output, and the exit-poll versus official-count comparison.

File schemas (UTF-8, comma separated, header row, no thousands separators)::

    machines.csv   machine_id,precinct_id,yes_votes,no_votes,registered_voters
    precincts.csv  precinct_id,yes_votes,signatures,registered_at_reafirmazo,new_voters,non_voters
    polls.csv      precinct_id,poll_yes,poll_total,pollster
    audit.csv      precinct_id

``yes_votes`` and ``non_voters`` may be left blank in ``precincts.csv``; they
are then aggregated from the precinct's machines. Extra columns are ignored.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .domain import POLLSTERS, Dataset, ExitPollRow, MachineRecord, PrecinctRecord
from .exceptions import DataError

MACHINE_COLUMNS = ("machine_id", "precinct_id", "yes_votes", "no_votes", "registered_voters")
PRECINCT_COLUMNS = ("precinct_id", "yes_votes", "signatures", "registered_at_reafirmazo",
                    "new_voters", "non_voters")
POLL_COLUMNS = ("precinct_id", "poll_yes", "poll_total", "pollster")
AUDIT_COLUMNS = ("precinct_id",)
TRUTH_COLUMNS = ("precinct_id", "chi", "phi")

FILE_NAMES = {"machines": "machines.csv", "precincts": "precincts.csv",
              "polls": "polls.csv", "audit": "audit.csv"}


class JoinError(DataError):
    """One or more rows could not be joined; ``failures`` lists all of them."""

    def __init__(self, failures: Sequence[DataError]):
        self.failures = tuple(failures)
        super().__init__("; ".join(str(f) for f in self.failures))


@dataclass(frozen=True)
class ComparisonReport:
    pollster: str
    unweighted_official_yes_share: float
    weighted_official_yes_share: float
    unweighted_poll_yes_share: float
    weighted_poll_yes_share: float
    per_precinct_pairs: tuple[tuple[str, float, float], ...]  # (precinct_id, official, poll)
    restricted_official_share: float  # weighted, polled precincts only
    restricted_unweighted_official_share: float
    n_precincts: int
    n_polled: int


# ----------------------------------------------------------------------------
# reading

def _rows(path, required: Sequence[str]) -> Iterator[tuple[int, dict]]:
    """Yield (line number, trimmed row) for each data row of a CSV file."""
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: cannot read ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file, expected header {','.join(required)}", line=1)
        header = [h.strip().lstrip("﻿") for h in header]
        missing = [c for c in required if c not in header]
        if missing:
            raise DataError(f"{path}: header lacks column(s) {', '.join(missing)}", line=1)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: expected {len(header)} fields, got {len(row)}", line=line)
            yield line, {h: c.strip() for h, c in zip(header, row)}


def _int(value: str, column: str, path, line: int, blank_ok: bool = False) -> int | None:
    if value == "":
        if blank_ok:
            return None
        raise DataError(f"{path}: blank {column}", line=line)
    try:
        return int(value)
    except ValueError:
        raise DataError(f"{path}: {column} is not an integer: {value!r}", line=line) from None


def _id(value: str, column: str, path, line: int) -> str:
    if not value:
        raise DataError(f"{path}: blank {column}", line=line)
    return value


def read_machines(path) -> list[MachineRecord]:
    out = []
    for line, r in _rows(path, MACHINE_COLUMNS):
        out.append(MachineRecord(
            _id(r["machine_id"], "machine_id", path, line),
            _id(r["precinct_id"], "precinct_id", path, line),
            *(_int(r[c], c, path, line) for c in MACHINE_COLUMNS[2:]),
        ))
    return out


def read_precinct_rows(path) -> list[tuple[int, dict]]:
    """Parsed precinct rows with ``None`` for blank derivable fields."""
    out = []
    seen: dict[str, int] = {}
    for line, r in _rows(path, PRECINCT_COLUMNS):
        pid = _id(r["precinct_id"], "precinct_id", path, line)
        if pid in seen:
            raise DataError(f"{path}: duplicate precinct_id {pid!r} (first on line {seen[pid]})",
                            line=line)
        seen[pid] = line
        fields = {"precinct_id": pid}
        for c in PRECINCT_COLUMNS[1:]:
            fields[c] = _int(r[c], c, path, line, blank_ok=c in ("yes_votes", "non_voters"))
        out.append((line, fields))
    return out


def read_polls(path) -> list[tuple[int, ExitPollRow]]:
    out = []
    for line, r in _rows(path, POLL_COLUMNS):
        pollster = r["pollster"].lower()
        if pollster not in POLLSTERS:
            raise DataError(f"{path}: unknown pollster {r['pollster']!r}; expected one of "
                            f"{', '.join(POLLSTERS)}", line=line)
        out.append((line, ExitPollRow(_id(r["precinct_id"], "precinct_id", path, line),
                                      _int(r["poll_yes"], "poll_yes", path, line),
                                      _int(r["poll_total"], "poll_total", path, line), pollster)))
    return out


def read_audit(path) -> list[tuple[int, str]]:
    return [(line, _id(r["precinct_id"], "precinct_id", path, line))
            for line, r in _rows(path, AUDIT_COLUMNS)]


def _precinct_poll(rows: list[ExitPollRow]) -> tuple[int, int] | None:
    """The merged row if there is one, otherwise the sum over pollsters."""
    if not rows:
        return None
    merged = [r for r in rows if r.pollster == "merged"]
    use = merged or rows
    return sum(r.poll_yes for r in use), sum(r.poll_total for r in use)


def load_dataset(machine_file=None, precinct_file=None, poll_file=None, audit_file=None) -> Dataset:
    """Read the CSV files and join them on ``precinct_id``.

    Raises :class:`DataError` (with the offending line) for malformed rows and
    duplicate precinct ids, and :class:`JoinError` listing every poll or audit
    row that names an unknown precinct. Semantic problems such as tallies
    above the electorate are left to :func:`~forensics.domain.validate_dataset`.
    """
    if precinct_file is None:
        raise DataError("a precinct file is required")
    machines = read_machines(machine_file) if machine_file is not None else []
    by_precinct: dict[str, list[MachineRecord]] = {}
    for m in machines:
        by_precinct.setdefault(m.precinct_id, []).append(m)

    rows = read_precinct_rows(precinct_file)
    known = {f["precinct_id"] for _, f in rows}
    failures: list[DataError] = []

    polls: list[ExitPollRow] = []
    poll_groups: dict[str, list[ExitPollRow]] = {}
    if poll_file is not None:
        seen: dict[tuple[str, str], int] = {}
        for line, row in read_polls(poll_file):
            if row.precinct_id not in known:
                failures.append(DataError(f"{poll_file}: unknown precinct_id {row.precinct_id!r}",
                                          line=line))
                continue
            key = (row.precinct_id, row.pollster)
            if key in seen:
                failures.append(DataError(f"{poll_file}: duplicate {row.pollster} row for "
                                          f"{row.precinct_id!r} (first on line {seen[key]})", line=line))
                continue
            seen[key] = line
            polls.append(row)
            poll_groups.setdefault(row.precinct_id, []).append(row)

    audited: set[str] = set()
    if audit_file is not None:
        for line, pid in read_audit(audit_file):
            if pid not in known:
                failures.append(DataError(f"{audit_file}: unknown precinct_id {pid!r}", line=line))
            else:
                audited.add(pid)
    if failures:
        raise JoinError(failures)

    precincts = []
    for line, f in rows:
        pid = f["precinct_id"]
        group = by_precinct.get(pid, [])
        for col in ("yes_votes", "non_voters"):
            if f[col] is None and not group:
                raise DataError(f"{precinct_file}: blank {col} for {pid!r} and no machines to "
                                "derive it from", line=line)
        yes = f["yes_votes"] if f["yes_votes"] is not None else sum(m.yes_votes for m in group)
        if f["non_voters"] is not None:
            non_voters = f["non_voters"]
        else:
            electorate = f["registered_at_reafirmazo"] + f["new_voters"]
            non_voters = electorate - sum(m.votes_cast for m in group)
        poll = _precinct_poll(poll_groups.get(pid, []))
        precincts.append(PrecinctRecord(
            precinct_id=pid, yes_votes=yes, signatures=f["signatures"],
            registered_at_reafirmazo=f["registered_at_reafirmazo"], new_voters=f["new_voters"],
            non_voters=non_voters,
            exit_poll_yes=poll[0] if poll else None, exit_poll_total=poll[1] if poll else None,
            audited=pid in audited,
        ))
    names = [str(p) for p in (machine_file, precinct_file, poll_file, audit_file) if p is not None]
    return Dataset(tuple(machines), tuple(precincts), "files: " + ", ".join(names), tuple(polls))


def load_directory(directory) -> Dataset:
    """Load ``machines.csv``, ``precincts.csv`` and, when present,
    ``polls.csv`` and ``audit.csv`` from one directory."""
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"{d}: not a directory")

    def opt(key):
        p = d / FILE_NAMES[key]
        return p if p.exists() else None

    return load_dataset(opt("machines"), d / FILE_NAMES["precincts"], opt("polls"), opt("audit"))


def input_files(directory) -> list[Path]:
    d = Path(directory)
    return [d / n for n in FILE_NAMES.values() if (d / n).exists()]


# ----------------------------------------------------------------------------
# writing

def _write(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_dataset(d: Dataset, directory, truth=None) -> list[Path]:
    """Write ``d`` as CSV files readable by :func:`load_directory`.

    Polls are written from ``d.polls`` when present, otherwise from the
    precinct-level exit poll as ``merged`` rows. ``truth`` (a simulator
    ``GroundTruth``) adds ``ground_truth.csv``.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    p = out / FILE_NAMES["machines"]
    _write(p, MACHINE_COLUMNS, ((m.machine_id, m.precinct_id, m.yes_votes, m.no_votes,
                                 m.registered_voters) for m in d.machines))
    paths.append(p)
    p = out / FILE_NAMES["precincts"]
    _write(p, PRECINCT_COLUMNS, ((r.precinct_id, r.yes_votes, r.signatures,
                                  r.registered_at_reafirmazo, r.new_voters, r.non_voters)
                                 for r in d.precincts))
    paths.append(p)
    if d.polls:
        poll_rows = [(r.precinct_id, r.poll_yes, r.poll_total, r.pollster) for r in d.polls]
    else:
        poll_rows = [(r.precinct_id, r.exit_poll_yes, r.exit_poll_total, "merged")
                     for r in d.precincts if r.polled]
    p = out / FILE_NAMES["polls"]
    _write(p, POLL_COLUMNS, poll_rows)
    paths.append(p)
    audited = [(r.precinct_id,) for r in d.precincts if r.audited]
    if audited:
        p = out / FILE_NAMES["audit"]
        _write(p, AUDIT_COLUMNS, audited)
        paths.append(p)
    if truth is not None:
        p = out / "ground_truth.csv"
        _write(p, TRUTH_COLUMNS, ((pid, repr(float(c)), repr(float(f)))
                                  for pid, c, f in zip(truth.precinct_ids, truth.chi, truth.phi)))
        paths.append(p)
    return paths


def read_ground_truth(path) -> dict[str, tuple[float, float]]:
    out = {}
    for line, r in _rows(path, TRUTH_COLUMNS):
        try:
            out[r["precinct_id"]] = (float(r["chi"]), float(r["phi"]))
        except ValueError:
            raise DataError(f"{path}: non-numeric chi or phi", line=line) from None
    return out


# ----------------------------------------------------------------------------
# official result versus exit poll

def _poll_by_precinct(d: Dataset, pollster: str) -> dict[str, tuple[int, int]]:
    if pollster not in POLLSTERS:
        raise ValueError(f"unknown pollster {pollster!r}; expected one of {', '.join(POLLSTERS)}")
    if pollster == "merged":
        # the precinct-level poll: the merged row, or the pollsters combined
        return {p.precinct_id: (p.exit_poll_yes, p.exit_poll_total)
                for p in d.precincts if p.polled}
    return {r.precinct_id: (r.poll_yes, r.poll_total) for r in d.polls if r.pollster == pollster}


def compare_polls_to_votes(d: Dataset, pollster: str = "merged") -> ComparisonReport:
    """Official YES share against the exit-poll YES share.

    Weighted shares weight each precinct by its votes cast (so the weighted
    official share is total YES over total votes cast). Unweighted shares
    average per-precinct shares. Precincts with no votes cast, and polls with
    no respondents, carry no share and are left out.
    """
    polls = _poll_by_precinct(d, pollster)
    valid = [p for p in d.precincts if p.votes_cast > 0]
    polled = [p for p in valid if p.precinct_id in polls and polls[p.precinct_id][1] > 0]
    if not polled:
        raise DataError(f"no precinct has a usable {pollster} exit poll")
    polled.sort(key=lambda p: p.precinct_id)

    official = np.array([p.yes_votes / p.votes_cast for p in valid])
    weights = np.array([p.votes_cast for p in valid], dtype=float)
    off_p = np.array([p.yes_votes / p.votes_cast for p in polled])
    w_p = np.array([p.votes_cast for p in polled], dtype=float)
    poll_share = np.array([polls[p.precinct_id][0] / polls[p.precinct_id][1] for p in polled])

    pairs = tuple((p.precinct_id, float(o), float(s)) for p, o, s in zip(polled, off_p, poll_share))
    return ComparisonReport(
        pollster=pollster,
        unweighted_official_yes_share=float(official.mean()),
        weighted_official_yes_share=float(np.average(official, weights=weights)),
        unweighted_poll_yes_share=float(poll_share.mean()),
        weighted_poll_yes_share=float(np.average(poll_share, weights=w_p)),
        per_precinct_pairs=pairs,
        restricted_official_share=float(np.average(off_p, weights=w_p)),
        restricted_unweighted_official_share=float(off_p.mean()),
        n_precincts=len(valid),
        n_polled=len(polled),
    )
