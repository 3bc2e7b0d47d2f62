"""CSV reading and writing: player-season records, panels, curves.

Floats are written with ``repr`` so every file round-trips exactly and
two runs with the same inputs produce identical bytes.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

from .exceptions import (DuplicateRecordError, InsufficientDataError, InvalidParameterError,
                         ParseError)
from .numerics import AgeGrid
from .panel import AgeCurve, PerformancePanel

log = logging.getLogger(__name__)

RECORD_COLUMNS = ("player_id", "birth_date", "season_start_year", "position",
                  "games_played", "goals", "assists")
PANEL_COLUMNS = ("player_id", "age", "value", "observed")
CURVE_COLUMNS = ("spec", "age", "g_hat", "support_count")


@dataclass(frozen=True)
class PlayerSeasonRecord:
    player_id: str
    birth_date: date
    season_start_year: int
    position: str
    games_played: int
    goals: int
    assists: int
    line: int = field(default=None, compare=False)

    @property
    def points_per_game(self) -> float:
        return (self.goals + self.assists) / self.games_played


class RecordList(list):
    """List of records that remembers how many rows were skipped."""

    skipped: int = 0


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write(path, header, rows):
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _reader(path, required):
    fh = Path(path).open(newline="", encoding="utf-8")
    reader = csv.DictReader(fh)
    header = reader.fieldnames or []
    missing = [c for c in required if c not in header]
    if missing:
        fh.close()
        raise ParseError(f"{path}: missing column(s) {', '.join(missing)}", line=1)
    return fh, reader


def _nonneg_int(text, name, line):
    try:
        v = int(text)
    except (TypeError, ValueError):
        raise ParseError(f"{name} must be an integer, got {text!r}", line) from None
    if v < 0:
        raise ParseError(f"{name} must be nonnegative, got {v}", line)
    return v


def load_records(path) -> RecordList:
    """Read a player-season CSV.

    Rows with ``games_played == 0`` are skipped; their count is kept in
    ``.skipped`` and reported with a warning.

    Raises
    ------
    ParseError
        Malformed row (the message carries the line number).
    DuplicateRecordError
        Two rows for the same (player, season).
    """
    fh, reader = _reader(path, RECORD_COLUMNS)
    records = RecordList()
    seen = {}
    with fh:
        for row in reader:
            line = reader.line_num
            if None in row or any(row.get(c) is None for c in RECORD_COLUMNS):
                raise ParseError("wrong number of fields", line)
            pid = row["player_id"].strip()
            if not pid:
                raise ParseError("empty player_id", line)
            try:
                born = date.fromisoformat(row["birth_date"].strip())
            except ValueError:
                raise ParseError(f"bad birth_date {row['birth_date']!r}", line) from None
            try:
                season = int(row["season_start_year"])
            except ValueError:
                raise ParseError(
                    f"bad season_start_year {row['season_start_year']!r}", line
                ) from None
            games, goals, assists = (_nonneg_int(row[c], c, line)
                                     for c in ("games_played", "goals", "assists"))
            key = (pid, season)
            if key in seen:
                raise DuplicateRecordError(
                    f"duplicate record for player {pid!r} season {season}: "
                    f"lines {seen[key]} and {line}"
                )
            seen[key] = line
            if games == 0:
                records.skipped += 1
                continue
            records.append(PlayerSeasonRecord(pid, born, season, row["position"].strip(),
                                              games, goals, assists, line))
    if records.skipped:
        warnings.warn(f"skipped {records.skipped} row(s) with games_played=0", stacklevel=2)
    return records


def season_age(birth_date: date, season_start_year: int, cutoff=(1, 31)) -> int:
    """Completed years on the cutoff date within the season.

    Cutoffs in January to June fall in the calendar year after the season
    starts; later cutoffs fall in the starting year.
    """
    month, day = cutoff
    ref = date(season_start_year + (1 if month < 7 else 0), month, day)
    return ref.year - birth_date.year - ((ref.month, ref.day) < (birth_date.month,
                                                                 birth_date.day))


def filter_records(records, positions=None, min_birth_date=None, seasons=None):
    """Keep records matching every given filter. ``seasons`` is an inclusive
    ``(first, last)`` pair of season start years."""
    pos = None if positions is None else {p.strip() for p in positions}
    out = []
    for r in records:
        if pos is not None and r.position not in pos:
            continue
        if min_birth_date is not None and r.birth_date < min_birth_date:
            continue
        if seasons is not None and not seasons[0] <= r.season_start_year <= seasons[1]:
            continue
        out.append(r)
    return out


def standardize_by_season(records) -> dict:
    """Per-season z-scores of points per game (sample sd).

    Returns a mapping from ``(player_id, season_start_year)`` to the score.
    """
    by_season = defaultdict(list)
    for r in records:
        by_season[r.season_start_year].append(r)
    out = {}
    for season in sorted(by_season):
        group = by_season[season]
        if len(group) < 2:
            raise InsufficientDataError(
                f"cannot standardize season {season}: fewer than 2 records"
            )
        ppg = np.array([r.points_per_game for r in group])
        sd = ppg.std(ddof=1)
        if sd == 0:
            raise InsufficientDataError(
                f"cannot standardize season {season}: points per game are all equal"
            )
        z = (ppg - ppg.mean()) / sd
        for r, v in zip(group, z):
            out[(r.player_id, season)] = float(v)
    return out


def build_panel(records, grid: AgeGrid = None, positions=None, min_birth_date=None,
                seasons=None, age_cutoff=(1, 31)) -> PerformancePanel:
    """Standardized points-per-game panel from player-season records.

    Filtering happens first and whole players are excluded by it;
    standardization then runs over the remaining records of each season.
    Records whose age falls outside ``grid`` still count towards the
    season means but are left out of the panel. Rows are ordered by
    player id.
    """
    grid = grid or AgeGrid()
    kept = filter_records(records, positions, min_birth_date, seasons)
    if not kept:
        raise InsufficientDataError("no records left after filtering")
    z = standardize_by_season(kept)
    ids = sorted({r.player_id for r in kept})
    row_of = {pid: i for i, pid in enumerate(ids)}
    values = np.full((len(ids), grid.K), np.nan)
    mask = np.zeros((len(ids), grid.K), dtype=bool)
    outside = 0
    for r in kept:
        age = season_age(r.birth_date, r.season_start_year, age_cutoff)
        if age not in grid:
            outside += 1
            continue
        i, k = row_of[r.player_id], grid.index(age)
        if mask[i, k]:
            raise DuplicateRecordError(
                f"player {r.player_id!r} has two seasons at age {age} "
                f"(line {r.line})"
            )
        values[i, k] = z[(r.player_id, r.season_start_year)]
        mask[i, k] = True
    if outside:
        log.info("%d record(s) outside ages %d..%d left out", outside, grid.t_min, grid.t_max)
    keep = mask.any(axis=1)
    if not keep.any():
        raise InsufficientDataError("no records fall inside the age grid")
    ids = [pid for pid, k in zip(ids, keep) if k]
    return PerformancePanel(grid, values[keep], mask[keep], ids)


def write_panel(panel: PerformancePanel, path):
    """Long format, one row per (player, age) cell of the grid."""
    rows = (
        (pid, age, panel.values[i, k] if panel.mask[i, k] else None, int(panel.mask[i, k]))
        for i, pid in enumerate(panel.player_ids)
        for k, age in enumerate(panel.grid.ages)
    )
    return _write(path, PANEL_COLUMNS, rows)


def read_panel(path, grid: AgeGrid = None) -> PerformancePanel:
    """Inverse of :func:`write_panel`.

    Player ids come back as strings, in order of first appearance. Cells
    without a row are unobserved. Without ``grid`` the age range of the
    file is used.
    """
    fh, reader = _reader(path, PANEL_COLUMNS)
    cells = {}
    order = {}
    with fh:
        for row in reader:
            line = reader.line_num
            pid = row["player_id"]
            if pid is None or pid == "":
                raise ParseError("empty player_id", line)
            try:
                age = int(row["age"])
                observed = {"1": True, "0": False}[row["observed"].strip()]
            except (ValueError, KeyError, AttributeError):
                raise ParseError("bad age or observed flag", line) from None
            value = math.nan
            if observed:
                try:
                    value = float(row["value"])
                except (TypeError, ValueError):
                    raise ParseError(f"bad value {row['value']!r}", line) from None
                if not math.isfinite(value):
                    raise ParseError("observed value must be finite", line)
            if (pid, age) in cells:
                raise DuplicateRecordError(f"duplicate cell for player {pid!r} age {age}: "
                                           f"lines {cells[(pid, age)][1]} and {line}")
            order.setdefault(pid, len(order))
            cells[(pid, age)] = (value if observed else None, line)
    if not cells:
        raise InsufficientDataError(f"{path}: panel file has no rows")
    if grid is None:
        ages = [a for _, a in cells]
        grid = AgeGrid(min(ages), max(ages))
    values = np.full((len(order), grid.K), np.nan)
    mask = np.zeros((len(order), grid.K), dtype=bool)
    for (pid, age), (value, line) in cells.items():
        if age not in grid:
            raise ParseError(f"age {age} outside {grid.t_min}..{grid.t_max}", line)
        if value is not None:
            values[order[pid], grid.index(age)] = value
            mask[order[pid], grid.index(age)] = True
    return PerformancePanel(grid, values, mask, list(order))


def write_curves(curves, path, extra=None):
    """Write ``{spec name: AgeCurve}`` (or ``(name, curve)`` pairs) in long format."""
    items = curves.items() if isinstance(curves, dict) else curves
    rows = []
    for name, curve in items:
        counts = curve.support_counts
        if counts is None:
            counts = [None] * curve.grid.K
        for age, g, n in zip(curve.ages, curve.g, counts):
            rows.append((name, int(age), float(g), None if n is None else int(n)))
    return _write(path, CURVE_COLUMNS, rows)


def read_curves(path) -> dict:
    """Inverse of :func:`write_curves`. Each spec's ages must be contiguous."""
    fh, reader = _reader(path, ("spec", "age", "g_hat"))
    per_spec = defaultdict(dict)
    with fh:
        has_support = "support_count" in (reader.fieldnames or [])
        for row in reader:
            line = reader.line_num
            try:
                age = int(row["age"])
                g = float(row["g_hat"])
                n = int(row["support_count"]) if has_support and row["support_count"] else 0
            except (TypeError, ValueError):
                raise ParseError("bad age, g_hat or support_count", line) from None
            if age in per_spec[row["spec"]]:
                raise DuplicateRecordError(f"spec {row['spec']!r} lists age {age} twice "
                                           f"(line {line})")
            per_spec[row["spec"]][age] = (g, n)
    out = {}
    for name, by_age in per_spec.items():
        ages = sorted(by_age)
        if ages != list(range(ages[0], ages[-1] + 1)):
            raise ParseError(f"spec {name!r}: ages are not contiguous")
        grid = AgeGrid(ages[0], ages[-1])
        out[name] = AgeCurve(grid, np.array([by_age[a][0] for a in ages]),
                             np.array([by_age[a][1] for a in ages]))
    return out


def write_truth_curve(curve: AgeCurve, path):
    return _write(path, ("age", "g"), ((int(a), float(g)) for a, g in zip(curve.ages, curve.g)))


def read_truth_curve(path) -> AgeCurve:
    fh, reader = _reader(path, ("age", "g"))
    with fh:
        try:
            pairs = sorted((int(r["age"]), float(r["g"])) for r in reader)
        except (TypeError, ValueError):
            raise ParseError(f"{path}: bad age or g value") from None
    if not pairs:
        raise InsufficientDataError(f"{path}: truth file has no rows")
    ages = [a for a, _ in pairs]
    if ages != list(range(ages[0], ages[-1] + 1)):
        raise ParseError(f"{path}: ages are not contiguous")
    return AgeCurve(AgeGrid(ages[0], ages[-1]), np.array([g for _, g in pairs]))


def write_truth_players(truth, player_ids, path):
    rows = zip(player_ids, truth.player_intercepts.tolist(), truth.player_quads.tolist())
    return _write(path, ("player_id", "gamma", "b"), rows)


def write_frame(frame, path):
    """Write a DataFrame with lossless float formatting."""
    path = Path(path)
    frame.to_csv(path, index=False, lineterminator="\n", float_format=None)
    return path


def parse_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise InvalidParameterError(f"expected an ISO date, got {text!r}") from None
