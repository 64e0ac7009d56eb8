"""Sequential 16-state program-verify over rows of the cell array.

States are visited in ascending VT order (the only order compatible with
monotone-only programming): every cell targeting the current state is pulsed
until it senses above that state's verify level, then the next state begins.
"""

from dataclasses import dataclass

import numpy as np

from .array import CELLS_PER_ROW, EflashMacro
from .errors import CapacityError, SimError, VerifyTimeout

DEFAULT_MAX_PULSES = 64


@dataclass
class ProgramJob:
    bank_id: int
    row: int
    targets: np.ndarray  # 256 target states
    max_pulses_per_cell: int = DEFAULT_MAX_PULSES

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=np.int64)
        if self.targets.shape != (CELLS_PER_ROW,):
            raise SimError(f"targets must have exactly {CELLS_PER_ROW} entries")
        if self.targets.min() < 0 or self.targets.max() > 15:
            raise SimError("target states must lie in [0, 15]")
        if self.max_pulses_per_cell < 1:
            raise SimError("max_pulses_per_cell must be >= 1")


@dataclass
class MarginReport:
    """Post-program VT statistics per target state and read-boundary margins.

    boundary_margin_mv[s] = min VT among state-s cells minus the read boundary
    below state s; positive means every cell of that state decodes correctly.
    """

    state_stats: dict
    boundary_margin_mv: dict

    @classmethod
    def from_cells(cls, vt, targets, ladder):
        vt = np.asarray(vt, dtype=np.float64).ravel()
        targets = np.asarray(targets, dtype=np.int64).ravel()
        stats, margins = {}, {}
        for s in range(16):
            sel = vt[targets == s]
            if sel.size == 0:
                continue
            stats[s] = {
                "count": int(sel.size),
                "min_mv": float(sel.min()),
                "max_mv": float(sel.max()),
                "mean_mv": float(sel.mean()),
            }
            if s >= 1:
                margins[s] = float(sel.min() - ladder.read_mv[s - 1])
        return cls(stats, margins)

    def to_dict(self):
        return {
            "state_stats": {str(k): v for k, v in self.state_stats.items()},
            "boundary_margin_mv": {
                str(k): v for k, v in self.boundary_margin_mv.items()
            },
        }


@dataclass
class ProgramSummary:
    start_row: int
    rows_programmed: int
    total_pulses: int
    pulses_by_state: dict
    margin: MarginReport

    def to_dict(self):
        return {
            "start_row": self.start_row,
            "rows_programmed": self.rows_programmed,
            "total_pulses": self.total_pulses,
            "pulses_by_state": {str(k): v for k, v in self.pulses_by_state.items()},
            "margin": self.margin.to_dict(),
        }


def program_row(macro: EflashMacro, job: ProgramJob, schedule_trace=None):
    """Program one row to its target states; returns a MarginReport.

    ``schedule_trace``, when given, collects (state, pulses_issued) tuples in
    processing order so tests can assert the ascending schedule.
    """
    bank, row = job.bank_id, job.row
    if np.any(macro.ladder.classify(macro.vt[bank, row]) != 0):
        raise SimError(f"bank {bank} row {row} is not erased")
    pulses = np.zeros(CELLS_PER_ROW, dtype=np.int64)
    for s in range(1, 16):
        cols = np.nonzero(job.targets == s)[0]
        if cols.size == 0:
            continue
        vref = macro.ladder.verify_level(s)
        pending = cols[~macro.sense_cells(bank, row, cols, vref)]
        issued = 0
        while pending.size:
            over = pending[pulses[pending] >= job.max_pulses_per_cell]
            if over.size:
                raise VerifyTimeout(bank, row, int(over[0]), s, job.max_pulses_per_cell)
            macro.program_pulse_cells(bank, row, pending)
            pulses[pending] += 1
            issued += pending.size
            pending = pending[~macro.sense_cells(bank, row, pending, vref)]
        if schedule_trace is not None:
            schedule_trace.append((s, issued))
    report = MarginReport.from_cells(macro.vt[bank, row], job.targets, macro.ladder)
    report.pulses = pulses
    return report


def rows_needed(n_weights):
    return -(-n_weights // CELLS_PER_ROW)


def pattern_to_rows(macro, weights):
    """Encode weights, pad the tail row with the erased state, reshape to rows."""
    states = macro.codec.encode_array(weights)
    pad = (-states.size) % CELLS_PER_ROW
    if pad:
        states = np.concatenate([states, np.zeros(pad, dtype=np.int64)])
    return states.reshape(-1, CELLS_PER_ROW)


def program_pattern(
    macro: EflashMacro,
    weights,
    start_row=0,
    max_pulses_per_cell=DEFAULT_MAX_PULSES,
) -> ProgramSummary:
    """Bulk-program a flat weight list row by row from a starting row."""
    weights = np.asarray(weights, dtype=np.int64).ravel()
    if weights.size == 0:
        return ProgramSummary(start_row, 0, 0, {}, MarginReport({}, {}))
    rows = pattern_to_rows(macro, weights)
    if start_row + rows.shape[0] > macro.total_rows:
        raise CapacityError(
            f"{weights.size} weights need {rows.shape[0]} rows at row {start_row}; "
            f"macro has {macro.total_rows}"
        )
    total_pulses = 0
    pulses_by_state = {}
    all_vt, all_targets = [], []
    for i, targets in enumerate(rows):
        bank, row = macro.split_row(start_row + i)
        trace = []
        program_row(macro, ProgramJob(bank, row, targets, max_pulses_per_cell), trace)
        for s, issued in trace:
            total_pulses += issued
            pulses_by_state[s] = pulses_by_state.get(s, 0) + issued
        all_vt.append(macro.vt[bank, row].copy())
        all_targets.append(targets)
    margin = MarginReport.from_cells(
        np.concatenate(all_vt), np.concatenate(all_targets), macro.ladder
    )
    return ProgramSummary(start_row, rows.shape[0], total_pulses, pulses_by_state, margin)


def preset_pattern(macro: EflashMacro, weights, start_row=0):
    """Place weights by writing VT directly (verify level + half the read
    margin), bypassing the pulse loop. Deployment shortcut for experiments
    that exercise the compute path rather than programming itself."""
    weights = np.asarray(weights, dtype=np.int64).ravel()
    if weights.size == 0:
        return 0
    rows = pattern_to_rows(macro, weights)
    if start_row + rows.shape[0] > macro.total_rows:
        raise CapacityError("pattern exceeds macro capacity")
    verify = np.asarray(macro.ladder.verify_mv)
    read = np.asarray(macro.ladder.read_mv)
    level = np.empty(16)
    level[0] = macro.erased_mean_mv
    level[1:] = verify + (verify - read) / 2.0
    for i, targets in enumerate(rows):
        bank, row = macro.split_row(start_row + i)
        macro.vt[bank, row] = level[targets]
    return rows.shape[0]
