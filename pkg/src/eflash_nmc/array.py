"""Threshold-voltage cell array: the 4-bits/cell weight-memory macro.

Each cell is a single VT scalar. Erase draws a fresh erased distribution,
programming only ever raises VT, and retention stress ("bake") pulls charge
back toward the erased mean with added Gaussian dispersion. All randomness
comes from one seeded generator, so identical (seed, config, operation
sequence) gives bitwise-identical arrays.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analog import ChargePump, WlDriver
from .codec import ReferenceLadder, StateCodec
from .errors import ConfigError, SimError, UnreachableReference

CELLS_PER_ROW = 256
STATE_FIXED_POINT = 16  # vt serialized as round(mv * 16), little-endian int32


@dataclass(frozen=True)
class DriftParams:
    """Two-parameter retention-drift model: proportional charge loss toward
    the erased mean plus Gaussian dispersion. hours/temp_c are metadata."""

    loss_fraction: float
    sigma_mv: float
    hours: float = 0.0
    temp_c: float = 125.0

    def __post_init__(self):
        if not 0.0 <= self.loss_fraction <= 1.0:
            raise ConfigError("loss_fraction must lie in [0, 1]")
        if self.sigma_mv < 0:
            raise ConfigError("sigma_mv must be non-negative")


@dataclass
class DriftReport:
    params: DriftParams
    transition_counts: np.ndarray  # 16x16, pre-bake state -> post-bake state
    total_cells: int = 0
    misreads: int = field(init=False)

    def __post_init__(self):
        self.misreads = int(
            self.transition_counts.sum() - np.trace(self.transition_counts)
        )

    def max_state_shift(self):
        """Largest |post - pre| state distance among observed transitions."""
        pre, post = np.nonzero(self.transition_counts)
        return int(np.max(np.abs(post - pre))) if pre.size else 0

    def to_dict(self):
        return {
            "loss_fraction": self.params.loss_fraction,
            "sigma_mv": self.params.sigma_mv,
            "hours": self.params.hours,
            "temp_c": self.params.temp_c,
            "total_cells": self.total_cells,
            "misreads": self.misreads,
            "misread_rate": self.misreads / self.total_cells if self.total_cells else 0.0,
            "max_state_shift": self.max_state_shift(),
            "transition_counts": self.transition_counts.tolist(),
        }


class EflashMacro:
    """Banks of rows of 256 VT cells plus the analog context they depend on.

    Single-writer: concurrent experiments use independent instances with
    distinct seeds.
    """

    def __init__(
        self,
        banks=4,
        rows_per_bank=64,
        erased_mean_mv=400.0,
        erased_sigma_mv=20.0,
        step_mean_mv=75.0,
        step_sigma_mv=0.0,
        ladder=None,
        codec=None,
        driver=None,
        pump=None,
        seed=0,
    ):
        if banks < 1 or rows_per_bank < 1:
            raise ConfigError("geometry must have at least one bank and row")
        if erased_sigma_mv < 0 or step_sigma_mv < 0 or step_mean_mv <= 0:
            raise ConfigError("noise sigmas must be >= 0 and step mean > 0")
        self.banks = banks
        self.rows_per_bank = rows_per_bank
        self.cells_per_row = CELLS_PER_ROW
        self.erased_mean_mv = erased_mean_mv
        self.erased_sigma_mv = erased_sigma_mv
        self.step_mean_mv = step_mean_mv
        self.step_sigma_mv = step_sigma_mv
        self.ladder = ladder or ReferenceLadder.uniform()
        self.codec = codec or StateCodec()
        self.driver = driver or WlDriver()
        self.pump = pump or ChargePump()
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.vt = np.zeros((banks, rows_per_bank, CELLS_PER_ROW))
        self.read_events = np.zeros((banks, rows_per_bank), dtype=np.int64)
        self.erase_all()

    @property
    def capacity(self):
        return self.banks * self.rows_per_bank * self.cells_per_row

    @property
    def total_rows(self):
        return self.banks * self.rows_per_bank

    def split_row(self, flat_row):
        """Global row index -> (bank, row)."""
        if not 0 <= flat_row < self.total_rows:
            raise SimError(f"row {flat_row} outside macro ({self.total_rows} rows)")
        return divmod(flat_row, self.rows_per_bank)

    def _check_bank(self, bank_id):
        if not 0 <= bank_id < self.banks:
            raise SimError(f"unknown bank {bank_id}")

    # -- erase / program / sense ------------------------------------------

    def erase_bank(self, bank_id):
        self._check_bank(bank_id)
        shape = (self.rows_per_bank, self.cells_per_row)
        draw = self.rng.normal(self.erased_mean_mv, self.erased_sigma_mv, shape)
        self.vt[bank_id] = np.maximum(draw, 0.0)

    def erase_all(self):
        for b in range(self.banks):
            self.erase_bank(b)

    def power_up(self):
        """Enable the pump and run it to regulation (required before program)."""
        self.pump.run_until_regulated()

    def power_down(self):
        self.pump.disable()

    def _require_program_voltage(self):
        # raises PumpNotReady unless the pump is regulated
        self.driver.wl_voltage("program", pump_regulated=self.pump.regulated)

    def _pulse_draw(self, n):
        if self.step_sigma_mv == 0.0:
            return np.full(n, self.step_mean_mv)
        draw = self.rng.normal(self.step_mean_mv, self.step_sigma_mv, n)
        return np.maximum(draw, 0.0)

    def program_pulse(self, bank_id, row, col):
        """One program pulse on one cell; VT only ever increases."""
        self._check_bank(bank_id)
        self._require_program_voltage()
        self.vt[bank_id, row, col] += self._pulse_draw(1)[0]
        return float(self.vt[bank_id, row, col])

    def program_pulse_cells(self, bank_id, row, cols):
        """Bulk pulse for the program-verify loop; one draw per cell."""
        self._check_bank(bank_id)
        self._require_program_voltage()
        self.vt[bank_id, row, cols] += self._pulse_draw(len(cols))

    def sense(self, bank_id, row, col, vref_mv):
        """Single-reference compare: true iff vt > vref (strict)."""
        self._check_bank(bank_id)
        if not self.driver.reference_reachable(vref_mv):
            raise UnreachableReference(
                f"driver variant {self.driver.variant!r} cannot present {vref_mv} mV"
            )
        return bool(self.vt[bank_id, row, col] > vref_mv)

    def sense_cells(self, bank_id, row, cols, vref_mv):
        if not self.driver.reference_reachable(vref_mv):
            raise UnreachableReference(
                f"driver variant {self.driver.variant!r} cannot present {vref_mv} mV"
            )
        return self.vt[bank_id, row, cols] > vref_mv

    # -- read --------------------------------------------------------------

    def read_row(self, bank_id, row):
        """Decode all 256 cells of a row into states; counts one read event."""
        self._check_bank(bank_id)
        for ref in self.ladder.read_mv:
            if not self.driver.reference_reachable(ref):
                raise UnreachableReference(
                    f"read boundary {ref} mV unreachable by "
                    f"{self.driver.variant!r} driver"
                )
        self.read_events[bank_id, row] += 1
        return self.ladder.classify(self.vt[bank_id, row])

    def classify_all(self):
        """States of every cell, without touching read statistics."""
        return self.ladder.classify(self.vt)

    # -- retention ---------------------------------------------------------

    def apply_bake(self, params: DriftParams) -> DriftReport:
        pre = self.classify_all()
        drift = -params.loss_fraction * (self.vt - self.erased_mean_mv)
        if params.sigma_mv > 0:
            drift = drift + self.rng.normal(0.0, params.sigma_mv, self.vt.shape)
        self.vt = np.maximum(self.vt + drift, 0.0)
        post = self.classify_all()
        counts = np.zeros((16, 16), dtype=np.int64)
        np.add.at(counts, (pre.ravel(), post.ravel()), 1)
        return DriftReport(params, counts, total_cells=self.vt.size)

    # -- statistics --------------------------------------------------------

    def vt_histogram(self, bank_id=None, bin_mv=25.0):
        """(bin_left_mv, counts) over the selected cells."""
        if bin_mv <= 0:
            raise SimError("bin_mv must be positive")
        if bank_id is None:
            data = self.vt.ravel()
        else:
            self._check_bank(bank_id)
            data = self.vt[bank_id].ravel()
        if data.size == 0:
            return np.zeros(0), np.zeros(0, dtype=np.int64)
        # one spare bin past the max so the top cell is not absorbed into a
        # closed last interval
        edges = np.arange(0.0, float(data.max()) + 2 * bin_mv, bin_mv)
        counts, edges = np.histogram(data, bins=edges)
        return edges[:-1], counts

    # -- state serialization ----------------------------------------------

    def save_state(self, path):
        """Flat little-endian int32 of vt in 1/16 mV units plus a JSON sidecar."""
        path = Path(path)
        fixed = np.round(self.vt.ravel() * STATE_FIXED_POINT).astype("<i4")
        path.write_bytes(fixed.tobytes())
        sidecar = {
            "banks": self.banks,
            "rows_per_bank": self.rows_per_bank,
            "cells_per_row": self.cells_per_row,
            "seed": self.seed,
            "fixed_point": STATE_FIXED_POINT,
        }
        Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2))

    def load_state(self, path):
        path = Path(path)
        sidecar = json.loads(Path(str(path) + ".json").read_text())
        if (
            sidecar["banks"] != self.banks
            or sidecar["rows_per_bank"] != self.rows_per_bank
            or sidecar["cells_per_row"] != self.cells_per_row
        ):
            raise ConfigError("state file geometry does not match configuration")
        raw = np.frombuffer(path.read_bytes(), dtype="<i4")
        if raw.size != self.capacity:
            raise ConfigError("state file truncated or oversized")
        self.vt = (raw.astype(np.float64) / sidecar["fixed_point"]).reshape(
            self.banks, self.rows_per_bank, self.cells_per_row
        )
