"""Simulator configuration: one JSON file describing geometry, noise, ladder,
driver variant, and pump constants; builds a ready EflashMacro."""

import json
from dataclasses import dataclass
from pathlib import Path

from .analog import ChargePump, WlDriver
from .array import EflashMacro
from .codec import ReferenceLadder, StateCodec
from .errors import ConfigError


@dataclass
class SimConfig:
    banks: int = 4
    rows_per_bank: int = 64
    erased_mean_mv: float = 400.0
    erased_sigma_mv: float = 20.0
    step_mean_mv: float = 75.0
    step_sigma_mv: float = 10.0
    ladder_verify_mv: list | None = None  # None -> uniform default
    ladder_read_mv: list | None = None
    mapping_table: list | None = None  # 16 weights by state; None -> w + 8
    driver_variant: str = "proposed"
    vth_drop_mv: float = 700.0
    vpp4_target_mv: float = 10000.0
    pump_tau_steps: float = 25.0
    max_pulses_per_cell: int = 64
    pingpong_capacity: int = 1024
    seed: int = 0

    def ladder(self):
        if (self.ladder_verify_mv is None) != (self.ladder_read_mv is None):
            raise ConfigError("ladder_verify_mv and ladder_read_mv come as a pair")
        if self.ladder_verify_mv is None:
            return ReferenceLadder.uniform()
        return ReferenceLadder(tuple(self.ladder_verify_mv), tuple(self.ladder_read_mv))

    def codec(self):
        if self.mapping_table is None:
            return StateCodec()
        return StateCodec(tuple(self.mapping_table))

    def build_macro(self, seed=None):
        return EflashMacro(
            banks=self.banks,
            rows_per_bank=self.rows_per_bank,
            erased_mean_mv=self.erased_mean_mv,
            erased_sigma_mv=self.erased_sigma_mv,
            step_mean_mv=self.step_mean_mv,
            step_sigma_mv=self.step_sigma_mv,
            ladder=self.ladder(),
            codec=self.codec(),
            driver=WlDriver(self.driver_variant, self.vth_drop_mv),
            pump=ChargePump(
                vpp4_target_mv=self.vpp4_target_mv, tau_steps=self.pump_tau_steps
            ),
            seed=self.seed if seed is None else seed,
        )

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**doc)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e})") from None
        return cls.from_dict(doc)

    def validate(self):
        if self.banks < 1 or self.rows_per_bank < 1:
            raise ConfigError("geometry must be at least 1 bank x 1 row")
        if self.erased_sigma_mv < 0 or self.step_sigma_mv < 0:
            raise ConfigError("sigmas must be non-negative")
        if self.step_mean_mv <= 0:
            raise ConfigError("step_mean_mv must be positive")
        if self.max_pulses_per_cell < 1:
            raise ConfigError("max_pulses_per_cell must be >= 1")
        if self.pingpong_capacity < 1:
            raise ConfigError("pingpong_capacity must be >= 1")
        # surface ladder/codec/driver/pump violations at load time
        self.ladder()
        self.codec()
        try:
            WlDriver(self.driver_variant, self.vth_drop_mv)
            ChargePump(
                vpp4_target_mv=self.vpp4_target_mv, tau_steps=self.pump_tau_steps
            )
        except ConfigError:
            raise
        return self
