"""Behavioral models of the HV charge pump and the WL driver.

The pump boosts the 2.5 V I/O supply toward ~10 V across four cascaded taps.
Tap targets are linearly spaced so no two adjacent taps ever differ by more
than VDDH (the overstress-free contract). The WL driver comes in two
variants: the conventional one loses an NMOS threshold drop on the verify /
read path and therefore cannot present high references; the proposed one
reaches the full [0, VDDH] range.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .codec import VDDH_MV
from .errors import ConfigError, ProgramWhileUnregulated, SimError

PROPOSED = "proposed"
CONVENTIONAL = "conventional"


@dataclass
class ChargePump:
    """First-order behavioral pump: taps relax exponentially toward their
    targets while enabled and decay toward 0 when disabled.

    Supply-switch outputs VPS1-4 follow max(vpp, VDDH): equal to the boosted
    taps once high, parked at VDDH when the pump is discharged.
    """

    vddh_mv: float = VDDH_MV
    vpp4_target_mv: float = 10000.0
    tau_steps: float = 25.0
    regulate_frac: float = 0.98

    enabled: bool = field(default=False, init=False)
    regulated: bool = field(default=False, init=False)

    def __post_init__(self):
        if self.tau_steps <= 0:
            raise ConfigError("pump tau_steps must be positive")
        self.vpp_mv = np.zeros(4)
        self._alpha = 1.0 - math.exp(-1.0 / self.tau_steps)

    @property
    def targets_mv(self):
        span = self.vpp4_target_mv - self.vddh_mv
        return self.vddh_mv + span * np.arange(1, 5) / 4.0

    @property
    def vps_mv(self):
        return np.maximum(self.vpp_mv, self.vddh_mv)

    def enable(self):
        self.enabled = True

    def disable(self):
        self.enabled = False
        self.regulated = False

    def step(self):
        """Advance one simulation step; returns (vpp, vps) snapshots."""
        target = self.targets_mv if self.enabled else np.zeros(4)
        self.vpp_mv = self.vpp_mv + self._alpha * (target - self.vpp_mv)
        if self.enabled and self.vpp_mv[3] >= self.regulate_frac * self.vpp4_target_mv:
            self.regulated = True
        self.check_overstress()
        return self.vpp_mv.copy(), self.vps_mv.copy()

    def run_until_regulated(self, max_steps=10000):
        self.enable()
        for _ in range(max_steps):
            if self.regulated:
                return
            self.step()
        raise SimError("pump failed to regulate")

    def check_overstress(self):
        """Adjacent-tap and tap/supply-switch deltas must stay within VDDH."""
        if np.any(np.abs(np.diff(self.vpp_mv)) > self.vddh_mv + 1e-9):
            raise SimError("adjacent pump taps exceed VDDH stress limit")
        if np.any(np.abs(self.vps_mv - self.vpp_mv) > self.vddh_mv + 1e-9):
            raise SimError("VPS/VPP pairing exceeds VDDH stress limit")


@dataclass(frozen=True)
class WlDriver:
    """WL driver voltage-range model.

    ``conventional`` loses vth_drop_mv on verify/read; ``proposed`` passes the
    requested reference unchanged up to VDDH.
    """

    variant: str = PROPOSED
    vth_drop_mv: float = 700.0
    vpgm_mv: float = 10000.0

    def __post_init__(self):
        if self.variant not in (PROPOSED, CONVENTIONAL):
            raise ConfigError(f"unknown WL driver variant {self.variant!r}")
        if not 0 < self.vth_drop_mv < VDDH_MV:
            raise ConfigError("vth_drop_mv must lie in (0, VDDH)")

    def wl_voltage(self, mode, vrd_mv=None, *, pump_regulated=False):
        """WL output for a mode; program requires a regulated pump."""
        if mode == "program":
            if not pump_regulated:
                raise ProgramWhileUnregulated("program requested with pump unregulated")
            return self.vpgm_mv
        if mode not in ("verify", "read"):
            raise SimError(f"unknown WL mode {mode!r}")
        if vrd_mv is None or not 0 <= vrd_mv <= VDDH_MV:
            raise SimError(f"verify/read reference {vrd_mv} outside [0, {VDDH_MV}] mV")
        if self.variant == PROPOSED:
            return float(vrd_mv)
        return min(float(vrd_mv), VDDH_MV - self.vth_drop_mv)

    def reference_reachable(self, vref_mv):
        """Whether the driver can actually present vref on the WL."""
        if not 0 <= vref_mv <= VDDH_MV:
            return False
        return self.wl_voltage("verify", vref_mv) >= vref_mv
