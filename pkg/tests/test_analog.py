import numpy as np
import pytest

from eflash_nmc import ChargePump, WlDriver
from eflash_nmc.analog import CONVENTIONAL, PROPOSED
from eflash_nmc.codec import VDDH_MV
from eflash_nmc.errors import ConfigError, ProgramWhileUnregulated, SimError


class TestChargePump:
    def test_steady_state_near_10v(self):
        pump = ChargePump()
        pump.run_until_regulated()
        for _ in range(200):
            pump.step()
        assert 9800.0 <= pump.vpp_mv[3] <= 10000.0

    def test_tap_spacing_at_steady_state(self):
        pump = ChargePump()
        pump.run_until_regulated()
        for _ in range(500):
            pump.step()
        diffs = np.diff(pump.vpp_mv)
        assert np.allclose(diffs, 1875.0, atol=1.0)
        assert np.all(np.abs(diffs) <= VDDH_MV)

    def test_overstress_invariant_full_cycle(self):
        # every step of enable -> regulate -> hold -> disable -> discharge
        pump = ChargePump()
        pump.enable()
        for _ in range(400):
            pump.step()  # step() itself asserts the stress inequalities
        assert pump.regulated
        pump.disable()
        for _ in range(600):
            pump.step()

    def test_discharged_supply_switches_park_at_vddh(self):
        pump = ChargePump()
        pump.run_until_regulated()
        pump.disable()
        for _ in range(1000):
            pump.step()
        assert np.allclose(pump.vps_mv, VDDH_MV)
        assert np.all(pump.vpp_mv < 1.0)

    def test_regulated_supply_switches_track_taps(self):
        pump = ChargePump()
        pump.run_until_regulated()
        assert np.array_equal(pump.vps_mv, pump.vpp_mv)

    def test_regulation_hysteresis(self):
        pump = ChargePump()
        pump.run_until_regulated()
        for _ in range(50):
            pump.step()
        for _ in range(200):
            pump.step()
            assert pump.regulated
            assert abs(pump.vpp_mv[3] - pump.vpp4_target_mv) <= 0.02 * pump.vpp4_target_mv

    def test_bad_tau_rejected(self):
        with pytest.raises(ConfigError):
            ChargePump(tau_steps=0)


class TestWlDriver:
    def test_program_voltage(self):
        drv = WlDriver(PROPOSED)
        assert drv.wl_voltage("program", pump_regulated=True) == 10000.0

    def test_program_requires_regulated_pump(self):
        with pytest.raises(ProgramWhileUnregulated):
            WlDriver(PROPOSED).wl_voltage("program", pump_regulated=False)

    def test_proposed_full_range(self):
        drv = WlDriver(PROPOSED)
        assert drv.wl_voltage("read", 2500.0) == 2500.0
        for v in np.linspace(0, 2500, 26):
            assert drv.reference_reachable(v)

    def test_conventional_vth_drop(self):
        drv = WlDriver(CONVENTIONAL, vth_drop_mv=700.0)
        assert drv.wl_voltage("verify", 2500.0) == 1800.0
        assert drv.wl_voltage("verify", 1000.0) == 1000.0

    def test_conventional_reachability_boundary(self):
        drv = WlDriver(CONVENTIONAL, vth_drop_mv=700.0)
        assert drv.reference_reachable(1800.0)
        assert not drv.reference_reachable(1801.0)

    def test_bad_mode_and_range(self):
        drv = WlDriver(PROPOSED)
        with pytest.raises(SimError):
            drv.wl_voltage("erase", 100.0)
        with pytest.raises(SimError):
            drv.wl_voltage("read", 2600.0)

    def test_bad_variant_and_drop(self):
        with pytest.raises(ConfigError):
            WlDriver("fancy")
        with pytest.raises(ConfigError):
            WlDriver(CONVENTIONAL, vth_drop_mv=2500.0)
