"""4-bits/cell state codec: weight<->state mapping and reference ladders.

A cell stores one of 16 threshold-voltage states. State 0 is erased; states
1..15 each have a verify level (the WL voltage a cell must exceed during
program-verify) and a read boundary sitting below it, so a freshly verified
cell always decodes back to its target state.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SimError

VDDH_MV = 2500.0
NUM_STATES = 16


@dataclass(frozen=True)
class ReferenceLadder:
    """15 verify levels and 15 read boundaries, in millivolts, ascending."""

    verify_mv: tuple
    read_mv: tuple

    def __post_init__(self):
        object.__setattr__(self, "verify_mv", tuple(float(v) for v in self.verify_mv))
        object.__setattr__(self, "read_mv", tuple(float(v) for v in self.read_mv))
        if len(self.verify_mv) != 15 or len(self.read_mv) != 15:
            raise ConfigError("ladder needs exactly 15 verify and 15 read levels")
        for name, levels in (("verify_mv", self.verify_mv), ("read_mv", self.read_mv)):
            if any(b <= a for a, b in zip(levels, levels[1:])):
                raise ConfigError(f"{name} must be strictly ascending")
            if levels[0] < 0 or levels[-1] > VDDH_MV:
                raise ConfigError(f"{name} must lie within [0, {VDDH_MV}] mV")
        if any(r >= v for r, v in zip(self.read_mv, self.verify_mv)):
            raise ConfigError("every read boundary must sit below its verify level")
        # cached for vectorized classification
        object.__setattr__(self, "_read_arr", np.asarray(self.read_mv))

    @classmethod
    def uniform(cls, lo_mv=600.0, hi_mv=2400.0, read_margin_mv=50.0):
        """Verify levels evenly spaced over [lo_mv, hi_mv]; read = verify - margin.

        The 600 mV floor keeps state 1 clear of the erased distribution and the
        100 mV headroom below VDDH keeps state 15 verifiable.
        """
        verify = np.linspace(lo_mv, hi_mv, 15)
        return cls(tuple(verify), tuple(verify - read_margin_mv))

    def verify_level(self, state):
        """Verify voltage for a programmed state (1..15). State 0 is never verified."""
        if not 1 <= state <= 15:
            raise SimError(f"state {state} has no verify level")
        return self.verify_mv[state - 1]

    def classify(self, vt):
        """Decode a threshold voltage to a state: the count of read boundaries
        strictly below vt. Accepts scalars or arrays."""
        idx = np.searchsorted(self._read_arr, vt, side="left")
        if np.isscalar(vt):
            return int(idx)
        return idx.astype(np.int64)

    def spacing_mv(self):
        """Minimum gap between adjacent read boundaries."""
        return float(np.min(np.diff(self._read_arr)))


def _default_table():
    # state index = weight + 8: adjacent states differ by exactly one weight step
    return tuple(range(-8, 8))


@dataclass(frozen=True)
class StateCodec:
    """Bijective mapping between signed 4-bit weights and the 16 cell states.

    ``weight_for_state[s]`` gives the weight stored as state s. The default
    table is the monotone two's-complement mapping; an alternate 16-entry
    table can be injected from config.
    """

    weight_for_state: tuple = field(default_factory=_default_table)

    def __post_init__(self):
        table = tuple(int(w) for w in self.weight_for_state)
        object.__setattr__(self, "weight_for_state", table)
        if len(table) != NUM_STATES or sorted(table) != list(range(-8, 8)):
            raise ConfigError("mapping table must be a permutation of [-8, 7]")
        object.__setattr__(
            self, "_state_for_weight", {w: s for s, w in enumerate(table)}
        )
        object.__setattr__(self, "_decode_arr", np.asarray(table, dtype=np.int64))

    def encode_weight(self, w):
        """Weight in [-8, 7] -> state index."""
        try:
            return self._state_for_weight[int(w)]
        except KeyError:
            raise SimError(f"weight {w} outside [-8, 7]") from None

    def decode_state(self, s):
        """State index in [0, 15] -> weight."""
        s = int(s)
        if not 0 <= s < NUM_STATES:
            raise SimError(f"state {s} outside [0, 15]")
        return self.weight_for_state[s]

    def encode_array(self, weights):
        w = np.asarray(weights, dtype=np.int64)
        if w.size and (w.min() < -8 or w.max() > 7):
            raise SimError("weight outside [-8, 7]")
        lut = np.empty(16, dtype=np.int64)
        for weight, state in self._state_for_weight.items():
            lut[weight + 8] = state
        return lut[w + 8]

    def decode_array(self, states):
        s = np.asarray(states, dtype=np.int64)
        if s.size and (s.min() < 0 or s.max() > 15):
            raise SimError("state outside [0, 15]")
        return self._decode_arr[s]
