"""Encoder/decoder pair of the quantized feedback protocol.

Both endpoints hold an identical :class:`CodecState` and advance it with the
same deterministic rules after every symbol exchange, so the sensor-side
encoder and the controller-side decoder stay in lockstep without further
communication.  Symbols are plain integers:

    0                 overflow: the sampled state is outside the range
    1                 near-origin cell (decoded center is the origin)
    2 .. n^d + 1      row-major index of the hypercube cell containing x
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .design import DerivedConstants, DesignParams
from .matnum import as_vector, inf_norm_vec

__all__ = [
    "Stage",
    "CodecState",
    "OVERFLOW",
    "NEAR_ORIGIN",
    "symbol_count",
    "initial_state",
    "encode",
    "decode_center",
    "advance",
    "controller_input",
    "quad_value",
]

OVERFLOW = 0
NEAR_ORIGIN = 1


class Stage(Enum):
    SEARCHING = 0
    STABILIZING = 1


@dataclass(frozen=True, eq=False)
class CodecState:
    """Shared quantizer bookkeeping at one sample index.

    ``stage`` is the stage decided at the most recently processed sample
    (None before the first symbol); ``prev_stage`` is the one before that.
    ``radius_prev`` keeps the previous radius because the escape-adjusted
    update needs it.
    """

    k: int
    center: np.ndarray
    radius: float
    radius_prev: float | None = None
    stage: Stage | None = None
    prev_stage: Stage | None = None

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must stay positive")

    def __eq__(self, other) -> bool:
        # Bit-for-bit: lockstep equality must not tolerate any drift.
        if not isinstance(other, CodecState):
            return NotImplemented
        return (self.k == other.k
                and self.center.tobytes() == other.center.tobytes()
                and np.float64(self.radius).tobytes() == np.float64(other.radius).tobytes()
                and ((self.radius_prev is None and other.radius_prev is None)
                     or (self.radius_prev is not None and other.radius_prev is not None
                         and np.float64(self.radius_prev).tobytes()
                         == np.float64(other.radius_prev).tobytes()))
                and self.stage == other.stage
                and self.prev_stage == other.prev_stage)


def symbol_count(n_levels: int, n_x: int) -> int:
    """Size of the symbol alphabet, including overflow and near-origin."""
    return n_levels**n_x + 2


def initial_state(radius0: float, n_x: int) -> CodecState:
    """State both endpoints start from: center at the origin."""
    return CodecState(k=0, center=np.zeros(n_x), radius=float(radius0))


def encode(state: CodecState, x, n_levels: int) -> int:
    """Map a sampled state to a symbol.

    Visibility is tested first, then the near-origin cell; otherwise the
    hypercube is split into n_levels half-open cells per dimension (the
    upper face is clamped into the last cell).
    """
    x = as_vector(x)
    if x.shape != state.center.shape:
        raise ValueError("state dimension mismatch")
    E = state.radius
    if inf_norm_vec(x - state.center) > E:
        return OVERFLOW
    if inf_norm_vec(x) <= E / n_levels:
        return NEAR_ORIGIN
    scaled = (x - (state.center - E)) * n_levels / (2.0 * E)
    idx = np.minimum(np.floor(scaled).astype(int), n_levels - 1)
    idx = np.maximum(idx, 0)
    offset = int(np.ravel_multi_index(tuple(idx), (n_levels,) * x.size))
    return 2 + offset


def decode_center(state: CodecState, symbol: int, n_levels: int) -> np.ndarray:
    """Cell center for a visible symbol; the near-origin cell maps to 0."""
    n_x = state.center.size
    if symbol == OVERFLOW:
        raise ValueError("overflow symbol carries no cell center")
    if symbol == NEAR_ORIGIN:
        return np.zeros(n_x)
    offset = symbol - 2
    if not 0 <= offset < n_levels**n_x:
        raise ValueError(f"symbol {symbol} out of range")
    idx = np.array(np.unravel_index(offset, (n_levels,) * n_x), dtype=float)
    # (2i + 1 - n)/n is exact for the extreme cells, so the decoded center
    # meets the (n-1)/n * E distance bound without rounding slop.
    return state.center + ((2.0 * idx + 1.0 - n_levels) / n_levels) * state.radius


def quad_value(center: np.ndarray, radius: float, P: np.ndarray, rho: float) -> float:
    """Value function V = center^T P center + rho * radius^2 (shared data only)."""
    return float(center @ P @ center + rho * radius * radius)


def advance(state: CodecState, symbol: int, d: DerivedConstants,
            p: DesignParams) -> CodecState:
    """Propagate (center, radius) one period after processing ``symbol``.

    Visible symbols contract the radius through the value function;
    the overflow symbol grows it, with the escape-adjusted seed when the
    previous sample was stabilizing.
    """
    n = d.n_levels
    E = state.radius
    if symbol >= 1:
        c = decode_center(state, symbol, n)
        v = quad_value(state.center, E, d.P, p.rho)
        center = d.S_closed @ c
        radius = d.growth_eff / n * E + np.sqrt(p.phi * v)
        stage = Stage.STABILIZING
    elif state.stage is Stage.STABILIZING:
        # Escape: reseed the radius from the pre-escape one so the growth
        # starts from a disturbance-comparable level.
        if state.radius_prev is None:
            raise RuntimeError("escape cannot occur before the first sample")
        seed = d.growth_eff / n * state.radius_prev + d.dist_gain * p.dist_level
        center = d.S_open @ state.center
        radius = d.search_growth * seed + d.dist_gain * p.dist_level
        stage = Stage.SEARCHING
    else:
        center = d.S_open @ state.center
        radius = d.search_growth * E + d.dist_gain * p.dist_level
        stage = Stage.SEARCHING
    return CodecState(k=state.k + 1, center=center, radius=float(radius),
                      radius_prev=E, stage=stage, prev_stage=state.stage)


def controller_input(stage: Stage, K: np.ndarray, xhat: np.ndarray) -> np.ndarray:
    """Control input for the current stage: feedback on the auxiliary state
    while stabilizing, zero while searching."""
    if stage is Stage.STABILIZING:
        return K @ xhat
    return np.zeros(K.shape[0])
