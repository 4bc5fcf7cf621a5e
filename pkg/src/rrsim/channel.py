"""Radio propagation: log-distance path loss, LOS blockage, cascaded RIS channel,
SNR and throughput mapping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

# Staircase MCS table: (minimum SNR dB, rate Mbps). Below the floor the link
# delivers nothing; above the top row the rate is capped.
DEFAULT_MCS = (
    (-4.0, 0.5),
    (-1.0, 1.0),
    (2.0, 2.0),
    (5.0, 4.0),
    (8.0, 6.0),
    (11.0, 9.0),
    (14.0, 12.0),
    (17.0, 15.0),
    (20.0, 18.0),
    (23.0, 21.0),
    (26.0, 24.0),
)

# Four element states: {horizontal, vertical} polarization x {0, pi} phase shift.
# Cross-polarized reception is attenuated by a fixed amplitude factor.
CROSS_POL_AMPLITUDE = 0.5
HV4_STATES = (
    (1.0, 0.0),
    (1.0, math.pi),
    (CROSS_POL_AMPLITUDE, 0.0),
    (CROSS_POL_AMPLITUDE, math.pi),
)


class ChannelError(Exception):
    pass


class ZeroDistance(ChannelError):
    pass


class LengthMismatch(ChannelError):
    pass


@dataclass(frozen=True)
class ComplexGain:
    """Linear amplitude and phase wrapped to [0, 2*pi)."""

    amplitude: float
    phase: float

    def __post_init__(self) -> None:
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        object.__setattr__(self, "phase", self.phase % (2.0 * math.pi))

    @classmethod
    def from_complex(cls, value: complex) -> "ComplexGain":
        return cls(abs(value), math.atan2(value.imag, value.real))

    def as_complex(self) -> complex:
        return self.amplitude * complex(math.cos(self.phase), math.sin(self.phase))


@dataclass(frozen=True)
class LinkSample:
    tx_id: str
    rx_id: str
    path_loss_db: float
    los_blocked: bool
    total_gain: ComplexGain
    received_power_dbm: float
    snr_db: float


@dataclass(frozen=True)
class ChannelParams:
    exponent: float = 2.0
    d0_m: float = 1.0
    blockage_penalty_db: float = 20.0
    noise_figure_db: float = 7.0
    bandwidth_hz: float = 20e6
    mcs_table: tuple[tuple[float, float], ...] = DEFAULT_MCS
    # Residual direct-path attenuation (dB) when LOS is blocked in the cascaded
    # model; None means the blocked direct path contributes nothing.
    scatter_floor_db: float | None = None
    fading: bool = False

    def noise_floor_dbm(self) -> float:
        return -174.0 + 10.0 * math.log10(self.bandwidth_hz) + self.noise_figure_db


def free_space_pl_db(distance_m: float, freq_ghz: float) -> float:
    wavelength = SPEED_OF_LIGHT / (freq_ghz * 1e9)
    return 20.0 * math.log10(4.0 * math.pi * distance_m / wavelength)


def path_loss(
    tx_pos,
    rx_pos,
    freq_ghz: float,
    params: ChannelParams,
    blocked: bool = False,
) -> float:
    """Log-distance path loss in dB, referenced to free space at d0."""
    d = float(np.linalg.norm(np.asarray(rx_pos, float) - np.asarray(tx_pos, float)))
    if d <= 0.0:
        raise ZeroDistance("tx and rx positions coincide")
    d = max(d, params.d0_m)
    pl0 = free_space_pl_db(params.d0_m, freq_ghz)
    pl = pl0 + 10.0 * params.exponent * math.log10(d / params.d0_m)
    if blocked:
        pl += params.blockage_penalty_db
    return pl


def los_blocked(tx_pos, rx_pos, obstacles) -> bool:
    """True iff the tx->rx segment intersects any closed axis-aligned box."""
    if not len(obstacles):
        return False
    p = np.asarray(tx_pos, float)
    q = np.asarray(rx_pos, float)
    for box in obstacles:
        lo = np.asarray(box[0], float)
        hi = np.asarray(box[1], float)
        if _segment_hits_box(p, q, lo, hi):
            return True
    return False


def _segment_hits_box(p: np.ndarray, q: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> bool:
    # Slab method on the parametric segment p + t(q - p), t in [0, 1].
    d = q - p
    t_min, t_max = 0.0, 1.0
    for axis in range(3):
        if abs(d[axis]) < 1e-12:
            if p[axis] < lo[axis] or p[axis] > hi[axis]:
                return False
            continue
        t1 = (lo[axis] - p[axis]) / d[axis]
        t2 = (hi[axis] - p[axis]) / d[axis]
        if t1 > t2:
            t1, t2 = t2, t1
        t_min = max(t_min, t1)
        t_max = min(t_max, t2)
        if t_min > t_max:
            return False
    return True


def segment_blocked_many(tx_pos: np.ndarray, rx_positions: np.ndarray, obstacles) -> np.ndarray:
    """Vectorized blockage test: one tx against (M, 3) rx positions."""
    m = rx_positions.shape[0]
    blocked = np.zeros(m, dtype=bool)
    if not len(obstacles):
        return blocked
    p = np.asarray(tx_pos, float)
    d = rx_positions - p  # (M, 3)
    for box in obstacles:
        lo = np.asarray(box[0], float)
        hi = np.asarray(box[1], float)
        t_min = np.zeros(m)
        t_max = np.ones(m)
        ok = np.ones(m, dtype=bool)
        for axis in range(3):
            da = d[:, axis]
            parallel = np.abs(da) < 1e-12
            outside = parallel & ((p[axis] < lo[axis]) | (p[axis] > hi[axis]))
            ok &= ~outside
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (lo[axis] - p[axis]) / da
                t2 = (hi[axis] - p[axis]) / da
            swap = t1 > t2
            t1s = np.where(swap, t2, t1)
            t2s = np.where(swap, t1, t2)
            use = ~parallel
            t_min = np.where(use, np.maximum(t_min, t1s), t_min)
            t_max = np.where(use, np.minimum(t_max, t2s), t_max)
        blocked |= ok & (t_min <= t_max)
    return blocked


@dataclass
class RisPanel:
    """Passive reflecting panel with discrete per-element states.

    Element positions derive from the panel center, a rows x cols layout and
    the element pitch; the panel plane is normal to one coordinate axis.
    """

    panel_id: str
    element_positions: np.ndarray  # (N, 3) meters
    states: tuple[tuple[float, float], ...] = HV4_STATES  # (amplitude, phase)
    partition: np.ndarray | None = None  # (N,) part id per element

    def __post_init__(self) -> None:
        self.element_positions = np.asarray(self.element_positions, float)
        if self.element_positions.ndim != 2 or self.element_positions.shape[1] != 3:
            raise ValueError("element_positions must be (N, 3)")
        if self.n_elements == 0:
            raise ValueError("panel must have at least one element")
        for amp, _ in self.states:
            if not 0.0 <= amp <= 1.0:
                raise ValueError("state amplitude must be in [0, 1]")
        if self.partition is None:
            self.partition = np.zeros(self.n_elements, dtype=int)
        else:
            self.partition = np.asarray(self.partition, dtype=int)
            if self.partition.shape != (self.n_elements,):
                raise ValueError("partition table must have one part id per element")

    @property
    def n_elements(self) -> int:
        return self.element_positions.shape[0]

    @property
    def n_states(self) -> int:
        return len(self.states)

    def part_elements(self, part_id: int) -> np.ndarray:
        return np.flatnonzero(self.partition == part_id)

    def split_halves(self) -> None:
        """Partition into two contiguous halves (parts 0 and 1)."""
        half = self.n_elements // 2
        table = np.zeros(self.n_elements, dtype=int)
        table[half:] = 1
        self.partition = table

    @classmethod
    def planar(
        cls,
        panel_id: str,
        center,
        rows: int,
        cols: int,
        pitch_m: float,
        normal_axis: int = 1,
        states: tuple[tuple[float, float], ...] = HV4_STATES,
    ) -> "RisPanel":
        center = np.asarray(center, float)
        axes = [a for a in range(3) if a != normal_axis]
        r_idx = np.arange(rows) - (rows - 1) / 2.0
        c_idx = np.arange(cols) - (cols - 1) / 2.0
        positions = np.tile(center, (rows * cols, 1))
        rr, cc = np.meshgrid(r_idx, c_idx, indexing="ij")
        positions[:, axes[0]] += cc.ravel() * pitch_m
        positions[:, axes[1]] += rr.ravel() * pitch_m
        return cls(panel_id, positions, states=states)


def cascaded_gain(
    tx_pos,
    panel: RisPanel,
    config,
    rx_pos,
    freq_ghz: float,
    params: ChannelParams,
    obstacles=(),
) -> ComplexGain:
    """Total complex gain of direct path plus per-element reflected paths.

    Each element contributes a_k * g_k * f_k * exp(j(theta_k + phi_k)) where
    g_k, f_k are segment amplitudes from path loss, phi_k the distance-induced
    phase -2*pi*(d1+d2)/lambda and (a_k, theta_k) the chosen element state.
    """
    config = np.asarray(config, dtype=int)
    if config.shape != (panel.n_elements,):
        raise LengthMismatch(
            f"config length {config.size} != element count {panel.n_elements}"
        )
    tx = np.asarray(tx_pos, float)
    rx = np.asarray(rx_pos, float)
    wavelength = SPEED_OF_LIGHT / (freq_ghz * 1e9)

    d1 = np.linalg.norm(panel.element_positions - tx, axis=1)
    d2 = np.linalg.norm(rx - panel.element_positions, axis=1)
    if np.any(d1 <= 0.0) or np.any(d2 <= 0.0):
        raise ZeroDistance("tx or rx coincides with a panel element")
    pl1 = _path_loss_db_vec(d1, freq_ghz, params)
    pl2 = _path_loss_db_vec(d2, freq_ghz, params)
    seg_amp = 10.0 ** (-(pl1 + pl2) / 20.0)

    state_amp = np.array([panel.states[s][0] for s in config])
    state_phase = np.array([panel.states[s][1] for s in config])
    phase = state_phase - 2.0 * math.pi * (d1 + d2) / wavelength
    total = np.sum(state_amp * seg_amp * np.exp(1j * phase))

    total += _direct_term(tx, rx, freq_ghz, params, obstacles)
    return ComplexGain.from_complex(complex(total))


def _direct_term(tx, rx, freq_ghz, params: ChannelParams, obstacles) -> complex:
    blocked = los_blocked(tx, rx, obstacles)
    if blocked and params.scatter_floor_db is None:
        return 0.0
    d = float(np.linalg.norm(rx - tx))
    if d <= 0.0:
        raise ZeroDistance("tx and rx positions coincide")
    pl = path_loss(tx, rx, freq_ghz, params)
    if blocked:
        pl += params.scatter_floor_db
    wavelength = SPEED_OF_LIGHT / (freq_ghz * 1e9)
    amp = 10.0 ** (-pl / 20.0)
    return amp * np.exp(-2j * math.pi * d / wavelength)


def _path_loss_db_vec(d: np.ndarray, freq_ghz: float, params: ChannelParams) -> np.ndarray:
    d = np.maximum(d, params.d0_m)
    pl0 = free_space_pl_db(params.d0_m, freq_ghz)
    return pl0 + 10.0 * params.exponent * np.log10(d / params.d0_m)


def received_power_dbm(tx_power_dbm: float, gain: ComplexGain) -> float:
    if gain.amplitude <= 0.0:
        return -math.inf
    return tx_power_dbm + 20.0 * math.log10(gain.amplitude)


def snr_db(received_dbm: float, params: ChannelParams) -> float:
    return received_dbm - params.noise_floor_dbm()


def throughput(snr: float, mcs_table=DEFAULT_MCS) -> float:
    """Staircase rate lookup; below the table floor the link carries nothing."""
    rate = 0.0
    prev = -math.inf
    for min_snr, mbps in mcs_table:
        if min_snr < prev:
            raise ValueError("MCS table must be sorted by min SNR")
        prev = min_snr
        if snr >= min_snr:
            rate = mbps
        else:
            break
    return rate
