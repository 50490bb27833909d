# RIS-aided MU-MISO downlink world.
#
# One environment instance owns a single channel realization (drawn at reset
# and then frozen), decodes raw agent actions into a power-constrained
# beamformer and unit-modulus reflection coefficients, and scores them with
# the sum-rate objective of the configured scenario:
#
#   golden    - perfect CSI, phase-dependent reflection amplitudes known
#   mismatch  - noisy cascaded-channel estimates, reflections assumed lossless
#
# Every step also reports the true sum rate (phase-dependent amplitudes on
# the true channels) as a diagnostic, regardless of scenario.

import math
from dataclasses import dataclass

import numpy as np

from .numerics import sample_cn, sq_norm, trace_gram

__all__ = [
    "SystemConfig",
    "ChannelSet",
    "DecodedAction",
    "EnvObservation",
    "WhitenStats",
    "DownlinkEnv",
    "dbm_to_watts",
    "amplitude",
    "generate_channels",
    "decode_action",
    "sum_rate",
    "build_state",
    "save_channels",
    "load_channels",
]

SCENARIOS = ("golden", "mismatch")
WHITEN_EPS = 1e-8
CHANNELS_VERSION = 1


def dbm_to_watts(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


@dataclass
class SystemConfig:
    """Scenario scalars. Powers are configured in dBm and converted to linear
    watts internally; noise/estimation variances are already linear."""

    k: int = 4              # users
    m: int = 4              # BS antennas
    l: int = 16             # RIS elements
    pt_dbm: float = 30.0    # transmit power budget
    sigma_w2: float = 1e-2  # receiver AWGN variance
    sigma_e2: float = 1e-2  # cascaded-channel estimation error variance
    beta_min: float = 0.3   # floor of the phase-dependent amplitude
    mu: float = 0.0         # amplitude model phase offset (rad)
    kappa: float = 1.5      # amplitude model steepness
    scenario: str = "golden"
    log_base: float = 2.0   # rate logarithm base (2 -> bits, e -> nats)

    def __post_init__(self):
        if min(self.k, self.m, self.l) < 1:
            raise ValueError("k, m, l must all be >= 1")
        if not 0.0 <= self.beta_min <= 1.0:
            raise ValueError(f"beta_min must lie in [0, 1], got {self.beta_min}")
        if self.kappa < 0 or self.mu < 0:
            raise ValueError("kappa and mu must be >= 0")
        if self.sigma_w2 <= 0:
            raise ValueError(f"sigma_w2 must be > 0, got {self.sigma_w2}")
        if self.sigma_e2 < 0:
            raise ValueError(f"sigma_e2 must be >= 0, got {self.sigma_e2}")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.log_base <= 1.0:
            raise ValueError(f"log base must exceed 1, got {self.log_base}")

    @property
    def pt_watts(self) -> float:
        return dbm_to_watts(self.pt_dbm)

    @property
    def action_dim(self) -> int:
        return 2 * self.m * self.k + 2 * self.l

    @property
    def state_dim(self) -> int:
        return 2 * self.k * self.l * self.m + self.action_dim + 2 * self.k


def amplitude(phase, cfg: SystemConfig):
    """Phase-dependent reflection gain in [beta_min, 1].

    beta(phi) = (1 - beta_min) * ((sin(phi - mu) + 1) / 2)^kappa + beta_min
    """
    base = (np.sin(np.asarray(phase, dtype=np.float64) - cfg.mu) + 1.0) / 2.0
    return (1.0 - cfg.beta_min) * base ** cfg.kappa + cfg.beta_min


@dataclass
class ChannelSet:
    """One frozen realization: BS-RIS channel, per-user RIS-user channels,
    cascaded channels, estimation errors and the resulting estimates."""

    h_bs_ris: np.ndarray    # (L, M)
    h_users: np.ndarray     # (K, L)
    cascaded: np.ndarray    # (K, L, M), diag(h_k) @ H
    errors: np.ndarray      # (K, L, M)
    estimates: np.ndarray   # (K, L, M), cascaded + errors


def generate_channels(cfg: SystemConfig, rng: np.random.Generator) -> ChannelSet:
    """Rayleigh CN(0, 1) draws; estimation errors CN(0, sigma_e2), zeroed in
    the golden scenario where CSI is perfect."""
    l, m, k = cfg.l, cfg.m, cfg.k
    h_bs_ris = sample_cn(rng, 1.0, l * m).reshape(l, m)
    h_users = sample_cn(rng, 1.0, k * l).reshape(k, l)
    cascaded = h_users[:, :, None] * h_bs_ris[None, :, :]
    if cfg.scenario == "golden":
        errors = np.zeros((k, l, m), dtype=np.complex128)
    else:
        errors = sample_cn(rng, cfg.sigma_e2, k * l * m).reshape(k, l, m)
    return ChannelSet(h_bs_ris, h_users, cascaded, errors, cascaded + errors)


def save_channels(path, channels: ChannelSet) -> None:
    np.savez(path, version=CHANNELS_VERSION, h_bs_ris=channels.h_bs_ris,
             h_users=channels.h_users, cascaded=channels.cascaded,
             errors=channels.errors, estimates=channels.estimates)


def load_channels(path) -> ChannelSet:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHANNELS_VERSION:
            raise ValueError(f"unsupported channel dump version {version}")
        channels = ChannelSet(data["h_bs_ris"], data["h_users"],
                              data["cascaded"], data["errors"],
                              data["estimates"])
    if not np.allclose(channels.cascaded + channels.errors,
                       channels.estimates, rtol=0, atol=1e-12):
        raise ValueError("corrupt channel dump: estimates != cascaded + errors")
    return channels


@dataclass
class DecodedAction:
    """Raw action vector turned into transmit/reflection quantities."""

    g: np.ndarray           # (M, K) beamformer, tr(G G^H) = Pt (or 0)
    phases: np.ndarray      # (L,) in [0, 2pi)
    phi_hat: np.ndarray     # (L,) unit-modulus entries e^{j phase}
    phi_true: np.ndarray    # (L,) amplitude(phase) * phi_hat
    phi_scaled: np.ndarray | None = None  # (L,) explorer-scaled entries


def decode_action(raw, cfg: SystemConfig,
                  phase_scale: np.ndarray | None = None) -> DecodedAction:
    """Split a raw action into beamformer and reflection coefficients.

    Layout: 2MK reals of Re/Im pairs for G (users in column-major order),
    then 2L reals of Re/Im pairs per RIS element. The beamformer is projected
    onto the power boundary tr(G G^H) = Pt; an all-zero beamformer slice is
    kept as silence. Phase pairs normalise to unit modulus, a zero pair
    defaulting to 1 + 0j. phase_scale optionally attaches per-element moduli
    for an externally perturbed action.
    """
    raw = np.asarray(raw, dtype=np.float64)
    m, k, l = cfg.m, cfg.k, cfg.l
    if raw.shape != (cfg.action_dim,):
        raise ValueError(
            f"action length {raw.shape} != (2MK + 2L,) = ({cfg.action_dim},)")
    g_part = raw[:2 * m * k]
    g = (g_part[0::2] + 1j * g_part[1::2]).reshape(m, k, order="F")
    power = trace_gram(g)
    if power > 0.0:
        g = g * np.sqrt(cfg.pt_watts / power)

    p_part = raw[2 * m * k:]
    pairs = p_part[0::2] + 1j * p_part[1::2]
    moduli = np.abs(pairs)
    zero = moduli == 0.0
    pairs = np.where(zero, 1.0 + 0.0j, pairs)
    moduli = np.where(zero, 1.0, moduli)
    phi_hat = pairs / moduli
    phases = np.mod(np.angle(phi_hat), 2.0 * np.pi)
    # tiny negative angles can round the modulus up to exactly 2*pi
    phases[phases >= 2.0 * np.pi] = 0.0
    phi_true = amplitude(phases, cfg) * phi_hat
    phi_scaled = None
    if phase_scale is not None:
        phase_scale = np.asarray(phase_scale, dtype=np.float64)
        if phase_scale.shape != (l,):
            raise ValueError(f"phase_scale must have shape ({l},)")
        phi_scaled = phase_scale * phi_hat
    return DecodedAction(g, phases, phi_hat, phi_true, phi_scaled)


def _row_powers(phi: np.ndarray, d_mats: np.ndarray, g: np.ndarray) -> np.ndarray:
    """||phi^T D_k G||^2 for every user k, vectorised over k."""
    rows = (phi @ d_mats) @ g
    return np.einsum("kj,kj->k", rows.real, rows.real) + \
        np.einsum("kj,kj->k", rows.imag, rows.imag)


def sum_rate(phi, d_mats, g, sigma_w2: float, log_base: float = 2.0) -> float:
    """Sum over users of log(1 + SINR_k) with
    SINR_k = ||phi^T D_k G||^2 / (sum_{j != k} ||phi^T D_j G||^2 + sigma_w2).

    One kernel serves all three objectives: true channels with amplitude-bearing
    phi, estimated channels with lossless phi, or explorer-scaled phi.
    """
    if sigma_w2 <= 0:
        raise ValueError(f"sigma_w2 must be > 0, got {sigma_w2}")
    phi = np.asarray(phi, dtype=np.complex128)
    d_mats = np.asarray(d_mats, dtype=np.complex128)
    g = np.asarray(g, dtype=np.complex128)
    powers = _row_powers(phi, d_mats, g)
    interference = powers.sum() - powers
    sinr = powers / (interference + sigma_w2)
    return float(np.log1p(sinr).sum() / math.log(log_base))


def build_state(channels: ChannelSet, prev_raw: np.ndarray,
                decoded: DecodedAction, cfg: SystemConfig) -> np.ndarray:
    """Raw (pre-whitening) state vector:

    [ per-user transmit powers (K) | per-user receive powers (K) |
      previous raw action (2MK + 2L) | Re/Im of the per-user channel
      matrices (2KLM) ]

    Channel entries and receive powers use the scenario's own knowledge:
    true channels and amplitude-bearing phi under golden, estimates and the
    lossless (or explorer-scaled) phi under mismatch.
    """
    if cfg.scenario == "golden":
        d_known = channels.cascaded
        phi_used = decoded.phi_true
    else:
        d_known = channels.estimates
        phi_used = (decoded.phi_scaled if decoded.phi_scaled is not None
                    else decoded.phi_hat)
    tx_powers = np.einsum("mk,mk->k", decoded.g.real, decoded.g.real) + \
        np.einsum("mk,mk->k", decoded.g.imag, decoded.g.imag)
    rx_powers = _row_powers(phi_used, d_known, decoded.g)
    flat = d_known.reshape(cfg.k, -1)
    chan_part = np.concatenate([flat.real, flat.imag], axis=1).ravel()
    return np.concatenate([tx_powers, rx_powers, prev_raw, chan_part])


class WhitenStats:
    """Per-dimension running standardisation (Welford, population variance).

    Statistics absorb each incoming raw vector before normalising it, so the
    first observation whitens to zero.
    """

    def __init__(self, dim: int):
        self.count = 0
        self.mean = np.zeros(dim)
        self._m2 = np.zeros(dim)

    @property
    def variance(self) -> np.ndarray:
        return self._m2 / max(self.count, 1)

    def update_and_normalize(self, raw: np.ndarray) -> np.ndarray:
        raw = np.asarray(raw, dtype=np.float64)
        if raw.shape != self.mean.shape:
            raise ValueError(
                f"dimension mismatch: {raw.shape} vs {self.mean.shape}")
        self.count += 1
        delta = raw - self.mean
        self.mean += delta / self.count
        self._m2 += delta * (raw - self.mean)
        return (raw - self.mean) / np.sqrt(self.variance + WHITEN_EPS)


@dataclass
class EnvObservation:
    state: np.ndarray       # whitened state vector
    raw_state: np.ndarray   # pre-whitening state vector
    reward: float           # scenario reward (training signal)
    true_sum_rate: float    # diagnostic rate under the true model


def _initial_action(cfg: SystemConfig) -> np.ndarray:
    """G = identity (zero-padded, power-normalised), reflections all ones."""
    g = np.zeros((cfg.m, cfg.k), dtype=np.complex128)
    for i in range(min(cfg.m, cfg.k)):
        g[i, i] = 1.0
    g *= np.sqrt(cfg.pt_watts / trace_gram(g))
    raw = np.zeros(cfg.action_dim)
    flat = g.ravel(order="F")
    raw[0:2 * cfg.m * cfg.k:2] = flat.real
    raw[1:2 * cfg.m * cfg.k:2] = flat.imag
    raw[2 * cfg.m * cfg.k::2] = 1.0
    return raw


class DownlinkEnv:
    """Continuing-task downlink environment.

    reset() draws (or adopts) one channel realization, primes the whitening
    statistics and returns the initial observation; step() scores an action.
    A single instance belongs to a single run.
    """

    def __init__(self, cfg: SystemConfig, rng: np.random.Generator,
                 channels: ChannelSet | None = None):
        self.cfg = cfg
        self._rng = rng
        self._preset_channels = channels
        self.channels: ChannelSet | None = None
        self._whiten: WhitenStats | None = None

    @property
    def state_dim(self) -> int:
        return self.cfg.state_dim

    @property
    def action_dim(self) -> int:
        return self.cfg.action_dim

    @property
    def varying_state_dims(self) -> int:
        # Channel entries are frozen per run, so only the leading power and
        # previous-action block of the state ever changes.
        return 2 * self.cfg.k + self.cfg.action_dim

    def reset(self) -> EnvObservation:
        if self._preset_channels is not None:
            self.channels = self._preset_channels
        else:
            self.channels = generate_channels(self.cfg, self._rng)
        self._whiten = WhitenStats(self.state_dim)
        return self._observe(_initial_action(self.cfg), None)

    def step(self, action, phase_scale=None) -> EnvObservation:
        """Score an executed raw action.

        phase_scale, when given, carries the per-element moduli of an
        explorer-perturbed action; the mismatch reward then uses the scaled
        reflection vector while the true-model diagnostic is unaffected.
        """
        if self.channels is None:
            raise RuntimeError("step() called before reset()")
        return self._observe(np.asarray(action, dtype=np.float64), phase_scale)

    def _observe(self, raw: np.ndarray, phase_scale) -> EnvObservation:
        cfg = self.cfg
        decoded = decode_action(raw, cfg, phase_scale)
        true_rate = sum_rate(decoded.phi_true, self.channels.cascaded,
                             decoded.g, cfg.sigma_w2, cfg.log_base)
        if cfg.scenario == "golden":
            reward = true_rate
        else:
            phi = (decoded.phi_scaled if decoded.phi_scaled is not None
                   else decoded.phi_hat)
            reward = sum_rate(phi, self.channels.estimates, decoded.g,
                              cfg.sigma_w2, cfg.log_base)
        raw_state = build_state(self.channels, raw, decoded, cfg)
        state = self._whiten.update_and_normalize(raw_state)
        return EnvObservation(state, raw_state, reward, true_rate)
