# Learning-free reference solvers on tiny instances.
#
# reference_sum_rate re-derives the objective from scratch with explicit
# Python loops over users, elements and antennas - deliberately sharing no
# code with environment.sum_rate so the two implementations can cross-check
# each other. brute_force_phases enumerates a quantised phase grid for a
# fixed beamformer; random_search provides a non-learning performance floor.

import cmath
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .environment import ChannelSet, SystemConfig, decode_action, sum_rate

__all__ = [
    "GridSpec",
    "reference_sum_rate",
    "brute_force_phases",
    "random_search",
    "matched_filter_beamformer",
]

MAX_GRID_POINTS = 10 ** 6


@dataclass
class GridSpec:
    """Exhaustive-search description: phase quantisation levels per element
    plus bounds keeping the enumeration tractable."""

    levels: int
    max_elements: int = 4

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")

    def check(self, n_elements: int) -> None:
        if n_elements > self.max_elements:
            raise ValueError(
                f"{n_elements} elements exceed the grid bound "
                f"{self.max_elements}")
        if self.levels ** n_elements > MAX_GRID_POINTS:
            raise ValueError(
                f"grid of {self.levels}^{n_elements} points exceeds "
                f"{MAX_GRID_POINTS}")


def reference_sum_rate(phi, d_mats, g, sigma_w2: float,
                       log_base: float = 2.0) -> float:
    """Loop-based re-implementation of the sum-rate objective."""
    if sigma_w2 <= 0:
        raise ValueError("sigma_w2 must be > 0")
    n_users = len(d_mats)
    n_elems = len(phi)
    n_ant = len(d_mats[0][0])
    n_cols = len(g[0])
    powers = []
    for k in range(n_users):
        acc = 0.0
        for j in range(n_cols):
            entry = 0 + 0j
            for m in range(n_ant):
                t_m = 0 + 0j
                for le in range(n_elems):
                    t_m += complex(phi[le]) * complex(d_mats[k][le][m])
                entry += t_m * complex(g[m][j])
            acc += entry.real * entry.real + entry.imag * entry.imag
        powers.append(acc)
    total = sum(powers)
    rate = 0.0
    for k in range(n_users):
        sinr = powers[k] / (total - powers[k] + sigma_w2)
        rate += math.log(1.0 + sinr) / math.log(log_base)
    return rate


def _reference_amplitude(phase: float, cfg: SystemConfig) -> float:
    return (1.0 - cfg.beta_min) * \
        ((math.sin(phase - cfg.mu) + 1.0) / 2.0) ** cfg.kappa + cfg.beta_min


def brute_force_phases(cfg: SystemConfig, channels: ChannelSet, g: np.ndarray,
                       grid: GridSpec):
    """Exhaustively maximise the true-model sum rate over quantised phases
    with the beamformer held fixed. Returns (best phases, best rate)."""
    grid.check(cfg.l)
    step = 2.0 * math.pi / grid.levels
    candidates = [i * step for i in range(grid.levels)]
    best_rate = -math.inf
    best_phases = None
    d = channels.cascaded
    for combo in itertools.product(candidates, repeat=cfg.l):
        phi = [_reference_amplitude(p, cfg) * cmath.exp(1j * p) for p in combo]
        rate = reference_sum_rate(phi, d, g, cfg.sigma_w2, cfg.log_base)
        if rate > best_rate:
            best_rate = rate
            best_phases = combo
    return np.array(best_phases), best_rate


def matched_filter_beamformer(channels: ChannelSet, phi: np.ndarray,
                              cfg: SystemConfig) -> np.ndarray:
    """Columns proportional to the conjugate effective channels phi^T D_k,
    projected onto the power budget. A sane fixed G for grid searches."""
    eff = phi @ channels.cascaded          # (K, M)
    g = eff.conj().T.astype(np.complex128)  # (M, K)
    power = float(np.vdot(g, g).real)
    if power == 0.0:
        raise ValueError("degenerate channels: zero matched filter")
    return g * np.sqrt(cfg.pt_watts / power)


def random_search(cfg: SystemConfig, channels: ChannelSet, budget: int,
                  rng: np.random.Generator):
    """Best true sum rate over `budget` uniform random actions decoded with
    the production decoder. Returns (best action, best rate)."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    best_rate = -math.inf
    best_action = None
    for _ in range(budget):
        raw = rng.uniform(-1.0, 1.0, cfg.action_dim)
        decoded = decode_action(raw, cfg)
        rate = sum_rate(decoded.phi_true, channels.cascaded, decoded.g,
                        cfg.sigma_w2, cfg.log_base)
        if rate > best_rate:
            best_rate = rate
            best_action = raw
    return best_action, best_rate
