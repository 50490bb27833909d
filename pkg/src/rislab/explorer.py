# Amplitude-space exploration: a deterministic network predicts per-element
# reflection losses beta_hat in [beta_lo, 1] from the state and rescales the
# phase part of the policy's actions, while the beamformer part is left
# alone. It is trained by gradient ascent on the critics' TD errors, pushing
# the agent toward actions whose value the critics misjudge.
#
# Two composition modes for the perturbation strength lambda:
#   blended (default): a * (1 + lam * (xi - 1)) - lam = 0 recovers the raw
#       action and the beamformer slice is untouched bit-for-bit.
#   literal: a * (lam * xi) - the raw product form; note it scales the
#       beamformer slice by lam and annihilates the action as lam -> 0.

from dataclasses import dataclass

import numpy as np

from .neural import (AdamState, FirstLayerSlice, Mlp, active_param_regions,
                     polyak_update)

__all__ = [
    "LambdaSchedule",
    "BetaExplorer",
    "ExplorerMultiplier",
    "assemble_scaling",
    "perturb",
]

MODES = ("blended", "literal")


class LambdaSchedule:
    """Linear decay lam0 * (1 - t/T), clipped at zero, advanced per step."""

    def __init__(self, lam0: float = 0.3, total_steps: int = 20000):
        if not 0.0 <= lam0 <= 1.0:
            raise ValueError(f"lam0 must lie in [0, 1], got {lam0}")
        if total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        self.lam0 = float(lam0)
        self.total_steps = int(total_steps)
        self.t = 0

    def step(self) -> float:
        lam = self.lam0 * max(0.0, 1.0 - self.t / self.total_steps)
        self.t += 1
        return lam


def assemble_scaling(beta: np.ndarray, n_prefix: int) -> np.ndarray:
    """Full scaling vector: n_prefix exact ones (beamformer slice), then each
    beta entry duplicated to cover the Re/Im pair of its element."""
    beta = np.asarray(beta, dtype=np.float64)
    pairs = np.repeat(beta, 2, axis=-1)
    ones = np.ones(beta.shape[:-1] + (n_prefix,))
    return np.concatenate([ones, pairs], axis=-1)


def _multiplier(xi: np.ndarray, lam: float, mode: str) -> np.ndarray:
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lam must lie in [0, 1], got {lam}")
    if mode == "blended":
        # 1 + lam*(xi - 1) keeps exact ones exactly 1.0 for every lam
        return 1.0 + lam * (xi - 1.0)
    if mode == "literal":
        return lam * xi
    raise ValueError(f"unknown perturbation mode {mode!r}")


def perturb(a: np.ndarray, xi: np.ndarray, lam: float,
            mode: str = "blended") -> np.ndarray:
    """Hadamard perturbation of an action by a scaling vector."""
    return np.asarray(a, dtype=np.float64) * _multiplier(
        np.asarray(xi, dtype=np.float64), lam, mode)


@dataclass
class ExplorerMultiplier:
    """Online-network multiplier with the forward cache kept for ascent."""

    values: np.ndarray   # (n, action_dim)
    beta: np.ndarray     # (n, L)
    cache: tuple
    lam: float


class BetaExplorer:
    """Explorer network, its Polyak-tracked target copy and their optimizer.

    n_varying mirrors SacAgent: when set, forwards consume only the leading
    varying state columns and optimizer passes skip the frozen rows.
    """

    def __init__(self, state_dim: int, n_prefix: int, n_elements: int,
                 hidden: int, rng: np.random.Generator, beta_lo: float,
                 mode: str = "blended", lr: float = 1e-3,
                 n_varying: int | None = None):
        if not 0.0 <= beta_lo <= 1.0:
            raise ValueError(f"beta_lo must lie in [0, 1], got {beta_lo}")
        if mode not in MODES:
            raise ValueError(f"unknown perturbation mode {mode!r}")
        self.state_dim = state_dim
        self.n_prefix = n_prefix
        self.n_elements = n_elements
        self.beta_lo = float(beta_lo)
        self.mode = mode
        self.net = Mlp((state_dim, hidden, hidden, n_elements), "tanh", rng)
        self.target_net = self.net.copy()
        self.opt = AdamState(self.net.n_params, lr)
        self.n_varying = n_varying
        self._regions = None
        self._sl_net = self._sl_target = None
        if n_varying is not None:
            idx = np.arange(n_varying)
            self._regions = active_param_regions(self.net, idx)
            self._sl_net = FirstLayerSlice(self.net, idx)
            self._sl_target = FirstLayerSlice(self.target_net, idx)

    def refresh_slices(self) -> None:
        if self.n_varying is not None:
            self._sl_net.refresh(self.net)
            self._sl_target.refresh(self.target_net)

    def _cols(self, s2d: np.ndarray) -> np.ndarray:
        return s2d if self.n_varying is None else s2d[:, :self.n_varying]

    def _beta_from_raw(self, x: np.ndarray) -> np.ndarray:
        return self.beta_lo + (1.0 - self.beta_lo) * (x + 1.0) / 2.0

    def predict_beta(self, s, use_target: bool = False) -> np.ndarray:
        """Per-element amplitude estimates in [beta_lo, 1] (dense input)."""
        net = self.target_net if use_target else self.net
        return self._beta_from_raw(net.forward(s))

    def scaling_vector(self, s, use_target: bool = False) -> np.ndarray:
        """Assembled output: exact ones over the beamformer slice, duplicated
        beta pairs over the reflection slice."""
        return assemble_scaling(self.predict_beta(s, use_target), self.n_prefix)

    def multiplier_batch(self, s2d: np.ndarray, lam: float,
                         use_target: bool = False) -> np.ndarray:
        net = self.target_net if use_target else self.net
        sl = self._sl_target if use_target else self._sl_net
        x = net.forward_cached(self._cols(s2d), sl)[0]
        beta = self._beta_from_raw(x)
        return _multiplier(assemble_scaling(beta, self.n_prefix),
                           lam, self.mode)

    def online_multiplier_cached(self, s2d: np.ndarray,
                                 lam: float) -> ExplorerMultiplier:
        """Multiplier from the online net, retaining the forward cache so a
        later ascent step can backpropagate through the same evaluation."""
        x, cache = self.net.forward_cached(self._cols(s2d), self._sl_net)
        beta = self._beta_from_raw(x)
        values = _multiplier(assemble_scaling(beta, self.n_prefix),
                             lam, self.mode)
        return ExplorerMultiplier(values, beta, cache, float(lam))

    def act_scales(self, s: np.ndarray, lam: float):
        """(full action multiplier, per-element phase moduli) for one state."""
        mult = self.multiplier_batch(
            np.asarray(s, dtype=np.float64)[None, :], lam)[0]
        phase_scale = mult[self.n_prefix::2]
        return mult, phase_scale

    def td_error_grads(self, agent, batch, y: np.ndarray, lam: float,
                       mult: ExplorerMultiplier | None = None):
        """Summed squared TD errors of both critics at (s, a * multiplier)
        with y held constant, plus their gradient w.r.t. the net parameters
        (reaching the net through the critics' action inputs)."""
        n = batch.s.shape[0]
        if mult is None:
            mult = self.online_multiplier_cached(batch.s, lam)
        lam = mult.lam
        a_pert = batch.a * mult.values
        q1, q2, ctx = agent.critic_pair_eval(batch.s, a_pert)
        d1, d2 = q1 - y, q2 - y
        loss = float(np.mean(d1 * d1) + np.mean(d2 * d2))
        d_action = agent.critic_pair_action_grad(
            ctx, (d1 * (2.0 / n))[:, None], (d2 * (2.0 / n))[:, None])
        d_pairs = d_action[:, self.n_prefix:] * batch.a[:, self.n_prefix:]
        d_beta = d_pairs.reshape(n, self.n_elements, 2).sum(axis=2) * lam
        up_x = d_beta * ((1.0 - self.beta_lo) / 2.0)
        flat, _ = self.net.backward_cached(mult.cache, up_x,
                                           need_input_grad=False,
                                           reuse_grad_buffer=True)
        return loss, flat

    def ascend_td_error(self, agent, batch, y: np.ndarray, lam: float,
                        mult: ExplorerMultiplier | None = None) -> float:
        """One Adam ascent step on the TD-error objective."""
        loss, flat = self.td_error_grads(agent, batch, y, lam, mult)
        self.opt.step(self.net.params, flat, direction="ascend",
                      regions=self._regions)
        if self.n_varying is not None:
            self._sl_net.refresh(self.net)
        return loss

    def polyak(self, tau: float) -> None:
        polyak_update(self.target_net, self.net, tau, self._regions)
        if self.n_varying is not None:
            self._sl_target.refresh(self.target_net)
