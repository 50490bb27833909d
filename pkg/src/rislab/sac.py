# Soft Actor-Critic for the continuing (non-episodic) downlink task.
#
# Differences from textbook SAC, all driven by the continuing-task setting:
# gamma = 1 with the learning signal r - r_bar (running average of all
# rewards collected so far), automatic entropy-temperature tuning against a
# -action_dim target, and optional coupling to an amplitude explorer that
# perturbs the reflection part of every executed action (see explorer.py).
#
# Updates run once per environment step on uniform mini-batches as soon as
# the replay buffer holds one batch. Within an update the ordering is
# critics -> actor -> explorer -> temperature -> target tracking, each
# consuming the networks already updated before it.
#
# When built with n_varying (the count of state dimensions that ever change;
# the rest are frozen-channel entries that whiten to exactly zero), all
# network evaluations drop the zero columns and optimizer passes skip the
# parameters those columns feed - numerically equivalent, several times
# faster. Leaving n_varying unset keeps every path dense.

import math
from dataclasses import dataclass

import numpy as np

from .neural import (AdamState, FirstLayerSlice, Mlp, active_param_regions,
                     polyak_update)

__all__ = [
    "AgentHyperParams",
    "Batch",
    "ReplayBuffer",
    "RewardTracker",
    "GaussianPolicy",
    "PolicySample",
    "EntropyTuner",
    "SacAgent",
    "TrainRecord",
    "train_loop",
]

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class AgentHyperParams:
    hidden: int = 256
    lr: float = 1e-3
    tau: float = 1e-3
    batch_size: int = 16
    buffer_capacity: int = 20000
    init_alpha: float = 0.2
    tuner_lr: float = 1e-2
    log_std_bounds: tuple = (-20.0, 2.0)
    log_std_offset: float = -2.5
    squash_eps: float = 1e-6


@dataclass
class Batch:
    s: np.ndarray        # (N, state_dim) whitened states
    a: np.ndarray        # (N, action_dim) raw policy actions
    a_exec: np.ndarray   # (N, action_dim) executed (possibly perturbed)
    r: np.ndarray        # (N,) raw instantaneous rewards
    s2: np.ndarray       # (N, state_dim) next states


class ReplayBuffer:
    """Fixed-capacity ring buffer storing both the raw and executed action;
    sampling is uniform with replacement over the stored items."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        self.capacity = capacity
        self._s = np.empty((capacity, state_dim))
        self._a = np.empty((capacity, action_dim))
        self._a_exec = np.empty((capacity, action_dim))
        self._r = np.empty(capacity)
        self._s2 = np.empty((capacity, state_dim))
        self._pos = 0
        self.size = 0

    def add(self, s, a, a_exec, r, s2) -> None:
        i = self._pos
        self._s[i] = s
        self._a[i] = a
        self._a_exec[i] = a_exec
        self._r[i] = r
        self._s2[i] = s2
        self._pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, n: int) -> Batch:
        idx = rng.integers(0, self.size, size=n)
        return Batch(self._s[idx], self._a[idx], self._a_exec[idx],
                     self._r[idx], self._s2[idx])


class RewardTracker:
    """Running average of collected rewards for the gamma = 1 adjustment."""

    def __init__(self):
        self.count = 0
        self.total = 0.0

    @property
    def mean(self) -> float:
        return self.total / self.count if self.count else 0.0

    def adjust(self, r: float) -> float:
        """r minus the mean of rewards recorded strictly before it, then
        record r."""
        adjusted = r - self.mean
        self.count += 1
        self.total += r
        return adjusted


@dataclass
class PolicySample:
    """One reparameterised draw with everything backward needs."""

    actions: np.ndarray    # tanh-squashed, strictly inside (-1, 1)
    log_probs: np.ndarray  # (n,)
    mean: np.ndarray       # tanh of the mean head
    spread: np.ndarray     # sigma * eps, i.e. pre-squash sample minus mean
    gate: np.ndarray       # log-std clip pass-through mask
    trunk_cache: tuple

    def rows(self, sl: slice) -> "PolicySample":
        x2, hs, y, first_slice = self.trunk_cache
        cache = (x2[sl], [h[sl] for h in hs], y[sl], first_slice)
        return PolicySample(self.actions[sl], self.log_probs[sl],
                            self.mean[sl], self.spread[sl], self.gate[sl],
                            cache)


class GaussianPolicy:
    """tanh-squashed Gaussian policy.

    A shared trunk emits two heads per action dimension: the mean head is
    tanh-activated, the log-std head stays linear, shifted by a fixed
    negative offset and clipped to the configured bounds (tanh there would
    fight the clip range). The offset starts exploration concentrated; with
    a near-flat initial value landscape, wide per-dimension noise never
    produces a learnable signal and the policy cannot recover. Log-densities
    include the tanh change-of-variables term with the configured epsilon.
    """

    def __init__(self, state_dim: int, action_dim: int, hidden: int,
                 rng: np.random.Generator,
                 log_std_bounds=(-20.0, 2.0), squash_eps: float = 1e-6,
                 log_std_offset: float = -2.5):
        self.action_dim = action_dim
        self.log_std_bounds = (float(log_std_bounds[0]), float(log_std_bounds[1]))
        self.squash_eps = float(squash_eps)
        self.log_std_offset = float(log_std_offset)
        self.net = Mlp((state_dim, hidden, hidden, 2 * action_dim), "linear", rng)

    def sample_batch(self, x2: np.ndarray, rng: np.random.Generator,
                     first_slice: FirstLayerSlice | None = None) -> PolicySample:
        d = self.action_dim
        lo, hi = self.log_std_bounds
        out, cache = self.net.forward_cached(x2, first_slice)
        mean = np.tanh(out[:, :d])
        ls_raw = out[:, d:] + self.log_std_offset
        gate = (ls_raw > lo) & (ls_raw < hi)
        ls = np.clip(ls_raw, lo, hi)
        eps0 = rng.standard_normal((x2.shape[0], d))
        spread = np.exp(ls) * eps0
        actions = np.tanh(mean + spread)
        sq = 1.0 - actions * actions
        log_probs = (-0.5 * eps0 * eps0 - ls).sum(axis=1) \
            - 0.5 * d * _LOG_2PI - np.log(sq + self.squash_eps).sum(axis=1)
        return PolicySample(actions, log_probs, mean, spread, gate, cache)

    def act(self, s: np.ndarray, rng: np.random.Generator,
            first_slice: FirstLayerSlice | None = None):
        samp = self.sample_batch(np.asarray(s, dtype=np.float64)[None, :],
                                 rng, first_slice)
        return samp.actions[0], float(samp.log_probs[0])

    def param_grads(self, samp: PolicySample, up_actions: np.ndarray,
                    up_log_probs: np.ndarray,
                    reuse_grad_buffer: bool = False) -> np.ndarray:
        """Flat gradient of sum(up_actions * a + up_log_probs * log pi) over
        the sample, treating the Gaussian noise as fixed (reparameterised)."""
        a = samp.actions
        sq = 1.0 - a * a
        c = 2.0 * a * sq / (sq + self.squash_eps)
        w = up_log_probs[:, None]
        g_mean = (w * c + up_actions * sq) * (1.0 - samp.mean * samp.mean)
        g_ls = (w * (c * samp.spread - 1.0) + up_actions * sq * samp.spread)
        g_ls *= samp.gate
        upstream = np.concatenate([g_mean, g_ls], axis=1)
        flat, _ = self.net.backward_cached(samp.trunk_cache, upstream,
                                           need_input_grad=False,
                                           reuse_grad_buffer=reuse_grad_buffer)
        return flat


class EntropyTuner:
    """Gradient-based temperature tuning toward a -action_dim entropy target.

    alpha is trained through log alpha, so it stays positive; the objective
    is J(alpha) = mean(-alpha * (log pi + target_entropy)).
    """

    def __init__(self, action_dim: int, init_alpha: float = 0.2,
                 lr: float = 1e-3):
        self.target_entropy = -float(action_dim)
        self.log_alpha = np.array([math.log(init_alpha)])
        self.opt = AdamState(1, lr)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    def update(self, log_probs: np.ndarray) -> float:
        grad = -self.alpha * float(np.mean(log_probs) + self.target_entropy)
        self.opt.step(self.log_alpha, np.array([grad]))
        return self.alpha


class SacAgent:
    """Twin-critic SAC agent with decomposed update stages.

    compute_targets / update_critics / update_actor / update_alpha mirror the
    algorithm's per-step stages and are individually callable; update() is
    the per-environment-step composition (one stacked policy forward serves
    both the bootstrap action a' and the fresh actor action).
    """

    def __init__(self, state_dim: int, action_dim: int, hp: AgentHyperParams,
                 init_rngs, act_rng: np.random.Generator,
                 update_rng: np.random.Generator,
                 n_varying: int | None = None):
        rng_actor, rng_c1, rng_c2 = init_rngs
        self.hp = hp
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.policy = GaussianPolicy(state_dim, action_dim, hp.hidden,
                                     rng_actor, hp.log_std_bounds,
                                     hp.squash_eps, hp.log_std_offset)
        critic_sizes = (state_dim + action_dim, hp.hidden, hp.hidden, 1)
        self.critic1 = Mlp(critic_sizes, "linear", rng_c1)
        self.critic2 = Mlp(critic_sizes, "linear", rng_c2)
        self.target1 = self.critic1.copy()
        self.target2 = self.critic2.copy()
        self.opt_policy = AdamState(self.policy.net.n_params, hp.lr)
        self.opt_c1 = AdamState(self.critic1.n_params, hp.lr)
        self.opt_c2 = AdamState(self.critic2.n_params, hp.lr)
        self.tuner = EntropyTuner(action_dim, hp.init_alpha, hp.tuner_lr)
        self.buffer = ReplayBuffer(hp.buffer_capacity, state_dim, action_dim)
        self.tracker = RewardTracker()
        self.act_rng = act_rng
        self.update_rng = update_rng
        self.n_varying = n_varying
        self._policy_regions = self._critic_regions = None
        self._sl_policy = self._sl_c1 = self._sl_c2 = None
        self._sl_t1 = self._sl_t2 = None
        if n_varying is not None:
            state_idx = np.arange(n_varying)
            critic_idx = np.concatenate(
                [state_idx, np.arange(state_dim, state_dim + action_dim)])
            self._policy_regions = active_param_regions(self.policy.net,
                                                        state_idx)
            self._critic_regions = active_param_regions(self.critic1,
                                                        critic_idx)
            self._sl_policy = FirstLayerSlice(self.policy.net, state_idx)
            self._sl_c1 = FirstLayerSlice(self.critic1, critic_idx)
            self._sl_c2 = FirstLayerSlice(self.critic2, critic_idx)
            self._sl_t1 = FirstLayerSlice(self.target1, critic_idx)
            self._sl_t2 = FirstLayerSlice(self.target2, critic_idx)

    # -- sliced-input helpers ------------------------------------------------

    def _state_cols(self, s2d: np.ndarray) -> np.ndarray:
        return s2d if self.n_varying is None else s2d[:, :self.n_varying]

    def _critic_input(self, s2d: np.ndarray, a2d: np.ndarray) -> np.ndarray:
        return np.concatenate([self._state_cols(s2d), a2d], axis=1)

    def refresh_slices(self, explorer=None) -> None:
        """Re-snapshot sliced first-layer weights after any parameter edit."""
        if self.n_varying is None:
            return
        self._sl_policy.refresh(self.policy.net)
        self._refresh_critic_slices()
        self._sl_t1.refresh(self.target1)
        self._sl_t2.refresh(self.target2)
        if explorer is not None:
            explorer.refresh_slices()

    def _refresh_critic_slices(self) -> None:
        if self.n_varying is not None:
            self._sl_c1.refresh(self.critic1)
            self._sl_c2.refresh(self.critic2)

    def act(self, s: np.ndarray):
        s = np.asarray(s, dtype=np.float64)
        if self.n_varying is not None:
            s = s[:self.n_varying]
        return self.policy.act(s, self.act_rng, self._sl_policy)

    # -- update stages -------------------------------------------------------

    def compute_targets(self, batch: Batch, lam: float = 0.0, explorer=None,
                        next_sample: PolicySample | None = None) -> np.ndarray:
        """Bootstrap targets y = r_adj + min_i Q'_i(s', a'_in) - alpha log pi(a'|s')
        with gamma = 1. The target explorer, when present, rescales a' using
        the current-state batch."""
        if next_sample is None:
            next_sample = self.policy.sample_batch(
                self._state_cols(batch.s2), self.update_rng, self._sl_policy)
        r_adj = batch.r - self.tracker.mean
        a_next = next_sample.actions
        if explorer is not None:
            a_next = a_next * explorer.multiplier_batch(batch.s, lam,
                                                        use_target=True)
        cat = self._critic_input(batch.s2, a_next)
        q1 = self.target1.forward_cached(cat, self._sl_t1)[0][:, 0]
        q2 = self.target2.forward_cached(cat, self._sl_t2)[0][:, 0]
        alpha = self.tuner.alpha
        return r_adj + np.minimum(q1, q2) - alpha * next_sample.log_probs

    def update_critics(self, batch: Batch, y: np.ndarray) -> dict:
        """One Adam descent step per critic on the mean squared TD error at
        (s, a_exec)."""
        n = batch.s.shape[0]
        cat = self._critic_input(batch.s, batch.a_exec)
        losses = {}
        for name, critic, opt, sl in (
                ("critic1_loss", self.critic1, self.opt_c1, self._sl_c1),
                ("critic2_loss", self.critic2, self.opt_c2, self._sl_c2)):
            out, cache = critic.forward_cached(cat, sl)
            q = out[:, 0]
            delta = q - y
            losses[name] = float(np.mean(delta * delta))
            upstream = (delta * (2.0 / n))[:, None]
            flat, _ = critic.backward_cached(cache, upstream,
                                             need_input_grad=False,
                                             reuse_grad_buffer=True)
            opt.step(critic.params, flat, regions=self._critic_regions)
        self._refresh_critic_slices()
        return losses

    def critic_pair_eval(self, s2d: np.ndarray, a_in: np.ndarray):
        """Q-values of both online critics at (s, a_in) plus a context for
        critic_pair_action_grad."""
        cat = self._critic_input(s2d, a_in)
        out1, cache1 = self.critic1.forward_cached(cat, self._sl_c1)
        out2, cache2 = self.critic2.forward_cached(cat, self._sl_c2)
        return out1[:, 0], out2[:, 0], (cache1, cache2)

    def critic_pair_action_grad(self, ctx, up1: np.ndarray,
                                up2: np.ndarray) -> np.ndarray:
        """d<up, Q>/d(action input), summed over the two critics."""
        cache1, cache2 = ctx
        _, dx1 = self.critic1.backward_cached(cache1, up1,
                                              need_param_grads=False)
        _, dx2 = self.critic2.backward_cached(cache2, up2,
                                              need_param_grads=False)
        n_state = self.state_dim if self.n_varying is None else self.n_varying
        return dx1[:, n_state:] + dx2[:, n_state:]

    def update_actor(self, batch: Batch, lam: float = 0.0, explorer=None,
                     fresh_sample: PolicySample | None = None) -> dict:
        """Adam descent on J(psi) = mean(alpha log pi - min_j Q_j(s, a_in)),
        chaining the critics' action gradients through the squashed sample
        (and through the online explorer's scaling when present)."""
        n = batch.s.shape[0]
        if fresh_sample is None:
            fresh_sample = self.policy.sample_batch(
                self._state_cols(batch.s), self.update_rng, self._sl_policy)
        mult = None
        if explorer is not None:
            mult = explorer.online_multiplier_cached(batch.s, lam)
        a_in = fresh_sample.actions if mult is None \
            else fresh_sample.actions * mult.values
        q1, q2, ctx = self.critic_pair_eval(batch.s, a_in)
        alpha = self.tuner.alpha
        loss = float(np.mean(alpha * fresh_sample.log_probs
                             - np.minimum(q1, q2)))
        pick1 = q1 <= q2
        up1 = np.where(pick1, -1.0 / n, 0.0)[:, None]
        up2 = np.where(pick1, 0.0, -1.0 / n)[:, None]
        da = self.critic_pair_action_grad(ctx, up1, up2)
        if mult is not None:
            da = da * mult.values
        up_logp = np.full(n, alpha / n)
        flat = self.policy.param_grads(fresh_sample, da, up_logp,
                                       reuse_grad_buffer=True)
        self.opt_policy.step(self.policy.net.params, flat,
                             regions=self._policy_regions)
        if self.n_varying is not None:
            self._sl_policy.refresh(self.policy.net)
        return {"actor_loss": loss, "log_probs": fresh_sample.log_probs,
                "explorer_mult": mult}

    def update_alpha(self, log_probs: np.ndarray) -> float:
        return self.tuner.update(log_probs)

    def polyak_targets(self, explorer=None) -> None:
        polyak_update(self.target1, self.critic1, self.hp.tau,
                      self._critic_regions)
        polyak_update(self.target2, self.critic2, self.hp.tau,
                      self._critic_regions)
        if self.n_varying is not None:
            self._sl_t1.refresh(self.target1)
            self._sl_t2.refresh(self.target2)
        if explorer is not None:
            explorer.polyak(self.hp.tau)

    def update(self, lam: float = 0.0, explorer=None) -> dict | None:
        """One full update step; skipped until the buffer holds a batch."""
        n = self.hp.batch_size
        if self.buffer.size < n:
            return None
        batch = self.buffer.sample(self.update_rng, n)
        # one policy forward covers both s' (bootstrap) and s (actor loss)
        stacked_in = np.concatenate([self._state_cols(batch.s2),
                                     self._state_cols(batch.s)], axis=0)
        stacked = self.policy.sample_batch(stacked_in, self.update_rng,
                                           self._sl_policy)
        y = self.compute_targets(batch, lam, explorer,
                                 next_sample=stacked.rows(slice(0, n)))
        stats = self.update_critics(batch, y)
        actor_stats = self.update_actor(batch, lam, explorer,
                                        fresh_sample=stacked.rows(slice(n, 2 * n)))
        stats["actor_loss"] = actor_stats["actor_loss"]
        if explorer is not None:
            stats["explorer_loss"] = explorer.ascend_td_error(
                self, batch, y, lam, actor_stats["explorer_mult"])
        stats["alpha"] = self.update_alpha(actor_stats["log_probs"])
        self.polyak_targets(explorer)
        return stats


@dataclass
class TrainRecord:
    """Per-step learning trace of one run."""

    true_sum_rate: np.ndarray   # diagnostic rate under the true model
    training_reward: np.ndarray  # scenario reward the agent trained on
    lam: np.ndarray             # perturbation strength used at each step
    alpha: np.ndarray           # entropy temperature after each step

    def __len__(self) -> int:
        return self.true_sum_rate.size


def train_loop(env, agent: SacAgent, steps: int, explorer=None,
               schedule=None) -> TrainRecord:
    """Run the continuing task: act, (perturb), execute, store, update."""
    if explorer is not None and schedule is None:
        raise ValueError("an explorer requires a lambda schedule")
    obs = env.reset()
    s = obs.state
    true_rate = np.empty(steps)
    training_reward = np.empty(steps)
    lam_trace = np.empty(steps)
    alpha_trace = np.empty(steps)
    for t in range(steps):
        a, _ = agent.act(s)
        if explorer is not None:
            lam = schedule.step()
            mult, phase_scale = explorer.act_scales(s, lam)
            a_exec = a * mult
            obs = env.step(a_exec, phase_scale)
        else:
            lam = 0.0
            a_exec = a
            obs = env.step(a_exec)
        agent.tracker.adjust(obs.reward)
        agent.buffer.add(s, a, a_exec, obs.reward, obs.state)
        agent.update(lam, explorer)
        true_rate[t] = obs.true_sum_rate
        training_reward[t] = obs.reward
        lam_trace[t] = lam
        alpha_trace[t] = agent.tuner.alpha
        s = obs.state
    return TrainRecord(true_rate, training_reward, lam_trace, alpha_trace)
