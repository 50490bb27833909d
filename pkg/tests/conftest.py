import numpy as np
import pytest

from rislab.environment import SystemConfig, DownlinkEnv
from rislab.explorer import BetaExplorer, LambdaSchedule
from rislab.numerics import make_rng, spawn_rngs
from rislab.sac import AgentHyperParams, SacAgent


@pytest.fixture
def rng():
    return make_rng(1234)


def small_config(scenario="mismatch", **overrides):
    defaults = dict(k=2, m=2, l=4, pt_dbm=30.0, scenario=scenario)
    defaults.update(overrides)
    return SystemConfig(**defaults)


def small_hp(**overrides):
    defaults = dict(hidden=32, batch_size=8, buffer_capacity=512)
    defaults.update(overrides)
    return AgentHyperParams(**defaults)


def build_run(seed, cfg=None, hp=None, with_explorer=False, lam0=0.3,
              steps=200, beta_lo=None, mode="blended", n_varying=None):
    """Wire env + agent (+ explorer) exactly like the runner does, on small
    sizes unless told otherwise."""
    cfg = cfg or small_config()
    hp = hp or small_hp()
    rngs = spawn_rngs(seed, 7)
    env = DownlinkEnv(cfg, rngs[0])
    agent = SacAgent(cfg.state_dim, cfg.action_dim, hp,
                     (rngs[1], rngs[2], rngs[3]), rngs[5], rngs[6],
                     n_varying=n_varying)
    explorer = schedule = None
    if with_explorer:
        explorer = BetaExplorer(cfg.state_dim, 2 * cfg.m * cfg.k, cfg.l,
                                hp.hidden, rngs[4],
                                cfg.beta_min if beta_lo is None else beta_lo,
                                mode, hp.lr, n_varying=n_varying)
        schedule = LambdaSchedule(lam0, steps)
    return env, agent, explorer, schedule


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-based relative disagreement between two gradient arrays."""
    num = np.linalg.norm(analytic - numeric)
    den = np.linalg.norm(analytic) + np.linalg.norm(numeric) + 1e-12
    return num / den


def central_diff(f, params: np.ndarray, coords, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar f() w.r.t. params[coords],
    mutating params in place and restoring them."""
    out = np.empty(len(coords))
    for j, i in enumerate(coords):
        orig = params[i]
        params[i] = orig + h
        fp = f()
        params[i] = orig - h
        fm = f()
        params[i] = orig
        out[j] = (fp - fm) / (2.0 * h)
    return out
