"""RIS-aided MU-MISO downlink simulator and learning laboratory.

A complex-valued multiuser downlink environment with a phase-dependent
reflection amplitude model and imperfect CSI, a Soft Actor-Critic agent
adapted to the continuing-task setting, an amplitude-space explorer that
recovers performance under model mismatch, reference oracles, and a
multi-seed experiment harness.
"""

__version__ = "0.1.0"

from . import environment, explorer, neural, numerics, oracle, runner, sac

__all__ = [
    "environment",
    "explorer",
    "neural",
    "numerics",
    "oracle",
    "runner",
    "sac",
    "__version__",
]
