# Minimal feed-forward engine: ReLU MLPs with reverse-mode gradients w.r.t.
# parameters and inputs, Adam with bias correction, Xavier-uniform init and
# Polyak target tracking.
#
# Parameters live in one flat float64 vector per network; weight and bias
# arrays are reshaped views into it, which keeps optimizer and target-update
# passes to a handful of contiguous kernels. Elementwise update loops are
# compiled with numba because they are memory-bound and dominate the step
# time otherwise.
#
# Training states here are mostly frozen-channel entries that whiten to
# exactly zero, so the hot path can restrict first-layer work to the
# varying input columns (FirstLayerSlice) and optimizer passes to the
# parameter regions those columns touch (active_param_regions). Zero input
# columns receive exactly zero first-layer gradients, so the restriction
# reproduces the dense computation.

from dataclasses import dataclass

import numba
import numpy as np

__all__ = [
    "Mlp",
    "GradientBundle",
    "AdamState",
    "FirstLayerSlice",
    "active_param_regions",
    "xavier_init",
    "adam_step",
    "polyak_update",
    "save_mlp",
    "load_mlp",
]

_OUTPUT_ACTIVATIONS = ("linear", "tanh")
CHECKPOINT_VERSION = 1


def xavier_init(shape, rng: np.random.Generator) -> np.ndarray:
    """Uniform weights on [-b, b] with b = sqrt(6 / (fan_in + fan_out))."""
    fan_in, fan_out = shape
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError(f"weight dimensions must be positive, got {shape}")
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class GradientBundle:
    """Gradients mirroring an Mlp: flat vector plus per-layer views and the
    gradient w.r.t. the network input."""

    flat: np.ndarray
    weights: list
    biases: list
    wrt_input: np.ndarray


def _contiguous_runs(idx: np.ndarray) -> list:
    """Sorted unique indices -> [(start, stop), ...] covering them."""
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[0], breaks + 1])
    stops = np.concatenate([breaks, [idx.size - 1]])
    return [(int(idx[a]), int(idx[b]) + 1) for a, b in zip(starts, stops)]


class FirstLayerSlice:
    """Snapshot of the first-layer weight rows for a fixed set of active
    input columns.

    The caller guarantees that the excluded columns are always zero, feeds
    forward/backward the sliced input, and refreshes the snapshot after any
    parameter change.
    """

    def __init__(self, net: "Mlp", active_idx):
        idx = np.unique(np.asarray(active_idx, dtype=np.int64))
        if idx.size == 0 or idx[0] < 0 or idx[-1] >= net.sizes[0]:
            raise ValueError("active column indices outside the input layer")
        self.idx = idx
        self.runs = _contiguous_runs(idx)
        self.w1 = np.empty((idx.size, net.sizes[1]))
        self.refresh(net)

    def refresh(self, net: "Mlp") -> None:
        w0 = net.weights[0]
        off = 0
        for start, stop in self.runs:
            n = stop - start
            self.w1[off:off + n] = w0[start:stop]
            off += n


class Mlp:
    """Fully-connected net: ReLU hidden layers, linear or tanh output head.

    sizes = (d_in, hidden..., d_out); a 2-tuple gives the single-layer
    degenerate case. Weights are stored (fan_in, fan_out) so activations
    propagate as x @ W + b.
    """

    def __init__(self, sizes, output_activation="linear",
                 rng: np.random.Generator | None = None):
        sizes = tuple(int(s) for s in sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ValueError(f"invalid layer sizes {sizes}")
        if output_activation not in _OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {output_activation!r}")
        self.sizes = sizes
        self.output_activation = output_activation
        self.params = np.zeros(
            sum(i * o + o for i, o in zip(sizes[:-1], sizes[1:])))
        self.weights, self.biases = self._views(self.params)
        self._grad_flat = None
        if rng is not None:
            for w in self.weights:
                w[...] = xavier_init(w.shape, rng)
            # biases stay at the constant init (0)

    def _views(self, flat: np.ndarray):
        weights, biases, off = [], [], 0
        for d_in, d_out in zip(self.sizes[:-1], self.sizes[1:]):
            weights.append(flat[off:off + d_in * d_out].reshape(d_in, d_out))
            off += d_in * d_out
            biases.append(flat[off:off + d_out])
            off += d_out
        return weights, biases

    @property
    def n_params(self) -> int:
        return self.params.size

    def copy(self) -> "Mlp":
        clone = Mlp(self.sizes, self.output_activation)
        clone.params[...] = self.params
        return clone

    # -- forward / backward ------------------------------------------------

    def _check_input(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        x2 = x[None, :] if single else x
        if x2.ndim != 2 or x2.shape[1] != self.sizes[0]:
            raise ValueError(
                f"input shape {x.shape} incompatible with d_in={self.sizes[0]}")
        return x2, single

    def forward(self, x) -> np.ndarray:
        x2, single = self._check_input(x)
        y = self.forward_cached(x2)[0]
        return y[0] if single else y

    def forward_cached(self, x2: np.ndarray,
                       first_slice: FirstLayerSlice | None = None):
        """Batched forward returning (output, cache) for backward_cached.

        With first_slice, x2 holds only the active input columns (in index
        order) and the first layer runs on the sliced weight snapshot.
        """
        hs = []
        w0 = self.weights[0] if first_slice is None else first_slice.w1
        h = x2
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ (w0 if i == 0 else w)
            z += b
            if i < last:
                np.maximum(z, 0.0, out=z)
                hs.append(z)
                h = z
            else:
                if self.output_activation == "tanh":
                    np.tanh(z, out=z)
                y = z
        return y, (x2, hs, y, first_slice)

    def backward(self, x, upstream) -> GradientBundle:
        """Gradients of <upstream, forward(x)> w.r.t. parameters and x."""
        x2, single = self._check_input(x)
        up = np.asarray(upstream, dtype=np.float64)
        up2 = up[None, :] if up.ndim == 1 else up
        if up2.shape != (x2.shape[0], self.sizes[-1]):
            raise ValueError(
                f"upstream shape {up.shape} incompatible with output "
                f"size {self.sizes[-1]} and batch {x2.shape[0]}")
        _, cache = self.forward_cached(x2)
        flat, dx = self.backward_cached(cache, up2)
        weights, biases = self._views(flat)
        if single:
            dx = dx[0]
        return GradientBundle(flat, weights, biases, dx)

    def _grad_buffer(self, reuse: bool) -> np.ndarray:
        if not reuse:
            return np.zeros_like(self.params)
        if self._grad_flat is None:
            self._grad_flat = np.zeros_like(self.params)
        return self._grad_flat

    def backward_cached(self, cache, upstream: np.ndarray,
                        need_param_grads: bool = True,
                        need_input_grad: bool = True,
                        reuse_grad_buffer: bool = False):
        """Reverse pass from a forward_cached cache.

        Returns (flat_param_grads | None, input_grad | None). upstream may be
        freely scaled by the caller (e.g. 1/N for batch means). With
        reuse_grad_buffer the returned flat vector is a per-net scratch that
        stays valid only until the next backward on this net. If the cache
        came from a sliced forward, the input gradient is returned in the
        sliced column space and only the active first-layer rows are written.
        """
        x2, hs, y, first_slice = cache
        g = upstream
        if self.output_activation == "tanh":
            g = g * (1.0 - y * y)
        flat = self._grad_buffer(reuse_grad_buffer) if need_param_grads else None
        gw, gb = self._views(flat) if need_param_grads else (None, None)
        for i in range(len(self.weights) - 1, -1, -1):
            if need_param_grads:
                h_in = x2 if i == 0 else hs[i - 1]
                if i == 0 and first_slice is not None:
                    off = 0
                    for start, stop in first_slice.runs:
                        n = stop - start
                        np.matmul(h_in[:, off:off + n].T, g,
                                  out=gw[0][start:stop])
                        off += n
                else:
                    np.matmul(h_in.T, g, out=gw[i])
                np.sum(g, axis=0, out=gb[i])
            if i > 0:
                g = g @ self.weights[i].T
                g *= hs[i - 1] > 0.0
            elif need_input_grad:
                w0 = self.weights[0] if first_slice is None else first_slice.w1
                g = g @ w0.T
        dx = g if need_input_grad else None
        return flat, dx


def active_param_regions(net: Mlp, active_idx) -> list:
    """Flat (start, stop) regions covering the parameters a restricted input
    can touch: the first-layer rows of the active columns plus everything
    after the first layer. Regions for optimizer/Polyak passes."""
    idx = np.unique(np.asarray(active_idx, dtype=np.int64))
    d_out = net.sizes[1]
    regions = [(start * d_out, stop * d_out)
               for start, stop in _contiguous_runs(idx)]
    regions.append((net.sizes[0] * d_out, net.n_params))
    return regions


class AdamState:
    """Adam with bias correction over one flat parameter vector.

    Defaults follow the standard published constants (0.9 / 0.999 / 1e-8).
    `ascend` negates the incoming gradient, so ascend(g) == descend(-g)
    bitwise. Non-finite gradients reject the update. Optional regions
    restrict the pass to parameter ranges whose gradients can be nonzero.
    """

    def __init__(self, n_params: int, lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self._neg = np.empty(n_params)

    def step(self, params: np.ndarray, grad: np.ndarray,
             direction: str = "descend", regions: list | None = None) -> None:
        if direction not in ("descend", "ascend"):
            raise ValueError(f"unknown direction {direction!r}")
        if params.shape != self.m.shape or grad.shape != self.m.shape:
            raise ValueError("parameter/gradient shape mismatch")
        if regions is None:
            regions = ((0, params.size),)
        # g @ g is a single fused pass; any NaN/Inf entry poisons the dot
        check = sum(grad[a:b] @ grad[a:b] for a, b in regions)
        if not np.isfinite(check):
            raise FloatingPointError("non-finite gradient; update rejected")
        if direction == "ascend":
            for a, b in regions:
                np.negative(grad[a:b], out=self._neg[a:b])
            grad = self._neg
        self.t += 1
        bc2_sqrt = np.sqrt(1.0 - self.beta2 ** self.t)
        step_size = self.lr * bc2_sqrt / (1.0 - self.beta1 ** self.t)
        for a, b in regions:
            _adam_kernel(params[a:b], grad[a:b], self.m[a:b], self.v[a:b],
                         step_size, self.beta1, self.beta2,
                         self.eps * bc2_sqrt)


@numba.njit(cache=True)
def _adam_kernel(p, g, m, v, step, beta1, beta2, eps_hat):
    # p -= lr * m_hat / (sqrt(v_hat) + eps), with the bias corrections folded
    # into `step` and `eps_hat` so it is a single pass.
    for i in range(p.size):
        gi = g[i]
        mi = beta1 * m[i] + (1.0 - beta1) * gi
        vi = beta2 * v[i] + (1.0 - beta2) * gi * gi
        m[i] = mi
        v[i] = vi
        p[i] -= step * mi / (np.sqrt(vi) + eps_hat)


@numba.njit(cache=True)
def _polyak_kernel(target, online, tau):
    for i in range(target.size):
        target[i] = (1.0 - tau) * target[i] + tau * online[i]


def adam_step(opt: AdamState, net: Mlp, grads: GradientBundle,
              direction: str = "descend") -> Mlp:
    """Adam update of a whole network from a GradientBundle."""
    opt.step(net.params, grads.flat, direction)
    return net


def polyak_update(target: Mlp, online: Mlp, tau: float,
                  regions: list | None = None) -> Mlp:
    """target <- (1 - tau) * target + tau * online, elementwise."""
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")
    if target.sizes != online.sizes:
        raise ValueError(
            f"architecture mismatch: {target.sizes} vs {online.sizes}")
    if regions is None:
        regions = ((0, target.n_params),)
    for a, b in regions:
        _polyak_kernel(target.params[a:b], online.params[a:b], float(tau))
    return target


def save_mlp(path, net: Mlp) -> None:
    """Versioned dump: layer sizes, head activation, parameters in order."""
    np.savez(path, version=CHECKPOINT_VERSION, sizes=np.array(net.sizes),
             output_activation=net.output_activation, params=net.params)


def load_mlp(path) -> Mlp:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        net = Mlp(tuple(data["sizes"]), str(data["output_activation"]))
        params = data["params"]
        if params.shape != net.params.shape:
            raise ValueError("checkpoint parameter count mismatch")
        net.params[...] = params
    return net
