# Complex linear algebra helpers and seeded sampling shared by the whole package.
#
# Complex matrices/vectors are plain numpy complex128 arrays (row-major).
# All real arithmetic is 64-bit. Randomness comes from numpy's PCG64
# generator, so a given seed replays the exact same stream.

import numpy as np

__all__ = [
    "make_rng",
    "spawn_rngs",
    "matmul",
    "diag_times",
    "row_vec_mat",
    "sq_norm",
    "trace_gram",
    "sample_cn",
]


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; identical seeds yield identical streams."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """n independent child generators derived from one master seed.

    Children are positional: component i always receives stream i, so adding
    consumers at the end never disturbs existing streams.
    """
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def _as_cmatrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D complex matrix, got ndim={m.ndim}")
    return m


def _as_cvector(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.complex128)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D complex vector, got ndim={v.ndim}")
    return v


def matmul(a, b) -> np.ndarray:
    """Complex matrix product a @ b."""
    a, b = _as_cmatrix(a), _as_cmatrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch: {a.shape} @ {b.shape}")
    return a @ b


def diag_times(v, m) -> np.ndarray:
    """diag(v) @ m without materialising the diagonal matrix."""
    v, m = _as_cvector(v), _as_cmatrix(m)
    if v.shape[0] != m.shape[0]:
        raise ValueError(f"shape mismatch: diag({v.shape[0]}) @ {m.shape}")
    return v[:, None] * m


def row_vec_mat(v, m) -> np.ndarray:
    """v^T @ m as a 1-D vector (plain transpose, no conjugation)."""
    v, m = _as_cvector(v), _as_cmatrix(m)
    if v.shape[0] != m.shape[0]:
        raise ValueError(f"shape mismatch: ({v.shape[0]},)^T @ {m.shape}")
    return v @ m


def sq_norm(v) -> float:
    """Sum of squared moduli of the entries."""
    v = np.asarray(v, dtype=np.complex128)
    return float(np.vdot(v, v).real)


def trace_gram(m) -> float:
    """tr(m m^H) = sum of squared moduli over all entries."""
    m = _as_cmatrix(m)
    return float(np.vdot(m, m).real)


def sample_cn(rng: np.random.Generator, variance: float, n: int) -> np.ndarray:
    """n i.i.d. circularly-symmetric complex Gaussians CN(0, variance).

    Real and imaginary parts are independent N(0, variance/2).
    """
    if variance < 0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    if variance == 0:
        return np.zeros(n, dtype=np.complex128)
    scale = np.sqrt(variance / 2.0)
    re = rng.standard_normal(n)
    im = rng.standard_normal(n)
    return scale * (re + 1j * im)
