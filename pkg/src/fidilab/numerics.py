"""Dense float64 primitives, a portable seeded RNG, and a finite-difference
gradient oracle.

Everything here is deliberately boring: 64-bit floats throughout (gradient
checks at 1e-5 tolerance are hopeless in float32) and a self-contained
integer RNG so that experiment seeds reproduce across platforms and library
versions. Platform-default RNGs are not used anywhere in the package.
"""

from __future__ import annotations

from typing import Callable, Sequence, TypeVar

import numpy as np

from .errors import NumericError, ShapeError

T = TypeVar("T")

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class Rng:
    """Deterministic splitmix64 generator.

    The stream is a pure function of the seed: output i is obtained by
    mixing ``seed + (i+1) * 0x9E3779B97F4A7C15 (mod 2^64)`` through the
    splitmix64 finalizer. Identical seeds therefore yield identical
    streams on every platform and run. The counter-based form also lets
    bulk draws be vectorized without changing the stream.

    Uniform doubles take the top 53 bits of one output (range [0, 1)).
    Each normal draw consumes two uniforms via the Box-Muller transform
    and keeps only the cosine branch, so n normals always consume
    exactly 2n raw outputs.
    """

    def __init__(self, seed: int):
        self._base = int(seed) & _MASK64
        self._count = 0

    @property
    def seed(self) -> int:
        return self._base

    def next_u64(self) -> int:
        self._count += 1
        return _mix64((self._base + self._count * _GAMMA) & _MASK64)

    def u64s(self, n: int) -> np.ndarray:
        """Vectorized draw of ``n`` raw 64-bit outputs."""
        idx = np.arange(self._count + 1, self._count + n + 1, dtype=np.uint64)
        self._count += n
        with np.errstate(over="ignore"):
            z = (np.uint64(self._base) + idx * np.uint64(_GAMMA))
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            return z ^ (z >> np.uint64(31))

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53

    def uniforms(self, n: int) -> np.ndarray:
        return (self.u64s(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self) -> float:
        return float(self.normals(1)[0])

    def normals(self, n: int) -> np.ndarray:
        """``n`` independent standard normals (Box-Muller, cosine branch)."""
        u = self.uniforms(2 * n).reshape(n, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))  # 1-u in (0,1], log finite
        return r * np.cos(2.0 * np.pi * u[:, 1])

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n). Rejection keeps the draw unbiased."""
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        bound = _MASK64 + 1 - ((_MASK64 + 1) % n)
        while True:
            r = self.next_u64()
            if r < bound:
                return r % n

    def shuffled(self, items: Sequence[T]) -> list[T]:
        """New uniformly shuffled list (Fisher-Yates); input untouched."""
        out = list(items)
        for i in range(len(out) - 1, 0, -1):
            j = self.randbelow(i + 1)
            out[i], out[j] = out[j], out[i]
        return out


def shuffle(items: Sequence[T], rng: Rng) -> list[T]:
    """Uniform permutation of ``items`` under the documented generator.

    The rng is advanced in place; the same seed always produces the same
    permutation.
    """
    return rng.shuffled(items)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit shape check.

    Raises ShapeError naming both shapes when a.cols != b.rows.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul shape mismatch: {a.shape[0]}x{a.shape[1]} times "
            f"{b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def finite_diff_grad(
    f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-4
) -> np.ndarray:
    """Central-difference gradient of a scalar function of a matrix.

    Entry (i, j) is (f(x + h e_ij) - f(x - h e_ij)) / (2h). Central
    differences are second-order accurate, which is what makes 1e-5
    gradient tolerances reachable with h = 1e-4.
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.empty_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        ij = it.multi_index
        orig = x[ij]
        x[ij] = orig + h
        fp = float(f(x))
        x[ij] = orig - h
        fm = float(f(x))
        x[ij] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite f value while perturbing entry {ij}")
        grad[ij] = (fp - fm) / (2.0 * h)
    return grad


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max absolute deviation scaled by the larger gradient magnitude."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(np.max(np.abs(analytic), initial=0.0),
                np.max(np.abs(numeric), initial=0.0), 1e-8)
    return float(np.max(np.abs(analytic - numeric), initial=0.0) / scale)
