"""Deterministic numeric primitives shared by every other module.

Special functions, reproducible random-variate generation, dominant
eigenvector extraction by power iteration, and adaptive 2-D quadrature
over regions with u-dependent v-bounds.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import j0 as _j0

TWO_PI = 2.0 * np.pi

ANGLE_FAMILIES = ("wrapped-gaussian", "laplacian")


@dataclass
class RngStream:
    """Reproducible random substream keyed by (seed, stream_id).

    Reconstructing a stream with the same key replays the identical variate
    sequence, so parallel and serial trial execution agree exactly.  A stream
    must not be shared between concurrent trials; give each trial its own
    stream_id.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.default_rng(ss)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen


def bessel_j0(x: float) -> float:
    """Zero-th order Bessel function of the first kind."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"bessel_j0 requires finite input, got {x!r}")
    return float(_j0(x))


def sample_complex_gaussian(rng: RngStream, variance: float, size=None):
    """Circularly-symmetric complex normal draws with the given total variance.

    Real and imaginary parts are independent zero-mean normals with
    variance/2 each.  size=None returns a scalar.
    """
    if variance < 0:
        raise ValueError(f"variance must be >= 0, got {variance}")
    if variance == 0:
        return 0j if size is None else np.zeros(size, dtype=complex)
    g = rng.generator
    scale = math.sqrt(variance / 2.0)
    z = g.normal(0.0, scale, size=size) + 1j * g.normal(0.0, scale, size=size)
    return z


def wrap_angle(a):
    """Wrap angles to (-pi, pi]; values already in range pass through exactly."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + np.pi, TWO_PI) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return np.where((a > -np.pi) & (a <= np.pi), a, w)


def sample_angles(rng: RngStream, mean: float, spread: float,
                  family: str, count: int) -> np.ndarray:
    """Draw `count` angles around `mean` with the given spread, wrapped to (-pi, pi].

    family 'wrapped-gaussian' draws a normal and wraps it; 'laplacian' uses the
    inverse-CDF of a Laplace distribution with standard deviation `spread`.
    """
    if spread < 0:
        raise ValueError(f"spread must be >= 0, got {spread}")
    if family not in ANGLE_FAMILIES:
        raise ValueError(f"unknown angle family {family!r}, expected one of {ANGLE_FAMILIES}")
    if spread == 0:
        return wrap_angle(np.full(count, mean, dtype=float))
    g = rng.generator
    if family == "wrapped-gaussian":
        raw = g.normal(mean, spread, size=count)
    else:
        # Laplace with std = spread has scale b = spread / sqrt(2)
        u = g.uniform(-0.5, 0.5, size=count)
        b = spread / math.sqrt(2.0)
        raw = mean - b * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    return wrap_angle(raw)


def principal_eigenvector(a, max_iters: int = 10_000, tol: float = 1e-12) -> np.ndarray:
    """Dominant eigenvector of a Hermitian PSD matrix by power iteration.

    Returns a unit-norm vector v with ||A v - lam v|| <= 1e-8 * lam.  The
    all-zero matrix returns the first standard basis vector by convention.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    amax = np.abs(a).max() if a.size else 0.0
    if amax == 0.0:
        e1 = np.zeros(n, dtype=complex)
        e1[0] = 1.0
        return e1
    if np.abs(a - a.conj().T).max() > 1e-10 * max(1.0, amax):
        raise ValueError("matrix is not Hermitian within 1e-10")

    # deterministic start; the ramp breaks ties against symmetric starts
    v = np.ones(n, dtype=complex) + 1e-3 * np.arange(n)
    v /= np.linalg.norm(v)
    w = a @ v
    basis = 0
    for _ in range(max_iters):
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            # started inside the null space; fall back to cycling basis vectors
            v = np.zeros(n, dtype=complex)
            v[basis % n] = 1.0
            basis += 1
            w = a @ v
            continue
        v = w / nrm
        w = a @ v
        lam = float(np.real(v.conj() @ w))
        # residual-based stop keeps the ||Av - lam v|| <= 1e-8 lam contract
        if np.linalg.norm(w - lam * v) <= 1e-9 * max(lam, 1e-300):
            break
    return v


@dataclass(frozen=True)
class Region2D:
    """Integration region u in [u_min, u_max], v in v_bounds(u)."""

    u_min: float
    u_max: float
    v_bounds: Callable[[float], tuple[float, float]]


@dataclass
class QuadResult:
    value: float
    error_estimate: float
    converged: bool
    panels: int

    def __float__(self) -> float:
        return self.value


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _panel_value(f, region: Region2D, u0, u1, t0, t1):
    """Tensor Gauss-Legendre estimate of one (u, t) panel.

    t parametrizes the v-interval: v = lo(u) + t * (hi(u) - lo(u)).
    """
    un = 0.5 * (u1 - u0) * _GL_NODES + 0.5 * (u1 + u0)
    tn = 0.5 * (t1 - t0) * _GL_NODES + 0.5 * (t1 + t0)
    uw = 0.5 * (u1 - u0) * _GL_WEIGHTS
    tw = 0.5 * (t1 - t0) * _GL_WEIGHTS
    total = 0.0
    for ui, wi in zip(un, uw):
        lo, hi = region.v_bounds(float(ui))
        width = hi - lo
        vv = lo + tn * width
        uu = np.full_like(vv, ui)
        vals = np.asarray(f(uu, vv), dtype=float)
        if vals.shape != vv.shape:
            vals = np.broadcast_to(vals, vv.shape)
        total += wi * width * float(np.dot(tw, vals))
    return total


def integrate_2d(f, region: Region2D, tol: float = 1e-6,
                 max_panels: int = 20_000) -> QuadResult:
    """Adaptive 2-D quadrature of f(u, v) over `region`.

    Tensor Gauss-Legendre panels with recursive bisection; refinement stops
    when the estimated relative error falls below `tol`.  Non-convergence at
    the panel budget returns the best estimate with converged=False.
    """
    if not (region.u_max > region.u_min):
        raise ValueError("region must have u_max > u_min")

    def split(u0, u1, t0, t1):
        um, tm = 0.5 * (u0 + u1), 0.5 * (t0 + t1)
        kids = [(u0, um, t0, tm), (um, u1, t0, tm), (u0, um, tm, t1), (um, u1, tm, t1)]
        vals = [_panel_value(f, region, *k) for k in kids]
        return kids, vals

    heap = []
    total = 0.0
    err_total = 0.0
    n_panels = 0
    counter = 0

    def push(bounds, coarse_val):
        # each leaf carries a one-level refinement for its error estimate
        nonlocal total, err_total, n_panels, counter
        kids, vals = split(*bounds)
        refined = sum(vals)
        err = abs(coarse_val - refined)
        heapq.heappush(heap, (-err, counter, refined, kids, vals))
        counter += 1
        total += refined
        err_total += err
        n_panels += 1

    u0, u1 = region.u_min, region.u_max
    push((u0, u1, 0.0, 1.0), _panel_value(f, region, u0, u1, 0.0, 1.0))

    while True:
        scale = max(abs(total), 1e-300)
        if err_total <= tol * scale:
            return QuadResult(total, err_total, True, n_panels)
        if n_panels >= max_panels:
            return QuadResult(total, err_total, False, n_panels)
        neg_err, _, refined, kids, vals = heapq.heappop(heap)
        total -= refined
        err_total += neg_err  # remove the popped panel's error
        n_panels -= 1
        for k, v in zip(kids, vals):
            push(k, v)
