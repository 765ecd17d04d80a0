"""RIS phase-configuration generation, quantization, and cascaded-channel assembly."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from rislink.mathkit import RngStream

MAX_PHASE_BITS = 16


@dataclass
class RisConfig:
    """Per-symbol RIS phases, shape (N, M), radians in [0, 2 pi)."""

    psi: np.ndarray
    bits: Optional[int] = None

    @property
    def N(self) -> int:
        return self.psi.shape[0]

    @property
    def M(self) -> int:
        return self.psi.shape[1]

    def weights(self) -> np.ndarray:
        """Unit-modulus element weights exp(j psi), shape (N, M)."""
        return np.exp(1j * self.psi)


def random_config(M: int, N: int, rng: RngStream, per_frame: bool = True) -> RisConfig:
    """Uniform random phases; per_frame=True reuses one draw for all N symbols."""
    if M < 1 or N < 1:
        raise ValueError("M and N must be >= 1")
    if per_frame:
        psi = rng.generator.uniform(0.0, 2.0 * np.pi, size=(1, M))
        psi = np.tile(psi, (N, 1))
    else:
        psi = rng.generator.uniform(0.0, 2.0 * np.pi, size=(N, M))
    return RisConfig(psi=psi)


def quantize_config(cfg: RisConfig, bits: int) -> RisConfig:
    """Snap each phase to the nearest of 2**bits uniform levels.

    Exact ties go to the smaller level.  Levels are 2 pi i / 2**bits.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    if bits > MAX_PHASE_BITS:
        raise ValueError(f"bits > {MAX_PHASE_BITS} rejected as misconfiguration")
    levels = 2 ** bits
    step = 2.0 * np.pi / levels
    idx = np.ceil(cfg.psi / step - 0.5).astype(int) % levels
    return RisConfig(psi=idx * step, bits=bits)


def cascaded_channel(H_kn: np.ndarray, g_kn: np.ndarray, psi_n: np.ndarray) -> np.ndarray:
    """Effective cascaded response q = sum_m exp(j psi_m) H[:, m] g_m.

    H_kn is (B, M), g_kn is (M,), psi_n is (M,) phases in radians.
    """
    H_kn = np.asarray(H_kn)
    g_kn = np.asarray(g_kn)
    psi_n = np.asarray(psi_n, dtype=float)
    if H_kn.ndim != 2 or g_kn.shape != (H_kn.shape[1],) or psi_n.shape != g_kn.shape:
        raise ValueError(
            f"inconsistent dimensions: H {H_kn.shape}, g {g_kn.shape}, psi {psi_n.shape}")
    return H_kn @ (np.exp(1j * psi_n) * g_kn)


def cascade_frame(H: np.ndarray, g: np.ndarray, cfg: RisConfig) -> np.ndarray:
    """Cascaded response for a whole frame: (K, B, M) x (K, N, M) -> (K, N, B)."""
    return np.einsum("kbm,nm,knm->knb", H, cfg.weights(), g, optimize=True)
