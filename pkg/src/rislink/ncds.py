"""Differential PSK transceiver and closed-form SINR analysis.

Encoding accumulates phase in the time (or optionally frequency) dimension;
decoding correlates consecutive received vectors without any channel
knowledge.  The decision variable decomposes into a useful term and three
interference/noise terms whose second moments are available in closed form
for both channel models.

Power convention: every closed-form moment is reported for a unit-power
transmit normalization (noise variance rescaled by 1/Px).  PSK decisions and
the SINR depend only on these ratios, so nothing observable changes; empirical
estimators apply the same normalization to their samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from rislink.channel import ChannelRealization, Scenario, steering_vector

PSK_ORDERS = (2, 4, 8, 16)


@dataclass
class FrameGrid:
    """One frame's symbols: data s, differential x, received y, decisions z.

    s and x have shape (K, N); y has shape (K, N, B); z has shape (K, N-1)
    and covers symbols n >= 2.
    """

    s: np.ndarray
    x: np.ndarray
    y: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None


@dataclass
class MomentSet:
    """Second moments of the decision-variable terms plus the resulting SINR.

    Fields follow the unit-power convention (see module docstring).  `sinr`
    is additionally compensated by the average cascaded gain, matching a
    receiver that scales out sigma_h^2 * sigma_g^2 by automatic gain control.
    A NaN sinr marks a closed-form breakdown (possible for the geometric
    model outside its few-ray regime).
    """

    e_i1_sq: float
    e_i2_sq: float
    e_i3_sq: float
    e_i4_sq: float
    e_s_i1: float
    sinr: float
    b: int = 0
    m: int = 0
    gain_norm: float = 1.0


@dataclass
class EmpiricalMoments(MomentSet):
    """Monte Carlo moment estimates with standard errors."""

    n_samples: int = 0
    se_i1_sq: float = math.nan
    se_i2_sq: float = math.nan
    se_i3_sq: float = math.nan
    se_i4_sq: float = math.nan
    se_s_i1: float = math.nan
    sinr_stderr: float = math.nan


def dpsk_constellation(mq: int) -> np.ndarray:
    """Unit-modulus PSK points exp(j 2 pi i / mq), i = 0..mq-1."""
    if mq not in PSK_ORDERS:
        raise ValueError(f"unsupported PSK order {mq}, expected one of {PSK_ORDERS}")
    return np.exp(2j * np.pi * np.arange(mq) / mq)


def diff_encode(s: np.ndarray, px: float, domain: str = "time") -> np.ndarray:
    """Differential encoding: x_1 = sqrt(Px) s_1, x_n = x_{n-1} s_n.

    `s` is a (K, N) unit-modulus grid.  domain='time' runs the recursion
    along symbols, 'frequency' along subcarriers at fixed symbol.
    """
    s = np.asarray(s)
    if np.any(np.abs(np.abs(s) - 1.0) > 1e-9):
        raise ValueError("data symbols must be unit modulus")
    if domain == "time":
        axis = 1
    elif domain == "frequency":
        axis = 0
    else:
        raise ValueError(f"unknown differential domain {domain!r}")
    return math.sqrt(px) * np.cumprod(s, axis=axis)


def diff_decode(y_prev: np.ndarray, y_cur: np.ndarray, M: int, B: int) -> complex:
    """Differential decision variable z = y_prev^H y_cur / (M B)."""
    y_prev = np.asarray(y_prev)
    y_cur = np.asarray(y_cur)
    if y_prev.shape != y_cur.shape:
        raise ValueError(f"length mismatch: {y_prev.shape} vs {y_cur.shape}")
    return complex(np.vdot(y_prev, y_cur)) / (M * B)


def diff_decode_frame(y: np.ndarray, M: int, B: int) -> np.ndarray:
    """Vectorized decoding of a (K, N, B) frame into (K, N-1) decisions."""
    return np.einsum("knb,knb->kn", y[:, :-1].conj(), y[:, 1:]) / (M * B)


def decompose_terms(q_prev, q_cur, x_prev, x_cur, v_prev, v_cur):
    """Split y_prev^H y_cur into useful and interference/noise terms.

    Returns (I1, I2, I3, I4) with I1 carrying the data symbol through
    x_prev^* x_cur; the four terms sum exactly to y_prev^H y_cur.  Inputs may
    carry leading batch dimensions; the inner product runs over the last axis.
    """
    q_prev = np.asarray(q_prev)
    q_cur = np.asarray(q_cur)
    v_prev = np.asarray(v_prev)
    v_cur = np.asarray(v_cur)
    xp = np.asarray(x_prev)
    xc = np.asarray(x_cur)
    dot = lambda a, b: np.sum(a.conj() * b, axis=-1)
    i1 = xp.conj() * xc * dot(q_prev, q_cur)
    i2 = xp.conj() * dot(q_prev, v_cur)
    i3 = xc * dot(v_prev, q_cur)
    i4 = dot(v_prev, v_cur)
    return i1, i2, i3, i4


def decide_psk(z: complex, mq: int) -> tuple[int, bool]:
    """Nearest-PSK decision by wrapped angular distance.

    Returns (index, degenerate); z == 0 yields index 0 with the degenerate
    flag set.  Exact wedge-boundary ties go to the lower index.
    """
    if mq not in PSK_ORDERS:
        raise ValueError(f"unsupported PSK order {mq}")
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError("decision variable must be finite")
    if z == 0:
        return 0, True
    step = 2.0 * math.pi / mq
    idx = int(math.ceil(np.angle(z) / step - 0.5)) % mq
    return idx, False


def decide_psk_grid(z: np.ndarray, mq: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized nearest-PSK decision; returns (indices, degenerate_mask)."""
    if mq not in PSK_ORDERS:
        raise ValueError(f"unsupported PSK order {mq}")
    z = np.asarray(z)
    step = 2.0 * np.pi / mq
    idx = np.ceil(np.angle(z) / step - 0.5).astype(int) % mq
    degenerate = z == 0
    idx = np.where(degenerate, 0, idx)
    return idx, degenerate


def _sinr_from_normalized(e_s1, e_i1, e_i2, e_i3, e_i4, B, M) -> float:
    """SINR of the decision variable from fully normalized moments (Px=1, unit gain)."""
    inv = 1.0 + (e_i1 + e_i2 + e_i3 + e_i4) / (M * M * B * B) - 2.0 * e_s1 / (M * B)
    if inv <= 0.0:
        return math.nan
    return 1.0 / inv


def moments_iid(B: int, M: int, sigma_h2: float, sigma_g2: float,
                px: float, sigma_v2: float) -> MomentSet:
    """Closed-form decision-variable moments for the IID Rayleigh model."""
    if min(B, M) < 1 or sigma_h2 <= 0 or sigma_g2 <= 0 or px <= 0 or sigma_v2 < 0:
        raise ValueError("parameters must be positive (noise variance may be zero)")
    sv2 = sigma_v2 / px  # unit-power convention
    gain = sigma_h2 * sigma_g2
    e_s1 = B * sigma_h2 * M * sigma_g2
    e_i1 = (1 + B) * B * sigma_h2 ** 2 * (1 + M) * M * sigma_g2 ** 2
    e_i23 = sv2 * B * sigma_h2 * M * sigma_g2
    e_i4 = B * sv2 ** 2
    # gain compensation: first moment scales with gain, second moments with gain^2
    g2 = gain ** 2
    sinr = _sinr_from_normalized(e_s1 / gain, e_i1 / g2,
                                 e_i23 / g2, e_i23 / g2, e_i4 / g2, B, M)
    return MomentSet(e_i1_sq=e_i1, e_i2_sq=e_i23, e_i3_sq=e_i23, e_i4_sq=e_i4,
                     e_s_i1=e_s1, sinr=sinr, b=B, m=M, gain_norm=gain)


def sinr_iid(B: int, M: int, px: float, sigma_v2: float,
             sigma_h2: float = 1.0, sigma_g2: float = 1.0) -> float:
    """Direct closed-form IID SINR in the gain-compensated convention.

    Algebraically identical to MomentSet.sinr from moments_iid; kept as an
    independent expression so the two can be cross-checked.
    """
    sv = sigma_v2 / (px * sigma_h2 * sigma_g2)
    inv = (1.0
           + (1.0 + (B + M + 1) / (M * B))
           + (sv / (M * B) - 1.0) * 2.0
           + sv ** 2 / (M * M * B))
    return 1.0 / inv


def ris_inner_products(realization: ChannelRealization, scenario: Scenario) -> np.ndarray:
    """RIS-side steering inner products kappa for every ray-tuple pair.

    Entry [ta, tb] is a_ris_departure(ta)^H a_ris_arrival(tb), where ta runs
    over the BS-RIS link's (cluster, ray) tuples and tb over the RIS-UE ones.
    The spatial-correlation vector of a tuple pair is a_bs(ta) * kappa[ta, tb].
    """
    ac = realization.alpha_clusters
    bc = realization.beta_clusters
    if ac is None or bc is None:
        raise ValueError("realization carries no cluster ground truth (IID model?)")
    sc = scenario
    a_dep = steering_vector(sc.M_h, sc.M_v, sc.d_ris_h, sc.d_ris_v,
                            ac.tx.azimuth.ravel(), ac.tx.zenith.ravel())
    a_arr = steering_vector(sc.M_h, sc.M_v, sc.d_ris_h, sc.d_ris_v,
                            bc.rx.azimuth.ravel(), bc.rx.zenith.ravel())
    return a_dep.conj().T @ a_arr


def correlation_vector(realization: ChannelRealization, scenario: Scenario,
                       c_beta: int, r_beta: int, c_alpha: int, r_alpha: int) -> np.ndarray:
    """Joint BS/RIS spatial-correlation vector a_tilde for one tuple pair."""
    ac = realization.alpha_clusters
    bc = realization.beta_clusters
    sc = scenario
    a_bs = steering_vector(sc.B_h, sc.B_v, sc.d_bs_h, sc.d_bs_v,
                           ac.rx.azimuth[c_alpha, r_alpha], ac.rx.zenith[c_alpha, r_alpha])
    a_dep = steering_vector(sc.M_h, sc.M_v, sc.d_ris_h, sc.d_ris_v,
                            ac.tx.azimuth[c_alpha, r_alpha], ac.tx.zenith[c_alpha, r_alpha])
    a_arr = steering_vector(sc.M_h, sc.M_v, sc.d_ris_h, sc.d_ris_v,
                            bc.rx.azimuth[c_beta, r_beta], bc.rx.zenith[c_beta, r_beta])
    return a_bs * np.vdot(a_dep, a_arr)


def correlation_bounds(realization: ChannelRealization, scenario: Scenario):
    """Per-tuple spatial-correlation ratios and their IID-comparison caps.

    Returns (ratio2, ratio4, cap2, cap4): ratio2 = ||a_tilde||^2 / (M B) with
    cap 1, and ratio4 = 4 ||a_tilde||^4 / (M^2 B^2) with cap
    1 + (B + M + 1)/(M B).  Arrays are indexed [tuple_alpha, tuple_beta].
    """
    sc = scenario
    B, M = sc.B, sc.M
    kap2 = np.abs(ris_inner_products(realization, scenario)) ** 2
    norm2 = B * kap2                      # ||a_tilde||^2
    ratio2 = norm2 / (M * B)
    ratio4 = 4.0 * norm2 ** 2 / (M * M * B * B)
    cap4 = 1.0 + (B + M + 1) / (M * B)
    return ratio2, ratio4, 1.0, cap4


def moments_geometric(realization: ChannelRealization, scenario: Scenario,
                      px: Optional[float] = None,
                      sigma_v2: Optional[float] = None) -> MomentSet:
    """Closed-form decision-variable moments for one geometric realization.

    Sums the per-(cluster, ray) tuple contributions of both links weighted by
    the realized spatial-correlation vectors.  Power and noise default to the
    scenario's values.  The resulting sinr is NaN when the few-ray
    approximation underlying the closed form breaks down.
    """
    sc = scenario
    if px is None:
        px = sc.px
    if sigma_v2 is None:
        sigma_v2 = sc.sigma_v2
    ac = realization.alpha_clusters
    bc = realization.beta_clusters
    if ac is None or bc is None:
        raise ValueError("realization carries no cluster ground truth (IID model?)")

    B, M = sc.B, sc.M
    sv2 = sigma_v2 / px
    kap2 = np.abs(ris_inner_products(realization, scenario)) ** 2   # (CRa, CRb)
    norm2 = B * kap2
    w2_a = np.repeat(realization.sigma_h2 * ac.powers, sc.R_alpha) / sc.R_alpha
    w2_b = np.repeat(realization.sigma_g2 * bc.powers, sc.R_beta) / sc.R_beta
    q2 = float(w2_a @ norm2 @ w2_b)
    q4 = 4.0 * float((w2_a ** 2) @ (norm2 ** 2) @ (w2_b ** 2))

    gain = realization.sigma_h2 * realization.sigma_g2
    e_i23 = sv2 * q2
    e_i4 = B * sv2 ** 2
    g2 = gain ** 2
    sinr = _sinr_from_normalized(q2 / gain, q4 / g2,
                                 e_i23 / g2, e_i23 / g2, e_i4 / g2, B, M)
    return MomentSet(e_i1_sq=q4, e_i2_sq=e_i23, e_i3_sq=e_i23, e_i4_sq=e_i4,
                     e_s_i1=q2, sinr=sinr, b=B, m=M, gain_norm=gain)


def moments_from_fields(e_i1_sq: float, e_i2_sq: float, e_i3_sq: float,
                        e_i4_sq: float, e_s_i1: float, B: int, M: int,
                        gain_norm: float) -> MomentSet:
    """Assemble a MomentSet (and its SINR) from already-computed moment fields.

    Used to average per-realization geometric moments across trials before
    evaluating the SINR.
    """
    g2 = gain_norm ** 2
    sinr = _sinr_from_normalized(e_s_i1 / gain_norm, e_i1_sq / g2,
                                 e_i2_sq / g2, e_i3_sq / g2, e_i4_sq / g2, B, M)
    return MomentSet(e_i1_sq=e_i1_sq, e_i2_sq=e_i2_sq, e_i3_sq=e_i3_sq,
                     e_i4_sq=e_i4_sq, e_s_i1=e_s_i1, sinr=sinr,
                     b=B, m=M, gain_norm=gain_norm)


class MomentAccumulator:
    """Order-independent accumulator for decision-term samples across trials.

    Per-trial partial sums are kept by trial index and reduced with pairwise
    summation, so results do not depend on completion order or worker count.
    """

    _WIDTH = 11

    def __init__(self):
        self._rows: dict[int, np.ndarray] = {}

    def add(self, trial: int, i1, i2, i3, i4, s):
        a1, a2, a3, a4 = (np.abs(v) ** 2 for v in (i1, i2, i3, i4))
        si1 = np.real(np.conj(s) * i1)
        row = np.array([
            np.size(a1),
            a1.sum(), (a1 ** 2).sum(),
            a2.sum(), (a2 ** 2).sum(),
            a3.sum(), (a3 ** 2).sum(),
            a4.sum(), (a4 ** 2).sum(),
            si1.sum(), (si1 ** 2).sum(),
        ])
        self._rows[trial] = self._rows.get(trial, np.zeros(self._WIDTH)) + row

    @property
    def n_samples(self) -> int:
        if not self._rows:
            return 0
        return int(sum(self._rows[k][0] for k in self._rows))

    def finalize(self, B: int, M: int, px: float, gain_norm: float) -> EmpiricalMoments:
        if not self._rows:
            raise ValueError("no samples accumulated")
        table = np.stack([self._rows[k] for k in sorted(self._rows)])
        sums = table.sum(axis=0)  # pairwise over the fixed trial order
        n = sums[0]
        if n < 1000:
            raise ValueError(f"too few samples for moment estimation: {int(n)} < 1000")

        def mom(i_sum, i_sq_sum, scale):
            mean = i_sum / n / scale
            var = max(i_sq_sum / n / scale ** 2 - mean ** 2, 0.0)
            return mean, math.sqrt(var / n)

        px2 = px ** 2  # unit-power convention rescales every squared term
        e1, se1 = mom(sums[1], sums[2], px2)
        e2, se2 = mom(sums[3], sums[4], px2)
        e3, se3 = mom(sums[5], sums[6], px2)
        e4, se4 = mom(sums[7], sums[8], px2)
        es1, ses1 = mom(sums[9], sums[10], px)

        g = gain_norm
        g2 = g ** 2
        sinr = _sinr_from_normalized(es1 / g, e1 / g2, e2 / g2, e3 / g2,
                                     e4 / g2, B, M)
        # delta method on the denominator of the SINR expression
        mb2 = (M * B) ** 2
        var_inv = ((se1 / g2) ** 2 + (se2 / g2) ** 2 + (se3 / g2) ** 2
                   + (se4 / g2) ** 2) / mb2 ** 2 + (2.0 * ses1 / g / (M * B)) ** 2
        sinr_se = sinr ** 2 * math.sqrt(var_inv) if math.isfinite(sinr) else math.nan
        return EmpiricalMoments(e_i1_sq=e1, e_i2_sq=e2, e_i3_sq=e3, e_i4_sq=e4,
                                e_s_i1=es1, sinr=sinr, b=B, m=M, gain_norm=g,
                                n_samples=int(n), se_i1_sq=se1, se_i2_sq=se2,
                                se_i3_sq=se3, se_i4_sq=se4, se_s_i1=ses1,
                                sinr_stderr=sinr_se)


def sinr_empirical(i1, i2, i3, i4, s, B: int, M: int, px: float,
                   gain_norm: float) -> EmpiricalMoments:
    """Monte Carlo moment and SINR estimates from decision-term samples.

    Requires at least 1000 samples.  gain_norm is the average cascaded gain
    sigma_h^2 * sigma_g^2 compensated by the receiver.
    """
    acc = MomentAccumulator()
    acc.add(0, np.asarray(i1).ravel(), np.asarray(i2).ravel(),
            np.asarray(i3).ravel(), np.asarray(i4).ravel(), np.asarray(s).ravel())
    return acc.finalize(B, M, px, gain_norm)
