"""Analytical symbol-error probability via a PDF approximation of the
differential decision variable.

The useful term is approximated by a Gamma (IID model) or normal (geometric
model) marginal on the real axis; the three interference/noise terms lump
into a circular Gaussian.  By default the Gaussian's variance tracks the
conditional value 2 sigma_v~^2 t + B sigma_v~^4 given a useful-term value t
(the cross terms are channel-scaled), which keeps the approximation accurate
into the low-error regime; a fixed-variance mode using the unconditional
sigma_s^2 is available for comparison.  The error probability is one minus
the convolved density's mass over the reference symbol's angular wedge,
evaluated by a 1-D convolution quadrature nested inside the 2-D region
integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from rislink.mathkit import Region2D, integrate_2d
from rislink.ncds import MomentSet, PSK_ORDERS


@dataclass
class DecisionPdfModel:
    """Marginal of the useful term plus the lumped Gaussian disturbance.

    Parameters are stored with the useful term's mean normalized to one,
    which leaves the error probability unchanged (decision wedges are
    scale-invariant cones).  noise_variance is the unconditional sigma_s^2;
    with conditional=True the disturbance variance at useful-term value t is
    noise_floor + noise_rate * t, whose mean over t equals noise_variance.
    """

    i1_family: str               # 'gamma' or 'gaussian'
    i1_params: tuple             # gamma: (shape, scale); gaussian: (mean, variance)
    noise_variance: float        # unconditional sigma_s^2
    mq: int
    noise_floor: float = 0.0
    noise_rate: float = 0.0
    conditional: bool = True


@dataclass
class SepResult:
    pe: float
    converged: bool
    error_estimate: float

    def __float__(self) -> float:
        return self.pe


def build_pdf_model(moments: MomentSet, channel_model: str, B: int, mq: int,
                    literal_gamma: bool = False,
                    conditional_noise: bool = True) -> DecisionPdfModel:
    """Moment-match the decision-variable PDF model from closed-form moments.

    The Gamma parameters are matched to the useful term's mean and variance
    (shape k = E^2/Var, scale theta = Var/E); literal_gamma instead keeps a
    shape-B Gamma scaled by the raw second moment, which reproduces the
    source expression but is not moment-consistent.  The geometric model uses
    a normal marginal with the same matched mean and variance.
    """
    if mq not in PSK_ORDERS:
        raise ValueError(f"unsupported PSK order {mq}")
    mean = moments.e_s_i1
    var = moments.e_i1_sq - mean ** 2
    if mean <= 0:
        raise ValueError("useful-term mean must be positive")
    if var <= 0:
        raise ValueError(f"non-positive useful-term variance: {var}")
    sigma_s2 = moments.e_i2_sq + moments.e_i3_sq + moments.e_i4_sq
    if sigma_s2 < 0:
        raise ValueError(f"non-positive disturbance variance: {sigma_s2}")

    # normalize the useful-term mean to 1
    nvar = var / mean ** 2
    ns2 = sigma_s2 / mean ** 2
    floor = moments.e_i4_sq / mean ** 2
    rate = (moments.e_i2_sq + moments.e_i3_sq) / mean ** 2
    if channel_model == "iid":
        if literal_gamma:
            scale = moments.e_i1_sq / mean ** 2 / B
            params = ("gamma", (float(B), scale))
        else:
            params = ("gamma", (1.0 / nvar, nvar))
    elif channel_model == "geometric":
        params = ("gaussian", (1.0, nvar))
    else:
        raise ValueError(f"unknown channel model {channel_model!r}")
    return DecisionPdfModel(params[0], params[1], ns2, mq,
                            noise_floor=floor, noise_rate=rate,
                            conditional=conditional_noise)


def _i1_pdf(model: DecisionPdfModel, t: np.ndarray) -> np.ndarray:
    if model.i1_family == "gamma":
        k, theta = model.i1_params
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        pos = t > 0
        tp = t[pos]
        out[pos] = np.exp((k - 1.0) * np.log(tp) - tp / theta
                          - k * math.log(theta) - gammaln(k))
        return out
    mu, var = model.i1_params
    return np.exp(-(np.asarray(t) - mu) ** 2 / (2.0 * var)) / math.sqrt(2.0 * math.pi * var)


def _i1_support(model: DecisionPdfModel) -> tuple[float, float]:
    if model.i1_family == "gamma":
        k, theta = model.i1_params
        mean, std = k * theta, math.sqrt(k) * theta
        return 0.0, mean + 12.0 * std
    mu, var = model.i1_params
    std = math.sqrt(var)
    return mu - 8.0 * std, mu + 8.0 * std


def _sigma_half(model: DecisionPdfModel, t: np.ndarray) -> np.ndarray:
    """Per-real-dimension disturbance deviation at useful-term value t."""
    if model.conditional:
        s2 = model.noise_floor + model.noise_rate * np.maximum(np.asarray(t, float), 0.0)
    else:
        s2 = np.full_like(np.asarray(t, float), model.noise_variance)
    return np.sqrt(s2 / 2.0)


def sep_analytic(model: DecisionPdfModel, tol: float = 1e-5) -> SepResult:
    """Symbol-error probability of the nearest-PSK decision under the model.

    Integrates the convolved density over the reference wedge
    |v| <= u tan(pi/Mq), u > 0 and returns the complement.  A vanishing
    disturbance reduces to the probability that the useful term is negative.
    """
    if model.noise_variance == 0.0:
        if model.i1_family == "gamma":
            return SepResult(0.0, True, 0.0)
        mu, var = model.i1_params
        pe = 0.5 * math.erfc(mu / math.sqrt(2.0 * var))
        return SepResult(pe, True, 0.0)

    t_lo, t_hi = _i1_support(model)
    nodes, weights = np.polynomial.legendre.leggauss(240)
    t_nodes = 0.5 * (t_hi - t_lo) * nodes + 0.5 * (t_hi + t_lo)
    t_weights = 0.5 * (t_hi - t_lo) * weights * _i1_pdf(model, t_nodes)
    sh = _sigma_half(model, t_nodes)           # per-node disturbance deviation
    sh_max = float(sh.max())
    inv_norm = 1.0 / (2.0 * math.pi * sh * sh)  # bivariate normal normalization

    def integrand(u, v):
        # f_z(u, v) = int f_I1(t) N(u - t; s(t)^2) N(v; s(t)^2) dt
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        du = (u[..., None] - t_nodes) / sh
        dv = v[..., None] / sh
        return np.exp(-0.5 * (du * du + dv * dv)) @ (t_weights * inv_norm)

    v_cap = 8.5 * sh_max
    if model.mq == 2:
        v_bounds = lambda u: (-v_cap, v_cap)
    else:
        tan_half = math.tan(math.pi / model.mq)
        v_bounds = lambda u: (-min(u * tan_half, v_cap), min(u * tan_half, v_cap))

    u_max = t_hi + 9.0 * sh_max
    region = Region2D(0.0, u_max, v_bounds)
    res = integrate_2d(integrand, region, tol=tol)
    pe = min(max(1.0 - res.value, 0.0), 1.0)
    return SepResult(pe, res.converged, res.error_estimate)


def sep_empirical(decisions, truth) -> tuple[float, float]:
    """Error fraction with its binomial standard error."""
    decisions = np.asarray(decisions)
    truth = np.asarray(truth)
    if decisions.size == 0 or decisions.shape != truth.shape:
        raise ValueError("need at least one decision and matching shapes")
    n = decisions.size
    pe = float(np.count_nonzero(decisions != truth)) / n
    return pe, math.sqrt(max(pe * (1.0 - pe), 0.0) / n)


def sep_from_counts(n_errors: int, n_total: int) -> tuple[float, float]:
    """Error fraction and binomial standard error from streamed counts."""
    if n_total < 1:
        raise ValueError("need at least one decision")
    pe = n_errors / n_total
    return pe, math.sqrt(max(pe * (1.0 - pe), 0.0) / n_total)
