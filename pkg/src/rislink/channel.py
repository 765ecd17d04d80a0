"""Channel generation for the BS-RIS and RIS-UE links.

Two small-scale models: IID Rayleigh entries per subcarrier, and a clustered
geometric wideband model built from steering vectors, exponential cluster
delays/powers, and per-ray angle draws.  UE mobility enters through a
Bessel-shaped temporal correlation of the RIS-UE link; the BS-RIS link is
quasi-static within a frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from rislink.mathkit import RngStream, bessel_j0, sample_angles, sample_complex_gaussian, wrap_angle

C_LIGHT = 3.0e8  # m/s, convention used for Doppler and wavelength bookkeeping

CHANNEL_MODELS = ("iid", "geometric")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass
class Scenario:
    """Full experiment description: geometry, arrays, numerology, statistics, powers.

    Angular spreads are in degrees, gains in dB, the delay spread in seconds.
    The delay-spread default is taken verbatim from the experiment table it
    reproduces; it is orders of magnitude above a typical indoor value and is
    deliberately NOT corrected here (see README).
    """

    bs_pos: tuple = (0.0, 0.0, 3.0)
    ris_pos: tuple = (3.0, 0.0, 3.0)
    ue_pos: tuple = (6.0, 1.0, 1.0)
    fc: float = 3.5e9
    delta_f: float = 30e3
    K: int = 1024
    L_cp: int = 72
    N: int = 140
    B_h: int = 2
    B_v: int = 2
    M_h: int = 8
    M_v: int = 8
    d_bs_h: float = 0.5
    d_bs_v: float = 0.5
    d_ris_h: float = 0.5
    d_ris_v: float = 0.5
    L_alpha_db: float = -48.0
    L_beta_db: float = -59.0
    sigma_alpha2: float = 1.0
    sigma_beta2: float = 1.0
    C_alpha: int = 12
    R_alpha: int = 20
    C_beta: int = 12
    R_beta: int = 20
    ds: float = 0.15e-3
    asd: float = 7.0
    asa: float = 12.0
    zsd: float = 25.0
    zsa: float = 30.0
    speed_kmh: float = 0.0
    noise_var_dbw: float = -116.0
    px_dbw: float = 0.0

    def __post_init__(self):
        if self.K <= 0:
            raise ValueError("K must be > 0")
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if self.L_cp < 0:
            raise ValueError("L_cp must be >= 0")
        for name in ("B_h", "B_v", "M_h", "M_v", "C_alpha", "R_alpha", "C_beta", "R_beta"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("asd", "asa", "zsd", "zsa", "ds"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def B(self) -> int:
        return self.B_h * self.B_v

    @property
    def M(self) -> int:
        return self.M_h * self.M_v

    @property
    def L_alpha(self) -> float:
        return db_to_linear(self.L_alpha_db)

    @property
    def L_beta(self) -> float:
        return db_to_linear(self.L_beta_db)

    @property
    def px(self) -> float:
        return db_to_linear(self.px_dbw)

    @property
    def sigma_v2(self) -> float:
        if self.noise_var_dbw == -math.inf:
            return 0.0
        return db_to_linear(self.noise_var_dbw)

    @property
    def doppler_hz(self) -> float:
        return (self.speed_kmh / 3.6) * self.fc / C_LIGHT

    def with_updates(self, **kwargs) -> "Scenario":
        return replace(self, **kwargs)


@dataclass
class RayGeometry:
    """Per-(cluster, ray) angles for one array side, radians.

    Zenith angles live in [0, pi], azimuths in (-pi, pi].  Arrays have shape
    (clusters, rays).
    """

    azimuth: np.ndarray
    zenith: np.ndarray


@dataclass
class LinkClusters:
    """Cluster/ray ground truth for one link of the geometric model."""

    delays: np.ndarray            # (C,) in samples, fractional kept
    powers: np.ndarray            # (C,) normalized so sum == 1
    coeffs: np.ndarray            # (C, R) fading draws at the first symbol
    rx: RayGeometry               # arrival side of this link
    tx: Optional[RayGeometry]     # departure side (None for the single-antenna UE)


@dataclass
class ChannelRealization:
    """One frame's channel: quasi-static H plus the time-varying g.

    H has shape (K, B, M) and is identical for every OFDM symbol of the frame;
    g has shape (K, N, M).  For the geometric model the cluster ground truth
    of both links is attached.
    """

    H: np.ndarray
    g: np.ndarray
    sigma_h2: float
    sigma_g2: float
    alpha_clusters: Optional[LinkClusters] = None
    beta_clusters: Optional[LinkClusters] = None

    def h_at(self, k: int, n: int = 0) -> np.ndarray:
        """BS-RIS matrix at subcarrier k; constant in n by the quasi-static contract."""
        return self.H[k]

    def g_at(self, k: int, n: int) -> np.ndarray:
        return self.g[k, n]

    @property
    def K(self) -> int:
        return self.H.shape[0]

    @property
    def N(self) -> int:
        return self.g.shape[1]


def steering_vector(n_h: int, n_v: int, d_h: float, d_v: float,
                    azimuth, zenith) -> np.ndarray:
    """Uniform-rectangular-array response for the given direction(s).

    Element (b_h, b_v) sits at index n_h*(b_v-1) + b_h (1-based, horizontal
    fast) and responds with
    exp(j 2 pi (b_h-1) d_h sin(zen) cos(az)) * exp(j 2 pi (b_v-1) d_v sin(zen) sin(az)).
    Spacings are in wavelengths.  Scalar angles give a (n_h*n_v,) vector;
    arrays of shape S give (n_h*n_v,) + S.
    """
    if n_h < 1 or n_v < 1:
        raise ValueError("array dimensions must be >= 1")
    az = np.asarray(azimuth, dtype=float)
    zen = np.asarray(zenith, dtype=float)
    u = np.sin(zen) * np.cos(az)
    v = np.sin(zen) * np.sin(az)
    bh = np.arange(n_h).reshape((n_h, 1) + (1,) * u.ndim)
    bv = np.arange(n_v).reshape((1, n_v) + (1,) * u.ndim)
    phase = 2j * np.pi * (bh * d_h * u + bv * d_v * v)
    resp = np.exp(phase)  # (n_h, n_v, ...)
    return resp.reshape((n_h * n_v,) + u.shape, order="F")


def doppler_correlation(delta_n: int, f_d: float, delta_f: float,
                        K: int, L_cp: int) -> float:
    """Temporal correlation between OFDM symbols delta_n apart under mobility."""
    if delta_f <= 0 or K <= 0:
        raise ValueError("delta_f and K must be > 0")
    arg = 2.0 * math.pi * f_d * (delta_n / delta_f) * (1.0 + L_cp / K)
    return abs(bessel_j0(arg))


def temporal_coloring(N: int, f_d: float, delta_f: float, K: int, L_cp: int,
                      signed: bool = False) -> np.ndarray:
    """Lower-triangular factor of the lag-correlation Toeplitz matrix.

    Used to color white draws across the N symbols of a frame.  The default
    takes the correlation magnitude at each lag; signed=True uses the signed
    Bessel values instead.  The matrix is regularized if the factorization
    fails.
    """
    lags = np.arange(N)
    arg = 2.0 * np.pi * f_d * (lags / delta_f) * (1.0 + L_cp / K)
    corr = np.array([bessel_j0(a) for a in arg])
    if not signed:
        corr = np.abs(corr)
    from scipy.linalg import toeplitz

    R = toeplitz(corr)
    jitter = 1e-12
    for _ in range(6):
        try:
            return np.linalg.cholesky(R + jitter * np.eye(N))
        except np.linalg.LinAlgError:
            jitter *= 100.0
    # last resort: eigenvalue clip keeps the factor real and PSD
    w, V = np.linalg.eigh(R)
    w = np.clip(w, 0.0, None)
    return V @ np.diag(np.sqrt(w))


def _los_angles(src, dst) -> tuple[float, float]:
    d = np.asarray(dst, dtype=float) - np.asarray(src, dtype=float)
    r = np.linalg.norm(d)
    if r == 0:
        raise ValueError("coincident node positions")
    return math.atan2(d[1], d[0]), math.acos(d[2] / r)


def _fold_zenith(z):
    """Fold wrapped angles into the zenith range [0, pi]."""
    return np.abs(wrap_angle(z))


def gen_iid(scenario: Scenario, rng: RngStream, *, flat_in_k: bool = False,
            signed_doppler: bool = False) -> ChannelRealization:
    """IID Rayleigh channel per subcarrier and element.

    H entries are CN(0, L_alpha*sigma_alpha2) and frame-constant; g entries
    are CN(0, L_beta*sigma_beta2) colored across symbols by the mobility
    correlation.  flat_in_k reuses one draw for every subcarrier.
    """
    sc = scenario
    K_eff = 1 if flat_in_k else sc.K
    var_h = sc.L_alpha * sc.sigma_alpha2
    var_g = sc.L_beta * sc.sigma_beta2

    H = sample_complex_gaussian(rng, var_h, (K_eff, sc.B, sc.M))
    if flat_in_k:
        H = np.broadcast_to(H, (sc.K, sc.B, sc.M)).copy()

    f_d = sc.doppler_hz
    if f_d == 0.0:
        g0 = sample_complex_gaussian(rng, var_g, (K_eff, 1, sc.M))
        g = np.tile(g0, (1, sc.N, 1))
    else:
        white = sample_complex_gaussian(rng, var_g, (K_eff, sc.M, sc.N))
        L = temporal_coloring(sc.N, f_d, sc.delta_f, sc.K, sc.L_cp, signed=signed_doppler)
        g = np.einsum("nt,kmt->knm", L, white)
    if flat_in_k:
        g = np.broadcast_to(g, (sc.K, sc.N, sc.M)).copy()

    return ChannelRealization(H=H, g=g, sigma_h2=var_h, sigma_g2=var_g)


def _draw_clusters(sc: Scenario, rng: RngStream, n_clusters: int) -> tuple[np.ndarray, np.ndarray]:
    """Exponential delays (samples, fractional) and normalized exponential powers."""
    ds_samples = sc.ds * sc.K * sc.delta_f
    if ds_samples == 0.0:
        delays = np.zeros(n_clusters)
        powers = np.full(n_clusters, 1.0 / n_clusters)
        return delays, powers
    delays = rng.generator.exponential(ds_samples, size=n_clusters)
    powers = np.exp(-delays / ds_samples)
    powers /= powers.sum()
    return delays, powers


def _draw_rays(sc: Scenario, rng: RngStream, mean_az: float, mean_zen: float,
               az_spread_deg: float, zen_spread_deg: float,
               n_clusters: int, n_rays: int) -> RayGeometry:
    """Cluster means around the LoS direction, ray offsets at a tenth of the spread."""
    az_s = math.radians(az_spread_deg)
    zen_s = math.radians(zen_spread_deg)
    caz = mean_az + sample_angles(rng, 0.0, az_s, "wrapped-gaussian", n_clusters)
    czen = mean_zen + sample_angles(rng, 0.0, zen_s, "laplacian", n_clusters)
    raz = sample_angles(rng, 0.0, az_s / 10.0, "wrapped-gaussian", n_clusters * n_rays)
    rzen = sample_angles(rng, 0.0, zen_s / 10.0, "laplacian", n_clusters * n_rays)
    az = wrap_angle(caz[:, None] + raz.reshape(n_clusters, n_rays))
    zen = _fold_zenith(czen[:, None] + rzen.reshape(n_clusters, n_rays))
    return RayGeometry(azimuth=az, zenith=zen)


def gen_geometric(scenario: Scenario, rng: RngStream, *,
                  signed_doppler: bool = False) -> ChannelRealization:
    """Clustered geometric wideband channel for both links.

    Each link is a superposition over (cluster, ray) of steering-vector
    responses weighted by CN(0, sigma_c^2/R) coefficients and a per-cluster
    frequency phase ramp exp(-j 2 pi (k-1) tau_c / K).  The RIS-UE
    coefficients evolve across symbols with the mobility correlation.
    """
    sc = scenario
    ks = np.arange(sc.K)

    # BS-RIS link: arrival at the BS, departure from the RIS
    az_bs, zen_bs = _los_angles(sc.bs_pos, sc.ris_pos)
    az_rd, zen_rd = _los_angles(sc.ris_pos, sc.bs_pos)
    d_a, p_a = _draw_clusters(sc, rng, sc.C_alpha)
    rx_a = _draw_rays(sc, rng, az_bs, zen_bs, sc.asa, sc.zsa, sc.C_alpha, sc.R_alpha)
    tx_a = _draw_rays(sc, rng, az_rd, zen_rd, sc.asd, sc.zsd, sc.C_alpha, sc.R_alpha)
    var_a = np.repeat(p_a, sc.R_alpha) / sc.R_alpha
    alpha = sample_complex_gaussian(rng, 1.0, sc.C_alpha * sc.R_alpha) * np.sqrt(var_a)

    a_bs = steering_vector(sc.B_h, sc.B_v, sc.d_bs_h, sc.d_bs_v,
                           rx_a.azimuth.ravel(), rx_a.zenith.ravel())     # (B, CR)
    a_rd = steering_vector(sc.M_h, sc.M_v, sc.d_ris_h, sc.d_ris_v,
                           tx_a.azimuth.ravel(), tx_a.zenith.ravel())     # (M, CR)
    ramp_a = np.exp(-2j * np.pi * np.outer(ks, np.repeat(d_a, sc.R_alpha)) / sc.K)  # (K, CR)
    H = math.sqrt(sc.L_alpha) * np.einsum("bt,mt,t,kt->kbm",
                                          a_bs, a_rd.conj(), alpha, ramp_a, optimize=True)

    # RIS-UE link: arrival at the RIS; the single-antenna UE has no array side
    az_ra, zen_ra = _los_angles(sc.ris_pos, sc.ue_pos)
    d_b, p_b = _draw_clusters(sc, rng, sc.C_beta)
    rx_b = _draw_rays(sc, rng, az_ra, zen_ra, sc.asa, sc.zsa, sc.C_beta, sc.R_beta)
    var_b = np.repeat(p_b, sc.R_beta) / sc.R_beta
    n_rays_b = sc.C_beta * sc.R_beta
    f_d = sc.doppler_hz
    if f_d == 0.0:
        beta0 = sample_complex_gaussian(rng, 1.0, n_rays_b) * np.sqrt(var_b)
        beta = np.tile(beta0[:, None], (1, sc.N))
    else:
        white = sample_complex_gaussian(rng, 1.0, (n_rays_b, sc.N))
        L = temporal_coloring(sc.N, f_d, sc.delta_f, sc.K, sc.L_cp, signed=signed_doppler)
        beta = (white @ L.T) * np.sqrt(var_b)[:, None]

    a_ra = steering_vector(sc.M_h, sc.M_v, sc.d_ris_h, sc.d_ris_v,
                           rx_b.azimuth.ravel(), rx_b.zenith.ravel())     # (M, CR)
    ramp_b = np.exp(-2j * np.pi * np.outer(ks, np.repeat(d_b, sc.R_beta)) / sc.K)   # (K, CR)
    if f_d == 0.0:
        # static UE: build one symbol and replicate so equality across n is exact
        g0 = math.sqrt(sc.L_beta) * np.einsum("mt,t,kt->km", a_ra, beta[:, 0], ramp_b,
                                              optimize=True)
        g = np.repeat(g0[:, None, :], sc.N, axis=1)
    else:
        g = math.sqrt(sc.L_beta) * np.einsum("mt,tn,kt->knm", a_ra, beta, ramp_b,
                                             optimize=True)

    alpha_cl = LinkClusters(delays=d_a, powers=p_a,
                            coeffs=alpha.reshape(sc.C_alpha, sc.R_alpha),
                            rx=rx_a, tx=tx_a)
    beta_cl = LinkClusters(delays=d_b, powers=p_b,
                           coeffs=beta[:, 0].reshape(sc.C_beta, sc.R_beta),
                           rx=rx_b, tx=None)
    return ChannelRealization(H=H, g=g,
                              sigma_h2=sc.L_alpha, sigma_g2=sc.L_beta,
                              alpha_clusters=alpha_cl, beta_clusters=beta_cl)


def average_gains(scenario: Scenario, model: str) -> tuple[float, float]:
    """Average per-link gains (sigma_h^2, sigma_g^2) for the given model."""
    if model not in CHANNEL_MODELS:
        raise ValueError(f"unknown channel model {model!r}")
    if model == "iid":
        return (scenario.L_alpha * scenario.sigma_alpha2,
                scenario.L_beta * scenario.sigma_beta2)
    # geometric cluster powers are normalized to sum to one per link
    return scenario.L_alpha, scenario.L_beta
