"""Multi-user uplink analysis: far-field MRT/MRC and near-field sum rates.

In the far field every user channel is rank one,
``H_k = beta_k b(phi_k) a(theta_k)^T``. Under MRT at the users and MRC at the
BS, the interference between users ``i`` and ``k`` is governed by the
normalised beam pattern

    G(Delta) = |sin(pi N eta Delta / 2) / (N sin(pi eta Delta / 2))|^2,

with ``Delta = sin(phi_k) - sin(phi_i)``, ``N = N_BS`` and ``eta = eta_BS``.
The pattern has grating lobes at ``Delta = 2k / eta``. A two-level model of
it (main-lobe gain ``G_m`` within half-width ``alpha / (N eta)`` of every lobe
center, ``G_s`` elsewhere) turns the per-user rate into a binomial law in the
number of colliding interferers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import binom

from .channel import (
    ChannelMatrix,
    los_channel,
    make_rng,
    nlos_channel,
    one_ring_scatterers,
    rician_combine,
)
from .edof import _partition_fit
from .geometry import ArrayPair, LinkGeometry
from .rate import PowerBudget

__all__ = [
    "UserPlacement",
    "TwoLobeBeamFit",
    "place_users",
    "beam_pattern",
    "far_channels",
    "mrt_mrc_vectors",
    "mrt_mrc_sinr",
    "general_sinr",
    "sum_rate_far",
    "collision_probability",
    "collision_probability_mc",
    "sparse_advantage_interval",
    "fit_beam_pattern",
    "rate_cdf_closed",
    "rate_cdf_two_lobe_mc",
    "near_field_user_rate",
    "sum_rate_near",
    "near_user_channels",
    "angle_diff_histogram",
]

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class UserPlacement:
    """Positions of ``K`` users at a common range.

    ``law`` is ``"sin"`` (``sin(phi)`` uniform on ``[-sin phi_max, sin phi_max]``)
    or ``"angle"`` (``phi`` uniform on ``[-phi_max, phi_max]``).
    """

    geos: tuple[LinkGeometry, ...]
    phi_max: float
    law: str = "sin"

    def __post_init__(self) -> None:
        if len(self.geos) < 1:
            raise ValueError("need at least one user")
        if not 0 < self.phi_max <= math.pi / 2 + 1e-12:
            raise ValueError("phi_max must lie in (0, pi/2]")
        if self.law not in ("sin", "angle"):
            raise ValueError(f"law must be 'sin' or 'angle', got {self.law!r}")

    @property
    def n_users(self) -> int:
        return len(self.geos)

    @property
    def sin_bearings(self) -> np.ndarray:
        return np.sin([g.bearing for g in self.geos])

    def with_range(self, distance: float) -> "UserPlacement":
        geos = tuple(LinkGeometry(distance, g.bearing, g.tilt) for g in self.geos)
        return UserPlacement(geos, self.phi_max, self.law)


@dataclass(frozen=True)
class TwoLobeBeamFit:
    """Two-level model of the beam pattern: ``g_main`` in lobes, ``g_side`` elsewhere."""

    g_main: float
    g_side: float
    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.g_side < self.g_main <= 1.0 + 1e-12:
            raise ValueError(f"need 0 <= g_side < g_main <= 1, got {self.g_side}, {self.g_main}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


def _draw_sin(rng, K: int, phi_max: float, law: str) -> np.ndarray:
    if law == "sin":
        s = math.sin(phi_max)
        return rng.uniform(-s, s, K)
    if law == "angle":
        return np.sin(rng.uniform(-phi_max, phi_max, K))
    raise ValueError(f"law must be 'sin' or 'angle', got {law!r}")


def place_users(
    K: int,
    distance: float,
    phi_max: float,
    law: str = "sin",
    seed=None,
    tilt: float = 0.0,
) -> UserPlacement:
    """Draw ``K`` i.i.d. user bearings at a common range."""
    if K < 1:
        raise ValueError("K must be >= 1")
    rng = make_rng(seed)
    x = _draw_sin(rng, K, phi_max, law)
    geos = tuple(LinkGeometry(distance, float(np.arcsin(v)), tilt) for v in x)
    return UserPlacement(geos, phi_max, law)


def beam_pattern(delta, n_bs: int, eta_bs: float):
    """Normalised BS beam pattern; equals 1 at every lobe center."""
    d = np.asarray(delta, dtype=float)
    x = 0.5 * math.pi * eta_bs * d
    s = np.sin(x)
    sing = np.abs(s) < 1e-12
    safe = np.where(sing, 1.0, n_bs * s)
    out = np.where(sing, 1.0, (np.sin(n_bs * x) / safe) ** 2)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def far_channels(placement: UserPlacement, pair: ArrayPair, beta: complex | None = None) -> list[ChannelMatrix]:
    """Plane-wave LoS channels of all users."""
    return [los_channel(pair, g, beta, "far") for g in placement.geos]


def mrt_mrc_vectors(channels: Sequence[ChannelMatrix], rank_tol: float = 1e-8):
    """Unit-norm MRT (transmit) and MRC (receive) vectors of rank-one channels.

    Returns ``(tx, rx)`` lists with ``H_k = s_k rx_k tx_k^H``, built from
    the dominant singular pair.

    Raises
    ------
    ValueError
        If a channel has a second singular value above ``rank_tol`` times
        the first.
    """
    tx, rx = [], []
    for k, H in enumerate(channels):
        M = getattr(H, "entries", H)
        U, s, Vh = np.linalg.svd(np.asarray(M, dtype=complex))
        if s.size > 1 and s[1] > rank_tol * s[0]:
            raise ValueError(f"channel {k} is not rank one (s2/s1 = {s[1] / s[0]:.3g})")
        rx.append(U[:, 0])
        tx.append(Vh[0].conj())
    return tx, rx


def _rx_snrs(budget: PowerBudget, K: int, powers) -> np.ndarray:
    if powers is None:
        p = np.full(K, budget.total_power)
    else:
        p = np.asarray(powers, dtype=float)
        if p.shape != (K,):
            raise ValueError(f"need {K} per-user powers")
    return abs(budget.beta) ** 2 * p / budget.noise_power


def mrt_mrc_sinr(
    placement: UserPlacement,
    pair: ArrayPair,
    budget: PowerBudget,
    i: int,
    powers=None,
) -> float:
    """SINR of user ``i`` under MRT/MRC beamforming in the far field.

    ``Pbar_i N_UE N_BS / (N_UE N_BS sum_{k != i} Pbar_k G(Delta_ik) + 1)``
    with ``Pbar_k = |beta|^2 P_k / sigma^2`` and ``P_k = budget.total_power``
    unless ``powers`` is given.
    """
    K = placement.n_users
    pb = _rx_snrs(budget, K, powers)
    x = placement.sin_bearings
    n = pair.ue.n_elements * pair.bs.n_elements
    mask = np.arange(K) != i
    g = beam_pattern(x[mask] - x[i], pair.bs.n_elements, pair.bs.sparsity)
    interference = float(np.sum(pb[mask] * np.atleast_1d(g)))
    return float(pb[i] * n / (n * interference + 1.0))


def general_sinr(
    channels: Sequence[ChannelMatrix],
    tx_vectors,
    rx_vectors,
    powers,
    noise_power: float,
    i: int,
) -> float:
    """SINR of user ``i`` for arbitrary unit-norm beamformers.

    ``P_i |v_i^H H_i t_i|^2 / (sum_{k != i} P_k |v_i^H H_k t_k|^2 + sigma^2)``.
    """
    v = np.asarray(rx_vectors[i], dtype=complex)
    p = np.asarray(powers, dtype=float)

    def gain(k: int) -> float:
        M = getattr(channels[k], "entries", channels[k])
        return float(abs(v.conj() @ (np.asarray(M) @ np.asarray(tx_vectors[k]))) ** 2)

    signal = p[i] * gain(i)
    interference = sum(p[k] * gain(k) for k in range(len(channels)) if k != i)
    return float(signal / (interference + noise_power))


def sum_rate_far(
    placement: UserPlacement,
    pair: ArrayPair,
    budget: PowerBudget,
    powers=None,
) -> float:
    """Far-field MRT/MRC sum rate ``sum_i log2(1 + SINR_i)``.

    Evaluates :func:`mrt_mrc_sinr` for all users at once through the matrix
    of pairwise beam-pattern gains.
    """
    K = placement.n_users
    pb = _rx_snrs(budget, K, powers)
    x = placement.sin_bearings
    n = pair.ue.n_elements * pair.bs.n_elements
    G = np.atleast_2d(beam_pattern(x[None, :] - x[:, None], pair.bs.n_elements, pair.bs.sparsity))
    np.fill_diagonal(G, 0.0)
    sinr = pb * n / (n * (G @ pb) + 1.0)
    return float(np.sum(np.log1p(sinr)) / _LN2)


def collision_probability(eta_bs: float, n_bs: int, phi_max: float, alpha: float) -> float:
    """Probability that two users fall in a common lobe.

    Users have ``sin(phi)`` uniform on ``[-s, s]`` with ``s = sin(phi_max)``.
    A collision means ``|Delta - 2k/eta| < alpha / (N eta)`` for some
    integer ``k``. With ``n = floor(eta s - alpha / (2N))``:

        p = alpha ((2n + 1) s - alpha / (4 N eta) - n (n + 1) / eta) / (s^2 N eta)

    and ``p = 1`` when ``s < alpha / (2 N eta)``.
    """
    s = math.sin(phi_max)
    if s <= 0:
        raise ValueError("phi_max must be positive")
    Ne = n_bs * eta_bs
    if s < alpha / (2.0 * Ne):
        return 1.0
    n = math.floor(eta_bs * s - alpha / (2.0 * n_bs))
    p = alpha * ((2 * n + 1) * s - alpha / (4.0 * Ne) - n * (n + 1) / eta_bs) / (s * s * Ne)
    return float(min(max(p, 0.0), 1.0))


def _in_lobe(delta: np.ndarray, n_bs: int, eta_bs: float, alpha: float) -> np.ndarray:
    period = 2.0 / eta_bs
    off = np.abs(delta - np.round(delta / period) * period)
    return off < alpha / (n_bs * eta_bs)


def collision_probability_mc(
    eta_bs: float,
    n_bs: int,
    phi_max: float,
    alpha: float,
    pairs: int = 10**6,
    seed=None,
) -> float:
    """Monte Carlo frequency of lobe collisions between independent user pairs."""
    rng = make_rng(seed)
    s = math.sin(phi_max)
    d = rng.uniform(-s, s, pairs) - rng.uniform(-s, s, pairs)
    return float(np.mean(_in_lobe(d, n_bs, eta_bs, alpha)))


def sparse_advantage_interval(eta_bs: float, n_bs: int, alpha: float) -> tuple[float, float]:
    """Range of ``sin(phi_max)`` over which sparsity lowers the collision probability.

    Returns ``(alpha / (2 N eta), (eta + sqrt(eta^2 - (a/N)(eta^2 + 1 - a/N))) / (2 eta))``.
    """
    r = alpha / n_bs
    lower = alpha / (2.0 * n_bs * eta_bs)
    disc = eta_bs**2 - r * (eta_bs**2 + 1.0 - r)
    upper = (eta_bs + math.sqrt(max(disc, 0.0))) / (2.0 * eta_bs)
    return lower, upper


def fit_beam_pattern(
    n_bs: int,
    eta_bs: float,
    phi_max: float,
    *,
    n_samples: int = 20001,
    alpha_step: float = 0.01,
) -> TwoLobeBeamFit:
    """Two-lobe least-squares fit of the beam pattern.

    Samples cover the support ``|Delta| <= 2 sin(phi_max)`` of the angle
    difference. Each sample is weighted by the triangular density of
    ``Delta``, the continuous analogue of lag multiplicities. Lobes have
    half-width ``alpha / (N eta)``.
    """
    s = math.sin(phi_max)
    d = np.linspace(-2 * s, 2 * s, n_samples)
    w = 2 * s - np.abs(d)
    g = beam_pattern(d, n_bs, eta_bs)
    period = 2.0 / eta_bs
    offsets = np.abs(d - np.round(d / period) * period) * (n_bs * eta_bs)
    alpha, gm, gs = _partition_fit(offsets, g, w, "linear", 1e-12, alpha_step)
    return TwoLobeBeamFit(min(gm, 1.0), gs, alpha)


def _cdf_threshold(r_bar, K: int, rx_snr: float, fit: TwoLobeBeamFit, array_gain: float):
    with np.errstate(divide="ignore"):
        y = 1.0 / np.expm1(np.asarray(r_bar, dtype=float) * _LN2) - 1.0 / (rx_snr * array_gain)
    return np.floor((y - (K - 1) * fit.g_side) / (fit.g_main - fit.g_side))


def rate_cdf_closed(
    r_bar,
    K: int,
    rx_snr: float,
    fit: TwoLobeBeamFit,
    n_bs: int,
    *,
    eta_bs: float,
    phi_max: float,
    n_ue: int = 1,
):
    """Binomial CDF of a user's MRT/MRC rate under the two-lobe interference model.

    ``F(R) = 1 - sum_{q=0}^{T} C(K-1, q) p^q (1-p)^{K-1-q}``. Here
    ``T = floor((Y - (K-1) G_s) / (G_m - G_s))``,
    ``Y = 1/(2^R - 1) - 1/(Pbar N)``, ``N = n_ue * n_bs`` is the beamforming
    gain and ``p`` is :func:`collision_probability` at ``fit.alpha``. For
    ``T < 0`` the CDF is 1; for ``T >= K-1`` it is 0.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    rb = np.asarray(r_bar, dtype=float)
    p = collision_probability(eta_bs, n_bs, phi_max, fit.alpha)
    T = _cdf_threshold(rb, K, rx_snr, fit, n_ue * n_bs)
    if K == 1:
        # No interferers: the rate is deterministic, log2(1 + Pbar N).
        out = (rb >= math.log2(1.0 + rx_snr * n_ue * n_bs)).astype(float)
    else:
        out = np.where(T < 0, 1.0, np.where(T >= K - 1, 0.0, 1.0 - binom.cdf(np.clip(T, 0, K - 1), K - 1, p)))
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def rate_cdf_two_lobe_mc(
    r_bar,
    K: int,
    rx_snr: float,
    fit: TwoLobeBeamFit,
    n_bs: int,
    *,
    eta_bs: float,
    phi_max: float,
    n_ue: int = 1,
    trials: int = 10**5,
    seed=None,
):
    """Monte Carlo CDF of one user's rate with two-level interference gains.

    Each trial draws ``K`` users with ``sin(phi)`` uniform. The interference
    seen by user 0 from user ``k`` is ``G_m`` when the pair collides in a lobe
    and ``G_s`` otherwise. The rate is
    ``log2(1 + Pbar N / (Pbar N I + 1))``.
    """
    rng = make_rng(seed)
    s = math.sin(phi_max)
    x = rng.uniform(-s, s, (trials, K))
    d = x[:, 1:] - x[:, :1]
    hits = _in_lobe(d, n_bs, eta_bs, fit.alpha).sum(axis=1)
    interference = hits * fit.g_main + (K - 1 - hits) * fit.g_side
    n = n_ue * n_bs
    rates = np.log2(1.0 + rx_snr * n / (rx_snr * n * interference + 1.0))
    rates.sort()
    rb = np.asarray(r_bar, dtype=float)
    out = np.searchsorted(rates, rb, side="right") / trials
    return float(out) if np.ndim(out) == 0 else out


def near_field_user_rate(channels: Sequence[ChannelMatrix], budget: PowerBudget, k: int) -> float:
    """Rate of user ``k`` without transmit CSI, treating other users as noise.

    ``log2 det(I + H_k H_k^H (sum_{i != k} H_i H_i^H + sigma^2 N_UE / P I)^-1)``.
    """
    mats = [np.asarray(getattr(H, "entries", H), dtype=complex) for H in channels]
    shape = mats[0].shape
    if any(M.shape != shape for M in mats):
        raise ValueError("all channels must share one shape")
    n_bs, n_ue = shape
    # Scale by P / (sigma^2 N_UE) so that the noise term is the identity.
    c = budget.snr / n_ue
    B = np.eye(n_bs, dtype=complex)
    for i, M in enumerate(mats):
        if i != k:
            B += c * (M @ M.conj().T)
    A = c * (mats[k] @ mats[k].conj().T)
    _, logdet_ab = np.linalg.slogdet(A + B)
    _, logdet_b = np.linalg.slogdet(B)
    return float(max(logdet_ab - logdet_b, 0.0) / _LN2)


def sum_rate_near(channels: Sequence[ChannelMatrix], budget: PowerBudget) -> float:
    """Sum of :func:`near_field_user_rate` over all users."""
    return float(sum(near_field_user_rate(channels, budget, k) for k in range(len(channels))))


def near_user_channels(
    placement: UserPlacement,
    pair: ArrayPair,
    *,
    rician_factor: float = 100.0,
    ring_radius: float = 3.0,
    n_paths: int = 5,
    seed=None,
    distance_model: str = "exact",
    beta: complex | None = None,
) -> list[ChannelMatrix]:
    """Rician channels (spherical-wave LoS plus one-ring scattering) for all users."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = root.spawn(placement.n_users)
    out = []
    for g, ss in zip(placement.geos, seeds):
        los = los_channel(pair, g, beta, distance_model)
        if math.isinf(rician_factor):
            out.append(los)
            continue
        sc = one_ring_scatterers(g, ring_radius, n_paths, ss, rician_factor)
        out.append(rician_combine(los, nlos_channel(pair, g, sc), rician_factor))
    return out


def angle_diff_histogram(
    phi_max: float,
    law: str = "sin",
    bins: int = 50,
    trials: int = 10**5,
    seed=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Empirical density of ``Delta = sin(phi_k) - sin(phi_i)`` over random user pairs.

    Returns ``(density, edges)`` over the support ``[-2 sin phi_max, 2 sin phi_max]``.
    """
    rng = make_rng(seed)
    a = _draw_sin(rng, trials, phi_max, law)
    b = _draw_sin(rng, trials, phi_max, law)
    s = math.sin(phi_max)
    density, edges = np.histogram(a - b, bins=bins, range=(-2 * s, 2 * s), density=True)
    return density, edges
