"""Single-user rates, the EDoF rate law and sparsity selection.

The EDoF rate law approximates the capacity of an ``N_BS x N_UE`` LoS
link with EDoF ``eps`` by ``eps * log2(1 + C / eps^2)``, where
``C = N_BS N_UE Pbar`` and ``Pbar`` is the receive SNR before beamforming.
Writing ``x = 1/eps`` gives ``R(x) = log2(1 + C x^2) / x``. This function
is unimodal, and its maximiser is governed by the root ``u*`` of
``ln(1 + u) = 2u / (1 + u)``, with ``x_opt = sqrt(u* / C)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .edof import LobeFit, LobeParams, edof_closed_form, lobe_gains
from .geometry import LinkGeometry

__all__ = [
    "PowerBudget",
    "RateRegime",
    "SparsityChoice",
    "rate_no_csit",
    "waterfill",
    "rate_waterfill",
    "rate_equal_power",
    "rate_edof_approx",
    "rate_law",
    "x_opt",
    "x_opt_approx",
    "max_rate_regime",
    "select_sparsity",
]

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class PowerBudget:
    """Transmit power, noise power and reference channel gain.

    Attributes
    ----------
    total_power : float
        Total transmit power ``P`` (linear).
    noise_power : float
        Noise power ``sigma^2`` (linear).
    beta : complex
        Reference channel gain used to derive the receive SNR.
    """

    total_power: float = 1.0
    noise_power: float = 1.0
    beta: complex = 1.0

    def __post_init__(self) -> None:
        if not self.total_power > 0 or not self.noise_power > 0:
            raise ValueError("total_power and noise_power must be positive")
        if abs(self.beta) <= 0:
            raise ValueError("beta must be nonzero")

    @property
    def snr(self) -> float:
        """Transmit SNR ``P / sigma^2``."""
        return self.total_power / self.noise_power

    @property
    def rx_snr(self) -> float:
        """Receive SNR before beamforming ``|beta|^2 P / sigma^2``."""
        return abs(self.beta) ** 2 * self.snr


@dataclass(frozen=True)
class RateRegime:
    """Operating regime of the EDoF rate law.

    ``regime`` is ``"low"``, ``"mid"`` or ``"high"``. ``boundaries`` holds the
    receive-SNR thresholds ``4/(N_min N_max)`` and ``4 N_min/N_max``.
    """

    regime: str
    boundaries: tuple[float, float]
    optimal_edof: float
    r_max: float


@dataclass(frozen=True)
class SparsityChoice:
    """Recommended sparsity and its split between the two arrays."""

    eta: float
    eta_bs: float
    eta_ue: float
    regime: str
    target_edof: float


def _squared_sv(H) -> np.ndarray:
    M = getattr(H, "entries", H)
    return np.linalg.svd(np.asarray(M, dtype=complex), compute_uv=False) ** 2


def rate_no_csit(H, budget: PowerBudget) -> float:
    """Rate with equal power on every transmit antenna.

    ``log2 det(I + P / (N_UE sigma^2) H H^H)`` evaluated through the singular
    values of ``H``.
    """
    M = np.asarray(getattr(H, "entries", H), dtype=complex)
    n_ue = M.shape[1]
    s2 = _squared_sv(M)
    return float(np.sum(np.log1p(budget.snr / n_ue * s2)) / _LN2)


def waterfill(singular_values, budget: PowerBudget) -> np.ndarray:
    """Capacity-optimal powers ``max(mu - sigma^2 / s_i^2, 0)`` summing to ``P``."""
    s2 = np.asarray(singular_values, dtype=float) ** 2
    if not np.any(s2 > 0):
        raise ValueError("water-filling needs at least one positive singular value")
    inv = np.full(s2.shape, np.inf)
    pos = s2 > 0
    with np.errstate(over="ignore"):  # tiny gains give an infinite cutoff
        inv[pos] = budget.noise_power / s2[pos]
    order = np.argsort(inv)
    sorted_inv = inv[order]
    P = budget.total_power
    n_active = 0
    mu = 0.0
    for k in range(1, int(pos.sum()) + 1):
        level = (P + sorted_inv[:k].sum()) / k
        if level > sorted_inv[k - 1]:
            n_active, mu = k, level
        else:
            break
    powers = np.zeros_like(s2)
    powers[order[:n_active]] = mu - sorted_inv[:n_active]
    return powers


def rate_waterfill(singular_values, budget: PowerBudget) -> float:
    """Rate ``sum log2(1 + P_i s_i^2 / sigma^2)`` under water-filling powers."""
    s2 = np.asarray(singular_values, dtype=float) ** 2
    p = waterfill(singular_values, budget)
    return float(np.sum(np.log1p(p * s2 / budget.noise_power)) / _LN2)


def rate_equal_power(singular_values, budget: PowerBudget, rank_tol: float = 1e-10) -> float:
    """Rate with equal power over the ``r_H`` nonzero sub-channels.

    Singular values below ``rank_tol`` times the largest are treated as zero.
    """
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0 or s.max() <= 0:
        return 0.0
    s2 = s[s > rank_tol * s.max()] ** 2
    return float(np.sum(np.log1p(budget.snr / s2.size * s2)) / _LN2)


def rate_edof_approx(edof: float, n_ue: int, n_bs: int, rx_snr: float) -> float:
    """EDoF rate law ``eps * log2(1 + N_BS N_UE Pbar / eps^2)``."""
    if edof < 1:
        raise ValueError(f"edof must be >= 1, got {edof}")
    return float(edof * math.log1p(n_bs * n_ue * rx_snr / edof**2) / _LN2)


def rate_law(x, C: float):
    """``R(x) = log2(1 + C x^2) / x`` for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    out = np.log1p(C * x * x) / (x * _LN2)
    return float(out) if out.ndim == 0 else out


def _u_star(tol: float = 1e-14) -> float:
    # Positive root of ln(1 + u) - 2u / (1 + u); the function is negative on
    # (0, u*) and positive beyond, so [1, 10] brackets the root.
    g = lambda u: math.log1p(u) - 2.0 * u / (1.0 + u)  # noqa: E731
    lo, hi = 1.0, 10.0
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


_U_STAR = _u_star()


def x_opt(C: float) -> float:
    """Maximiser of ``R(x)``: the root of ``2 C x^2 / (1 + C x^2) = ln(1 + C x^2)``.

    The equation depends on ``x`` only through ``u = C x^2``. Bisection on
    ``u`` therefore gives ``x_opt = sqrt(u* / C)``.
    """
    if not C > 0:
        raise ValueError(f"C must be > 0, got {C}")
    return math.sqrt(_U_STAR / C)


def x_opt_approx(C: float) -> float:
    """Large-``C`` approximation ``2 / sqrt(C)`` of :func:`x_opt`."""
    if not C > 0:
        raise ValueError(f"C must be > 0, got {C}")
    return 2.0 / math.sqrt(C)


def max_rate_regime(n_ue: int, n_bs: int, rx_snr: float) -> RateRegime:
    """Classify the receive SNR and return the best achievable EDoF-law rate.

    * ``Pbar < 4/(N_min N_max)``: compact array, ``eps = 1``, ``log2(1 + C)``;
    * ``Pbar > 4 N_min/N_max``: full multiplexing, ``eps = N_min``,
      ``N_min log2(1 + N_max Pbar / N_min)``;
    * otherwise: ``eps = sqrt(C)/2`` and ``(sqrt(C)/2) log2 5``.

    A receive SNR on a boundary counts as mid.
    """
    if not rx_snr > 0:
        raise ValueError("rx_snr must be positive")
    n_min, n_max = min(n_ue, n_bs), max(n_ue, n_bs)
    lo, hi = 4.0 / (n_min * n_max), 4.0 * n_min / n_max
    C = n_min * n_max * rx_snr
    if rx_snr < lo:
        return RateRegime("low", (lo, hi), 1.0, math.log2(1.0 + C))
    if rx_snr > hi:
        return RateRegime("high", (lo, hi), float(n_min), n_min * math.log2(1.0 + n_max * rx_snr / n_min))
    eps = math.sqrt(C) / 2.0
    return RateRegime("mid", (lo, hi), eps, eps * math.log2(5.0))


def _split(eta: float, bs_share: float) -> tuple[float, float]:
    eta_bs = eta**bs_share
    return eta_bs, eta / eta_bs


def select_sparsity(
    n_ue: int,
    n_bs: int,
    geo: LinkGeometry,
    rx_snr: float,
    fit: LobeFit,
    *,
    wavelength: float = 0.01,
    bs_share: float = 1.0,
    refit_gains: bool = True,
    grid_points: int = 2000,
) -> SparsityChoice:
    """Recommend an array sparsity for a single-user link.

    Parameters
    ----------
    n_ue, n_bs : int
        Array sizes.
    geo : LinkGeometry
        Link range and angles.
    rx_snr : float
        Receive SNR before beamforming.
    fit : LobeFit
        Lobe model of the setup; its ``alpha`` fixes the saturation sparsity
        ``4 alpha l / (lambda N_max cos nu)``.
    wavelength : float
        Carrier wavelength.
    bs_share : float
        Fraction (in log scale) of the sparsity placed at the BS; the default
        puts all of it there.
    refit_gains : bool
        When true, the closed-form EDoF of a candidate sparsity uses gains
        re-estimated at that sparsity by :func:`~sparse_mimo.edof.lobe_gains`.
        Otherwise the gains of ``fit`` are used as given.
    grid_points : int
        Resolution of the scan that brackets the mid-regime solution before
        bisection refines it.

    Returns
    -------
    SparsityChoice
        Low regime gives ``eta = 1``. High regime gives the saturation
        sparsity. Mid regime gives the smallest sparsity whose closed-form
        EDoF reaches ``sqrt(N_min N_max Pbar) / 2``.
    """
    if not 0.0 <= bs_share <= 1.0:
        raise ValueError("bs_share must lie in [0, 1]")
    regime = max_rate_regime(n_ue, n_bs, rx_snr)
    n_min, n_max = min(n_ue, n_bs), max(n_ue, n_bs)
    base = LobeParams(geo.range, wavelength, 1.0, geo.cos_nu, n_max, n_min)
    eta_sat = max(1.0, 4.0 * fit.alpha * geo.range / (wavelength * n_max * geo.cos_nu))

    if regime.regime == "low":
        eta = 1.0
    elif regime.regime == "high":
        eta = eta_sat
    else:
        target = regime.optimal_edof

        def eps(e: float) -> float:
            p = base.with_eta(e)
            f = lobe_gains(p, fit.alpha) if refit_gains else fit
            return edof_closed_form(p, f).value

        if eps(1.0) >= target:
            eta = 1.0
        else:
            grid = np.linspace(1.0, eta_sat, max(grid_points, 2))
            eta = eta_sat
            prev = 1.0
            for e in grid[1:]:
                if eps(float(e)) >= target:
                    lo, hi = prev, float(e)
                    while hi - lo > 1e-9 * hi:
                        mid = 0.5 * (lo + hi)
                        if eps(mid) >= target:
                            hi = mid
                        else:
                            lo = mid
                    eta = hi
                    break
                prev = float(e)
    eta_bs, eta_ue = _split(eta, bs_share)
    return SparsityChoice(float(eta), float(eta_bs), float(eta_ue), regime.regime, regime.optimal_edof)
