"""Effective degrees of freedom (EDoF) of sparse MIMO links.

Two routes are provided:

* the exact EDoF ``(sum s_i^2)^2 / sum s_i^4`` from the singular values of
  a channel matrix;
* a closed form built on the lobe pattern ``f_eta(Delta)`` of the channel
  correlation. The pattern is replaced by a two-level ("two-lobe") model:
  gain ``G_H`` within a fraction ``alpha`` of the main/grating lobe
  half-width and ``G_L`` elsewhere. Each index lag ``Delta`` is weighted by
  its multiplicity ``w(Delta) = N_min - |Delta|``.

The lobe model is parameterised by :class:`LobeParams`. The lobe half-width
used by the model is ``t = alpha * null``, where
``null = 4 l / (lambda eta N_max cos nu)`` is the first null of the main lobe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .channel import ChannelMatrix
from .geometry import ArrayPair, LinkGeometry

__all__ = [
    "LobeParams",
    "LobeFit",
    "LobeGeometry",
    "EdofBreakdown",
    "edof_exact",
    "dominant_singular_count",
    "correlation_matrix",
    "f_eta",
    "lobe_geometry",
    "weight_w",
    "lobe_offsets",
    "two_lobe_fit",
    "lobe_gains",
    "setup_lobe_fit",
    "lobe_count_sums",
    "edof_closed_form",
    "breakpoints",
]

# Tolerance used when comparing lags against lobe edges, so that floor/ceil
# and membership tests agree when a lag sits exactly on an edge.
_EDGE_TOL = 1e-9


def _floor(x: float) -> int:
    return math.floor(x + _EDGE_TOL)


def _ceil(x: float) -> int:
    return math.ceil(x - _EDGE_TOL)


@dataclass(frozen=True)
class LobeParams:
    """Parameters of the lobe pattern of a near-field link.

    Attributes
    ----------
    range : float
        Link range ``l`` in meters.
    wavelength : float
        Carrier wavelength in meters.
    eta : float
        Joint sparsity ``eta_BS * eta_UE``.
    cos_nu : float
        Effective-angle cosine ``cos(theta) cos(phi)`` in ``(0, 1]``.
    n_max, n_min : int
        Larger and smaller array sizes.
    """

    range: float
    wavelength: float
    eta: float
    cos_nu: float
    n_max: int
    n_min: int

    def __post_init__(self) -> None:
        if self.range <= 0 or self.wavelength <= 0:
            raise ValueError("range and wavelength must be positive")
        if self.eta < 1:
            raise ValueError(f"eta must be >= 1, got {self.eta}")
        if not 0 < self.cos_nu <= 1 + 1e-12:
            raise ValueError(f"cos_nu must lie in (0, 1], got {self.cos_nu}")
        if self.n_min < 1 or self.n_max < self.n_min:
            raise ValueError("need 1 <= n_min <= n_max")

    @classmethod
    def from_link(cls, pair: ArrayPair, geo: LinkGeometry) -> "LobeParams":
        return cls(geo.range, pair.wavelength, pair.eta, geo.cos_nu, pair.n_max, pair.n_min)

    def with_eta(self, eta: float) -> "LobeParams":
        return replace(self, eta=float(eta))

    @property
    def _scale(self) -> float:
        # 4 l / (lambda cos nu), the lag spacing of grating lobes at eta = 1.
        return 4.0 * self.range / (self.wavelength * self.cos_nu)

    @property
    def period(self) -> float:
        """Lag spacing between grating lobes, ``4 l / (lambda eta cos nu)``."""
        return self._scale / self.eta

    @property
    def null(self) -> float:
        """First null of the main lobe, ``4 l / (lambda eta N_max cos nu)``."""
        return self.period / self.n_max

    def half_width(self, alpha: float) -> float:
        """Two-lobe half-width ``t = 4 alpha l / (lambda N_max eta cos nu)``."""
        return alpha * self.null


@dataclass(frozen=True)
class LobeFit:
    """Two-lobe approximation of a lobe pattern.

    Attributes
    ----------
    alpha : float
        Effective-beamwidth fraction in ``[0, 1]``.
    g_high : float
        Gain inside the main and grating lobes.
    g_low : float
        Gain elsewhere.
    """

    alpha: float
    g_high: float
    g_low: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.g_high > 0:
            raise ValueError(f"g_high must be > 0, got {self.g_high}")
        if not 0.0 <= self.g_low < self.g_high:
            raise ValueError(f"need 0 <= g_low < g_high, got {self.g_low}, {self.g_high}")


@dataclass(frozen=True)
class LobeGeometry:
    null_to_null_bw: float
    grating_locations: tuple[float, ...]
    grating_exists: bool


@dataclass(frozen=True)
class EdofBreakdown:
    """Closed-form EDoF together with the branch that produced it.

    ``branch`` is ``"far_unit"`` below the first breakpoint, ``"rising"``
    between the breakpoints and ``"saturated"`` above the second.
    """

    value: float
    branch: str
    thresholds: tuple[float, float]
    t: float
    s0: int


def _matrix(H) -> np.ndarray:
    return H.entries if isinstance(H, ChannelMatrix) else np.asarray(H, dtype=complex)


def _squared_singular_values(H) -> np.ndarray:
    return np.linalg.svd(_matrix(H), compute_uv=False) ** 2


def edof_exact(H) -> float:
    """Exact EDoF ``(tr(H H^H) / ||H H^H||_F)^2``.

    Raises
    ------
    ValueError
        If ``H`` is the zero matrix.
    """
    s2 = _squared_singular_values(H)
    den = float(np.sum(s2**2))
    if den == 0.0:
        raise ValueError("EDoF is undefined for a zero channel")
    return float(np.sum(s2) ** 2 / den)


def dominant_singular_count(H, fraction: float = 0.1) -> int:
    """Number of singular values at least ``fraction`` times the largest."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    s = np.linalg.svd(_matrix(H), compute_uv=False)
    if s[0] == 0.0:
        raise ValueError("zero channel has no dominant singular values")
    return int(np.count_nonzero(s >= fraction * s[0]))


def correlation_matrix(H) -> np.ndarray:
    """``H H^H`` when ``N_UE > N_BS``, otherwise ``H^H H`` (the smaller Gram matrix)."""
    M = _matrix(H)
    n_bs, n_ue = M.shape
    return M @ M.conj().T if n_ue > n_bs else M.conj().T @ M


def f_eta(delta, params: LobeParams):
    """Lobe pattern ``sin^2(N_max x) / sin^2(x)`` with ``x = pi Delta / (N_max null)``.

    Removable singularities return ``N_max^2``.
    """
    d = np.asarray(delta, dtype=float)
    x = math.pi * d / params.period
    s = np.sin(x)
    sing = np.abs(s) < 1e-12
    safe = np.where(sing, 1.0, s)
    out = np.where(sing, float(params.n_max) ** 2, (np.sin(params.n_max * x) / safe) ** 2)
    return float(out) if out.ndim == 0 else out


def lobe_geometry(params: LobeParams) -> LobeGeometry:
    """Main-lobe width and grating-lobe lags within ``|Delta| <= N_min - 1``."""
    P = params.period
    kmax = _floor((params.n_min - 1) / P)
    locs = tuple(float(k * P) for k in range(-kmax, kmax + 1) if k != 0)
    return LobeGeometry(2.0 * params.null, locs, bool(locs))


def weight_w(delta, n_min: int):
    """Multiplicity ``N_min - |Delta|`` of an index lag."""
    d = np.asarray(delta)
    if np.any(np.abs(d) > n_min - 1):
        raise ValueError(f"|delta| must not exceed n_min - 1 = {n_min - 1}")
    out = n_min - np.abs(d)
    return int(out) if np.ndim(out) == 0 else out


def lobe_offsets(delta, params: LobeParams) -> np.ndarray:
    """Distance from each lag to the nearest lobe center, in units of the null."""
    d = np.asarray(delta, dtype=float)
    P = params.period
    return np.abs(d - np.round(d / P) * P) / params.null


def _partition_fit(
    offsets: np.ndarray,
    values: np.ndarray,
    weights: np.ndarray,
    scale: str,
    floor: float,
    alpha_step: float,
) -> tuple[float, float, float]:
    """Exhaustive search of the lobe fraction for a two-level model.

    ``offsets`` are normalised so that a sample belongs to a lobe when its
    offset is at most ``alpha``. Returns ``(alpha, g_inside, g_outside)``
    with the gains as weighted means of ``values``. With ``scale="db"`` the
    partition is chosen by least squares on ``10 log10(max(values, floor))``.
    """
    if scale not in ("linear", "db"):
        raise ValueError(f"scale must be 'linear' or 'db', got {scale!r}")
    y = values if scale == "linear" else 10.0 * np.log10(np.maximum(values, floor))
    n_steps = int(round(1.0 / alpha_step))
    alphas = np.linspace(0.0, 1.0, n_steps + 1)
    wsum = weights.sum()
    wy = weights * y
    wy2 = float(np.sum(wy * y))
    residuals = np.full(alphas.size, np.inf)
    for i, a in enumerate(alphas):
        inside = offsets <= a + _EDGE_TOL
        w_in = weights[inside].sum()
        if w_in <= 0:
            continue
        w_out = wsum - w_in
        s_in = wy[inside].sum()
        s_out = wy.sum() - s_in
        # Weighted residual of the piecewise-constant least-squares model.
        r = wy2 - s_in**2 / w_in - (s_out**2 / w_out if w_out > 0 else 0.0)
        residuals[i] = max(r, 0.0)
    if not np.isfinite(residuals).any():
        raise ValueError("no lobe-center sample: cannot fit")
    best = residuals.min()
    tied = residuals <= best + 1e-12 * max(abs(best), wy2, 1e-300)
    first = int(np.argmax(tied))
    last = first
    while last + 1 < alphas.size and tied[last + 1]:
        last += 1
    # The residual is flat across a run of alphas that select the same
    # samples; report the middle of the run rather than an edge.
    alpha = float(0.5 * (alphas[first] + alphas[last]))
    inside = offsets <= alphas[first] + _EDGE_TOL
    g_in = float(np.sum(weights[inside] * values[inside]) / weights[inside].sum())
    w_out = weights[~inside].sum()
    g_out = float(np.sum(weights[~inside] * values[~inside]) / w_out) if w_out > 0 else 0.0
    return alpha, g_in, g_out


def two_lobe_fit(
    delta,
    values,
    params: LobeParams,
    *,
    weights=None,
    scale: str = "linear",
    floor_db: float = -40.0,
    alpha_step: float = 0.01,
) -> LobeFit:
    """Least-squares two-lobe fit of lobe-pattern samples.

    Parameters
    ----------
    delta, values : array_like
        Sample lags and pattern values ``f_eta(delta)``.
    params : LobeParams
        Pattern parameters; they fix the lobe centers and the null width.
    weights : array_like, optional
        Per-sample weights, uniform by default.
    scale : {"linear", "db"}
        Domain of the least-squares residual used to select ``alpha``.
        The returned gains are always weighted linear means.
    floor_db : float
        Floor relative to ``N_max^2`` applied before taking logs.
    alpha_step : float
        Grid step of the exhaustive search over ``alpha``.

    Returns
    -------
    LobeFit
        When several ``alpha`` values give the same residual, the middle of
        the tied run is returned.
    """
    d = np.asarray(delta, dtype=float).ravel()
    v = np.asarray(values, dtype=float).ravel()
    if d.shape != v.shape:
        raise ValueError("delta and values must have the same length")
    if np.unique(d).size < 3:
        raise ValueError("need at least 3 distinct sample lags")
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=float).ravel()
    peak = float(params.n_max) ** 2
    alpha, g_h, g_l = _partition_fit(
        lobe_offsets(d, params), v / peak, w, scale, 10 ** (floor_db / 10), alpha_step
    )
    return LobeFit(alpha, g_h * peak, g_l * peak)


def lobe_gains(params: LobeParams, alpha: float) -> LobeFit:
    """Multiplicity-weighted two-lobe gains at a fixed lobe fraction.

    The lags ``Delta = -(N_min-1)..N_min-1`` are split into those inside
    a lobe of half-width ``alpha * null`` and the rest. ``G_H`` and ``G_L``
    are the ``w(Delta)``-weighted means of ``f_eta`` over each part. With
    these gains the two-lobe sum ``G_L N_min^2 + (G_H - G_L) sum_{S_H} w``
    equals the exact pattern sum ``sum w(Delta) f_eta(Delta)``.
    """
    d = np.arange(-(params.n_min - 1), params.n_min, dtype=float)
    w = weight_w(d, params.n_min).astype(float)
    f = f_eta(d, params)
    inside = lobe_offsets(d, params) <= alpha + _EDGE_TOL
    g_h = float(np.sum(w[inside] * f[inside]) / w[inside].sum())
    g_l = float(np.sum(w[~inside] * f[~inside]) / w[~inside].sum()) if (~inside).any() else 0.0
    return LobeFit(float(alpha), g_h, g_l)


def setup_lobe_fit(
    params: LobeParams,
    etas: Sequence[float] | None = None,
    *,
    n_samples: int = 4001,
    floor_db: float = -40.0,
    scale: str = "db",
    alpha_step: float = 0.01,
) -> LobeFit:
    """One two-lobe fit describing the lobe shape of a whole setup.

    The pattern is sampled densely over ``|Delta| <= N_min - 1`` for every
    sparsity in ``etas``. Lags are expressed in units of each pattern's own
    null, and all samples are pooled into a single fit. By default ``etas``
    are the integers in the rising range between the two breakpoints,
    where the lobe structure determines the EDoF. ``params.eta`` is ignored.
    The returned gains are on the ``N_max^2`` scale of ``params``.
    """
    if etas is None:
        lo, hi = breakpoints(params, alpha=1.0)
        etas = np.arange(max(1.0, math.ceil(lo)), math.ceil(hi))
        if len(etas) == 0:
            etas = [max(1.0, lo)]
    dc = np.linspace(-(params.n_min - 1), params.n_min - 1, n_samples)
    peak = float(params.n_max) ** 2
    offs, vals = [], []
    for eta in etas:
        p = params.with_eta(float(eta))
        offs.append(lobe_offsets(dc, p))
        vals.append(f_eta(dc, p) / peak)
    offsets = np.concatenate(offs)
    values = np.concatenate(vals)
    alpha, g_h, g_l = _partition_fit(
        offsets, values, np.ones_like(values), scale, 10 ** (floor_db / 10), alpha_step
    )
    return LobeFit(alpha, g_h * peak, g_l * peak)


def breakpoints(params: LobeParams, alpha: float) -> tuple[float, float]:
    """Sparsity breakpoints ``4l/(lambda N_max (N_min-1) cos nu)`` and ``4 alpha l/(lambda N_max cos nu)``.

    The first is infinite for a single-element array. The pair is returned
    in ascending order.
    """
    base = params._scale / params.n_max
    first = base / (params.n_min - 1) if params.n_min > 1 else math.inf
    second = alpha * base
    return first, max(first, second)


def _s0(t: float, n_min: int) -> int:
    ft = _floor(t)
    if ft >= n_min - 1:
        return n_min * n_min
    return -ft * ft + (2 * n_min - 1) * ft + n_min


def lobe_count_sums(params: LobeParams, fit: LobeFit) -> dict[str, int]:
    """Multiplicity sums over the main lobe (``s0``) and one side of grating lobes (``s_plus``).

    ``s0`` counts ``sum w(Delta)`` over ``|Delta| <= t``. ``s_plus`` counts
    the same sum over ``|Delta - k P| <= t`` for ``k >= 1``, where ``P`` is
    the grating period. Lags are restricted to ``|Delta| <= N_min - 1``.
    """
    n = params.n_min
    t = params.half_width(fit.alpha)
    s0 = _s0(t, n)
    P = params.period
    s_plus = 0
    k = 1
    while k * P - t <= n - 1 + _EDGE_TOL:
        c = k * P
        lo = max(_ceil(c - t), _floor(t) + 1)
        hi = min(_floor(c + t), n - 1)
        if hi >= lo:
            s_plus += (hi - lo + 1) * (2 * n - lo - hi) // 2
        k += 1
    return {"s0": int(s0), "s_plus": int(s_plus)}


def edof_closed_form(params: LobeParams, fit: LobeFit) -> EdofBreakdown:
    """Piecewise closed-form EDoF of a near-field sparse link.

    With ``t = alpha * null`` and ``S_0`` the main-lobe multiplicity sum:

    * ``eta < 4l/(lambda N_max (N_min-1) cos nu)``: ``N_max^2 / G_H``;
    * up to ``4 alpha l/(lambda N_max cos nu)``:
      ``N_max^2 N_min^2 / ((G_H - G_L) S_0 + G_L N_min^2)``;
    * beyond: ``N_max^2 N_min / (G_H + G_L (N_min - 1))``.

    A sparsity exactly on a breakpoint takes the higher branch.
    """
    b1, b2 = breakpoints(params, fit.alpha)
    nbar2 = float(params.n_max) ** 2
    n = params.n_min
    t = params.half_width(fit.alpha)
    s0 = _s0(t, n)
    gh, gl = fit.g_high, fit.g_low
    eta = params.eta
    if eta < b1:
        value, branch = nbar2 / gh, "far_unit"
    elif eta < b2:
        value, branch = nbar2 * n * n / ((gh - gl) * s0 + gl * n * n), "rising"
    else:
        value, branch = nbar2 * n / (gh + gl * (n - 1)), "saturated"
    return EdofBreakdown(float(value), branch, (b1, b2), float(t), int(s0))
