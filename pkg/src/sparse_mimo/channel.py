"""Channel synthesis: line-of-sight, one-ring scattering and Rician mixing.

Channel matrices are ``N_BS x N_UE`` (row = BS element, column = UE
element). Phases are referenced to the center-to-center distance.

Steering-vector convention
--------------------------
``far_steering_vector(cfg, psi)`` has entries ``exp(-j pi n eta sin psi)``.
In a near-field vector, the phase of element ``n`` is
``-2 pi / lambda * (|p - e_n| - |p - e_0|)``, with ``e_0`` the array center.
The far-field limit of this phase equals the far vector at the local angle
``psi``, where ``sin psi = -u . axis``. Here ``u`` is the unit vector from the
array center towards ``p`` and ``axis`` is the direction of increasing
element index. Seen this way, the UE array sees the BS at local angle
``theta`` and the BS array sees the UE at local angle ``-phi``. The plane-wave
LoS channel is therefore ``beta * far(bs, -phi) far(ue, theta)^T``.
:func:`far_channel_factors` returns the two vectors in this form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    ArrayConfig,
    ArrayPair,
    LinkGeometry,
    Side,
    distance_matrix,
    element_positions,
)

__all__ = [
    "ChannelMatrix",
    "ScattererSet",
    "free_space_gain",
    "los_channel",
    "far_steering_vector",
    "near_steering_vector",
    "steering_vector",
    "far_channel_factors",
    "nlos_channel",
    "rician_combine",
    "one_ring_scatterers",
    "receive_combine",
    "make_rng",
    "spawn_seeds",
]


def make_rng(seed) -> np.random.Generator:
    """Seeded generator using the PCG64 bit generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def spawn_seeds(seed, count: int) -> list[np.random.SeedSequence]:
    """Independent child seeds for ``count`` Monte Carlo trials."""
    return np.random.SeedSequence(seed).spawn(count)


@dataclass(frozen=True)
class ChannelMatrix:
    """A complex ``N_BS x N_UE`` channel with its reference gain.

    Attributes
    ----------
    entries : ndarray
        Complex channel coefficients.
    beta : complex
        Reference complex gain at the array centers.
    model_tag : str
        ``"exact"``, ``"near"`` or ``"far"`` for LoS channels; ``"nlos"`` or
        ``"rician"`` for channels built by the scattering helpers.
    """

    entries: np.ndarray
    beta: complex = 1.0
    model_tag: str = "exact"

    def __post_init__(self) -> None:
        arr = np.asarray(self.entries, dtype=complex)
        if arr.ndim != 2:
            raise ValueError(f"channel must be a 2-D matrix, got shape {arr.shape}")
        object.__setattr__(self, "entries", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def frobenius_sq(self) -> float:
        return float(np.sum(np.abs(self.entries) ** 2))


def _as_matrix(H) -> np.ndarray:
    return H.entries if isinstance(H, ChannelMatrix) else np.asarray(H, dtype=complex)


def free_space_gain(wavelength: float, distance: float) -> float:
    """Free-space amplitude gain ``lambda / (4 pi l)``."""
    return wavelength / (4.0 * math.pi * distance)


def los_channel(
    pair: ArrayPair,
    geo: LinkGeometry,
    beta: complex | None = None,
    distance_model: str = "exact",
) -> ChannelMatrix:
    """Line-of-sight channel ``beta * exp(-j 2 pi / lambda (l_mn - l))``.

    ``beta`` defaults to the free-space amplitude ``lambda / (4 pi l)``.
    """
    if beta is None:
        beta = free_space_gain(pair.wavelength, geo.range)
    if abs(beta) <= 0:
        raise ValueError("beta must be nonzero")
    d = distance_matrix(pair, geo, distance_model)
    k = 2.0 * math.pi / pair.wavelength
    return ChannelMatrix(beta * np.exp(-1j * k * (d - geo.range)), complex(beta), distance_model)


def far_steering_vector(cfg: ArrayConfig, angle: float) -> np.ndarray:
    """Plane-wave response ``exp(-j pi n eta sin(angle))`` over symmetric indices."""
    if abs(angle) > math.pi / 2 + 1e-12:
        raise ValueError(f"angle must lie in [-pi/2, pi/2], got {angle}")
    return np.exp(-1j * math.pi * cfg.indices * cfg.sparsity * math.sin(angle))


def near_steering_vector(elements: np.ndarray, point, wavelength: float) -> np.ndarray:
    """Spherical-wave response of an array towards a point.

    Parameters
    ----------
    elements : ndarray, shape (N, 2)
        Element coordinates; their mean is the phase reference.
    point : array_like, shape (2,)
        Source or target location.
    wavelength : float
        Carrier wavelength.
    """
    elements = np.asarray(elements, dtype=float)
    point = np.asarray(point, dtype=float)
    dist = np.linalg.norm(elements - point, axis=1)
    scale = max(np.max(np.abs(elements)), np.max(np.abs(point)), 1.0)
    if np.any(dist <= 1e-12 * scale):
        raise ValueError("point coincides with an array element")
    ref = np.linalg.norm(elements.mean(axis=0) - point)
    return np.exp(-2j * math.pi / wavelength * (dist - ref))


def steering_vector(
    cfg: ArrayConfig,
    target,
    field: str = "far",
    elements: np.ndarray | None = None,
) -> np.ndarray:
    """Far-field (``target`` = angle) or near-field (``target`` = point) response.

    For the near field, ``elements`` defaults to the BS layout: the array on
    the y-axis centered at the origin.
    """
    if field == "far":
        return far_steering_vector(cfg, float(target))
    if field == "near":
        if elements is None:
            elements = element_positions(cfg, LinkGeometry(1.0), Side.BS)
        return near_steering_vector(elements, target, cfg.wavelength)
    raise ValueError(f"field must be 'far' or 'near', got {field!r}")


def far_channel_factors(pair: ArrayPair, geo: LinkGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Vectors ``(b, a)`` with ``H_far = beta * outer(b, a)``."""
    return far_steering_vector(pair.bs, -geo.bearing), far_steering_vector(pair.ue, geo.tilt)


@dataclass(frozen=True)
class ScattererSet:
    """Point scatterers of one user's NLoS channel.

    Attributes
    ----------
    positions : ndarray, shape (Q, 2)
        Scatterer coordinates in meters.
    coefficients : ndarray, shape (Q,)
        Complex path coefficients ``alpha_q``.
    phases : ndarray, shape (Q,)
        Extra phase ``psi_q`` in ``[0, 2 pi)``.
    rcs : ndarray, shape (Q,)
        Radar-cross-section weights.
    rician_factor : float
        Linear LoS-to-NLoS power ratio used when the set is mixed with LoS.
    """

    positions: np.ndarray
    coefficients: np.ndarray
    phases: np.ndarray
    rcs: np.ndarray
    rician_factor: float = 100.0

    def __post_init__(self) -> None:
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        q = pos.shape[0]
        if q < 1 or pos.shape[1] != 2:
            raise ValueError("need at least one 2-D scatterer position")
        coeffs = np.asarray(self.coefficients, dtype=complex).reshape(q)
        phases = np.asarray(self.phases, dtype=float).reshape(q)
        rcs = np.broadcast_to(np.asarray(self.rcs, dtype=float), (q,)).copy()
        if self.rician_factor < 0:
            raise ValueError("rician_factor must be >= 0")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "rcs", rcs)

    @property
    def n_paths(self) -> int:
        return self.positions.shape[0]


def nlos_channel(pair: ArrayPair, geo: LinkGeometry, scatterers: ScattererSet) -> ChannelMatrix:
    """Sum of single-bounce scatterer paths.

    Path ``q`` contributes
    ``sqrt(rho / Q) alpha_q exp(-j 2 pi r_q / lambda + j psi_q) b_q a_q^T``,
    where ``a_q`` and ``b_q`` are the UE and BS near-field responses towards
    the scatterer and ``r_q`` is its distance from the UE center. The total
    power is ``rho = sum_q lambda^2 rcs_q / ((4 pi)^3 r_q^2 s_q^2)``, with
    ``s_q`` the scatterer distance from the BS center.
    """
    lam = pair.wavelength
    bs_el = element_positions(pair.bs, geo, Side.BS)
    ue_el = element_positions(pair.ue, geo, Side.UE)
    ue_center = ue_el.mean(axis=0)
    pos = scatterers.positions
    r = np.linalg.norm(pos - ue_center, axis=1)
    s = np.linalg.norm(pos, axis=1)
    if np.any(r <= 0) or np.any(s <= 0):
        raise ValueError("scatterer coincides with an array center")
    rho = float(np.sum(lam**2 * scatterers.rcs / ((4 * math.pi) ** 3 * r**2 * s**2)))
    q = scatterers.n_paths
    H = np.zeros((pair.bs.n_elements, pair.ue.n_elements), dtype=complex)
    for i in range(q):
        b = near_steering_vector(bs_el, pos[i], lam)
        a = near_steering_vector(ue_el, pos[i], lam)
        g = scatterers.coefficients[i] * np.exp(-2j * math.pi * r[i] / lam + 1j * scatterers.phases[i])
        H += g * np.outer(b, a)
    H *= math.sqrt(rho / q)
    return ChannelMatrix(H, complex(math.sqrt(rho)), "nlos")


def rician_combine(los: ChannelMatrix, nlos: ChannelMatrix, F: float) -> ChannelMatrix:
    """Mix LoS and NLoS parts with Rician factor ``F`` (linear)."""
    a, b = _as_matrix(los), _as_matrix(nlos)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if not F >= 0:
        raise ValueError(f"Rician factor must be >= 0, got {F}")
    if math.isinf(F):
        w_los, w_nlos = 1.0, 0.0
    else:
        w_los, w_nlos = math.sqrt(F / (F + 1.0)), math.sqrt(1.0 / (F + 1.0))
    beta = los.beta if isinstance(los, ChannelMatrix) else 1.0
    return ChannelMatrix(w_los * a + w_nlos * b, beta, "rician")


def one_ring_scatterers(
    geo: LinkGeometry,
    ring_radius: float = 3.0,
    Q: int = 5,
    rng_seed=None,
    rician_factor: float = 100.0,
) -> ScattererSet:
    """Draw ``Q`` scatterers uniformly on a ring around the UE center.

    Path coefficients are standard complex Gaussian. Extra phases are uniform
    on ``[0, 2 pi)`` and all RCS weights are one.
    """
    if ring_radius <= 0:
        raise ValueError("ring_radius must be > 0")
    if Q < 1:
        raise ValueError("Q must be >= 1")
    rng = make_rng(rng_seed)
    center = np.array([-geo.range * math.cos(geo.bearing), geo.range * math.sin(geo.bearing)])
    ang = rng.uniform(0.0, 2 * math.pi, Q)
    pos = center + ring_radius * np.column_stack([np.cos(ang), np.sin(ang)])
    alpha = (rng.standard_normal(Q) + 1j * rng.standard_normal(Q)) / math.sqrt(2.0)
    psi = rng.uniform(0.0, 2 * math.pi, Q)
    return ScattererSet(pos, alpha, psi, np.ones(Q), rician_factor)


def receive_combine(channels, tx_signals, noise_power: float, rng_seed=None) -> np.ndarray:
    """Received BS vector ``y = sum_k H_k x_k + z`` with ``z ~ CN(0, noise_power I)``."""
    mats = [_as_matrix(H) for H in channels]
    if len(mats) != len(tx_signals):
        raise ValueError("need one transmit vector per channel")
    if not mats:
        raise ValueError("at least one channel is required")
    n_bs = mats[0].shape[0]
    y = np.zeros(n_bs, dtype=complex)
    for H, x in zip(mats, tx_signals):
        x = np.asarray(x, dtype=complex)
        if H.shape[0] != n_bs or H.shape[1] != x.shape[0]:
            raise ValueError(f"dimension mismatch: H {H.shape}, x {x.shape}")
        y += H @ x
    if noise_power < 0:
        raise ValueError("noise_power must be >= 0")
    if noise_power > 0:
        rng = make_rng(rng_seed)
        y += math.sqrt(noise_power / 2.0) * (rng.standard_normal(n_bs) + 1j * rng.standard_normal(n_bs))
    return y
