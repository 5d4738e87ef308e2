"""Planar geometry of a uniform sparse linear array link.

The base station (BS) array lies on the y-axis and is centered at the
origin. The user equipment (UE) array is centered at
``(-l cos(phi), l sin(phi))`` and rotated by ``theta - phi`` with respect
to the BS array. Element indices are symmetric about zero, so arrays with
an even element count use half-integer indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "ArrayConfig",
    "LinkGeometry",
    "ArrayPair",
    "Side",
    "element_indices",
    "element_positions",
    "exact_distance",
    "far_distance",
    "near_distance",
    "distance_matrix",
    "rayleigh_distance",
    "near_far_boundary",
]


class Side(str, Enum):
    """Which end of the link an array sits on."""

    BS = "bs"
    UE = "ue"


@dataclass(frozen=True)
class ArrayConfig:
    """A uniform linear array.

    Attributes
    ----------
    n_elements : int
        Number of antenna elements ``N``.
    sparsity : float
        Sparsity factor ``eta >= 1``. Element spacing is ``eta * lambda / 2``.
    wavelength : float
        Carrier wavelength in meters.
    """

    n_elements: int
    sparsity: float = 1.0
    wavelength: float = 0.01

    def __post_init__(self) -> None:
        if isinstance(self.n_elements, bool) or int(self.n_elements) != self.n_elements:
            raise ValueError(f"n_elements must be an integer, got {self.n_elements!r}")
        if self.n_elements < 1:
            raise ValueError(f"n_elements must be >= 1, got {self.n_elements}")
        if not np.isfinite(self.sparsity) or self.sparsity < 1:
            raise ValueError(f"sparsity must be >= 1, got {self.sparsity}")
        if not np.isfinite(self.wavelength) or self.wavelength <= 0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength}")
        object.__setattr__(self, "n_elements", int(self.n_elements))
        object.__setattr__(self, "sparsity", float(self.sparsity))
        object.__setattr__(self, "wavelength", float(self.wavelength))

    @property
    def spacing(self) -> float:
        """Inter-element spacing ``d`` in meters."""
        return self.sparsity * self.wavelength / 2.0

    @property
    def aperture(self) -> float:
        """Physical aperture ``(N - 1) d`` in meters."""
        return (self.n_elements - 1) * self.spacing

    @property
    def indices(self) -> np.ndarray:
        return element_indices(self.n_elements)


@dataclass(frozen=True)
class LinkGeometry:
    """Placement of one UE relative to the BS.

    Attributes
    ----------
    range : float
        Distance ``l`` between the array centers in meters.
    bearing : float
        Direction ``phi`` of the UE center seen from the BS, radians.
    tilt : float
        Direction ``theta`` of the BS seen from the UE array, radians.
    """

    range: float
    bearing: float = 0.0
    tilt: float = 0.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.range) or self.range <= 0:
            raise ValueError(f"range must be > 0, got {self.range}")
        half_pi = math.pi / 2
        for name in ("bearing", "tilt"):
            value = getattr(self, name)
            if not np.isfinite(value) or abs(value) > half_pi + 1e-12:
                raise ValueError(f"{name} must lie in [-pi/2, pi/2], got {value}")
            object.__setattr__(self, name, float(value))
        object.__setattr__(self, "range", float(self.range))

    @property
    def cos_nu(self) -> float:
        """Effective-angle cosine ``cos(theta) cos(phi)``."""
        return math.cos(self.tilt) * math.cos(self.bearing)


@dataclass(frozen=True)
class ArrayPair:
    """The BS and UE arrays of one link; both must share a wavelength."""

    bs: ArrayConfig
    ue: ArrayConfig

    def __post_init__(self) -> None:
        if not math.isclose(self.bs.wavelength, self.ue.wavelength, rel_tol=1e-12):
            raise ValueError(
                "BS and UE wavelengths differ: "
                f"{self.bs.wavelength} vs {self.ue.wavelength}"
            )

    @classmethod
    def build(
        cls,
        n_bs: int,
        n_ue: int,
        eta_bs: float = 1.0,
        eta_ue: float = 1.0,
        wavelength: float = 0.01,
    ) -> "ArrayPair":
        return cls(
            ArrayConfig(n_bs, eta_bs, wavelength), ArrayConfig(n_ue, eta_ue, wavelength)
        )

    @property
    def wavelength(self) -> float:
        return self.bs.wavelength

    @property
    def n_max(self) -> int:
        """Larger element count."""
        return max(self.bs.n_elements, self.ue.n_elements)

    @property
    def n_min(self) -> int:
        """Smaller element count."""
        return min(self.bs.n_elements, self.ue.n_elements)

    @property
    def eta(self) -> float:
        """Joint sparsity ``eta_BS * eta_UE``."""
        return self.bs.sparsity * self.ue.sparsity

    def with_sparsity(self, eta_bs: float, eta_ue: float | None = None) -> "ArrayPair":
        """Copy with new sparsity factors (UE unchanged when omitted)."""
        ue = self.ue if eta_ue is None else ArrayConfig(self.ue.n_elements, eta_ue, self.wavelength)
        return ArrayPair(ArrayConfig(self.bs.n_elements, eta_bs, self.wavelength), ue)


def element_indices(n: int) -> np.ndarray:
    """Symmetric element indices ``i - (n - 1)/2`` for ``i = 0..n-1``."""
    return np.arange(n, dtype=float) - (n - 1) / 2.0


def element_positions(cfg: ArrayConfig, geo: LinkGeometry, side: Side | str) -> np.ndarray:
    """Element coordinates of one array as an ``(N, 2)`` array in meters."""
    side = Side(side)
    idx = element_indices(cfg.n_elements)
    if side is Side.BS:
        return np.column_stack([np.zeros_like(idx), idx * cfg.spacing])
    l, phi, theta = geo.range, geo.bearing, geo.tilt
    center = np.array([-l * math.cos(phi), l * math.sin(phi)])
    axis = np.array([-math.sin(theta - phi), math.cos(theta - phi)])
    return center + np.outer(idx * cfg.spacing, axis)


def _mn(m, n):
    return np.asarray(m, dtype=float), np.asarray(n, dtype=float)


def exact_distance(m, n, pair: ArrayPair, geo: LinkGeometry):
    """Exact distance between UE element ``m`` and BS element ``n``.

    Broadcasts over array-valued ``m`` and ``n``.

    Raises
    ------
    ValueError
        If the squared distance is not positive, which cannot happen for a
        physically consistent geometry.
    """
    m, n = _mn(m, n)
    lam, l = pair.wavelength, geo.range
    mu = m * pair.ue.sparsity
    nb = n * pair.bs.sparsity
    radicand = (
        1.0
        + (lam / l) * (mu * math.sin(geo.tilt) - nb * math.sin(geo.bearing))
        + (lam**2 / (4.0 * l**2))
        * (mu**2 + nb**2 - 2.0 * mu * nb * math.cos(geo.bearing - geo.tilt))
    )
    if np.any(radicand <= 0):
        raise ValueError("non-positive squared distance: inconsistent geometry")
    out = l * np.sqrt(radicand)
    return float(out) if np.ndim(out) == 0 else out


def far_distance(m, n, pair: ArrayPair, geo: LinkGeometry):
    """First-order (plane-wave) distance approximation."""
    m, n = _mn(m, n)
    out = (
        geo.range
        + m * pair.ue.spacing * math.sin(geo.tilt)
        - n * pair.bs.spacing * math.sin(geo.bearing)
    )
    return float(out) if np.ndim(out) == 0 else out


def near_distance(m, n, pair: ArrayPair, geo: LinkGeometry):
    """Second-order (Fresnel) distance approximation."""
    m, n = _mn(m, n)
    lam, l = pair.wavelength, geo.range
    mu = m * pair.ue.sparsity
    nb = n * pair.bs.sparsity
    ct, cp = math.cos(geo.tilt), math.cos(geo.bearing)
    out = (
        l
        + lam / 2.0 * (mu * math.sin(geo.tilt) - nb * math.sin(geo.bearing))
        + (lam * mu * ct) ** 2 / (8.0 * l)
        + lam**2 * (nb * cp) ** 2 / (8.0 * l)
        - lam**2 / (4.0 * l) * mu * nb * cp * ct
    )
    return float(out) if np.ndim(out) == 0 else out


_DISTANCE_MODELS = {
    "exact": exact_distance,
    "far": far_distance,
    "near": near_distance,
}


def distance_matrix(pair: ArrayPair, geo: LinkGeometry, model: str = "exact") -> np.ndarray:
    """All element-pair distances as an ``N_BS x N_UE`` matrix.

    Row ``n`` is the BS element, column ``m`` the UE element.
    """
    try:
        fn = _DISTANCE_MODELS[model]
    except KeyError:
        raise ValueError(f"unknown distance model {model!r}; use one of {sorted(_DISTANCE_MODELS)}") from None
    n = pair.bs.indices[:, None]
    m = pair.ue.indices[None, :]
    return np.broadcast_to(fn(m, n, pair, geo), (n.size, m.size)).copy()


def rayleigh_distance(bs: ArrayConfig, ue: ArrayConfig) -> float:
    """Classical MIMO Rayleigh distance ``2 (D_UE + D_BS)^2 / lambda``."""
    if not math.isclose(bs.wavelength, ue.wavelength, rel_tol=1e-12):
        raise ValueError("arrays must share a wavelength")
    return 2.0 * (ue.aperture + bs.aperture) ** 2 / bs.wavelength


def near_far_boundary(pair: ArrayPair, geo: LinkGeometry) -> float:
    """Range below which grating-lobe structure makes the EDoF exceed one.

    Equals ``lambda * N_max * (N_min - 1) * cos(nu) * eta / 4`` with the
    joint sparsity ``eta = eta_BS * eta_UE``.
    """
    return pair.wavelength * pair.n_max * (pair.n_min - 1) * geo.cos_nu * pair.eta / 4.0
