"""Sweep engine turning a :class:`ScenarioConfig` into a :class:`ResultTable`.

Every experiment is deterministic given its configuration. Monte Carlo
experiments derive one child seed per trial from the scenario seed, and all
sweep points reuse the same trial seeds so curves are directly comparable.
Sweep points run sequentially in sweep order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .. import __version__
from ..channel import free_space_gain, los_channel
from ..edof import (
    LobeFit,
    LobeParams,
    dominant_singular_count,
    edof_closed_form,
    edof_exact,
    f_eta,
    lobe_gains,
    setup_lobe_fit,
    two_lobe_fit,
    weight_w,
)
from ..geometry import ArrayPair, LinkGeometry
from ..multiuser import (
    beam_pattern,
    collision_probability,
    fit_beam_pattern,
    near_user_channels,
    place_users,
    rate_cdf_closed,
    rate_cdf_two_lobe_mc,
    sum_rate_far,
    sum_rate_near,
)
from ..rate import (
    PowerBudget,
    rate_edof_approx,
    rate_equal_power,
    rate_no_csit,
    rate_waterfill,
)
from .config import ScenarioConfig

__all__ = ["ResultTable", "run_experiment", "sweep_values"]

_BRANCH_CODE = {"far_unit": 0, "rising": 1, "saturated": 2}

_DEFAULT_RANGES = {
    "eta": (1.0, 16.0),
    "eta_bs": (1.0, 16.0),
    "eta_ue": (1.0, 16.0),
    "phi_max_deg": (5.0, 60.0),
    "rx_snr_db": (-30.0, 10.0),
    "range": (10.0, 120.0),
    "snr_db": (70.0, 110.0),
}


@dataclass
class ResultTable:
    """Rectangular numeric table with a metadata block."""

    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.columns = tuple(self.columns)
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError(f"row has {len(r)} values, expected {len(self.columns)}")

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)


def sweep_values(cfg: ScenarioConfig, auto: tuple[float, float] | None = None) -> np.ndarray:
    """Sweep grid from ``sweep.values`` or ``sweep.start/stop/num/scale``."""
    if cfg["sweep.values"] is not None:
        return np.asarray(cfg["sweep.values"], dtype=float)
    lo, hi = auto if auto is not None else _DEFAULT_RANGES.get(cfg["sweep.axis"], (1.0, 16.0))
    start = cfg["sweep.start"] if cfg["sweep.start"] is not None else lo
    stop = cfg["sweep.stop"] if cfg["sweep.stop"] is not None else hi
    num = cfg["sweep.num"]
    if cfg["sweep.scale"] == "log":
        return np.geomspace(start, stop, num)
    return np.linspace(start, stop, num)


def _geometry(cfg: ScenarioConfig, distance: float | None = None) -> LinkGeometry:
    return LinkGeometry(
        cfg["link.range"] if distance is None else distance,
        math.radians(cfg["link.bearing_deg"]),
        math.radians(cfg["link.tilt_deg"]),
    )


def _pair(cfg: ScenarioConfig, eta_bs: float | None = None, eta_ue: float | None = None) -> ArrayPair:
    return ArrayPair.build(
        cfg["array.n_bs"],
        cfg["array.n_ue"],
        cfg["array.eta_bs"] if eta_bs is None else eta_bs,
        cfg["array.eta_ue"] if eta_ue is None else eta_ue,
        cfg["array.wavelength"],
    )


def _split(eta: float, mode: str) -> tuple[float, float]:
    if mode == "bs":
        return eta, 1.0
    if mode == "ue":
        return 1.0, eta
    root = math.sqrt(eta)
    return root, root


def _budget(cfg: ScenarioConfig, distance: float, snr_db: float | None = None, rx_snr_db: float | None = None) -> PowerBudget:
    """Power budget with the free-space reference gain at ``distance``.

    A receive SNR, when configured, fixes ``|beta|^2 P / sigma^2``; otherwise
    the transmit SNR ``P / sigma^2`` is used. Noise power is normalised to 1.
    """
    beta = free_space_gain(cfg["array.wavelength"], distance)
    rx = rx_snr_db if rx_snr_db is not None else cfg["power.rx_snr_db"]
    if rx is not None:
        return PowerBudget(10 ** (rx / 10) / beta**2, 1.0, beta)
    tx = cfg["power.snr_db"] if snr_db is None else snr_db
    return PowerBudget(10 ** (tx / 10), 1.0, beta)


def _distance_model(cfg: ScenarioConfig, default: str) -> str:
    return cfg["channel.distance_model"] or default


def _setup_fit(cfg: ScenarioConfig, params: LobeParams) -> LobeFit:
    fit = setup_lobe_fit(params, floor_db=cfg["fit.floor_db"])
    if cfg["fit.alpha"] is not None:
        fit = LobeFit(cfg["fit.alpha"], fit.g_high, fit.g_low)
    return fit


def _fit_meta(fit: LobeFit, n_max: int) -> dict[str, float]:
    return {
        "alpha": fit.alpha,
        "g_high": fit.g_high,
        "g_low": fit.g_low,
        "g_high_norm": fit.g_high / n_max**2,
        "g_low_norm": fit.g_low / n_max**2,
    }


def _edof_sweep(cfg: ScenarioConfig):
    geo = _geometry(cfg)
    base = LobeParams.from_link(_pair(cfg, 1.0, 1.0), geo)
    fit = _setup_fit(cfg, base)
    model = _distance_model(cfg, "near")
    cols = (
        "eta", "eta_bs", "eta_ue", "edof_exact", "edof_closed_form",
        "edof_closed_form_setup", "dominant_count", "branch",
    )
    rows = []
    for eta in sweep_values(cfg):
        eb, eu = _split(float(eta), cfg["sweep.split"])
        pair = _pair(cfg, eb, eu)
        H = los_channel(pair, geo, 1.0, model)
        p = LobeParams.from_link(pair, geo)
        cf = edof_closed_form(p, lobe_gains(p, fit.alpha))
        cf_setup = edof_closed_form(p, fit)
        rows.append((
            float(eta), eb, eu, edof_exact(H), cf.value, cf_setup.value,
            dominant_singular_count(H, cfg["fit.dominant_fraction"]), _BRANCH_CODE[cf.branch],
        ))
    meta = {"setup_fit": _fit_meta(fit, base.n_max), "distance_model": model,
            "breakpoints": list(edof_closed_form(base, fit).thresholds)}
    return cols, rows, meta


def _rate_sweep(cfg: ScenarioConfig):
    geo = _geometry(cfg)
    base = LobeParams.from_link(_pair(cfg, 1.0, 1.0), geo)
    fit = _setup_fit(cfg, base)
    model = _distance_model(cfg, "near")
    budget = _budget(cfg, geo.range)
    rx = budget.rx_snr
    n_bs, n_ue = cfg["array.n_bs"], cfg["array.n_ue"]
    cols = (
        "eta", "eta_bs", "eta_ue", "edof_exact", "edof_closed_form", "rate_waterfill",
        "rate_equal_power", "rate_no_csit", "rate_edof_exact", "rate_edof_closed",
    )
    rows = []
    for eta in sweep_values(cfg):
        eb, eu = _split(float(eta), cfg["sweep.split"])
        pair = _pair(cfg, eb, eu)
        H = los_channel(pair, geo, budget.beta, model)
        s = np.linalg.svd(H.entries, compute_uv=False)
        p = LobeParams.from_link(pair, geo)
        e_exact = edof_exact(H)
        e_cf = edof_closed_form(p, lobe_gains(p, fit.alpha)).value
        rows.append((
            float(eta), eb, eu, e_exact, e_cf, rate_waterfill(s, budget), rate_equal_power(s, budget),
            rate_no_csit(H, budget), rate_edof_approx(max(e_exact, 1.0), n_ue, n_bs, rx),
            rate_edof_approx(max(e_cf, 1.0), n_ue, n_bs, rx),
        ))
    meta = {"rx_snr": rx, "setup_fit": _fit_meta(fit, base.n_max), "distance_model": model}
    return cols, rows, meta


def _fit_lobes(cfg: ScenarioConfig):
    geo = _geometry(cfg)
    base = LobeParams.from_link(_pair(cfg, 1.0, 1.0), geo)
    fit = _setup_fit(cfg, base)
    n = base.n_min
    lags = np.arange(-(n - 1), n, dtype=float)
    w = weight_w(lags, n)
    cols = ("eta", "alpha", "g_high_norm", "g_low_norm", "gains_alpha_setup_high_norm", "gains_alpha_setup_low_norm")
    rows = []
    nbar2 = float(base.n_max) ** 2
    for eta in sweep_values(cfg):
        p = base.with_eta(float(eta))
        per = two_lobe_fit(lags, f_eta(lags, p), p, weights=w)
        fixed = lobe_gains(p, fit.alpha)
        rows.append((float(eta), per.alpha, per.g_high / nbar2, per.g_low / nbar2,
                     fixed.g_high / nbar2, fixed.g_low / nbar2))
    return cols, rows, {"setup_fit": _fit_meta(fit, base.n_max)}


def _trial_seeds(cfg: ScenarioConfig) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(cfg.seed).spawn(cfg.trials)


def _sumrate_far(cfg: ScenarioConfig):
    axis = cfg["sweep.axis"]
    seeds = _trial_seeds(cfg)
    K = cfg["users.k"]
    cols = ("eta_bs", "eta_ue", "phi_max_deg", "rx_snr_db", "sum_rate_mean", "sum_rate_std")
    rows = []
    for v in sweep_values(cfg):
        v = float(v)
        eb = v if axis == "eta_bs" else cfg["array.eta_bs"]
        eu = v if axis == "eta_ue" else cfg["array.eta_ue"]
        phi_deg = v if axis == "phi_max_deg" else cfg["users.phi_max_deg"]
        phi_max = math.radians(phi_deg)
        budget = _budget(cfg, cfg["link.range"], rx_snr_db=v if axis == "rx_snr_db" else None)
        pair = _pair(cfg, eb, eu)
        rates = np.array([
            sum_rate_far(place_users(K, cfg["link.range"], phi_max, cfg["users.law"], s), pair, budget)
            for s in seeds
        ])
        rx_db = 10.0 * math.log10(budget.rx_snr)
        rows.append((eb, eu, phi_deg, rx_db, float(rates.mean()), float(rates.std())))
    return cols, rows, {"sweep_axis": axis}


def _sumrate_near(cfg: ScenarioConfig):
    axis = cfg["sweep.axis"]
    seeds = _trial_seeds(cfg)
    K = cfg["users.k"]
    model = _distance_model(cfg, "exact")
    F = math.inf if cfg["channel.los_only"] else 10 ** (cfg["channel.rician_db"] / 10)
    phi_max = math.radians(cfg["users.phi_max_deg"])
    cols = ("eta_bs", "eta_ue", "range", "snr_db", "sum_rate_mean", "sum_rate_std")
    rows = []
    for v in sweep_values(cfg):
        v = float(v)
        eb = v if axis == "eta_bs" else cfg["array.eta_bs"]
        eu = v if axis == "eta_ue" else cfg["array.eta_ue"]
        dist = v if axis == "range" else cfg["link.range"]
        budget = _budget(cfg, dist, snr_db=v if axis == "snr_db" else None)
        pair = _pair(cfg, eb, eu)
        rates = []
        for s in seeds:
            s_place, s_chan = s.spawn(2)
            placement = place_users(K, dist, phi_max, cfg["users.law"], s_place)
            chans = near_user_channels(
                placement, pair, rician_factor=F, ring_radius=cfg["channel.ring_radius"],
                n_paths=cfg["channel.paths"], seed=s_chan, distance_model=model,
            )
            rates.append(sum_rate_near(chans, budget))
        rates = np.asarray(rates)
        snr_db = 10.0 * math.log10(budget.snr)
        rows.append((eb, eu, dist, snr_db, float(rates.mean()), float(rates.std())))
    return cols, rows, {"sweep_axis": axis, "distance_model": model, "rician_factor": F if math.isfinite(F) else "inf"}


def _cdf(cfg: ScenarioConfig):
    K = cfg["users.k"]
    n_bs, n_ue, eta = cfg["array.n_bs"], cfg["array.n_ue"], cfg["array.eta_bs"]
    phi_max = math.radians(cfg["users.phi_max_deg"])
    budget = _budget(cfg, cfg["link.range"])
    rx = budget.rx_snr
    fit = fit_beam_pattern(n_bs, eta, phi_max)
    p = collision_probability(eta, n_bs, phi_max, fit.alpha)
    r_top = 1.05 * math.log2(1.0 + rx * n_ue * n_bs)
    grid = sweep_values(cfg, auto=(0.0, r_top))
    closed = np.atleast_1d(rate_cdf_closed(grid, K, rx, fit, n_bs, eta_bs=eta, phi_max=phi_max, n_ue=n_ue))
    seed_two, seed_beam = np.random.SeedSequence(cfg.seed).spawn(2)
    mc = np.atleast_1d(rate_cdf_two_lobe_mc(grid, K, rx, fit, n_bs, eta_bs=eta, phi_max=phi_max,
                                            n_ue=n_ue, trials=cfg.trials, seed=seed_two))
    # Same placement law with the exact beam pattern instead of two levels.
    rng = np.random.Generator(np.random.PCG64(seed_beam))
    s = math.sin(phi_max)
    x = rng.uniform(-s, s, (cfg.trials, K))
    inter = beam_pattern(x[:, 1:] - x[:, :1], n_bs, eta).sum(axis=1)
    n = n_ue * n_bs
    rates = np.sort(np.log2(1.0 + rx * n / (rx * n * inter + 1.0)))
    beam = np.searchsorted(rates, grid, side="right") / cfg.trials
    cols = ("r_bar", "cdf_closed", "cdf_two_lobe_mc", "cdf_beam_mc")
    rows = [(float(g), float(a), float(b), float(c)) for g, a, b, c in zip(grid, closed, mc, beam)]
    meta = {"rx_snr": rx, "collision_probability": p,
            "beam_fit": {"alpha": fit.alpha, "g_main": fit.g_main, "g_side": fit.g_side},
            "placement_law": "sin"}
    return cols, rows, meta


_RUNNERS: dict[str, Callable] = {
    "edof-sweep": _edof_sweep,
    "rate-sweep": _rate_sweep,
    "fit-lobes": _fit_lobes,
    "sumrate-far": _sumrate_far,
    "sumrate-near": _sumrate_near,
    "cdf": _cdf,
}


def run_experiment(cfg: ScenarioConfig) -> ResultTable:
    """Run the experiment named in ``cfg`` and return its table.

    Module errors are re-raised as ``RuntimeError`` with the experiment
    name attached.
    """
    runner = _RUNNERS[cfg.experiment]
    t0 = time.perf_counter()
    try:
        cols, rows, extra = runner(cfg)
    except Exception as exc:  # add context, keep the original as cause
        raise RuntimeError(f"{cfg.experiment} failed: {exc}") from exc
    meta = {
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "tool_version": __version__,
        "config": cfg.to_dict(),
        **extra,
        "wall_time_s": time.perf_counter() - t0,
    }
    return ResultTable(cols, rows, meta)
