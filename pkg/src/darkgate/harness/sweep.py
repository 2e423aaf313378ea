"""Parameter sweeps over (Omega, N C), optimization over Omega and scaling fits."""

from __future__ import annotations

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .. import __version__
from ..errors import ConfigurationError, DomainError
from ..fidelity import (TWO_QUBIT_SUBSETS, PhotonSpectrum, fidelity_atom_atom,
                        fidelity_atom_photon, overlap_matrix, overlap_T)
from ..model import (FORSTER_RESONANCES, CloudGeometry, EnsembleRealization, PhysicsParams,
                     sample_ensemble)
from ..reflection import FrequencyGrid, blockade_radius, count_blockaded, reflection_full
from . import config as cfgmod

log = logging.getLogger(__name__)

ATOM_PHOTON_SUBSETS = (frozenset(), frozenset({0}))


@dataclass(frozen=True)
class SweepSpec:
    """Grid of control strengths and collective cooperativities.

    Parameters
    ----------
    omega_values : sequence of float
        Control Rabi frequencies (1/us), conventionally log-spaced.
    nc_values : sequence of float
        Collective cooperativity targets N C.
    gate : {"atom_photon", "atom_atom"}
    forster : {"F1", "F1_tuned", "F2", "F2_tuned"}
    photon_bandwidth : float
        Spectral width of the Gaussian photon (1/us).
    kappa : float
        Cavity field decay rate (1/us).
    realizations : int
        Sampled ensembles per grid point.
    seed : int
        Root seed; realization r at atom number N uses ``(seed, N, r)``.
    base_params : PhysicsParams, optional
        Full set of physical constants; only ``kappa`` is overridden and
        ``forster`` is kept as a label. Without it, the named resonance is
        applied to the default constants.
    geometry : CloudGeometry, optional
        Cloud shape and qubit placement. ``n_atoms`` and ``seed`` are ignored.
    nc_mode : {"vary_n", "vary_g0"}
        Either fix C through G0 and set N = NC / C, or fix N at
        ``geometry.n_atoms`` and scale G0.
    max_atoms : int, optional
        Grid points needing more atoms are marked invalid.
    """

    omega_values: tuple
    nc_values: tuple
    gate: str = "atom_photon"
    forster: str = "F2"
    photon_bandwidth: float = 0.01
    kappa: float = 10.0
    realizations: int = 8
    seed: int = 0
    base_params: PhysicsParams | None = None
    geometry: CloudGeometry | None = None
    nc_mode: str = "vary_n"
    max_atoms: int | None = 10_000
    n_nodes: int = 64

    def __post_init__(self):
        om = tuple(float(w) for w in np.atleast_1d(self.omega_values))
        nc = tuple(float(v) for v in np.atleast_1d(self.nc_values))
        object.__setattr__(self, "omega_values", om)
        object.__setattr__(self, "nc_values", nc)
        if not om or not nc:
            raise ConfigurationError("omega_values and nc_values must be nonempty")
        if any(not w >= 0 for w in om):
            raise ConfigurationError("omega_values must be nonnegative")
        if any(not v >= 0 for v in nc):
            raise ConfigurationError("nc_values must be nonnegative")
        if self.gate not in cfgmod.GATES:
            raise ConfigurationError(f"gate must be one of {cfgmod.GATES}")
        if self.forster not in FORSTER_RESONANCES:
            raise ConfigurationError(f"unknown Forster resonance {self.forster!r}")
        if int(self.realizations) < 1:
            raise ConfigurationError("realizations must be at least 1")
        if self.nc_mode not in ("vary_n", "vary_g0"):
            raise ConfigurationError("nc_mode must be 'vary_n' or 'vary_g0'")
        if not self.photon_bandwidth > 0 or not self.kappa > 0:
            raise ConfigurationError("photon_bandwidth and kappa must be positive")
        if self.geometry is None:
            object.__setattr__(self, "geometry", CloudGeometry(qubit_positions=cfgmod.default_qubits(self.gate)))
        need = 2 if self.gate == "atom_atom" else 1
        if len(self.geometry.qubit_positions) < need:
            raise ConfigurationError(f"{self.gate} needs {need} qubit position(s)")
        if self.nc_mode == "vary_g0" and self.geometry.n_atoms < 1:
            raise ConfigurationError("vary_g0 needs geometry.n_atoms >= 1")

    @property
    def params(self) -> PhysicsParams:
        if self.base_params is None:
            return PhysicsParams(kappa=float(self.kappa), **FORSTER_RESONANCES[self.forster])
        return self.base_params.replace(kappa=float(self.kappa))

    @property
    def subsets(self) -> tuple:
        return TWO_QUBIT_SUBSETS if self.gate == "atom_atom" else ATOM_PHOTON_SUBSETS

    def replace(self, **changes) -> "SweepSpec":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return SweepSpec(**kw)

    @classmethod
    def from_config(cls, cfg: dict) -> "SweepSpec":
        sw = cfg["sweep"]
        return cls(
            omega_values=cfgmod.omega_values(cfg),
            nc_values=cfgmod.nc_values(cfg),
            gate=sw["gate"],
            forster=cfg["physics"]["forster"],
            photon_bandwidth=float(cfg["photon"]["bandwidth_mhz"]),
            kappa=float(cfg["physics"]["kappa_mhz"]),
            realizations=int(sw["realizations"]),
            seed=int(cfg["geometry"]["seed"]),
            base_params=cfgmod.physics_params(cfg),
            geometry=cfgmod.geometry(cfg),
            nc_mode=sw["nc_mode"],
            max_atoms=None if sw["max_atoms"] is None else int(sw["max_atoms"]),
            n_nodes=int(cfg["photon"]["nodes"]),
        )

    def to_config(self) -> dict:
        """Fully resolved configuration that rebuilds this spec exactly."""
        p = self.params
        g = self.geometry
        return {
            "physics": {
                "forster": self.forster,
                "kappa_mhz": p.kappa,
                "gamma_e_mhz": p.gamma_e,
                "gamma_r_mhz": p.gamma_r,
                "gamma_p_mhz": p.gamma_p,
                "omega_mhz": abs(p.omega_ctrl),
                "delta_mhz": p.delta,
                "c3_mhz_um3": p.c3,
                "angular_model": p.angular_model.value,
                "g0_mhz": p.g0,
                "lambda_um": p.lambda_cav,
            },
            "geometry": {
                "r_c_um": g.r_c,
                "r_y_um": g.r_y,
                "r_g_um": g.r_g,
                "n_atoms": g.n_atoms,
                "qubit_positions_um": [list(q) for q in g.qubit_positions],
                "min_separation_um": g.min_separation,
                "seed": int(self.seed),
            },
            "photon": {
                "bandwidth_mhz": self.photon_bandwidth,
                "nodes": self.n_nodes,
                "grid_points": cfgmod.DEFAULTS["photon"]["grid_points"],
                "grid_half_width_mhz": None,
            },
            "sweep": {
                "gate": self.gate,
                "omega_min_mhz": min(self.omega_values),
                "omega_max_mhz": max(self.omega_values),
                "omega_points": len(self.omega_values),
                "omega_values_mhz": list(self.omega_values),
                "nc_min": min(self.nc_values),
                "nc_max": max(self.nc_values),
                "nc_points": len(self.nc_values),
                "nc_values": list(self.nc_values),
                "nc_mode": self.nc_mode,
                "realizations": int(self.realizations),
                "max_atoms": self.max_atoms,
            },
        }


@dataclass(frozen=True)
class AtomBudget:
    """How an N C target maps onto an atom number and a coupling."""

    nc: float
    n_atoms: int
    g0: float
    cooperativity: float
    valid: bool
    reason: str = ""


def atom_budget(spec: SweepSpec, nc: float) -> AtomBudget:
    p = spec.params
    if spec.nc_mode == "vary_g0":
        n = spec.geometry.n_atoms
        g0 = math.sqrt(nc * p.kappa * p.gamma_e / n)
        return AtomBudget(nc, n, g0, g0**2 / (p.kappa * p.gamma_e), True)
    c = p.cooperativity
    if c <= 0:
        return AtomBudget(nc, 0, p.g0, c, nc == 0, "" if nc == 0 else "zero cooperativity")
    n_raw = nc / c
    n = int(round(n_raw))
    if n != n_raw:
        log.debug("N C = %g maps to N = %g, rounded to %d", nc, n_raw, n)
    if nc > 0 and n < 1:
        return AtomBudget(nc, n, p.g0, c, False, f"N = {n_raw:.3g} < 1")
    if spec.max_atoms is not None and n > spec.max_atoms:
        return AtomBudget(nc, n, p.g0, c, False, f"N = {n} exceeds max_atoms = {spec.max_atoms}")
    return AtomBudget(nc, n, p.g0, c, True)


class _EnsembleCache:
    """Sampled ensembles keyed by (N, G0, realization); they do not depend on Omega."""

    def __init__(self, spec: SweepSpec):
        self.spec = spec
        self._store = {}
        self._lock = threading.Lock()

    def get(self, budget: AtomBudget, r: int) -> EnsembleRealization:
        key = (budget.n_atoms, budget.g0, r)
        with self._lock:
            hit = self._store.get(key)
        if hit is not None:
            return hit
        geom = self.spec.geometry.replace(n_atoms=budget.n_atoms,
                                          seed=(int(self.spec.seed), budget.n_atoms, r))
        real = sample_ensemble(geom, self.spec.params.replace(g0=budget.g0))
        with self._lock:
            return self._store.setdefault(key, real)


@dataclass(frozen=True)
class RealizationResult:
    fidelity: float
    n_blockaded: int


def realization_fidelity(spec: SweepSpec, real: EnsembleRealization, params: PhysicsParams,
                         photon: PhotonSpectrum) -> RealizationResult:
    """Gate fidelity of one sampled ensemble at one control strength."""
    grid = FrequencyGrid(photon.nodes)
    spectra = {s: reflection_full(real.with_excited(s), params, grid) for s in spec.subsets}
    if spec.gate == "atom_atom":
        fid = fidelity_atom_atom(overlap_matrix(spectra, photon))
    else:
        fid = fidelity_atom_photon(overlap_T(spectra[frozenset({0})], photon),
                                   overlap_T(spectra[frozenset()], photon))
    n_b = count_blockaded(real.with_excited(spec.subsets[-1]), params) if params.omega_sq > 0 else real.n_atoms
    return RealizationResult(fid, n_b)


@dataclass(frozen=True)
class SweepPoint:
    omega: float
    nc: float
    n_atoms: int
    cooperativity: float
    g0: float
    valid: bool
    fidelity_mean: float = math.nan
    fidelity_std: float = math.nan
    r_b: float = math.nan
    n_b: float = math.nan
    fidelities: tuple = ()
    worst_realization: int = -1
    best_realization: int = -1
    reason: str = ""

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity_mean


def _reduce(omega: float, budget: AtomBudget, params: PhysicsParams,
            results: Sequence[RealizationResult]) -> SweepPoint:
    """Ordered, scheduling-independent aggregation over realizations."""
    f = [r.fidelity for r in results]
    k = len(f)
    mean = math.fsum(f) / k
    std = math.sqrt(math.fsum((x - mean) ** 2 for x in f) / (k - 1)) if k > 1 else 0.0
    try:
        r_b = blockade_radius(params)
    except DomainError:
        r_b = math.inf
    return SweepPoint(
        omega=omega, nc=budget.nc, n_atoms=budget.n_atoms, cooperativity=budget.cooperativity,
        g0=budget.g0, valid=True, fidelity_mean=mean, fidelity_std=std, r_b=r_b,
        n_b=math.fsum(r.n_blockaded for r in results) / k, fidelities=tuple(f),
        worst_realization=int(np.argmin(f)), best_realization=int(np.argmax(f)),
    )


@dataclass
class SweepResult:
    """Grid of aggregated fidelities, row-major in (omega, nc)."""

    spec: SweepSpec
    points: list
    metadata: dict = field(default_factory=dict)

    CSV_COLUMNS = ("omega_mhz", "nc", "n_atoms", "fidelity_mean", "fidelity_std", "r_b_um", "n_b", "seed")

    def grid(self, name: str = "fidelity_mean") -> np.ndarray:
        vals = np.array([getattr(p, name) for p in self.points], dtype=float)
        return vals.reshape(len(self.spec.omega_values), len(self.spec.nc_values))

    def csv_text(self) -> str:
        lines = [",".join(self.CSV_COLUMNS)]
        for p in self.points:
            row = (p.omega, p.nc, p.n_atoms, p.fidelity_mean, p.fidelity_std, p.r_b, p.n_b, self.spec.seed)
            lines.append(",".join(_fmt(v) for v in row))
        return "\n".join(lines) + "\n"

    def run_record(self) -> dict:
        return {
            "code_version": __version__,
            "seed": int(self.spec.seed),
            "config": self.spec.to_config(),
            "points": [
                {
                    "omega_mhz": p.omega, "nc": p.nc, "n_atoms": p.n_atoms,
                    "cooperativity": p.cooperativity, "g0_mhz": p.g0, "valid": p.valid,
                    "reason": p.reason, "fidelities": list(p.fidelities),
                    "worst_realization": p.worst_realization, "best_realization": p.best_realization,
                    "seed": int(self.spec.seed),
                }
                for p in self.points
            ],
            **self.metadata,
        }


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


def run_sweep(spec: SweepSpec, threads: int = 1) -> SweepResult:
    """Evaluate the gate fidelity on every (omega, nc) grid point.

    Each (grid point, realization) pair is an independent task; results are
    collected in task order and reduced with exactly rounded sums, so the
    output does not depend on ``threads``.
    """
    photon = PhotonSpectrum(spec.photon_bandwidth, spec.n_nodes)
    cache = _EnsembleCache(spec)
    budgets = [atom_budget(spec, nc) for nc in spec.nc_values]
    for b in budgets:
        if not b.valid:
            log.warning("N C = %g marked invalid: %s", b.nc, b.reason)
    tasks = [(i, j, r) for i in range(len(spec.omega_values)) for j, b in enumerate(budgets)
             if b.valid for r in range(spec.realizations)]

    def work(task):
        i, j, r = task
        b = budgets[j]
        params = spec.params.replace(omega_ctrl=spec.omega_values[i], g0=b.g0)
        return realization_fidelity(spec, cache.get(b, r), params, photon)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, tasks))
    else:
        results = [work(t) for t in tasks]
    by_point = {}
    for (i, j, r), res in zip(tasks, results):
        by_point.setdefault((i, j), []).append(res)

    points = []
    for i, omega in enumerate(spec.omega_values):
        for j, b in enumerate(budgets):
            if not b.valid:
                points.append(SweepPoint(omega, b.nc, b.n_atoms, b.cooperativity, b.g0, False, reason=b.reason))
                continue
            params = spec.params.replace(omega_ctrl=omega, g0=b.g0)
            points.append(_reduce(omega, b, params, by_point[(i, j)]))
    return SweepResult(spec, points)


def mean_fidelity(spec: SweepSpec, omega: float, nc: float, threads: int = 1) -> SweepPoint:
    """Single grid point."""
    return run_sweep(spec.replace(omega_values=(omega,), nc_values=(nc,)), threads=threads).points[0]


INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f: Callable[[float], float], a: float, b: float, xtol: float = 1e-5,
                   max_iter: int = 200):
    """Minimize a unimodal function on [a, b]; returns (x, f(x), evaluations)."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    evals = 2
    for _ in range(max_iter):
        if abs(b - a) <= xtol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
        evals += 1
    return (c, fc, evals) if fc <= fd else (d, fd, evals)


class Optimum(NamedTuple):
    omega: float
    infidelity: float
    at_boundary: bool
    evaluations: int = 0


def minimize_on_grid(f: Callable[[float], float], xs: Sequence[float], xtol: float = 1e-4) -> Optimum:
    """Discrete scan over positive ``xs`` then golden-section refinement in log x.

    Ties go to the leftmost grid point. A minimum on either end of the grid is
    flagged and returned unrefined.
    """
    xs = np.asarray(xs, dtype=float)
    if np.any(xs <= 0) or np.any(np.diff(xs) <= 0):
        raise ConfigurationError("grid must be positive and strictly increasing")
    if xs[-1] / xs[0] < 10 * (1 - 1e-12):
        raise ConfigurationError("grid must span at least one decade")
    ys = np.array([f(x) for x in xs])
    k = int(np.argmin(ys))
    if k == 0 or k == len(xs) - 1:
        return Optimum(float(xs[k]), float(ys[k]), True, len(xs))
    u, fu, n = golden_section(lambda s: f(math.exp(s)), math.log(xs[k - 1]), math.log(xs[k + 1]), xtol)
    if fu <= ys[k]:
        return Optimum(math.exp(u), float(fu), False, len(xs) + n)
    return Optimum(float(xs[k]), float(ys[k]), False, len(xs) + n)


def minimize_over_omega(spec: SweepSpec, nc: float, threads: int = 1, xtol: float = 1e-3) -> Optimum:
    """Optimal control strength at fixed N C, minimizing the mean infidelity."""
    budget = atom_budget(spec, nc)
    if not budget.valid:
        raise ConfigurationError(f"N C = {nc:g} is infeasible: {budget.reason}")
    photon = PhotonSpectrum(spec.photon_bandwidth, spec.n_nodes)
    cache = _EnsembleCache(spec)
    ensembles = [cache.get(budget, r) for r in range(spec.realizations)]
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None

    def infidelity(omega):
        params = spec.params.replace(omega_ctrl=float(omega), g0=budget.g0)
        job = lambda real: realization_fidelity(spec, real, params, photon).fidelity
        f = list(pool.map(job, ensembles)) if pool else [job(e) for e in ensembles]
        return 1.0 - math.fsum(f) / len(f)

    try:
        return minimize_on_grid(infidelity, sorted(spec.omega_values), xtol)
    finally:
        if pool:
            pool.shutdown()


class ScalingFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float


def fit_scaling(points) -> ScalingFit:
    """Least-squares line through (log10 x, log10 y).

    ``points`` is a sequence of (x, y) pairs, e.g. (N C, infidelity); the
    intercept is log10 y at x = 1.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 4:
        raise ConfigurationError("scaling fit needs at least four points")
    if np.any(~(pts > 0)):
        raise DomainError("scaling fit needs strictly positive values")
    x, y = np.log10(pts[:, 0]), np.log10(pts[:, 1])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return ScalingFit(float(slope), float(intercept), r2)
