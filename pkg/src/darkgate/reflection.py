"""Complex reflection coefficient of the one-sided cavity.

``reflection_full`` sums the exact per-atom response of every sampled atom.
``reflection_approx`` replaces the sum by a blockaded and an unperturbed
population with closed-form response functions ``f_B`` and ``f_E``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .errors import ConfigurationError, DomainError, SingularityError
from .model import CloudGeometry, EnsembleRealization, PhysicsParams
from .numerics import compensated_sum

# per-chunk element budget for the (omega, atom) work array
_CHUNK_ELEMENTS = 1 << 21


class Provenance(str, enum.Enum):
    FULL = "full"
    APPROXIMATE = "approximate"
    ORACLE = "oracle"


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing detunings from the cavity resonance (1/us)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1)
        if not np.all(np.isfinite(pts)):
            raise ConfigurationError("frequency grid must be finite")
        if np.any(np.diff(pts) <= 0):
            raise ConfigurationError("frequency grid must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def symmetric(cls, half_width: float, n_points: int = 257) -> "FrequencyGrid":
        return cls(np.linspace(-half_width, half_width, n_points))

    def __len__(self):
        return len(self.points)


def _as_grid(grid) -> FrequencyGrid:
    return grid if isinstance(grid, FrequencyGrid) else FrequencyGrid(np.atleast_1d(grid))


@dataclass(frozen=True)
class ReflectionSpectrum:
    grid: FrequencyGrid
    values: np.ndarray
    excited_set: frozenset = frozenset()
    provenance: Provenance = Provenance.FULL
    valid: np.ndarray | None = field(default=None)

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex).reshape(-1)
        if len(vals) != len(self.grid):
            raise ConfigurationError("spectrum values do not match grid length")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "excited_set", frozenset(self.excited_set))
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        if self.valid is None:
            ok = np.ones(len(vals), dtype=bool)
        else:
            ok = np.array(self.valid, dtype=bool).reshape(-1)
        ok.setflags(write=False)
        object.__setattr__(self, "valid", ok)

    @property
    def omega(self) -> np.ndarray:
        return self.grid.points

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values[self.valid]))) if self.valid.any() else 0.0


def atom_response_terms(omega, g_sq, v_sq_sum, params: PhysicsParams) -> np.ndarray:
    """Per-atom contribution |G_n|^2 [Gamma_e/2 - i w + |Omega|^2/(...)]^-1.

    The nested fraction is evaluated in rational form so that a vanishing
    inner denominator (for instance Gamma_r = 0 at w = 0) gives the correct
    zero contribution instead of a division by zero. ``omega`` has shape
    ``(M,)``; ``g_sq`` and ``v_sq_sum`` have shape ``(N,)``. Returns ``(M, N)``.
    """
    w = np.asarray(omega, dtype=float)[:, None]
    g_sq = np.asarray(g_sq, dtype=float)[None, :]
    s = np.asarray(v_sq_sum, dtype=float)[None, :]
    om2 = params.omega_sq
    a_e = params.gamma_e / 2 - 1j * w
    b_r = params.gamma_r / 2 - 1j * w
    d_p = params.gamma_p / 2 + 1j * (params.delta - w)

    if om2 == 0:
        # no control field: the Rydberg branch decouples
        num = np.ones(np.broadcast_shapes(w.shape, s.shape), dtype=complex)
        den = a_e + 0 * s
    else:
        num = np.where(s > 0, b_r * d_p + s, b_r)
        den = np.where(s > 0, a_e * (b_r * d_p + s) + om2 * d_p, a_e * b_r + om2)
    hit = (den == 0) & (g_sq > 0)
    if np.any(hit):
        bad = np.broadcast_to(w, hit.shape)[hit][0]
        raise SingularityError(f"per-atom response is singular at omega={bad!r}", omega=float(bad))
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(g_sq > 0, g_sq * num / den, 0.0)
    return terms


def _cavity_reflection(w, atom_sum, kappa):
    total = kappa / 2 - 1j * w + atom_sum
    zero = total == 0
    if np.any(zero):
        bad = w[zero][0]
        raise SingularityError(f"cavity denominator vanishes at omega={bad!r}", omega=float(bad))
    return 1.0 - kappa / total


def reflection_full(real: EnsembleRealization, params: PhysicsParams, grid) -> ReflectionSpectrum:
    """Exact reflection coefficient R(w) for the realization's excited qubit set."""
    grid = _as_grid(grid)
    w = grid.points
    g_sq = np.abs(real.g) ** 2
    v_sq = real.v_squared_sum()
    n = max(real.n_atoms, 1)
    chunk = max(1, _CHUNK_ELEMENTS // n)
    sums = np.empty(len(w), dtype=complex)
    for start in range(0, len(w), chunk):
        sl = slice(start, start + chunk)
        if real.n_atoms:
            sums[sl] = compensated_sum(atom_response_terms(w[sl], g_sq, v_sq, params), axis=1)
        else:
            sums[sl] = 0.0
    values = _cavity_reflection(w, sums, params.kappa)
    return ReflectionSpectrum(grid, values, real.excited_set, Provenance.FULL)


def reflection_evaluator(real: EnsembleRealization, params: PhysicsParams):
    """Callable w -> R(w) for use by quadrature routines."""
    return lambda w: reflection_full(real, params, np.atleast_1d(w)).values


def _gamma(params: PhysicsParams) -> float:
    return max(abs(params.delta), params.gamma_p)


def _arctan_ratio(z_sq):
    """arctan(z)/z as a function of z^2; even in z, so no square-root branch enters."""
    z_sq = np.asarray(z_sq, dtype=complex)
    z = np.sqrt(z_sq)
    small = np.abs(z_sq) < 1e-8
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(small, 1.0 - z_sq / 3.0, np.arctan(z) / np.where(small, 1.0, z))
    return out


def f_B(omega, params: PhysicsParams):
    """Mean response of atoms inside the blockade sphere.

    Average of Gamma_e [Gamma_e/2 - i w + |Omega|^2 (Gamma_p/2 + i(delta - w)) r^6/C3^2]^-1
    over a homogeneous sphere of radius R_B, with the interaction term
    dominating the Rydberg denominator. In closed form

        (1+i) arctan[(1+i) a / s] / (a s),
        a = [Gamma_p/(2 gamma) + i (delta - w)/gamma]^(1/2),  s = (i + 2w/Gamma_e)^(1/2),

    with gamma = max(|delta|, Gamma_p). The expression is even in its
    arctangent argument, so it is evaluated through arctan(z)/z and is
    independent of square-root branches. Re f_B > 0 for all w.
    """
    if params.delta == 0:
        raise DomainError("f_B needs a nonzero Forster defect; use reflection_full for delta = 0")
    w = np.asarray(omega, dtype=float)
    gam = _gamma(params)
    alpha_sq = (params.gamma_p / 2 + 1j * (params.delta - w)) / gam
    a = 1.0 - 2j * w / params.gamma_e
    out = (2.0 / a) * _arctan_ratio(2.0 * alpha_sq / a)
    return complex(out) if out.ndim == 0 else out


def f_B_signed(omega, params: PhysicsParams):
    """Variant written with the signed defect in the root and a leading minus.

    -(1+i) arctan[(1+i) a / s] / (a s), a = [Gamma_p/(2 delta) + i(1 - w/delta)]^(1/2),
    principal branches. For delta > 0 this is exactly ``-f_B``; at w = 0 and
    Gamma_p << |delta| it is close to i - 1 for either sign of delta, so its
    real part is negative and it cannot describe a passive medium. Kept for
    comparison only.
    """
    if params.delta == 0:
        raise DomainError("closed form needs a nonzero Forster defect")
    w = np.asarray(omega, dtype=float)
    alpha = np.sqrt(params.gamma_p / (2 * params.delta) + 1j * (1 - w / params.delta))
    s = np.sqrt(1j + 2 * w / params.gamma_e)
    out = -(1 + 1j) * np.arctan((1 + 1j) * alpha / s) / (alpha * s)
    return complex(out) if np.ndim(out) == 0 else out


def f_E(omega, params: PhysicsParams):
    """Response of an unperturbed EIT atom, i Gamma_e (i Gamma_e/2 + w - 2|Omega|^2/(2w + i Gamma_r))^-1."""
    w = np.asarray(omega, dtype=float)
    ge = params.gamma_e
    if params.omega_sq == 0:
        den = 1j * ge / 2 + w + 0j
        num = 1j * ge + 0 * w
    else:
        eit = 2 * w + 1j * params.gamma_r
        num = 1j * ge * eit
        den = (1j * ge / 2 + w) * eit - 2 * params.omega_sq
    if np.any(den == 0):
        bad = np.atleast_1d(w)[np.atleast_1d(den == 0)][0]
        raise SingularityError(f"f_E singular at omega={bad!r}", omega=float(bad))
    out = num / den
    return complex(out) if np.ndim(out) == 0 else out


def reflection_approx(params: PhysicsParams, n_total: float, n_blockaded: float, grid,
                      excited_set=frozenset({0})) -> ReflectionSpectrum:
    """R(w) = 1 - [1/2 - i w/kappa + f_B N_B C + f_E N_E C]^-1 with C from G0."""
    if not 0 <= n_blockaded <= n_total:
        raise ConfigurationError(f"need 0 <= n_blockaded <= n_total, got {n_blockaded}, {n_total}")
    grid = _as_grid(grid)
    w = grid.points
    c = params.cooperativity
    total = 0.5 - 1j * w / params.kappa + 0j
    if n_blockaded > 0:
        total = total + f_B(w, params) * n_blockaded * c
    if n_total - n_blockaded > 0:
        total = total + f_E(w, params) * (n_total - n_blockaded) * c
    if np.any(total == 0):
        bad = w[total == 0][0]
        raise SingularityError(f"denominator vanishes at omega={bad!r}", omega=float(bad))
    return ReflectionSpectrum(grid, 1.0 - 1.0 / total, excited_set, Provenance.APPROXIMATE)


def blockade_radius(params: PhysicsParams) -> float:
    """Distance beyond which ensemble atoms keep their EIT response, (Gamma_e C3^2 / gamma |Omega|^2)^(1/6)."""
    gam = _gamma(params)
    if params.omega_sq == 0:
        raise DomainError("blockade radius undefined for Omega = 0")
    if gam == 0:
        raise DomainError("blockade radius undefined for delta = Gamma_p = 0")
    return (params.gamma_e * params.c3**2 / (gam * params.omega_sq)) ** (1.0 / 6.0)


def count_blockaded(real: EnsembleRealization, params: PhysicsParams, radius: float | None = None) -> int:
    """Number of atoms closer than R_B to the nearest excited qubit."""
    if not real.excited_set or real.n_atoms == 0:
        return 0
    radius = blockade_radius(params) if radius is None else radius
    q = real.qubit_positions[sorted(real.excited_set)]
    dist = np.linalg.norm(real.positions[:, None, :] - q[None, :, :], axis=-1)
    return int(np.count_nonzero(dist.min(axis=1) < radius))


def n_blockaded_elongated(params: PhysicsParams, n_total: float, geom: CloudGeometry) -> float:
    """Elongated-cloud estimate N_B ~ N R_B / R_y, capped at N."""
    return min(float(n_total), n_total * blockade_radius(params) / geom.r_y)


def eit_linewidth(params: PhysicsParams, n_total: float, g: float | None = None) -> float:
    """Width |Omega|^2 / (sqrt(N) |G|) sqrt(kappa / Gamma_e) of the resonant EIT feature (Gamma_r = 0)."""
    g = params.g0 if g is None else abs(g)
    if n_total <= 0 or g <= 0:
        raise DomainError("EIT linewidth needs N > 0 and G > 0")
    return params.omega_sq / (np.sqrt(n_total) * g) * np.sqrt(params.kappa / params.gamma_e)


def eit_linewidth_dispersive(params: PhysicsParams, n_total: float, g: float | None = None) -> float:
    """Half-width kappa |Omega|^2 / (2 (N |G|^2 + |Omega|^2)) of the dark-polariton dip in |R|^2.

    This is the cavity linewidth reduced by the polariton's photon fraction,
    which sets the width of the |R|^2 feature when N C >> 1.
    """
    g = params.g0 if g is None else abs(g)
    if n_total <= 0 or g <= 0:
        raise DomainError("EIT linewidth needs N > 0 and G > 0")
    return params.kappa * params.omega_sq / (2 * (n_total * g**2 + params.omega_sq))


def _lorentzian(w, offset, height, half_width):
    return offset + height / (1.0 + (w / half_width) ** 2)


def fit_lorentzian(omega, y, guess_width: float):
    """Least-squares fit of ``offset + height / (1 + (w/hw)^2)``; returns (offset, height, hw, rms)."""
    omega = np.asarray(omega, float)
    y = np.asarray(y, float)
    p0 = [y[0], y[np.argmin(np.abs(omega))] - y[0], guess_width]
    p, _ = curve_fit(_lorentzian, omega, y, p0=p0, maxfev=20000)
    rms = float(np.sqrt(np.mean((y - _lorentzian(omega, *p)) ** 2)))
    return float(p[0]), float(p[1]), float(abs(p[2])), rms
