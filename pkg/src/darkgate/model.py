"""Physical parameters, ensemble geometry and per-atom couplings.

Units: rates and frequencies are angular frequencies in 1/us, with a
configured value of "1 MHz" identified with 1/us. Lengths are in um and the
Forster coefficient C3 is in (1/us) um^3, so 1 GHz um^3 is 1000.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, SamplingError


class AngularModel(str, enum.Enum):
    F1 = "F1"
    F2 = "F2"
    ISOTROPIC = "isotropic"


# C3 in (1/us) um^3, delta in 1/us.
FORSTER_RESONANCES = {
    "F1": dict(c3=1690.0, delta=-5.71, angular_model=AngularModel.F1),
    "F1_tuned": dict(c3=1690.0, delta=0.0, angular_model=AngularModel.F1),
    "F2": dict(c3=-18200.0, delta=-2.43, angular_model=AngularModel.F2),
    "F2_tuned": dict(c3=-18200.0, delta=0.0, angular_model=AngularModel.F2),
}


@dataclass(frozen=True)
class PhysicsParams:
    kappa: float = 10.0
    gamma_e: float = 3.0
    gamma_r: float = 0.01
    gamma_p: float = 0.01
    omega_ctrl: complex = 1.0
    delta: float = -2.43
    c3: float = -18200.0
    angular_model: AngularModel = AngularModel.F2
    g0: float = 1.0
    lambda_cav: float = 0.788

    def __post_init__(self):
        object.__setattr__(self, "angular_model", AngularModel(self.angular_model))
        if not self.kappa > 0:
            raise ConfigurationError(f"kappa must be positive, got {self.kappa}")
        if not min(self.gamma_e, self.gamma_r, self.gamma_p) >= 0:
            raise ConfigurationError("decay rates gamma_e, gamma_r and gamma_p must be nonnegative")
        if not self.lambda_cav > 0:
            raise ConfigurationError("lambda_cav must be positive")
        if self.g0 < 0:
            raise ConfigurationError("g0 must be nonnegative")

    @property
    def omega_sq(self) -> float:
        """|Omega|^2; the control phase never enters the reflection."""
        return abs(self.omega_ctrl) ** 2

    @property
    def cooperativity(self) -> float:
        """Single-atom cooperativity |G0|^2 / (kappa Gamma_e)."""
        if self.gamma_e == 0:
            raise DomainError("cooperativity undefined for Gamma_e = 0")
        return self.g0**2 / (self.kappa * self.gamma_e)

    def replace(self, **changes) -> "PhysicsParams":
        return replace(self, **changes)


def physics_preset(name: str, **overrides) -> PhysicsParams:
    """Physics parameters for a named Forster resonance.

    Decay rates, cavity coupling and wavelength default to the Rb values used
    throughout (Gamma_e = 3, Gamma_r = Gamma_p = 0.01, G0 = 1, 788 nm).
    """
    try:
        forster = FORSTER_RESONANCES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown Forster resonance {name!r}; choose from {sorted(FORSTER_RESONANCES)}"
        ) from None
    return PhysicsParams(**{**forster, **overrides})


@dataclass(frozen=True)
class CloudGeometry:
    r_c: float = 5.0
    r_y: float = 20.0
    r_g: float = 15.0
    n_atoms: int = 0
    qubit_positions: tuple = ((0.0, 0.0, 0.0),)
    min_separation: float = 1.0
    seed: int | tuple = 0

    def __post_init__(self):
        qpos = tuple(tuple(float(c) for c in q) for q in self.qubit_positions)
        object.__setattr__(self, "qubit_positions", qpos)
        if min(self.r_c, self.r_y, self.r_g) <= 0:
            raise ConfigurationError("cloud radii and mode waist must be positive")
        if self.n_atoms < 0:
            raise ConfigurationError("n_atoms must be nonnegative")
        if self.min_separation < 0:
            raise ConfigurationError("min_separation must be nonnegative")
        if any(len(q) != 3 for q in qpos):
            raise ConfigurationError("qubit positions must be 3-vectors")
        if len(set(qpos)) != len(qpos):
            raise ConfigurationError("qubit positions must be pairwise distinct")

    @property
    def qubit_array(self) -> np.ndarray:
        return np.asarray(self.qubit_positions, dtype=float).reshape(-1, 3)

    def replace(self, **changes) -> "CloudGeometry":
        return replace(self, **changes)


SINGLE_QUBIT = ((0.0, 0.0, 0.0),)
TWO_QUBITS = ((0.0, -15.0, 0.0), (0.0, 15.0, 0.0))


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EnsembleRealization:
    """One sampled ensemble with its couplings.

    ``v`` has shape ``(J, N)``: one row of Rb couplings per qubit atom.
    ``excited_set`` holds the indices of qubits in the Rydberg state.
    """

    positions: np.ndarray
    g: np.ndarray
    v: np.ndarray
    excited_set: frozenset = frozenset()
    qubit_positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    seed: object = None

    def __post_init__(self):
        pos = _frozen(self.positions, float).reshape(-1, 3)
        g = _frozen(self.g, complex).reshape(-1)
        n = len(pos)
        v = np.asarray(self.v, dtype=float)
        if v.size == 0:
            v = np.zeros((v.shape[0] if v.ndim == 2 else 0, n))
        v = _frozen(v.reshape(len(v) if v.ndim == 2 else -1, n), float)
        qpos = _frozen(self.qubit_positions, float).reshape(-1, 3)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "qubit_positions", qpos)
        object.__setattr__(self, "excited_set", frozenset(int(j) for j in self.excited_set))
        if len(g) != n:
            raise ConfigurationError(f"{n} positions but {len(g)} couplings")
        bad = [j for j in self.excited_set if not 0 <= j < len(v)]
        if bad:
            raise ConfigurationError(f"excited qubits {bad} out of range for {len(v)} qubits")

    @property
    def n_atoms(self) -> int:
        return len(self.g)

    @property
    def n_qubits(self) -> int:
        return len(self.v)

    def with_excited(self, excited: Iterable[int]) -> "EnsembleRealization":
        """Same atoms, different set of Rydberg-excited qubits."""
        return replace(self, excited_set=frozenset(excited))

    def v_squared_sum(self) -> np.ndarray:
        """Sum over excited qubits of |V_jn|^2, one value per atom."""
        out = np.zeros(self.n_atoms)
        for j in sorted(self.excited_set):
            out += self.v[j] ** 2
        return out


def homogeneous_realization(n_atoms: int, g: complex, v: Sequence | None = None,
                            excited: Iterable[int] = ()) -> EnsembleRealization:
    """Ensemble with identical couplings and no geometry.

    ``v`` is a per-qubit sequence of couplings; each entry may be a scalar
    (same for all atoms) or a length-N array.
    """
    v_rows = [] if v is None else [np.broadcast_to(np.asarray(vj, float), (n_atoms,)) for vj in v]
    return EnsembleRealization(
        positions=np.zeros((n_atoms, 3)),
        g=np.full(n_atoms, g, dtype=complex),
        v=np.array(v_rows, dtype=float).reshape(len(v_rows), n_atoms),
        excited_set=frozenset(excited),
        qubit_positions=np.zeros((len(v_rows), 3)),
    )


def cavity_coupling(pos, params: PhysicsParams, geom: CloudGeometry):
    """Standing-wave Gaussian-mode coupling G0 sin(2 pi y / lambda) exp(-(x^2+z^2)/R_G^2).

    ``pos`` may be a single 3-vector or an ``(N, 3)`` array.
    """
    pos = np.asarray(pos, dtype=float)
    x, y, z = pos[..., 0], pos[..., 1], pos[..., 2]
    g = params.g0 * np.sin(2 * np.pi * y / params.lambda_cav) * np.exp(-(x**2 + z**2) / geom.r_g**2)
    g = g.astype(complex)
    return complex(g) if g.ndim == 0 else g


def angular_factor(sin2_theta, model: AngularModel):
    model = AngularModel(model)
    if model is AngularModel.F1:
        return (10.0 + 6.0 * sin2_theta) / 9.0
    if model is AngularModel.F2:
        return (4.0 + 6.0 * sin2_theta) / 9.0
    return np.ones_like(sin2_theta, dtype=float)


def dipolar_coupling(qubit_pos, atom_pos, params: PhysicsParams):
    """Forster coupling sqrt(f(theta)) C3 / r^3 between a qubit and ensemble atoms.

    theta is the polar angle of the separation vector measured from z. The
    sign of C3 is kept.
    """
    d = np.asarray(atom_pos, dtype=float) - np.asarray(qubit_pos, dtype=float)
    r2 = np.sum(d**2, axis=-1)
    if np.any(r2 == 0):
        raise DomainError("dipolar coupling undefined at zero separation")
    sin2 = (d[..., 0] ** 2 + d[..., 1] ** 2) / r2
    v = np.sqrt(angular_factor(sin2, params.angular_model)) * params.c3 / r2**1.5
    return float(v) if np.ndim(v) == 0 else v


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed))


def sample_positions(geom: CloudGeometry, rng: np.random.Generator,
                     max_rounds: int = 200) -> np.ndarray:
    """Draw N positions from the Gaussian cloud outside every qubit's exclusion sphere."""
    n = geom.n_atoms
    sigma = np.array([geom.r_c, geom.r_y, geom.r_c]) / np.sqrt(2.0)
    pos = rng.normal(0.0, sigma, size=(n, 3))
    qubits = geom.qubit_array
    if n == 0 or len(qubits) == 0 or geom.min_separation == 0:
        return pos
    for _ in range(max_rounds):
        dist = np.linalg.norm(pos[:, None, :] - qubits[None, :, :], axis=-1)
        bad = np.flatnonzero(np.any(dist < geom.min_separation, axis=1))
        if len(bad) == 0:
            return pos
        pos[bad] = rng.normal(0.0, sigma, size=(len(bad), 3))
    raise SamplingError(
        f"{len(bad)} of {n} atoms still inside the {geom.min_separation} um exclusion "
        f"after {max_rounds} resampling rounds"
    )


def sample_ensemble(geom: CloudGeometry, params: PhysicsParams,
                    max_rounds: int = 200) -> EnsembleRealization:
    rng = make_rng(geom.seed)
    pos = sample_positions(geom, rng, max_rounds=max_rounds)
    qubits = geom.qubit_array
    g = cavity_coupling(pos, params, geom) if len(pos) else np.zeros(0, complex)
    if len(pos):
        v = np.array([dipolar_coupling(q, pos, params) for q in qubits]).reshape(len(qubits), -1)
    else:
        v = np.zeros((len(qubits), 0))
    return EnsembleRealization(positions=pos, g=g, v=v, qubit_positions=qubits, seed=geom.seed)
