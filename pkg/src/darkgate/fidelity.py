"""Spectral overlaps and state-averaged phase-gate fidelities."""

from __future__ import annotations

import hashlib
import itertools
import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from numpy.polynomial.hermite import hermgauss

from .errors import ConfigurationError, ConsistencyError, CoverageError
from .reflection import ReflectionSpectrum

log = logging.getLogger(__name__)

FIDELITY_EPS = 1e-10

# the four qubit subsets of a two-qubit register, in a fixed order
TWO_QUBIT_SUBSETS = (frozenset(), frozenset({0}), frozenset({1}), frozenset({0, 1}))


@dataclass(frozen=True)
class PhotonSpectrum:
    """Gaussian single-photon spectrum with Gauss-Hermite quadrature.

    phi(w) = exp(-w^2 / (2 D^2)) / sqrt(sqrt(pi) D), so |phi|^2 is a normal
    density of variance D^2/2 and Gauss-Hermite nodes in w/D integrate it
    exactly up to polynomial degree 2n-1.
    """

    delta_omega: float
    n_nodes: int = 64
    shape: str = "gaussian"
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.delta_omega > 0:
            raise ConfigurationError("photon bandwidth must be positive")
        if self.shape != "gaussian":
            raise ConfigurationError(f"unsupported photon shape {self.shape!r}")
        x, wts = hermgauss(self.n_nodes)
        nodes = self.delta_omega * x
        weights = wts / np.sqrt(np.pi)
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def amplitude(self, omega):
        d = self.delta_omega
        return np.exp(-np.asarray(omega) ** 2 / (2 * d**2)) / np.sqrt(np.sqrt(np.pi) * d)

    def norm(self) -> float:
        return float(np.sum(self.weights))


def _values_at_nodes(spec, photon: PhotonSpectrum) -> np.ndarray:
    """R at the quadrature nodes: direct if the grid is the node set, else interpolated."""
    if callable(spec):
        return np.asarray(spec(photon.nodes), dtype=complex)
    w = spec.omega
    if len(w) == len(photon.nodes) and np.allclose(w, photon.nodes, rtol=0, atol=1e-12 * photon.delta_omega):
        vals = spec.values
        if not np.all(spec.valid):
            raise CoverageError("spectrum has flagged points at quadrature nodes")
        return vals
    lo, hi = photon.nodes[0], photon.nodes[-1]
    if lo < w[0] or hi > w[-1]:
        raise CoverageError(
            f"quadrature nodes span [{lo:.4g}, {hi:.4g}] but the spectrum covers [{w[0]:.4g}, {w[-1]:.4g}]"
        )
    ok = spec.valid
    re = np.interp(photon.nodes, w[ok], spec.values[ok].real)
    im = np.interp(photon.nodes, w[ok], spec.values[ok].imag)
    return re + 1j * im


def overlap_T(spec, photon: PhotonSpectrum) -> complex:
    """T = integral |phi(w)|^2 R*(w) dw.

    ``spec`` is a ReflectionSpectrum or a callable evaluating R at given w.
    """
    r = _values_at_nodes(spec, photon)
    return complex(np.sum(photon.weights * np.conj(r)))


def overlap_T2(spec_j, spec_k, photon: PhotonSpectrum) -> complex:
    """T^j_k = integral |phi(w)|^2 R_j(w) R_k*(w) dw."""
    if isinstance(spec_j, ReflectionSpectrum) and isinstance(spec_k, ReflectionSpectrum):
        if len(spec_j.omega) != len(spec_k.omega) or not np.array_equal(spec_j.omega, spec_k.omega):
            raise ConfigurationError("overlap needs both spectra on the same frequency grid")
    rj = _values_at_nodes(spec_j, photon)
    rk = _values_at_nodes(spec_k, photon)
    return complex(np.sum(photon.weights * rj * np.conj(rk)))


def _clamp(value: float, what: str) -> float:
    if value > 1 + FIDELITY_EPS or value < -FIDELITY_EPS:
        raise ConsistencyError(f"{what} = {value!r} lies outside [0, 1] beyond tolerance")
    clamped = min(max(value, 0.0), 1.0)
    if clamped != value:
        log.debug("clamped %s from %r to %r", what, value, clamped)
    return clamped


def fidelity_atom_photon(t_excited: complex, t_empty: complex) -> float:
    """Average atom-photon gate fidelity |2 + T_j - T_empty|^2 / 16."""
    return _clamp(abs(2 + t_excited - t_empty) ** 2 / 16.0, "atom-photon fidelity")


def theta(subset) -> int:
    return -1 if len(subset) == 0 else 1


def fidelity_atom_atom(t2: Mapping, hermitian_tol: float = 1e-10) -> float:
    """Average two-qubit gate fidelity (1/16) sum_jk Theta_j Theta_k T^j_k.

    ``t2`` maps ``(subset_j, subset_k)`` pairs (frozensets over {0, 1}) to
    overlaps. All sixteen pairs are required.
    """
    total = 0j
    for sj, sk in itertools.product(TWO_QUBIT_SUBSETS, repeat=2):
        try:
            tjk = t2[(sj, sk)]
            tkj = t2[(sk, sj)]
        except KeyError as exc:
            raise ConfigurationError(f"missing overlap for subsets {exc.args[0]}") from None
        if abs(tjk - np.conj(tkj)) > hermitian_tol * max(1.0, abs(tjk)):
            raise ConsistencyError(f"overlaps for {set(sj)}, {set(sk)} are not Hermitian pairs")
        total += theta(sj) * theta(sk) * tjk
    if abs(total.imag) > 16 * hermitian_tol:
        raise ConsistencyError(f"atom-atom fidelity has imaginary part {total.imag / 16!r}")
    return _clamp(total.real / 16.0, "atom-atom fidelity")


def overlap_matrix(spectra: Mapping, photon: PhotonSpectrum) -> dict:
    """All pairwise T^j_k for spectra keyed by qubit subset."""
    vals = {s: _values_at_nodes(r, photon) for s, r in spectra.items()}
    out = {}
    for sj, sk in itertools.product(vals, repeat=2):
        out[(sj, sk)] = complex(np.sum(photon.weights * vals[sj] * np.conj(vals[sk])))
    return out


def params_hash(*objects) -> str:
    h = hashlib.sha256()
    for obj in objects:
        h.update(repr(obj).encode())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class GateFidelityReport:
    value: float
    overlaps: dict
    excited_sets: tuple
    params_hash: str = ""


def atom_photon_report(spectra: Mapping, photon: PhotonSpectrum, excited=frozenset({0}), tag="") -> GateFidelityReport:
    t_exc = overlap_T(spectra[frozenset(excited)], photon)
    t_emp = overlap_T(spectra[frozenset()], photon)
    return GateFidelityReport(
        fidelity_atom_photon(t_exc, t_emp),
        {frozenset(excited): t_exc, frozenset(): t_emp},
        (frozenset(), frozenset(excited)),
        tag,
    )


def atom_atom_report(spectra: Mapping, photon: PhotonSpectrum, tag="") -> GateFidelityReport:
    t2 = overlap_matrix({s: spectra[s] for s in TWO_QUBIT_SUBSETS}, photon)
    return GateFidelityReport(fidelity_atom_atom(t2), t2, TWO_QUBIT_SUBSETS, tag)
