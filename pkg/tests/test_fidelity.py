import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from darkgate.errors import ConfigurationError, ConsistencyError, CoverageError
from darkgate.fidelity import (TWO_QUBIT_SUBSETS, PhotonSpectrum, atom_atom_report,
                               atom_photon_report, fidelity_atom_atom, fidelity_atom_photon,
                               overlap_matrix, overlap_T, overlap_T2, theta)
from darkgate.model import CloudGeometry, TWO_QUBITS, physics_preset, sample_ensemble
from darkgate.reflection import FrequencyGrid, ReflectionSpectrum, reflection_evaluator, reflection_full

PHOTON = PhotonSpectrum(0.5, 64)


def constant(value, photon=PHOTON):
    grid = FrequencyGrid(photon.nodes)
    return ReflectionSpectrum(grid, np.full(len(grid), value, dtype=complex))


def test_photon_normalization():
    for d in (0.01, 1.0, 30.0):
        ph = PhotonSpectrum(d, 64)
        assert abs(ph.norm() - 1) < 1e-8
        w = np.linspace(-12 * d, 12 * d, 20001)
        assert trapezoid(np.abs(ph.amplitude(w)) ** 2, w) == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(ConfigurationError):
        PhotonSpectrum(0.0)
    with pytest.raises(ConfigurationError):
        PhotonSpectrum(1.0, shape="lorentzian")


def test_quadrature_second_moment():
    # |phi|^2 has variance D^2 / 2
    ph = PhotonSpectrum(0.7, 32)
    assert np.sum(ph.weights * ph.nodes**2) == pytest.approx(0.7**2 / 2, rel=1e-13)


def test_overlap_T_examples():
    assert overlap_T(constant(1.0), PHOTON) == pytest.approx(1.0, abs=1e-12)
    assert overlap_T(constant(-1.0), PHOTON) == pytest.approx(-1.0, abs=1e-12)
    th = 0.83
    assert overlap_T(constant(np.exp(1j * th)), PHOTON) == pytest.approx(np.exp(-1j * th), abs=1e-12)


def test_overlap_T2_examples():
    th = 1.1
    u = constant(np.exp(0.4j))
    assert overlap_T2(u, u, PHOTON) == pytest.approx(1.0, abs=1e-12)
    assert overlap_T2(constant(1.0), constant(-1.0), PHOTON) == pytest.approx(-1.0, abs=1e-12)
    assert overlap_T2(constant(np.exp(1j * th)), constant(1.0), PHOTON) == pytest.approx(np.exp(1j * th), abs=1e-12)


def test_mismatched_grids_rejected():
    a = constant(1.0)
    b = ReflectionSpectrum(FrequencyGrid(np.linspace(-5, 5, 64)), np.ones(64))
    with pytest.raises(ConfigurationError):
        overlap_T2(a, b, PHOTON)


def test_coverage_error_without_extrapolation():
    narrow = ReflectionSpectrum(FrequencyGrid(np.linspace(-1, 1, 101)), np.ones(101))
    with pytest.raises(CoverageError):
        overlap_T(narrow, PHOTON)


def test_interpolated_grid_matches_nodes():
    p = physics_preset("F2", omega_ctrl=2.0)
    real = sample_ensemble(CloudGeometry(n_atoms=50, qubit_positions=TWO_QUBITS, seed=2), p).with_excited({0})
    dense = reflection_full(real, p, np.linspace(-10, 10, 40001))
    exact = overlap_T(reflection_evaluator(real, p), PHOTON)
    at_nodes = overlap_T(reflection_full(real, p, PHOTON.nodes), PHOTON)
    assert at_nodes == pytest.approx(exact, abs=1e-14)
    assert overlap_T(dense, PHOTON) == pytest.approx(exact, abs=1e-6)


def test_atom_photon_examples():
    assert fidelity_atom_photon(1, -1) == pytest.approx(1.0, abs=1e-12)
    assert fidelity_atom_photon(1, 1) == pytest.approx(0.25, abs=1e-12)
    assert fidelity_atom_photon(-1, 1) == pytest.approx(0.0, abs=1e-12)


def _t2_from_constants(values):
    return {(sj, sk): values[sj] * np.conj(values[sk]) for sj, sk in itertools.product(TWO_QUBIT_SUBSETS, repeat=2)}


def test_atom_atom_examples():
    ideal = {s: complex(theta(s)) for s in TWO_QUBIT_SUBSETS}
    t2 = _t2_from_constants(ideal)
    assert all(t2[(j, k)] == theta(j) * theta(k) for j, k in t2)
    assert fidelity_atom_atom(t2) == pytest.approx(1.0, abs=1e-12)
    assert fidelity_atom_atom(_t2_from_constants({s: 1 + 0j for s in TWO_QUBIT_SUBSETS})) == pytest.approx(0.25, abs=1e-12)
    assert fidelity_atom_atom(_t2_from_constants({s: -1 + 0j for s in TWO_QUBIT_SUBSETS})) == pytest.approx(0.25, abs=1e-12)


def test_atom_atom_consistency_checks():
    t2 = _t2_from_constants({s: 1 + 0j for s in TWO_QUBIT_SUBSETS})
    bad = dict(t2)
    bad[(TWO_QUBIT_SUBSETS[0], TWO_QUBIT_SUBSETS[1])] = 0.5j
    with pytest.raises(ConsistencyError):
        fidelity_atom_atom(bad)
    missing = dict(t2)
    del missing[(TWO_QUBIT_SUBSETS[0], TWO_QUBIT_SUBSETS[3])]
    with pytest.raises(ConfigurationError):
        fidelity_atom_atom(missing)


def test_out_of_range_fidelity_rejected():
    with pytest.raises(ConsistencyError):
        fidelity_atom_photon(2.0, -2.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(-np.pi, np.pi)), min_size=4, max_size=4),
       st.floats(-3, 3))
def test_fidelity_bounds_and_global_phase(amp_phase, phi):
    """Passive spectra give fidelities in [0, 1]; the two-qubit value ignores a common phase."""
    ph = PhotonSpectrum(1.0, 16)
    x = ph.nodes
    spectra = {
        s: ReflectionSpectrum(FrequencyGrid(x), a * np.exp(1j * (p + 0.3 * k * x)))
        for k, (s, (a, p)) in enumerate(zip(TWO_QUBIT_SUBSETS, amp_phase))
    }
    rotated = {s: ReflectionSpectrum(r.grid, r.values * np.exp(1j * phi)) for s, r in spectra.items()}
    f = atom_atom_report(spectra, ph).value
    assert 0 <= f <= 1
    assert atom_atom_report(rotated, ph).value == pytest.approx(f, abs=1e-12)
    g = atom_photon_report(spectra, ph).value
    assert 0 <= g <= 1


def test_overlap_matrix_hermitian():
    p = physics_preset("F2", omega_ctrl=4.0)
    real = sample_ensemble(CloudGeometry(n_atoms=300, qubit_positions=TWO_QUBITS, seed=1), p)
    spectra = {s: reflection_full(real.with_excited(s), p, PHOTON.nodes) for s in TWO_QUBIT_SUBSETS}
    t2 = overlap_matrix(spectra, PHOTON)
    for j, k in t2:
        assert t2[(j, k)] == pytest.approx(np.conj(t2[(k, j)]), abs=1e-15)
    rep = atom_atom_report(spectra, PHOTON, tag="x")
    assert 0 <= rep.value <= 1 and rep.params_hash == "x"
