import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from darkgate.errors import ConfigurationError, DomainError, SingularityError
from darkgate.model import (CloudGeometry, PhysicsParams, homogeneous_realization, physics_preset,
                            sample_ensemble, TWO_QUBITS)
from darkgate.reflection import (FrequencyGrid, Provenance, blockade_radius, count_blockaded,
                                 eit_linewidth, eit_linewidth_dispersive, f_B, f_B_signed, f_E,
                                 fit_lorentzian, n_blockaded_elongated, reflection_approx,
                                 reflection_full)


def direct_reflection(w, g, v_sq, p):
    """Straightforward nested-fraction evaluation, one atom at a time."""
    total = p.kappa / 2 - 1j * w
    for gn, sn in zip(g, v_sq):
        inner = p.gamma_r / 2 - 1j * w
        if sn:
            inner = inner + sn / (p.gamma_p / 2 + 1j * (p.delta - w))
        total += abs(gn) ** 2 / (p.gamma_e / 2 - 1j * w + p.omega_sq / inner)
    return 1 - p.kappa / total


def sphere_average(p, w=0.0):
    """Mean single-atom response over a homogeneous sphere of radius R_B, by radial quadrature."""
    rb = blockade_radius(p)

    def term(r):
        v = p.c3 / r**3
        return p.gamma_e / (p.gamma_e / 2 - 1j * w
                            + p.omega_sq / (p.gamma_r / 2 - 1j * w + v**2 / (p.gamma_p / 2 + 1j * (p.delta - w))))

    re = quad(lambda r: r * r * term(r).real, 0, rb, limit=400, epsabs=0, epsrel=1e-12)[0]
    im = quad(lambda r: r * r * term(r).imag, 0, rb, limit=400, epsabs=0, epsrel=1e-12)[0]
    return 3 * (re + 1j * im) / rb**3


def test_grid_validation():
    with pytest.raises(ConfigurationError):
        FrequencyGrid([0.0, 0.0, 1.0])
    with pytest.raises(ConfigurationError):
        FrequencyGrid([0.0, np.inf])
    g = FrequencyGrid.symmetric(2.0, 5)
    np.testing.assert_array_equal(g.points, [-2, -1, 0, 1, 2])


def test_bare_cavity():
    p = PhysicsParams()
    r = reflection_full(homogeneous_realization(0, 0.0), p, [-1.0, 0.0, 2.0])
    assert r.values[1] == -1
    np.testing.assert_allclose(r.values, 1 - p.kappa / (p.kappa / 2 - 1j * r.omega), rtol=1e-15)
    assert r.provenance is Provenance.FULL


def test_eit_dark_state_any_n():
    p = physics_preset("F2", gamma_r=0.0, omega_ctrl=1.3)
    for n in (1, 17, 1000):
        real = homogeneous_realization(n, 0.8, v=[500.0])
        assert reflection_full(real, p, [0.0]).values[0] == -1


def test_strong_blockade_limit():
    p = physics_preset("F2", kappa=10.0, gamma_e=3.0, g0=1.0)
    n = 30  # N C = 1
    real = homogeneous_realization(n, 1.0, v=[1e9], excited={0})
    r0 = reflection_full(real, p, [0.0]).values[0]
    assert r0 == pytest.approx(0.6, abs=1e-9)
    nc = 7.0
    real = homogeneous_realization(210, 1.0, v=[1e9], excited={0})
    assert reflection_full(real, p, [0.0]).values[0] == pytest.approx(1 - 1 / (0.5 + 2 * nc), abs=1e-9)


def test_lossless_passivity():
    p = physics_preset("F2", gamma_e=0.0, gamma_r=0.0, gamma_p=0.0)
    real = sample_ensemble(CloudGeometry(n_atoms=200, qubit_positions=TWO_QUBITS, seed=3), p)
    w = np.linspace(-20, 20, 1000)
    for s in ({0}, {0, 1}):
        r = reflection_full(real.with_excited(s), p, w)
        assert np.max(np.abs(np.abs(r.values) - 1)) <= 1e-12


def test_matches_direct_evaluation():
    p = physics_preset("F1", omega_ctrl=2.0, g0=1.5)
    real = sample_ensemble(CloudGeometry(n_atoms=40, qubit_positions=TWO_QUBITS, seed=9), p)
    w = np.linspace(-3, 3, 41)
    for s in ({}, {0}, {0, 1}):
        rr = real.with_excited(s)
        ref = np.array([direct_reflection(x, rr.g, rr.v_squared_sum(), p) for x in w])
        np.testing.assert_allclose(reflection_full(rr, p, w).values, ref, rtol=1e-12, atol=1e-14)


def test_singularity_is_reported():
    # a lossless, undriven atom has a pole exactly at w = 0
    p = PhysicsParams(gamma_e=0.0, gamma_r=0.0, gamma_p=0.0, omega_ctrl=0.0)
    real = homogeneous_realization(1, 1.0)
    with pytest.raises(SingularityError) as info:
        reflection_full(real, p, [-1.0, 0.0, 1.0])
    assert info.value.omega == 0.0


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.1, 50), st.floats(0.01, 10), st.floats(0, 1), st.floats(0, 1),
    st.floats(0, 20), st.floats(-10, 10), st.integers(0, 50), st.floats(0, 3),
)
def test_passivity_with_losses(kappa, gamma_e, gamma_r, gamma_p, omega, delta, n, g):
    p = PhysicsParams(kappa=kappa, gamma_e=gamma_e, gamma_r=gamma_r, gamma_p=gamma_p,
                      omega_ctrl=omega, delta=delta)
    real = homogeneous_realization(n, g, v=[np.linspace(0, 30, max(n, 1))[:n] if n else 0.0], excited={0})
    vals = reflection_full(real, p, np.linspace(-15, 15, 61)).values
    assert np.all(np.abs(vals) <= 1 + 1e-12)


def test_f_E_limits():
    p = PhysicsParams(gamma_r=0.0, omega_ctrl=1.0)
    assert f_E(0.0, p) == 0
    assert f_E(0.0, p.replace(omega_ctrl=0.0)) == pytest.approx(2.0, rel=1e-15)
    q = PhysicsParams(gamma_r=0.02, omega_ctrl=0.7, gamma_e=3.0)
    expected = q.gamma_e / (q.gamma_e / 2 + 2 * q.omega_sq / q.gamma_r)
    val = f_E(0.0, q)
    assert val == pytest.approx(expected, rel=1e-14)
    assert abs(val.imag) < 1e-15 and val.real > 0


def test_f_E_matches_single_atom_term():
    p = physics_preset("F2", omega_ctrl=1.7, gamma_r=0.05)
    w = np.linspace(-4, 4, 33)
    real = homogeneous_realization(1, 1.0)
    direct = p.gamma_e * np.array([1 / (p.gamma_e / 2 - 1j * x + p.omega_sq / (p.gamma_r / 2 - 1j * x)) for x in w])
    np.testing.assert_allclose(f_E(w, p), direct, rtol=1e-13)
    assert real.n_atoms == 1


@pytest.mark.parametrize("name", ["F1", "F2"])
def test_f_B_against_sphere_integral(name):
    p = physics_preset(name)
    fb = f_B(0.0, p)
    ref = sphere_average(p)
    assert abs(fb - ref) / abs(ref) < 0.02


def test_f_B_small_loss_ratio_negative_defect():
    p = physics_preset("F2", gamma_p=2.43e-3)
    ref = sphere_average(p)
    assert abs(f_B(0.0, p) - ref) / abs(ref) < 0.02


def test_f_B_is_passive_and_continuous():
    p = physics_preset("F2")
    w = np.linspace(-8, 8, 4001)
    fb = f_B(w, p)
    assert np.all(fb.real > 0)
    assert np.max(np.abs(np.diff(fb))) < 0.05


def test_f_B_sign_of_printed_variant():
    p = physics_preset("F2", delta=2.43)
    w = np.linspace(-3, 3, 13)
    np.testing.assert_allclose(f_B_signed(w, p), -f_B(w, p), rtol=1e-12)
    # magnitude of order one in both forms
    assert 1 < abs(f_B(0.0, physics_preset("F2"))) < 2


def test_f_B_rejects_zero_defect():
    with pytest.raises(DomainError):
        f_B(0.0, physics_preset("F2_tuned"))


def test_reflection_approx_limits():
    p = physics_preset("F2")
    assert reflection_approx(p, 0, 0, [0.0]).values[0] == -1
    assert reflection_approx(p.replace(gamma_r=0.0), 500, 0, [0.0]).values[0] == -1
    nb = 10 / p.cooperativity
    r0 = reflection_approx(p, nb, nb, [0.0]).values[0]
    assert r0 == pytest.approx(1 - 1 / (0.5 + 10 * f_B(0.0, p)), rel=1e-14)
    assert reflection_approx(p, 10, 3, [0.0]).provenance is Provenance.APPROXIMATE
    with pytest.raises(ConfigurationError):
        reflection_approx(p, 10, 11, [0.0])


def test_blockade_radius():
    p = physics_preset("F2", omega_ctrl=1.0)
    rb = blockade_radius(p)
    assert rb == pytest.approx(27.244, abs=1e-3)
    # interaction term equals the Gamma_e/2 term at r = R_B
    v = abs(p.c3) / rb**3
    assert p.omega_sq * abs(p.delta) / v**2 == pytest.approx(p.gamma_e, rel=1e-12)
    assert blockade_radius(p.replace(omega_ctrl=8.0)) == pytest.approx(0.5 * rb, rel=1e-14)
    at = p.replace(delta=-0.01, gamma_p=0.01)
    below = at.replace(gamma_p=0.01 * (1 - 1e-9))
    assert blockade_radius(below) == pytest.approx(blockade_radius(at), rel=1e-8)
    assert blockade_radius(p.replace(delta=0.0, gamma_p=0.5)) == pytest.approx(
        (p.gamma_e * p.c3**2 / (0.5 * p.omega_sq)) ** (1 / 6))
    with pytest.raises(DomainError):
        blockade_radius(p.replace(omega_ctrl=0.0))
    with pytest.raises(DomainError):
        blockade_radius(p.replace(delta=0.0, gamma_p=0.0))


def test_blockaded_counts():
    p = physics_preset("F2", omega_ctrl=3.0)
    geom = CloudGeometry(n_atoms=2000, qubit_positions=TWO_QUBITS, seed=4)
    real = sample_ensemble(geom, p)
    assert count_blockaded(real, p) == 0
    one = count_blockaded(real.with_excited({0}), p)
    both = count_blockaded(real.with_excited({0, 1}), p)
    assert 0 < one <= both <= 2000
    d = np.linalg.norm(real.positions - real.qubit_positions[0], axis=1)
    assert one == np.count_nonzero(d < blockade_radius(p))
    assert n_blockaded_elongated(p, 2000, geom) == pytest.approx(2000 * blockade_radius(p) / geom.r_y)
    assert n_blockaded_elongated(p.replace(omega_ctrl=0.01), 2000, geom) == 2000


def test_eit_linewidth_scalings():
    p = physics_preset("F2", omega_ctrl=1.0)
    w = eit_linewidth(p, 100)
    assert eit_linewidth(p, 200) == pytest.approx(w / np.sqrt(2), rel=1e-14)
    assert eit_linewidth(p.replace(omega_ctrl=2.0), 100) == pytest.approx(4 * w, rel=1e-14)
    with pytest.raises(DomainError):
        eit_linewidth(p, 0)


@pytest.mark.parametrize("omega_ctrl", [0.3, 1.0, 3.0])
def test_dark_polariton_width(omega_ctrl):
    p = PhysicsParams(gamma_r=0.0, omega_ctrl=omega_ctrl, kappa=10.0, gamma_e=3.0, g0=1.0)
    n = 3000
    hw = eit_linewidth_dispersive(p, n)
    w = np.linspace(-6 * hw, 6 * hw, 2001)
    y = np.abs(reflection_full(homogeneous_realization(n, 1.0), p, w).values) ** 2
    _, _, fit_hw, rms = fit_lorentzian(w, y, hw)
    assert rms < 1e-4
    assert fit_hw == pytest.approx(hw, rel=0.02)


def test_fit_lorentzian_recovers_parameters():
    w = np.linspace(-5, 5, 501)
    y = 0.9 - 0.7 / (1 + (w / 0.37) ** 2)
    off, height, hw, rms = fit_lorentzian(w, y, 1.0)
    assert (off, height, hw) == pytest.approx((0.9, -0.7, 0.37), rel=1e-8)
    assert rms < 1e-10
