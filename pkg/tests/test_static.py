import numpy as np
import pytest
from scipy import linalg

from tdsiclab.errors import NonConvergenceError, StallError
from tdsiclab.grid import Grid1D, lowdin_orthonormalize, ortho_error
from tdsiclab.hamiltonians import Scheme, build_potentials, densities, raw_lagrange_matrix, rotate, total_energy
from tdsiclab.model import ModelParams, System1D
from tdsiclab.observables import variance
from tdsiclab.oracles import position_eigenbasis
from tdsiclab.static import (
    StaticConfig,
    complex_rotation,
    damped_gradient_step,
    initial_guess,
    orbital_residuals,
    solve_static,
    symmetry_residual,
    unitary_symmetry_step,
    variance_localize,
)

from conftest import random_set


@pytest.mark.parametrize(
    "kw",
    [dict(delta_step=0.0), dict(delta_step=1.5), dict(e_damp=0.0), dict(eta=-1.0), dict(tol_residual=0.0),
     dict(max_iter=0), dict(localize_every=-1), dict(complex_kick=-0.1)],
)
def test_static_config_validation(kw):
    with pytest.raises(ValueError):
        StaticConfig(**kw)


@pytest.mark.parametrize("scheme", ["LDA", "SIC", "HF"])
def test_converged_state_properties(scheme, static2_small, sys2_small):
    res = static2_small[Scheme.parse(scheme)]
    g = sys2_small.grid
    assert res.orbital_residual < 1e-9
    assert ortho_error(res.localizing_set, g) < 1e-12
    assert ortho_error(res.diagonalizing_set, g) < 1e-12
    # the two sets are one unitary map apart and carry the same density
    assert np.max(np.abs(rotate(res.localizing_set, res.unitary) - res.diagonalizing_set)) < 1e-10
    rho_loc = densities(res.localizing_set).sum(0)
    rho_diag = densities(res.diagonalizing_set).sum(0)
    assert np.max(np.abs(rho_loc - rho_diag)) < 1e-10
    assert np.all(np.diff(res.energies) > 0)
    assert res.ionization_potential == pytest.approx(-res.energies[-1])
    assert res.total_energy == pytest.approx(total_energy(res.localizing_set, scheme, sys2_small), abs=1e-12)


def test_energy_never_rises_during_iteration(static2_small):
    for res in static2_small.values():
        e = np.array([row["total_energy"] for row in res.history])
        assert np.all(np.diff(e) <= 1e-10)


def test_sic_symmetry_condition_and_hermitian_multipliers(static2_small, sys2_small):
    res = static2_small[Scheme.SIC]
    g = sys2_small.grid
    pot = build_potentials(sys2_small, "SIC", res.localizing_set)
    k, kmax = symmetry_residual(res.localizing_set, pot, g)
    assert kmax < 1e-9
    assert np.allclose(k, -k.conj().T)
    raw = raw_lagrange_matrix(res.localizing_set, pot, g)
    assert np.max(np.abs(raw - raw.conj().T)) < 1e-8


def test_sic_localizing_set_is_more_compact(static2_small, sys2_small):
    res = static2_small[Scheme.SIC]
    g = sys2_small.grid
    assert variance(res.localizing_set, g) < variance(res.diagonalizing_set, g)


def test_sic_binds_more_than_lda(static2_small):
    # self-interaction makes LDA states too shallow
    assert static2_small[Scheme.SIC].energies[-1] < static2_small[Scheme.LDA].energies[-1]
    assert static2_small[Scheme.SIC].energies[0] < static2_small[Scheme.LDA].energies[0]


def test_sic_energy_gradient_over_unitaries_is_k(static2_small, sys2_small, rng):
    # for psi -> rotate(psi, exp(A)), dE_SIC = Re tr(K^+ A) at first order
    res = static2_small[Scheme.SIC]
    s = res.localizing_set
    g = sys2_small.grid
    # move away from the stationary point first so that K is not small
    s = rotate(s, linalg.expm(np.array([[0, 0.3], [-0.3, 0]])))
    pot = build_potentials(sys2_small, "SIC", s)
    k, _ = symmetry_residual(s, pot, g)
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    a = 0.5 * (a - a.conj().T)
    h = 1e-5
    ep = total_energy(rotate(s, linalg.expm(h * a)), "SIC", sys2_small)
    em = total_energy(rotate(s, linalg.expm(-h * a)), "SIC", sys2_small)
    assert (ep - em) / (2 * h) == pytest.approx(np.trace(k.conj().T @ a).real, rel=1e-5)


def test_unitary_symmetry_step_reduces_residual(sys2_small, static2_small):
    g = sys2_small.grid
    s = rotate(static2_small[Scheme.SIC].localizing_set, linalg.expm(np.array([[0, 0.2], [-0.2, 0]])))
    pot = build_potentials(sys2_small, "SIC", s)
    k0 = np.linalg.norm(symmetry_residual(s, pot, g)[0])
    step = unitary_symmetry_step(s, np.eye(2), StaticConfig(), sys2_small, pot)
    k1 = np.linalg.norm(symmetry_residual(step.orbitals, step.potentials, g)[0])
    assert step.accepted and k1 < k0
    u = step.unitary
    assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-12)
    # the map takes the old set to the new one
    assert np.allclose(rotate(step.orbitals, u), s, atol=1e-10)


def test_unitary_symmetry_step_stalls_at_tiny_eta(sys2_small, static2_small):
    s = rotate(static2_small[Scheme.SIC].localizing_set, linalg.expm(np.array([[0, 0.2], [-0.2, 0]])))
    with pytest.raises(StallError) as info:
        unitary_symmetry_step(s, np.eye(2), StaticConfig(), sys2_small, eta=1e-13)
    assert info.value.residual > 0


def test_damped_gradient_step_lowers_energy(sys2_small):
    s = initial_guess(sys2_small)
    e0 = total_energy(s, "LDA", sys2_small)
    s1 = damped_gradient_step(s, "LDA", StaticConfig(), sys2_small)
    assert ortho_error(s1, sys2_small.grid) < 1e-12
    assert total_energy(s1, "LDA", sys2_small) < e0


def test_non_convergence_carries_histories(sys2_small):
    with pytest.raises(NonConvergenceError) as info:
        solve_static("LDA", sys2_small, StaticConfig(max_iter=3))
    err = info.value
    assert len(err.orbital_history) == 4
    assert len(err.symmetry_history) == 4
    assert err.orbital_history[-1] < err.orbital_history[0]


def test_on_iteration_callback(sys2_small):
    rows = []
    solve_static("HF", sys2_small, StaticConfig(tol_residual=1e-5), on_iteration=rows.append)
    assert rows[0]["iteration"] == 0
    assert set(rows[0]) == {"iteration", "total_energy", "orbital_residual", "sym_residual", "variance"}


def test_variance_localize_reaches_position_eigenbasis(static2_small, sys2_small):
    g = sys2_small.grid
    phi = static2_small[Scheme.LDA].diagonalizing_set
    q, loc = variance_localize(phi, g)
    assert np.allclose(q.conj().T @ q, np.eye(2), atol=1e-12)
    assert np.allclose(rotate(phi, q), loc)
    assert variance(loc, g) == pytest.approx(variance(position_eigenbasis(phi, g), g), abs=1e-9)
    assert variance(loc, g) < variance(phi, g)
    # idempotent: a localized set is left alone
    _, again = variance_localize(loc, g)
    assert variance(again, g) == pytest.approx(variance(loc, g), abs=1e-12)


def test_variance_localize_complex_three_orbitals(rng):
    g = Grid1D(64, 0.4)
    s = lowdin_orthonormalize(random_set(rng, 3, g), g)
    _, loc = variance_localize(s, g)
    assert variance(loc, g) == pytest.approx(variance(position_eigenbasis(s, g), g), abs=1e-8)


def test_complex_rotation_is_unitary(rng):
    g = Grid1D(64, 0.4)
    s = lowdin_orthonormalize(random_set(rng, 3, g, complex_=False), g)
    out = complex_rotation(s, 0.1)
    assert ortho_error(out, g) < 1e-12
    assert np.any(np.abs(out.imag) > 1e-3)
    assert complex_rotation(s, 0.0) is s


def test_one_electron_sic_and_hf_equal_bare():
    g = Grid1D(128, 0.25)
    p = ModelParams(n_electrons=1)
    bare = solve_static("LDA", System1D(g, p, interacting=False), StaticConfig(tol_residual=1e-10))
    for scheme in ("SIC", "HF"):
        res = solve_static(scheme, System1D(g, p), StaticConfig(tol_residual=1e-10))
        assert res.energies[0] == pytest.approx(bare.energies[0], abs=1e-9)
        assert res.total_energy == pytest.approx(bare.total_energy, abs=1e-9)


def test_three_electron_ordering(static3_small):
    lda, sic, hf = (static3_small[Scheme.parse(s)] for s in ("LDA", "SIC", "HF"))
    # LDA underbinds the outermost electron relative to both SIC and HF
    assert lda.ionization_potential < hf.ionization_potential
    assert lda.ionization_potential < sic.ionization_potential
    assert sic.sym_residual < 1e-9


def test_orbital_residual_vanishes_on_exact_eigenstates():
    g = Grid1D(128, 0.25)
    system = System1D(g, ModelParams(n_electrons=2), interacting=False)
    s = initial_guess(system)
    pot = build_potentials(system, "LDA", s)
    assert orbital_residuals(s, "LDA", pot, g).orbital < 1e-10
