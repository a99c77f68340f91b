"""Ground states for LDA, HF and double-set SIC.

The orbital update is a preconditioned (damped) gradient step followed by
Loewdin orthonormalization. For SIC it is interlaced with a gradient step
on the unitary map that drives the symmetry condition
``K_ba = (psi_b|U_b - U_a|psi_a) = 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import linalg, optimize

from .errors import DivergenceError, NonConvergenceError, StallError
from .grid import Grid1D, apply_kinetic, lowdin_orthonormalize, lowdin_unitary, overlap_matrix
from .hamiltonians import (
    PotentialBundle,
    Scheme,
    build_potentials,
    energy_components,
    lagrange_matrix,
    orbital_gradients,
    raw_lagrange_matrix,
    rotate,
    single_particle_energies,
)
from .model import System1D
from .observables import variance

log = logging.getLogger(__name__)

ENERGY_SLACK = 1e-10


@dataclass(frozen=True)
class StaticConfig:
    delta_step: float = 0.3
    e_damp: float = 1.0
    eta: float = 0.2
    tol_residual: float = 1e-7
    tol_sym: float = 1e-7
    max_iter: int = 20000
    localize_every: int = 200
    localize_until: int = 1000
    complex_kick: float = 0.1

    def __post_init__(self):
        if not 0 < self.delta_step <= 1:
            raise ValueError(f"delta_step must lie in (0, 1], got {self.delta_step}")
        if not self.e_damp > 0:
            raise ValueError(f"e_damp must be > 0, got {self.e_damp}")
        if not self.eta > 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if not (self.tol_residual > 0 and self.tol_sym > 0):
            raise ValueError("tolerances must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.localize_every < 0:
            raise ValueError("localize_every must be >= 0")
        if self.complex_kick < 0:
            raise ValueError("complex_kick must be >= 0")


@dataclass(frozen=True)
class StaticResult:
    scheme: Scheme
    localizing_set: np.ndarray
    diagonalizing_set: np.ndarray
    unitary: np.ndarray
    energies: np.ndarray
    total_energy: float
    orbital_residual: float
    sym_residual: float
    iterations: int
    lagrange: np.ndarray
    energy_terms: dict = field(default_factory=dict)
    history: list = field(default_factory=list, repr=False)

    @property
    def ionization_potential(self):
        return -float(self.energies[-1])


class Residuals(NamedTuple):
    orbital: float
    symmetry: float
    lagrange: np.ndarray
    gradient: np.ndarray  # h_a psi_a - sum_b psi_b lambda_ba


# --- diagnostics -----------------------------------------------------------


def symmetry_residual(s, pot: PotentialBundle, g: Grid1D):
    """K_ba = (psi_b|U_b - U_a|psi_a) and its max modulus. K is antihermitian."""
    s = np.atleast_2d(s)
    if pot.u_sic_per_orbital is None or len(s) == 1:
        return np.zeros((len(s), len(s)), dtype=complex), 0.0
    w = pot.u_sic_per_orbital * s
    k = overlap_matrix(w, s, g) - overlap_matrix(s, w, g)
    np.fill_diagonal(k, 0.0)
    return k, float(np.max(np.abs(k)))


def orbital_residuals(s, scheme, pot: PotentialBundle, g: Grid1D, hs=None) -> Residuals:
    s = np.atleast_2d(s)
    hs = orbital_gradients(s, pot, g) if hs is None else hs
    raw = raw_lagrange_matrix(s, pot, g, hs)
    lam = lagrange_matrix(s, scheme, pot, g, hs)
    # Pi_perp h_a psi_a uses the raw brackets, the update uses the symmetrized ones
    perp = hs - raw.T @ s
    orbital = float(np.sqrt(np.max(np.sum(np.abs(perp) ** 2, axis=-1) * g.spacing)))
    _, sym = symmetry_residual(s, pot, g)
    return Residuals(orbital, sym, lam, hs - lam.T @ s)


# --- elementary steps ------------------------------------------------------


def precondition(r, g: Grid1D, e_damp):
    return np.fft.ifft(np.fft.fft(r, axis=-1) / (g.kinetic_symbol + e_damp), axis=-1)


def damped_gradient_step(s, scheme, cfg: StaticConfig, system: System1D, pot: PotentialBundle | None = None, delta=None):
    """psi_a <- O{ psi_a - delta/(T + E_damp) [h_a psi_a - sum_b psi_b lambda_ba] }."""
    g = system.grid
    s = np.atleast_2d(s)
    pot = build_potentials(system, scheme, s) if pot is None else pot
    res = orbital_residuals(s, scheme, pot, g)
    step = cfg.delta_step if delta is None else delta
    trial = s - step * precondition(res.gradient, g, cfg.e_damp)
    if not np.all(np.isfinite(trial)):
        raise DivergenceError("non-finite orbitals after damped gradient step")
    return lowdin_orthonormalize(trial, g)


class SymmetryStep(NamedTuple):
    unitary: np.ndarray
    orbitals: np.ndarray
    potentials: PotentialBundle
    residual: float
    eta: float
    accepted: bool


def unitary_symmetry_step(s, unitary, cfg: StaticConfig, system: System1D, pot: PotentialBundle | None = None, eta=None, eta_min=1e-12):
    """One backtracking gradient step on the unitary map toward the symmetry condition.

    With psi = phi U (U = V^+), the driving force
    D_ig = (phi_i|h_g|psi_g) - sum_b U_ib lambda_bg reduces to U K / 2, so
    U_new = O{U (1 - eta K/2)}. A step is accepted when the Frobenius norm
    of K decreases, otherwise eta is halved.
    """
    g = system.grid
    s = np.atleast_2d(s)
    pot = build_potentials(system, Scheme.SIC, s) if pot is None else pot
    k, kmax = symmetry_residual(s, pot, g)
    knorm = np.linalg.norm(k)
    eta = cfg.eta if eta is None else eta
    n = len(s)
    if knorm == 0.0:
        return SymmetryStep(unitary, s, pot, kmax, eta, True)
    while eta >= eta_min:
        q = lowdin_unitary(np.eye(n) - 0.5 * eta * k)
        trial = rotate(s, q)
        tpot = build_potentials(system, Scheme.SIC, trial)
        tk, tkmax = symmetry_residual(trial, tpot, g)
        if np.linalg.norm(tk) < knorm:
            return SymmetryStep(q.conj().T @ unitary, trial, tpot, tkmax, eta, True)
        eta *= 0.5
    raise StallError(f"symmetry step stalled with max|K| = {kmax:.3e}", residual=kmax)


# --- localization ----------------------------------------------------------


def _pair_objective(theta, xaa, xbb, xab_abs):
    c, s_ = np.cos(theta), np.sin(theta)
    new_a = c * c * xaa + s_ * s_ * xbb + 2 * c * s_ * xab_abs
    new_b = s_ * s_ * xaa + c * c * xbb - 2 * c * s_ * xab_abs
    return -(new_a * new_a + new_b * new_b)


def _best_pair_angle(xaa, xbb, xab_abs, n_scan=32):
    thetas = np.linspace(0.0, np.pi / 2, n_scan, endpoint=False)
    vals = _pair_objective(thetas, xaa, xbb, xab_abs)
    j = int(np.argmin(vals))
    d = thetas[1] - thetas[0]
    res = optimize.minimize_scalar(
        _pair_objective,
        bracket=(thetas[j] - d, thetas[j], thetas[j] + d),
        args=(xaa, xbb, xab_abs),
        method="golden",
        tol=1e-12,
    )
    theta = res.x if res.fun <= vals[j] else thetas[j]
    return float(theta), float(min(res.fun, vals[j])), float(vals[0])


def variance_localize(s, g: Grid1D, max_sweeps=100, tol=1e-13):
    """Minimize the summed spatial variance by Jacobi sweeps of pair rotations.

    Returns ``(Q, s')`` with ``s' = rotate(s, Q)``. In 1D the optimum
    diagonalizes the occupied-space position matrix; the sweeps approach it
    pairwise.
    """
    s = np.atleast_2d(np.asarray(s, dtype=complex)).copy()
    n = len(s)
    q_total = np.eye(n, dtype=complex)
    if n == 1:
        return q_total, s
    xs = g.x * s
    for _ in range(max_sweeps):
        improved = 0.0
        for a in range(n - 1):
            for b in range(a + 1, n):
                xm = overlap_matrix(s[[a, b]], xs[[a, b]], g)
                xaa, xbb, xab = xm[0, 0].real, xm[1, 1].real, xm[0, 1]
                theta, best, at_zero = _best_pair_angle(xaa, xbb, abs(xab))
                gain = at_zero - best
                if gain <= tol * max(1.0, abs(at_zero)):
                    continue
                chi = -np.angle(xab)
                c, sn = np.cos(theta), np.sin(theta)
                q = np.eye(n, dtype=complex)
                q[a, a] = c
                q[b, b] = c
                q[b, a] = sn * np.exp(1j * chi)
                q[a, b] = -sn * np.exp(-1j * chi)
                s = rotate(s, q)
                xs = g.x * s
                q_total = q_total @ q
                improved += gain
        if improved <= tol:
            break
    return q_total, s


def complex_rotation(s, angle):
    """Rotate a set by exp(i angle X), X the all-ones off-diagonal matrix.

    Real localized SIC solutions are saddle points once complex unitary
    mixing is allowed; a small imaginary rotation of the starting set lets
    the descent reach the true minimum. ``angle = 0`` keeps the set real.
    """
    s = np.atleast_2d(s)
    n = len(s)
    if angle == 0 or n == 1:
        return s
    x = np.ones((n, n)) - np.eye(n)
    return rotate(s, linalg.expm(1j * angle * x))


# --- driver ----------------------------------------------------------------


def initial_guess(system: System1D, n_orb=None):
    """Lowest eigenvectors of the bare (T + u_ext) dense matrix."""
    g = system.grid
    n_orb = system.n_electrons if n_orb is None else n_orb
    t = apply_kinetic(np.eye(g.n_points), g).real
    h = 0.5 * (t + t.T) + np.diag(system.u_ext)
    _, vec = np.linalg.eigh(h)
    return (vec[:, :n_orb].T / np.sqrt(g.spacing)).astype(complex)


def _finish(scheme, s, pot, system, res: Residuals, iterations, history) -> StaticResult:
    g = system.grid
    energies, v = single_particle_energies(res.lagrange)
    phi = rotate(s, v)
    terms = energy_components(s, scheme, system, pot)
    return StaticResult(
        scheme=scheme,
        localizing_set=s,
        diagonalizing_set=phi,
        unitary=v,
        energies=energies,
        total_energy=terms["total"],
        orbital_residual=res.orbital,
        sym_residual=res.symmetry,
        iterations=iterations,
        lagrange=res.lagrange,
        energy_terms=terms,
        history=history,
    )


def solve_static(scheme, system: System1D, cfg: StaticConfig | None = None, initial=None, on_iteration=None) -> StaticResult:
    """Ground state of the requested scheme.

    LDA and HF iterate the damped gradient step until the orbital residual
    is below ``tol_residual``. SIC warm-starts from the LDA ground state,
    localizes it once, then interlaces damped gradient and unitary symmetry
    steps until both residuals are below tolerance. Trial steps that raise
    the energy by more than 1e-10 are retried with half the step.

    ``on_iteration`` (if given) receives a dict per iteration with keys
    iteration, total_energy, orbital_residual, sym_residual, variance.
    """
    scheme = Scheme.parse(scheme)
    cfg = StaticConfig() if cfg is None else cfg
    g = system.grid
    if initial is None:
        if scheme is Scheme.SIC and system.n_electrons > 1:
            initial = solve_static(Scheme.LDA, system, cfg).diagonalizing_set
            _, initial = variance_localize(initial, g)
            initial = complex_rotation(initial, cfg.complex_kick)
        else:
            initial = initial_guess(system)
    s = lowdin_orthonormalize(initial, g)
    is_sic = scheme is Scheme.SIC
    unitary = np.eye(len(s), dtype=complex)

    pot = build_potentials(system, scheme, s)
    energy = energy_components(s, scheme, system, pot)["total"]
    history = []
    orb_hist, sym_hist = [], []
    delta = cfg.delta_step
    eta = cfg.eta

    for it in range(cfg.max_iter + 1):
        res = orbital_residuals(s, scheme, pot, g)
        row = {
            "iteration": it,
            "total_energy": energy,
            "orbital_residual": res.orbital,
            "sym_residual": res.symmetry,
            "variance": variance(s, g),
        }
        history.append(row)
        orb_hist.append(res.orbital)
        sym_hist.append(res.symmetry)
        if on_iteration is not None:
            on_iteration(row)
        if res.orbital < cfg.tol_residual and (not is_sic or res.symmetry < cfg.tol_sym):
            return _finish(scheme, s, pot, system, res, it, history)
        if it == cfg.max_iter:
            break

        # damped gradient with energy backtracking
        pre = precondition(res.gradient, g, cfg.e_damp)
        while True:
            trial = s - delta * pre
            if not np.all(np.isfinite(trial)):
                raise DivergenceError(f"non-finite orbitals at iteration {it}")
            trial = lowdin_orthonormalize(trial, g)
            tpot = build_potentials(system, scheme, trial)
            te = energy_components(trial, scheme, system, tpot)["total"]
            if not np.isfinite(te):
                raise DivergenceError(f"non-finite energy at iteration {it}")
            if te <= energy + ENERGY_SLACK or delta < 1e-6:
                break
            delta *= 0.5
        s, pot, energy = trial, tpot, te
        delta = min(cfg.delta_step, delta * 1.25)

        if is_sic and len(s) > 1:
            if cfg.localize_every and it < cfg.localize_until and it > 0 and it % cfg.localize_every == 0:
                _, kicked = variance_localize(s, g)
                kpot = build_potentials(system, scheme, kicked)
                ke = energy_components(kicked, scheme, system, kpot)["total"]
                # a kick is kept only if it does not raise the energy
                if ke <= energy + ENERGY_SLACK:
                    s, pot, energy = kicked, kpot, ke
            try:
                step = unitary_symmetry_step(s, unitary, cfg, system, pot, eta=eta)
            except StallError:
                step = None
            if step is not None:
                se = energy_components(step.orbitals, scheme, system, step.potentials)["total"]
                if se <= energy + ENERGY_SLACK:
                    s, pot, energy, unitary = step.orbitals, step.potentials, se, step.unitary
                    eta = min(cfg.eta, step.eta * 1.5)
                else:
                    eta = max(step.eta * 0.5, 1e-6)

    raise NonConvergenceError(
        f"{scheme.value} ground state not converged after {cfg.max_iter} iterations "
        f"(orbital residual {orb_hist[-1]:.3e}, symmetry residual {sym_hist[-1]:.3e})",
        orb_hist,
        sym_hist,
    )
