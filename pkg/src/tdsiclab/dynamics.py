"""Real-time propagation for TDLDA, TDHF and double-set TDSIC.

One step is the exponential midpoint rule: build h(t), advance half a step,
rebuild h at the half step, advance the full step from the initial state,
then apply the absorbing mask. For SIC, "build h" means solving the symmetry
condition for the localizing set attached to the current propagating set,
warm-started from the previous unitary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np
from scipy import linalg, optimize

from .errors import DimensionError, StabilityError, StallError
from .grid import Grid1D, lowdin_orthonormalize, lowdin_unitary, ortho_error
from .hamiltonians import (
    PotentialBundle,
    Scheme,
    apply_h_sic,
    apply_hamiltonian,
    build_potentials,
    densities,
    energy_components,
    rotate,
)
from .model import System1D
from .observables import TrajectoryRecord, dipole, n_escaped, variance, zero_force_residual
from .static import StaticResult, symmetry_residual

log = logging.getLogger(__name__)

ORTHO_DRIFT_MAX = 1e-6


@dataclass(frozen=True)
class DynamicsConfig:
    dt: float = 0.005
    t_final: float = 0.0
    boost_p: float = 0.0
    mask_width: int = 48
    mask_exponent: float = 0.25
    sym_tol_td: float = 1e-9
    exp_order: int = 4
    reortho_every: int = 0
    sample_every: int = 20
    sym_max_iter: int = 50

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_final >= 0:
            raise ValueError(f"t_final must be >= 0, got {self.t_final}")
        if self.mask_width < 0:
            raise ValueError(f"mask_width must be >= 0, got {self.mask_width}")
        if not self.mask_exponent > 0:
            raise ValueError(f"mask_exponent must be > 0, got {self.mask_exponent}")
        if not self.sym_tol_td > 0:
            raise ValueError(f"sym_tol_td must be > 0, got {self.sym_tol_td}")
        if not 2 <= self.exp_order <= 8:
            raise ValueError(f"exp_order must lie in [2, 8], got {self.exp_order}")
        if self.reortho_every < 0:
            raise ValueError("reortho_every must be >= 0")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))

    def check_grid(self, g: Grid1D):
        if self.mask_width >= g.n_points // 4:
            raise DimensionError(f"mask_width {self.mask_width} must be < n_points/4 = {g.n_points // 4}")


@dataclass(frozen=True)
class SicState:
    """Propagating set phi, localizing set psi = rotate(phi, v^+), and the
    Hamiltonian snapshot built from psi. For LDA and HF psi is phi and v = 1.
    ``fresh`` marks that psi and the potentials belong to the current phi."""

    scheme: Scheme
    propagating: np.ndarray
    localizing: np.ndarray
    unitary: np.ndarray
    time: float
    potentials: PotentialBundle
    sym_residual: float = 0.0
    fresh: bool = True
    jacobian: np.ndarray | None = field(default=None, repr=False)
    half_unitary: np.ndarray | None = field(default=None, repr=False)  # v at t - dt/2
    half_sym_residual: float = 0.0  # max|K| of the chain at t - dt/2


# --- elementary pieces ----------------------------------------------------


def boost(s, p, g: Grid1D):
    """Multiply every orbital by exp(i p x)."""
    return np.atleast_2d(s) * np.exp(1j * p * g.x)


def make_mask(g: Grid1D, width, exponent):
    """1 inside, cos^exponent(pi/2 s) across ``width`` edge points, s = 1 at the outermost point."""
    m = np.ones(g.n_points)
    if width == 0:
        return m
    k = np.arange(width)
    # cos(pi/2 s) written as sin(pi/2 (1 - s)) so the outermost point is exactly 0
    ramp = np.sin(0.5 * np.pi * k / width) ** exponent
    m[:width] = ramp
    m[-width:] = ramp[::-1]
    return m


def apply_mask(s, mask):
    return np.atleast_2d(s) * mask


def taylor_exponential(o, apply_h, dt, order):
    """exp(-i dt h) o by the Taylor series truncated at ``order``."""
    term = o
    out = o.copy()
    for k in range(1, order + 1):
        term = (-1j * dt / k) * apply_h(term)
        out = out + term
    return out


def _pack(k, iu):
    """Independent real components of an antihermitian matrix (strict upper triangle)."""
    return np.concatenate([k[iu].real, k[iu].imag])


def _generator(x, iu, n):
    m = len(iu[0])
    a = np.zeros((n, n), dtype=complex)
    a[iu] = x[:m] + 1j * x[m:]
    return a - a.conj().T


def _symmetry_at(psi, x, iu, system, u_total=None):
    n = len(psi)
    q = linalg.expm(_generator(x, iu, n))
    trial = rotate(psi, q)
    pot = build_potentials(system, Scheme.SIC, trial, u_total)
    k, kmax = symmetry_residual(trial, pot, system.grid)
    return q, trial, pot, k, kmax


def symmetry_jacobian(psi, system: System1D, h=1e-6, u_total=None):
    """Forward-difference Jacobian of the packed K with respect to the packed generator."""
    n = len(psi)
    iu = np.triu_indices(n, 1)
    m = 2 * len(iu[0])
    k0 = _pack(_symmetry_at(psi, np.zeros(m), iu, system, u_total)[3], iu)
    jac = np.empty((m, m))
    for c in range(m):
        e = np.zeros(m)
        e[c] = h
        jac[:, c] = (_pack(_symmetry_at(psi, e, iu, system, u_total)[3], iu) - k0) / h
    return jac


def _sic_energy(psi, system):
    return -float(np.sum(system.e_lda(densities(psi))))


def descend_symmetry(psi, system: System1D, tol, max_iter=5000, eta=2.0):
    """Steepest descent of E_SIC over unitary rotations until max|K| <= tol.

    dE = Re tr(K^+ A) for psi -> rotate(psi, exp(A)), so A = -eta K with an
    Armijo backtrack always lowers E; any minimum reached satisfies K = 0.
    Returns ``(Q, psi, potentials, K, max|K|)`` with Q the accumulated rotation.
    """
    g = system.grid
    n = len(psi)
    q_total = np.eye(n, dtype=complex)
    pot = build_potentials(system, Scheme.SIC, psi)
    k, kmax = symmetry_residual(psi, pot, g)
    e = _sic_energy(psi, system)
    for _ in range(max_iter):
        if kmax <= tol:
            break
        k2 = np.sum(np.abs(k) ** 2)
        # energy changes of order eta |K|^2 drown in rounding near the minimum;
        # there the step is accepted when it shrinks K instead
        by_energy = 0.25 * eta * k2 > 1e-13 * max(abs(e), 1.0)
        while True:
            q = linalg.expm(-eta * k)
            trial = rotate(psi, q)
            te = _sic_energy(trial, system)
            if by_energy:
                ok = te <= e - 0.25 * eta * k2
            else:
                tpot = build_potentials(system, Scheme.SIC, trial)
                tk, tkmax = symmetry_residual(trial, tpot, g)
                ok = np.sum(np.abs(tk) ** 2) < k2
            if ok or eta < 1e-12:
                break
            eta *= 0.5
        if eta < 1e-12:
            break
        psi, e = trial, te
        q_total = q_total @ q
        if by_energy:
            pot = build_potentials(system, Scheme.SIC, psi)
            k, kmax = symmetry_residual(psi, pot, g)
        else:
            pot, k, kmax = tpot, tk, tkmax
        eta *= 1.5
    return q_total, psi, pot, k, kmax


def polish_symmetry(psi, system: System1D, u_total=None):
    """Levenberg-Marquardt on the packed K over the generator; copes with the
    near-singular Jacobian found where two symmetric solutions merge."""
    n = len(psi)
    iu = np.triu_indices(n, 1)
    fun = lambda x: _pack(_symmetry_at(psi, x, iu, system, u_total)[3], iu)
    sol = optimize.least_squares(fun, np.zeros(2 * len(iu[0])), method="lm", diff_step=1e-6, xtol=1e-15, ftol=1e-15, gtol=1e-15)
    return _symmetry_at(psi, sol.x, iu, system, u_total)


def escape_fold(psi, system: System1D, u_total=None, reach=0.6):
    """Minimize E_SIC along the softest eigenvector of the symmetry Jacobian.

    At a fold the followed minimum merges with a saddle: one curvature goes to
    zero and the force along it is too weak for gradient steps, while the next
    minimum lies a finite rotation away in that direction.
    """
    n = len(psi)
    iu = np.triu_indices(n, 1)
    jac = symmetry_jacobian(psi, system, h=1e-5, u_total=u_total)
    w, vecs = np.linalg.eigh(0.5 * (jac + jac.T))
    d = vecs[:, np.argmin(w)]
    energy = lambda a: _sic_energy(rotate(psi, linalg.expm(_generator(a * d, iu, n))), system)
    best = min(
        (optimize.minimize_scalar(energy, bounds=b, method="bounded", options={"xatol": 1e-6}) for b in ((-reach, 0), (0, reach))),
        key=lambda r: r.fun,
    )
    return _symmetry_at(psi, best.x * d, iu, system, u_total)


def solve_td_symmetry(prop, prev_unitary, system: System1D, tol, jacobian=None, max_iter=50):
    """Unitary v such that psi = rotate(phi, v^+) satisfies max|K| <= tol.

    Localized SIC solutions can be saddle points of E_SIC among complex
    unitary rotations, so K = 0 is solved as a root problem: Newton steps on
    the off-diagonal generator, with a cached Jacobian refreshed when
    convergence slows, and backtracking on ||K||_F. If the root branch
    followed so far disappears (Newton fails with a fresh Jacobian), the
    unitary is relaxed by energy descent to a nearby minimum; if that lands on
    a fold, a line minimization along the soft direction moves to the next
    minimum, and a least-squares polish is the last resort. Newton resumes
    after each rescue.
    Returns ``(v, psi, potentials, residual, jacobian)``.
    """
    g = system.grid
    prop = np.atleast_2d(prop)
    n = len(prop)
    v = np.asarray(prev_unitary, dtype=complex)
    psi = rotate(prop, v.conj().T)
    pot = build_potentials(system, Scheme.SIC, psi)
    u_total = pot.u_lda_total
    k, kmax = symmetry_residual(psi, pot, g)
    iu = np.triu_indices(n, 1)
    fresh_jac = False
    rescues = 0
    it = 0
    while kmax > tol:
        if it >= max_iter:
            raise StallError(f"symmetry condition stalled at max|K| = {kmax:.3e} after {it} iterations", residual=kmax)
        if jacobian is None:
            jacobian = symmetry_jacobian(psi, system, u_total=u_total)
            fresh_jac = True
        kvec = _pack(k, iu)
        try:
            dx = -np.linalg.solve(jacobian, kvec)
        except np.linalg.LinAlgError:
            dx = -np.linalg.lstsq(jacobian, kvec, rcond=None)[0]
        knorm = np.linalg.norm(kvec)
        step = 1.0
        while True:
            q, trial, tpot, tk, tkmax = _symmetry_at(psi, step * dx, iu, system, u_total)
            tnorm = np.linalg.norm(_pack(tk, iu))
            if tnorm < knorm or step < 1e-6:
                break
            step *= 0.5
        if tnorm >= knorm:
            if fresh_jac:
                # rescue ladder: relax to a nearby minimum, jump across a fold,
                # least-squares polish; each used at most once per solve
                log.info("symmetry root lost (max|K| = %.2e), rescue %d", kmax, rescues + 1)
                if rescues == 0:
                    q, psi, pot, k, kmax = descend_symmetry(psi, system, max(tol, 1e-7), max_iter=20000)
                elif rescues == 1:
                    q, psi, pot, k, kmax = escape_fold(psi, system, u_total)
                elif rescues == 2:
                    q, psi, pot, k, kmax = polish_symmetry(psi, system, u_total)
                else:
                    raise StallError(f"symmetry condition stalled at max|K| = {kmax:.3e}", residual=kmax)
                v = q.conj().T @ v
                rescues += 1
            jacobian = None
            it += 1
            continue
        # Broyden rank-one update keeps the cached Jacobian current between refreshes
        s_step = step * dx
        ss = s_step @ s_step
        if ss > 0:
            y = _pack(tk, iu) - kvec
            jacobian = jacobian + np.outer(y - jacobian @ s_step, s_step) / ss
        if tnorm > 0.5 * knorm and not fresh_jac:
            jacobian = None  # slow contraction: refresh next round
        psi, pot, k, kmax = trial, tpot, tk, tkmax
        v = q.conj().T @ v
        fresh_jac = False
        it += 1
    return v, psi, pot, kmax, jacobian


def _hamiltonian_action(state_scheme, pot: PotentialBundle, g: Grid1D):
    if state_scheme is Scheme.SIC:
        return lambda o: apply_h_sic(o, pot.orbitals, pot, g)
    return lambda o: apply_hamiltonian(o, pot, g)


def _attach(scheme, prop, system, cfg: DynamicsConfig, unitary, jac, time):
    """Build the Hamiltonian snapshot belonging to ``prop``."""
    if scheme is Scheme.SIC and len(prop) > 1:
        v, psi, pot, res, jac = solve_td_symmetry(prop, unitary, system, cfg.sym_tol_td, jac, cfg.sym_max_iter)
        return SicState(scheme, prop, psi, v, time, pot, res, True, jac)
    pot = build_potentials(system, scheme, prop)
    return SicState(scheme, prop, prop, np.eye(len(prop), dtype=complex), time, pot, 0.0, True, None)


def initial_state(scheme, system: System1D, orbitals, cfg: DynamicsConfig, unitary=None, time=0.0) -> SicState:
    scheme = Scheme.parse(scheme)
    orbitals = np.atleast_2d(np.asarray(orbitals, dtype=complex))
    v = np.eye(len(orbitals), dtype=complex) if unitary is None else unitary
    return _attach(scheme, orbitals, system, cfg, v, None, time)


def midpoint_step(state: SicState, cfg: DynamicsConfig, system: System1D, mask=None) -> SicState:
    """Advance by dt; the returned state is fresh at t + dt."""
    g = system.grid
    if not state.fresh:
        state = _attach(state.scheme, state.propagating, system, cfg, state.unitary, state.jacobian, state.time)
    phi = state.propagating
    h_t = _hamiltonian_action(state.scheme, state.potentials, g)
    half = taylor_exponential(phi, h_t, 0.5 * cfg.dt, cfg.exp_order)
    guess = _extrapolate(state.half_unitary, state.unitary)
    mid = _attach(state.scheme, half, system, cfg, guess, state.jacobian, state.time + 0.5 * cfg.dt)
    h_mid = _hamiltonian_action(state.scheme, mid.potentials, g)
    new = taylor_exponential(phi, h_mid, cfg.dt, cfg.exp_order)
    if not np.all(np.isfinite(new)):
        raise StabilityError(f"non-finite orbitals at t = {state.time + cfg.dt:.4f}; reduce dt")
    if mask is not None:
        new = apply_mask(new, mask)
    guess = _extrapolate(state.unitary, mid.unitary)
    out = _attach(state.scheme, new, system, cfg, guess, mid.jacobian, state.time + cfg.dt)
    return replace(out, half_unitary=mid.unitary, half_sym_residual=mid.sym_residual)


def _extrapolate(older, newer):
    """Secant predictor for the unitary half a step ahead: (newer older^+) newer."""
    if older is None:
        return newer
    return lowdin_unitary(newer @ older.conj().T @ newer)


def tdsic_step(state: SicState, cfg: DynamicsConfig, system: System1D, mask=None) -> SicState:
    if state.scheme is not Scheme.SIC:
        raise ValueError(f"state carries scheme {state.scheme.value}, expected SIC")
    return midpoint_step(state, cfg, system, mask)


def tdlda_step(state: SicState, cfg: DynamicsConfig, system: System1D, mask=None) -> SicState:
    if state.scheme is not Scheme.LDA:
        raise ValueError(f"state carries scheme {state.scheme.value}, expected LDA")
    return midpoint_step(state, cfg, system, mask)


def tdhf_step(state: SicState, cfg: DynamicsConfig, system: System1D, mask=None) -> SicState:
    if state.scheme is not Scheme.HF:
        raise ValueError(f"state carries scheme {state.scheme.value}, expected HF")
    return midpoint_step(state, cfg, system, mask)


# --- driver ---------------------------------------------------------------


def record(state: SicState, system: System1D) -> TrajectoryRecord:
    g = system.grid
    phi, psi = state.propagating, state.localizing
    return TrajectoryRecord(
        time=float(state.time),
        n_escaped=n_escaped(phi, system.n_electrons, g),
        dipole=dipole(phi, g),
        total_energy=energy_components(psi, state.scheme, system, state.potentials)["total"],
        ortho_error=ortho_error(phi, g),
        sym_residual=float(state.sym_residual),
        variance_prop=variance(phi, g),
        variance_loc=variance(psi, g),
        zero_force_residual=zero_force_residual(psi, state.potentials, g),
    )


def propagate(state: SicState, cfg: DynamicsConfig, system: System1D, n_steps=None) -> Iterator[SicState]:
    """Yield the state after every step (not including the initial one).

    Without a mask, orthonormality drift beyond 1e-6 raises StabilityError
    unless ``reortho_every`` restores it first. With a mask the norm loss is
    the ionization signal, so no re-orthonormalization is done.
    """
    g = system.grid
    cfg.check_grid(g)
    mask = make_mask(g, cfg.mask_width, cfg.mask_exponent) if cfg.mask_width else None
    n_steps = cfg.n_steps if n_steps is None else n_steps
    t0 = state.time
    for step in range(1, n_steps + 1):
        # time from the step count, so long runs do not accumulate round-off
        state = replace(midpoint_step(state, cfg, system, mask), time=t0 + step * cfg.dt)
        if mask is None:
            if cfg.reortho_every and step % cfg.reortho_every == 0:
                phi = lowdin_orthonormalize(state.propagating, g)
                state = _attach(state.scheme, phi, system, cfg, state.unitary, state.jacobian, state.time)
            err = ortho_error(state.propagating, g)
            if err > ORTHO_DRIFT_MAX:
                raise StabilityError(
                    f"orthonormality drift {err:.2e} at t = {state.time:.4f} exceeds {ORTHO_DRIFT_MAX:g}; reduce dt"
                )
        yield state


def starting_orbitals(static: StaticResult):
    """The diagonalizing (stationary) set and its unitary, the usual starting point."""
    return static.diagonalizing_set, static.unitary


def run_dynamics(scheme, system: System1D, static: StaticResult, cfg: DynamicsConfig) -> Iterator[TrajectoryRecord]:
    """Boost the stationary set of ``static`` and stream observables every ``sample_every`` steps.

    The first row is the boosted state at t = 0; the last row is always
    the final time.
    """
    scheme = Scheme.parse(scheme)
    if static.scheme is not scheme:
        raise ValueError(f"static result is {static.scheme.value}, dynamics asked for {scheme.value}")
    g = system.grid
    cfg.check_grid(g)
    phi, v = starting_orbitals(static)
    phi = boost(phi, cfg.boost_p, g)
    # boosting every orbital by the same phase field commutes with the rotation, so v carries over
    state = initial_state(scheme, system, phi, cfg, unitary=v)
    yield record(state, system)
    n = cfg.n_steps
    for step, state in enumerate(propagate(state, cfg, system, n), start=1):
        if step % cfg.sample_every == 0 or step == n:
            yield record(state, system)
