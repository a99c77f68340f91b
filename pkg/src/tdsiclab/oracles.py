"""Independent reference computations used to validate the production paths.

Each oracle returns a list of :class:`OracleRow`; ``tdsic-lab oracle <name>``
prints them as a provenance table.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .grid import Grid1D, apply_kinetic, overlap_matrix
from .hamiltonians import Scheme, rotate
from .model import (
    ExchangeTable,
    ModelParams,
    System1D,
    hartree_potential,
    hartree_potential_direct,
    lda_exchange_energy_density_quad,
    lda_exchange_potential_quad,
    soft_coulomb,
)
from .observables import variance


@dataclass(frozen=True)
class OracleRow:
    oracle: str
    quantity: str
    value: float
    reference: float
    tolerance: float

    @property
    def error(self):
        return abs(self.value - self.reference)

    @property
    def passed(self):
        return self.error <= self.tolerance


# --- dense self-consistent diagonalization --------------------------------


def kinetic_matrix(g: Grid1D):
    t = apply_kinetic(np.eye(g.n_points), g)
    return 0.5 * (t + t.conj().T)


def dense_scf(system: System1D, scheme, tol=1e-12, max_iter=2000, mix=0.5):
    """Self-consistent LDA or HF by full diagonalization of the mean-field matrix.

    Linear mixing of the density (LDA) or one-body density matrix (HF).
    Returns ``(eigenvalues, orbitals)`` for the occupied states, orbitals
    normalized on the grid.
    """
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.SIC:
        raise ValueError("dense oracle covers LDA and HF only")
    g = system.grid
    dx = g.spacing
    n_occ = system.n_electrons
    t = kinetic_matrix(g)
    v = soft_coulomb(g.x[:, None], g.x[None, :], system.params.a) * dx
    h0 = t + np.diag(system.u_ext)
    w, c = np.linalg.eigh(h0)
    occ = c[:, :n_occ] / np.sqrt(dx)
    gamma = occ @ occ.conj().T
    prev = w[:n_occ]
    for _ in range(max_iter):
        rho = np.diag(gamma).real
        h = h0 + np.diag(v @ rho) if system.interacting else h0.copy()
        if system.interacting:
            if scheme is Scheme.LDA:
                h = h + np.diag(system.table.potential(rho))
            else:
                h = h - v * gamma
        w, c = np.linalg.eigh(h)
        occ = c[:, :n_occ] / np.sqrt(dx)
        new_gamma = occ @ occ.conj().T
        eps = w[:n_occ]
        if np.max(np.abs(eps - prev)) < tol and np.max(np.abs(new_gamma - gamma)) < tol:
            return eps, occ.T.astype(complex)
        gamma = (1 - mix) * gamma + mix * new_gamma
        prev = eps
    raise RuntimeError("dense SCF oracle did not converge")


def small_system(n_points=64, spacing=0.4, params: ModelParams | None = None):
    return System1D(Grid1D(n_points, spacing), params or ModelParams())


def oracle_dense(tol=1e-6):
    from .static import StaticConfig, solve_static

    rows = []
    for label, params in [("2e", ModelParams()), ("3e", ModelParams(a=0.5, b=0.5, R=0.0, z=0.5, n_electrons=3))]:
        system = small_system(params=params)
        for scheme in (Scheme.LDA, Scheme.HF):
            ref, _ = dense_scf(system, scheme)
            res = solve_static(scheme, system, StaticConfig(tol_residual=1e-10))
            for i, (a, b) in enumerate(zip(res.energies, ref)):
                rows.append(OracleRow("dense-scf", f"{label} {scheme.value} eps_{i}", float(a), float(b), tol))
    return rows


# --- exchange table vs quadrature ------------------------------------------


def probe_densities(n=64, lo=1e-4, hi=4.0):
    return np.geomspace(lo, hi, n)


def oracle_exchange(tol=1e-8, a=0.8, gamma=1.0):
    table = ExchangeTable(a, gamma)
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for rho in probe_densities():
            rows.append(OracleRow("exchange", f"U_x(rho={rho:.4g})", float(table.potential(rho)),
                                  lda_exchange_potential_quad(rho, a, gamma), tol))
            rows.append(OracleRow("exchange", f"rho*eps_x(rho={rho:.4g})", float(table.energy_density(rho)),
                                  lda_exchange_energy_density_quad(rho, a, gamma), tol))
    return rows


# --- Hartree spectral vs direct ---------------------------------------------


def oracle_hartree(tol=1e-10, seed=7):
    rng = np.random.default_rng(seed)
    g = Grid1D(128, 0.3)
    rows = []
    for trial in range(4):
        centre = rng.uniform(-5, 5)
        width = rng.uniform(0.5, 3)
        rho = np.exp(-((g.x - centre) / width) ** 2) * rng.uniform(0.5, 2)
        fast = hartree_potential(rho, g, 0.8)
        direct = hartree_potential_direct(rho, g, 0.8)
        k = int(np.argmax(np.abs(fast - direct)))
        rows.append(OracleRow("hartree", f"U_H max-deviation point, trial {trial}", float(fast[k]), float(direct[k]), tol))
    return rows


# --- kinetic vs analytic -----------------------------------------------------


def oracle_kinetic(tol=1e-10):
    g = Grid1D(512, 0.1)
    rows = []
    for sigma in (0.8, 1.2, 2.0):
        f = np.exp(-g.x**2 / (2 * sigma**2))
        exact = -0.5 * f * (g.x**2 / sigma**4 - 1 / sigma**2)
        num = apply_kinetic(f, g).real
        k = int(np.argmax(np.abs(num - exact)))
        rows.append(OracleRow("kinetic", f"T gaussian sigma={sigma}", float(num[k]), float(exact[k]), tol))
    return rows


# --- variance localization vs position-matrix eigenbasis --------------------


def position_eigenbasis(s, g: Grid1D):
    """In 1D the summed variance is minimized by the eigenvectors of (psi_a|x|psi_b)."""
    xm = overlap_matrix(s, g.x * s, g)
    _, vec = np.linalg.eigh(0.5 * (xm + xm.conj().T))
    return rotate(s, vec)


def oracle_localization(tol=1e-8):
    from .static import solve_static, variance_localize

    rows = []
    for label, params in [("2e", ModelParams()), ("3e", ModelParams(a=0.5, b=0.5, R=0.0, z=0.5, n_electrons=3))]:
        system = System1D(Grid1D(256, 0.25), params)
        lda = solve_static(Scheme.LDA, system)
        _, loc = variance_localize(lda.diagonalizing_set, system.grid)
        ref = position_eigenbasis(lda.diagonalizing_set, system.grid)
        rows.append(OracleRow("localization", f"{label} LDA minimal variance", variance(loc, system.grid),
                              variance(ref, system.grid), tol))
    return rows


# --- absorbing mask reflection ----------------------------------------------


def _free_packet_run(n, spacing, p0, width, exponent, dt, t_final, sigma, x0):
    from .dynamics import DynamicsConfig, initial_state, propagate

    g = Grid1D(n, spacing)
    system = System1D(g, ModelParams(n_electrons=1), u_ext=np.zeros(n), interacting=False)
    psi = np.exp(-(((g.x - x0) / (2 * sigma)) ** 2) + 1j * p0 * g.x)[None]
    psi = psi / np.sqrt(np.sum(np.abs(psi) ** 2) * spacing)
    cfg = DynamicsConfig(dt=dt, t_final=t_final, mask_width=width, mask_exponent=exponent)
    state = initial_state(Scheme.LDA, system, psi, cfg)
    for state in propagate(state, cfg, system):
        pass
    return state.propagating[0]


def mask_reflection(p0, width=48, exponent=0.25, dt=0.02, n=512, spacing=0.25, sigma=5.0, ref_factor=4):
    """Norm sent back into the interior by the mask for a free packet of momentum ``p0``.

    The packet starts 20 a0 left of centre and runs until its centre would
    be 30 a0 past the box edge. The masked run is compared with an
    unmasked run on a box ``ref_factor`` times larger; the norm of the
    difference over the interior is the reflected (or wrapped-around) part.
    """
    x0 = -20.0
    t_final = (n * spacing / 2 - x0 + 30.0) / p0
    masked = _free_packet_run(n, spacing, p0, width, exponent, dt, t_final, sigma, x0)
    big = ref_factor * n
    ref = _free_packet_run(big, spacing, p0, 0, 1.0, dt, t_final, sigma, x0)
    off = (big - n) // 2
    ref = ref[off:off + n]
    inner = slice(width, n - width) if width else slice(None)
    return float(np.sum(np.abs(masked[inner] - ref[inner]) ** 2) * spacing)


ORACLES = {
    "dense-scf": oracle_dense,
    "exchange": oracle_exchange,
    "hartree": oracle_hartree,
    "kinetic": oracle_kinetic,
    "localization": oracle_localization,
}


def run_oracle(name):
    if name == "all":
        return [row for fn in ORACLES.values() for row in fn()]
    if name not in ORACLES:
        raise KeyError(f"unknown oracle {name!r}; choose from {', '.join(ORACLES)} or all")
    return ORACLES[name]()


def format_rows(rows) -> str:
    head = f"{'oracle':<13} {'quantity':<38} {'value':>22} {'reference':>22} {'abs err':>10} {'tol':>8}  ok"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(
            f"{r.oracle:<13} {r.quantity:<38} {r.value:>22.15g} {r.reference:>22.15g} {r.error:>10.2e} {r.tolerance:>8.0e}  "
            f"{'yes' if r.passed else 'NO'}"
        )
    return "\n".join(lines)
