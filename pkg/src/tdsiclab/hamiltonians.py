"""Mean-field Hamiltonians for LDA, SIC and HF, Lagrange matrices, energies.

Conventions: orbital sets are ``(N, n)`` arrays; ``rotate(s, Q)`` forms
``s'_j = sum_i s_i Q_ij`` so the diagonalizing set is ``rotate(psi, V)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .grid import Grid1D, apply_kinetic, diagonalize_hermitian, hermitian_part, overlap_matrix
from .model import System1D, convolve_padded


class Scheme(str, enum.Enum):
    LDA = "LDA"
    SIC = "SIC"
    HF = "HF"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(f"unknown scheme {value!r}; expected one of LDA, SIC, HF") from None


def rotate(s, q):
    return np.asarray(q).T @ np.asarray(s)


def densities(s):
    """Per-orbital densities |s_i|^2 as a real ``(N, n)`` array."""
    s = np.atleast_2d(s)
    return (s.conj() * s).real


@dataclass(frozen=True)
class PotentialBundle:
    """Immutable snapshot of the local fields (and orbitals) defining a Hamiltonian.

    ``u_lda_total`` is U_H + U_x for LDA/SIC and U_H alone for HF.
    ``orbitals`` is the set the snapshot was built from: the localizing set
    for SIC, the occupied set for HF (Fock operator).
    """

    scheme: Scheme
    u_ext: np.ndarray
    u_lda_total: np.ndarray
    orbitals: np.ndarray
    u_sic_per_orbital: np.ndarray | None = None
    kernel_ft: np.ndarray | None = None

    @property
    def u_local(self):
        return self.u_ext + self.u_lda_total


def build_potentials(system: System1D, scheme, orbitals, u_total=None) -> PotentialBundle:
    """Snapshot of the fields for ``orbitals``.

    ``u_total`` may pass in U_LDA[rho] when only a unitary rotation separates
    ``orbitals`` from a set whose snapshot is known (rho is invariant).
    """
    scheme = Scheme.parse(scheme)
    orbitals = np.atleast_2d(np.asarray(orbitals, dtype=complex))
    rho_i = densities(orbitals)
    if scheme is Scheme.HF:
        kernel = system.kernel_ft if system.interacting else None
        return PotentialBundle(scheme, system.u_ext, system.hartree(rho_i.sum(axis=0)), orbitals, None, kernel)
    u_lda = system.u_lda(rho_i.sum(axis=0)) if u_total is None else u_total
    u_sic = system.u_lda(rho_i) if scheme is Scheme.SIC else None
    return PotentialBundle(scheme, system.u_ext, u_lda, orbitals, u_sic)


def apply_h_lda(o, pot: PotentialBundle, g: Grid1D):
    return apply_kinetic(o, g) + pot.u_local * o


def apply_h_alpha(o, alpha: int, pot: PotentialBundle, g: Grid1D):
    if pot.u_sic_per_orbital is None:
        raise ValueError("potential bundle carries no per-orbital SIC potentials")
    n_orb = len(pot.u_sic_per_orbital)
    if not 0 <= alpha < n_orb:
        raise IndexError(f"orbital index {alpha} out of range for {n_orb} orbitals")
    return apply_h_lda(o, pot, g) - pot.u_sic_per_orbital[alpha] * o


def apply_h_sic(o, loc, pot: PotentialBundle, g: Grid1D):
    """h_LDA o - sum_a U_a psi_a (psi_a|o), with {psi_a} = ``loc``."""
    o = np.asarray(o)
    loc = np.atleast_2d(loc)
    single = o.ndim == 1
    o2 = np.atleast_2d(o)
    proj = overlap_matrix(loc, o2, g)  # (psi_a|o_i)
    out = apply_h_lda(o2, pot, g) - proj.T @ (pot.u_sic_per_orbital * loc)
    return out[0] if single else out


def apply_fock_exchange(o, occ, g: Grid1D, a: float | None = None, kernel_ft=None):
    """-sum_b psi_b(x) int v(x, x') psi_b*(x') o(x') dx' (same-spin exchange)."""
    if kernel_ft is None:
        if a is None:
            raise ValueError("need either the softening a or a precomputed kernel")
        from .model import padded_kernel_ft

        kernel_ft = padded_kernel_ft(g, a)
    o = np.asarray(o, dtype=complex)
    occ = np.atleast_2d(occ)
    single = o.ndim == 1
    o2 = np.atleast_2d(o)
    pair = occ.conj()[None, :, :] * o2[:, None, :]
    out = -np.sum(occ[None, :, :] * convolve_padded(pair, kernel_ft, g), axis=1)
    return out[0] if single else out


def apply_hamiltonian(o, pot: PotentialBundle, g: Grid1D):
    """Scheme-dispatched mean-field operator acting on an orbital or a set."""
    if pot.scheme is Scheme.LDA:
        return apply_h_lda(o, pot, g)
    if pot.scheme is Scheme.SIC:
        return apply_h_sic(o, pot.orbitals, pot, g)
    if pot.kernel_ft is None:  # interactions switched off
        return apply_h_lda(o, pot, g)
    return apply_h_lda(o, pot, g) + apply_fock_exchange(o, pot.orbitals, g, kernel_ft=pot.kernel_ft)


def orbital_gradients(s, pot: PotentialBundle, g: Grid1D):
    """Rows h_a psi_a. For SIC each row uses its own h_a = h_LDA - U_a."""
    s = np.atleast_2d(s)
    if pot.scheme is Scheme.SIC:
        if len(s) != len(pot.u_sic_per_orbital):
            raise DimensionError("set and per-orbital potentials differ in length")
        return apply_h_lda(s, pot, g) - pot.u_sic_per_orbital * s
    return apply_hamiltonian(s, pot, g)


def raw_lagrange_matrix(s, pot: PotentialBundle, g: Grid1D, hs=None):
    """L_{ba} = (psi_b | h_a | psi_a), not symmetrized."""
    hs = orbital_gradients(s, pot, g) if hs is None else hs
    return overlap_matrix(s, hs, g)


def lagrange_matrix(s, scheme, pot: PotentialBundle, g: Grid1D, hs=None):
    """lambda_{ba} = [(psi_b|h_a|psi_a) + (psi_a|h_b|psi_b)^*] / 2, hermitian by construction."""
    if Scheme.parse(scheme) is not pot.scheme:
        raise ValueError(f"bundle was built for {pot.scheme.value}, not {scheme}")
    return hermitian_part(raw_lagrange_matrix(s, pot, g, hs))


def single_particle_energies(lam):
    """Eigenvalues (ascending) and diagonalizer columns v_{a i} of the Lagrange matrix."""
    return diagonalize_hermitian(lam)


def project_out_occupied(o, occ, g: Grid1D):
    """(1 - sum_b |psi_b)(psi_b|) o."""
    o = np.asarray(o)
    occ = np.atleast_2d(occ)
    single = o.ndim == 1
    o2 = np.atleast_2d(o)
    out = o2 - overlap_matrix(occ, o2, g).T @ occ
    return out[0] if single else out


def energy_components(s, scheme, system: System1D, pot: PotentialBundle | None = None) -> dict:
    """Energy terms for the set ``s`` (the localizing set when scheme is SIC)."""
    scheme = Scheme.parse(scheme)
    g = system.grid
    s = np.atleast_2d(np.asarray(s, dtype=complex))
    rho_i = densities(s)
    rho = rho_i.sum(axis=0)
    dx = g.spacing
    e_kin = float(np.sum(s.conj() * apply_kinetic(s, g)).real) * dx
    e_ext = float(np.sum(system.u_ext * rho)) * dx
    out = {"kinetic": e_kin, "external": e_ext, "ion": float(system.e_ion)}
    if scheme is Scheme.HF:
        u_h = pot.u_lda_total if pot is not None else system.hartree(rho)
        out["hartree"] = 0.5 * float(np.sum(rho * u_h)) * dx
        if system.interacting:
            fx = apply_fock_exchange(s, s, g, kernel_ft=system.kernel_ft)
            out["exchange"] = 0.5 * float(np.sum(s.conj() * fx).real) * dx
        else:
            out["exchange"] = 0.0
    else:
        out["lda"] = float(system.e_lda(rho))
        if scheme is Scheme.SIC:
            out["sic"] = -float(np.sum(system.e_lda(rho_i)))
    out["total"] = float(sum(out.values()))
    return out


def total_energy(s, scheme, system: System1D) -> float:
    return energy_components(s, scheme, system)["total"]
