"""Observables along a trajectory, the dipole spectrum and trajectory CSV I/O."""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import DomainError, InsufficientDataError
from .grid import Grid1D, apply_kinetic, norms, spectral_derivative
from .hamiltonians import PotentialBundle, Scheme, densities


@dataclass(frozen=True)
class TrajectoryRecord:
    time: float
    n_escaped: float
    dipole: float
    total_energy: float
    ortho_error: float
    sym_residual: float
    variance_prop: float
    variance_loc: float
    zero_force_residual: float


UNITS = {
    "time": "a.u.",
    "n_escaped": "electrons",
    "dipole": "a0",
    "total_energy": "Ha",
    "ortho_error": "1",
    "sym_residual": "Ha",
    "variance_prop": "a0^2",
    "variance_loc": "a0^2",
    "zero_force_residual": "Ha/a0",
}
FIELDS = [f.name for f in fields(TrajectoryRecord)]


def dipole(s, g: Grid1D) -> float:
    """sum_i (phi_i|x|phi_i)."""
    return float(np.sum(densities(s) @ g.x) * g.spacing)


def n_escaped(s, n_electrons, g: Grid1D) -> float:
    """Norm removed from the box, N - int rho."""
    return float(n_electrons - np.sum(norms(s, g)))


def variance(s, g: Grid1D) -> float:
    """sum_i [<x^2>_i - <x>_i^2], moments taken per orbital.

    Each orbital's moments are divided by its norm so the value stays a
    width even when absorbing boundaries have removed part of the norm.
    """
    rho = densities(s)
    nrm = rho.sum(axis=-1) * g.spacing
    m1 = rho @ g.x * g.spacing / nrm
    m2 = rho @ (g.x * g.x) * g.spacing / nrm
    return float(np.sum(m2 - m1 * m1))


def relative_variance(var_prop, var_loc=None) -> float:
    """(D_phi - D_psi) / D_psi. Accepts a TrajectoryRecord or two numbers."""
    if var_loc is None:
        var_prop, var_loc = var_prop.variance_prop, var_prop.variance_loc
    if var_loc == 0:
        raise DomainError("localized-set variance is zero")
    return (var_prop - var_loc) / var_loc


def zero_force_residual(loc, pot: PotentialBundle, g: Grid1D) -> float:
    """Net force exerted by the electron-electron terms on the electrons.

    LDA and SIC use the density form int U_LDA[rho] d_x rho - sum_a int U_a d_x rho_a.
    HF uses -2 Re sum_i (d_x phi_i | (U_H + K) phi_i), which needs the orbitals.
    """
    loc = np.atleast_2d(loc)
    dx = g.spacing
    if pot.scheme is Scheme.HF:
        from .hamiltonians import apply_fock_exchange

        u_el = pot.u_lda_total * loc
        if pot.kernel_ft is not None:
            u_el = u_el + apply_fock_exchange(loc, pot.orbitals, g, kernel_ft=pot.kernel_ft)
        d = spectral_derivative(loc, g)
        return float(abs(2 * np.sum(d.conj() * u_el).real * dx))
    rho_i = densities(loc)
    rho = rho_i.sum(axis=0)
    f = np.sum(pot.u_lda_total * spectral_derivative(rho, g)) * dx
    if pot.scheme is Scheme.SIC:
        f -= np.sum(pot.u_sic_per_orbital * spectral_derivative(rho_i, g)) * dx
    return float(abs(f))


def kinetic_energy(s, g: Grid1D) -> float:
    s = np.atleast_2d(s)
    return float(np.sum(s.conj() * apply_kinetic(s, g)).real * g.spacing)


def dipole_spectrum(times, dipoles, eta=None, pad=1):
    """|Im| of the windowed Fourier transform of the dipole signal.

    The mean is subtracted and the signal damped by exp(-eta t) before
    transforming; ``eta`` defaults to 5 / duration. ``pad`` > 1 zero pads
    to interpolate the spectrum on a finer frequency mesh. Returns
    ``(omega, strength)`` for omega in [0, pi/dt].
    """
    t = np.asarray(times, dtype=float)
    d = np.asarray(dipoles, dtype=float)
    if t.shape != d.shape or t.ndim != 1:
        raise ValueError("times and dipoles must be 1D arrays of equal length")
    if len(t) < 16:
        raise InsufficientDataError(f"need at least 16 samples, got {len(t)}")
    step = np.diff(t)
    dt = step[0]
    if not dt > 0 or np.max(np.abs(step - dt)) > 1e-9 * max(1.0, abs(t[-1])):
        raise ValueError("samples must be uniformly spaced in time")
    duration = t[-1] - t[0]
    eta = 5.0 / duration if eta is None else eta
    sig = (d - d.mean()) * np.exp(-eta * (t - t[0]))
    m = len(sig) * max(1, int(pad))
    # sum_j s_j exp(+i w t_j) dt = dt * conj(fft(s)) for real s
    ft = dt * np.conj(np.fft.rfft(sig, n=m))
    omega = 2 * np.pi * np.fft.rfftfreq(m, d=dt)
    return omega, np.abs(ft.imag)


def peak_frequency(omega, strength, omega_min=0.0) -> float:
    omega = np.asarray(omega)
    sel = omega > omega_min
    return float(omega[sel][np.argmax(np.asarray(strength)[sel])])


# --- CSV ------------------------------------------------------------------


def _header():
    return [f"{name} ({UNITS[name]})" for name in FIELDS]


def write_trajectory(path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_header())
        for rec in records:
            w.writerow([format(float(v), ".17g") for v in astuple(rec)])


def read_trajectory(path) -> list[TrajectoryRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty trajectory file")
    names = [h.split(" (")[0].strip() for h in rows[0]]
    if names != FIELDS:
        raise ValueError(f"{path}: unexpected header {rows[0]}")
    return [TrajectoryRecord(*(float(v) for v in row)) for row in rows[1:] if row]


def write_spectrum(path, omega, strength) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["omega (Ha)", "strength (arb)"])
        for o, s in zip(omega, strength):
            w.writerow([format(float(o), ".17g"), format(float(s), ".17g")])
