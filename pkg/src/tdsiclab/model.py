"""Soft-Coulomb 1D model: interaction kernels, Hartree and exchange-only LDA.

The exchange potential of the 1D soft-Coulomb electron gas,

    U_x(rho) = -(1/pi) int_0^inf sin(c y) / (y sqrt(y^2 + a)) dy,   c = 2 pi rho / gamma,

has d/dc of the integral equal to K_0(c sqrt(a)), so

    U_x(rho) = -(1 / (pi sqrt(a))) * Ki(c sqrt(a)),   Ki(X) = int_0^X K_0(t) dt,

and the energy density integrates once more,

    rho eps_x(rho) = -(gamma / (2 pi^2 a)) * (X Ki(X) - 1 + X K_1(X)),   X = c sqrt(a).

Both are evaluated on a log-spaced cubic Hermite table for speed; the closed
form and an oscillatory adaptive quadrature stay available as references.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate, special

from .errors import DimensionError, DomainError
from .grid import Grid1D

EULER_GAMMA = float(np.euler_gamma)
NEG_DENSITY_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    a: float = 0.8
    b: float = 0.5
    R: float = 1.5
    z: float = 0.4
    n_electrons: int = 2
    gamma: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError(f"a must be > 0, got {self.a}")
        if not self.b > 0:
            raise DomainError(f"b must be > 0, got {self.b}")
        if not self.R >= 0:
            raise DomainError(f"R must be >= 0, got {self.R}")
        if not 0 <= self.z <= 1:
            raise DomainError(f"z must lie in [0, 1], got {self.z}")
        if int(self.n_electrons) != self.n_electrons or self.n_electrons < 1:
            raise DomainError(f"n_electrons must be a positive integer, got {self.n_electrons}")
        if not self.gamma >= 1:
            raise DomainError(f"gamma must be >= 1, got {self.gamma}")


def soft_coulomb(x, xp, a):
    return 1.0 / np.sqrt((np.asarray(x) - np.asarray(xp)) ** 2 + a)


def ionic_potential(g: Grid1D, p: ModelParams) -> np.ndarray:
    x = g.x
    n = p.n_electrons
    return -n * p.z / np.sqrt((x - p.R / 2) ** 2 + p.b) - n * (1 - p.z) / np.sqrt((x + p.R / 2) ** 2 + p.b)


def ion_repulsion(p: ModelParams) -> float:
    """Constant ion-ion energy; softened like the electron-ion term."""
    n = p.n_electrons
    return n * n * p.z * (1 - p.z) / np.sqrt(p.R**2 + p.b)


# --- Hartree ---------------------------------------------------------------


def padded_kernel_ft(g: Grid1D, a: float) -> np.ndarray:
    """FFT of the soft-Coulomb kernel laid out for a non-wrapping 2n convolution."""
    n = g.n_points
    d = np.arange(2 * n)
    d = np.where(d <= n, d, d - 2 * n)
    return np.fft.fft(soft_coulomb(d * g.spacing, 0.0, a))


def convolve_padded(f, kernel_ft, g: Grid1D):
    """dx * sum_m v(x_k - x_m) f_m for every row of ``f`` (real or complex)."""
    f = np.asarray(f)
    n = g.n_points
    if f.shape[-1] != n:
        raise DimensionError(f"field of length {f.shape[-1]} does not match grid of {n}")
    out = np.fft.ifft(np.fft.fft(f, n=2 * n, axis=-1) * kernel_ft, axis=-1)[..., :n]
    out = out * g.spacing
    return out.real if np.isrealobj(f) else out


def hartree_potential_direct(rho, g: Grid1D, a: float) -> np.ndarray:
    rho = np.asarray(rho)
    g._check(rho)
    v = soft_coulomb(g.x[:, None], g.x[None, :], a)
    return (rho @ v.T) * g.spacing


def hartree_potential(rho, g: Grid1D, a: float, method="fft") -> np.ndarray:
    """U_H(x) = int v(x, x') rho(x') dx', either by padded FFT or O(n^2) sum."""
    if method == "direct":
        return hartree_potential_direct(rho, g, a)
    if method != "fft":
        raise ValueError(f"unknown Hartree method {method!r}")
    return convolve_padded(np.asarray(rho, dtype=float), padded_kernel_ft(g, a), g)


def hartree_energy(rho, u_h, g: Grid1D) -> float:
    return 0.5 * float(np.sum(rho * u_h)) * g.spacing


# --- exchange: closed form and quadrature ----------------------------------


def _check_density(rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < -NEG_DENSITY_TOL):
        raise DomainError(f"negative density {rho.min():.3e}")
    return np.maximum(rho, 0.0)


def _scaled_arg(rho, a, gamma):
    return 2 * np.pi * rho * np.sqrt(a) / gamma


# below these arguments the leading small-X series is more accurate than the
# closed form (underflow in the potential, cancellation in the energy density)
_X_SERIES_POT = 1e-8
_X_SERIES_EN = 1e-4


def _pot_series(X, a):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -(X / (np.pi * np.sqrt(a))) * (1 - EULER_GAMMA - np.log(X / 2))
    return np.where(X > 0, out, 0.0)


def _en_series(X, a, gamma):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -(gamma / (2 * np.pi**2 * a)) * X * X * (0.75 - EULER_GAMMA / 2 - np.log(X / 2) / 2)
    return np.where(X > 0, out, 0.0)


def exchange_potential_exact(rho, a, gamma=1.0):
    rho = _check_density(rho)
    X = _scaled_arg(rho, a, gamma)
    small = X < _X_SERIES_POT
    out = -special.iti0k0(np.where(small, 1.0, X))[1] / (np.pi * np.sqrt(a))
    return np.where(small, _pot_series(X, a), out)


def exchange_energy_density_exact(rho, a, gamma=1.0):
    """rho * eps_x(rho)."""
    rho = _check_density(rho)
    X = _scaled_arg(rho, a, gamma)
    small = X < _X_SERIES_EN
    safe = np.where(small, 1.0, X)
    ki = special.iti0k0(safe)[1]
    out = -(gamma / (2 * np.pi**2 * a)) * (safe * ki - 1.0 + safe * special.k1(safe))
    return np.where(small, _en_series(X, a, gamma), out)


def lda_exchange_potential_quad(rho_val, a, gamma=1.0, tol=1e-12):
    """Adaptive quadrature of the defining improper integral (reference path)."""
    if rho_val < -NEG_DENSITY_TOL:
        raise DomainError(f"negative density {rho_val:.3e}")
    c = 2 * np.pi * max(rho_val, 0.0) / gamma
    if c == 0:
        return 0.0
    # sin(cy)/y is regular at 0; the oscillatory tail goes to QAWF.
    head = integrate.quad(lambda y: c * np.sinc(c * y / np.pi) / np.sqrt(y * y + a), 0.0, 1.0, epsabs=tol, epsrel=tol, limit=400)[0]
    tail = integrate.quad(lambda y: 1.0 / (y * np.sqrt(y * y + a)), 1.0, np.inf, weight="sin", wvar=c, epsabs=tol, limlst=200)[0]
    return -(head + tail) / np.pi


def lda_exchange_energy_density_quad(rho_val, a, gamma=1.0, tol=1e-12):
    if rho_val < -NEG_DENSITY_TOL:
        raise DomainError(f"negative density {rho_val:.3e}")
    c = 2 * np.pi * max(rho_val, 0.0) / gamma
    if c == 0:
        return 0.0

    def near(y):
        # (1 - cos cy)/y^2 = 2 sin^2(cy/2)/y^2
        s = 0.5 * c * np.sinc(c * y / (2 * np.pi))
        return 2 * s * s / np.sqrt(y * y + a)

    head = integrate.quad(near, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=400)[0]
    env = lambda y: 1.0 / (y * y * np.sqrt(y * y + a))
    tail_plain = integrate.quad(env, 1.0, np.inf, epsabs=tol, epsrel=tol)[0]
    tail_cos = integrate.quad(env, 1.0, np.inf, weight="cos", wvar=c, epsabs=tol, limlst=200)[0]
    return -(gamma / (2 * np.pi**2)) * (head + tail_plain - tail_cos)


# --- exchange: table -------------------------------------------------------


class ExchangeTable:
    """Cubic Hermite interpolation of U_x and rho*eps_x in log(rho).

    Nodes are log-spaced on [rho_min, rho_max]; node derivatives are exact
    (dU/dlnrho = -(2/gamma) rho K_0(X), d(rho eps)/dlnrho = rho U). Below
    rho_min the small-density series is used, above rho_max the closed form.
    """

    def __init__(self, a, gamma=1.0, rho_max=64.0, n_table=4096, rho_min=1e-12):
        if rho_max <= rho_min:
            raise DomainError("rho_max must exceed rho_min")
        self.a = float(a)
        self.gamma = float(gamma)
        self.rho_min = float(rho_min)
        self.rho_max = float(rho_max)
        self.n_table = int(n_table)
        self._u0 = np.log(rho_min)
        self._h = (np.log(rho_max) - self._u0) / (n_table - 1)
        rho = np.exp(self._u0 + self._h * np.arange(n_table))
        rho[-1] = rho_max
        X = _scaled_arg(rho, self.a, self.gamma)
        self._pot = exchange_potential_exact(rho, self.a, self.gamma)
        self._dpot = -(2.0 / self.gamma) * rho * special.k0(X)
        self._en = exchange_energy_density_exact(rho, self.a, self.gamma)
        self._den = rho * self._pot
        self._c = 2 * np.pi * np.sqrt(self.a) / self.gamma

    def _hermite(self, rho, f, df):
        t = (np.log(rho) - self._u0) / self._h
        i = np.clip(np.floor(t).astype(np.intp), 0, self.n_table - 2)
        s = t - i
        s2 = s * s
        s3 = s2 * s
        h00 = 2 * s3 - 3 * s2 + 1
        h10 = s3 - 2 * s2 + s
        h01 = -2 * s3 + 3 * s2
        h11 = s3 - s2
        return h00 * f[i] + h10 * self._h * df[i] + h01 * f[i + 1] + h11 * self._h * df[i + 1]

    def _evaluate(self, rho, which):
        rho = _check_density(rho)
        out = np.zeros_like(rho)
        lo = rho < self.rho_min
        hi = rho > self.rho_max
        mid = ~(lo | hi)
        if which == "pot":
            out[mid] = self._hermite(rho[mid], self._pot, self._dpot)
            if np.any(hi):
                out[hi] = exchange_potential_exact(rho[hi], self.a, self.gamma)
            out[lo] = _pot_series(self._c * rho[lo], self.a)
        else:
            out[mid] = self._hermite(rho[mid], self._en, self._den)
            if np.any(hi):
                out[hi] = exchange_energy_density_exact(rho[hi], self.a, self.gamma)
            out[lo] = _en_series(self._c * rho[lo], self.a, self.gamma)
        return out

    def potential(self, rho):
        return self._evaluate(rho, "pot")

    def energy_density(self, rho):
        return self._evaluate(rho, "en")


def lda_exchange_potential(rho_val, a, gamma=1.0):
    """Exchange potential (Ha) at one or many density values (closed form)."""
    return exchange_potential_exact(rho_val, a, gamma)


def lda_exchange_energy(rho, g: Grid1D, p: ModelParams, table: ExchangeTable | None = None) -> float:
    e = table.energy_density(rho) if table is not None else exchange_energy_density_exact(rho, p.a, p.gamma)
    return float(np.sum(e)) * g.spacing


# --- bundled system --------------------------------------------------------


class System1D:
    """Grid + model parameters + everything precomputed from them.

    This is the context handed to Hamiltonian, solver and propagator code.
    ``u_ext`` defaults to the ionic potential; ``interacting=False`` switches
    Hartree and exchange off (free-particle checks).
    """

    def __init__(self, grid: Grid1D, params: ModelParams, u_ext=None, interacting=True, table: ExchangeTable | None = None):
        self.grid = grid
        self.params = params
        self.u_ext = ionic_potential(grid, params) if u_ext is None else np.asarray(u_ext, dtype=float)
        if self.u_ext.shape != (grid.n_points,):
            raise DimensionError("u_ext must be a field on the grid")
        self.interacting = interacting
        self.e_ion = ion_repulsion(params) if u_ext is None else 0.0
        self.table = table if table is not None else ExchangeTable(params.a, params.gamma)

    @cached_property
    def kernel_ft(self):
        return padded_kernel_ft(self.grid, self.params.a)

    @property
    def n_electrons(self):
        return self.params.n_electrons

    def convolve(self, f):
        return convolve_padded(f, self.kernel_ft, self.grid)

    def hartree(self, rho):
        if not self.interacting:
            return np.zeros(np.shape(rho))
        return self.convolve(rho)

    def exchange_potential(self, rho):
        if not self.interacting:
            return np.zeros(np.shape(rho))
        return self.table.potential(rho)

    def u_lda(self, rho):
        """U_H[rho] + U_x[rho]; accepts a single density or a stack of densities."""
        return self.hartree(rho) + self.exchange_potential(rho)

    def e_lda(self, rho) -> np.ndarray | float:
        """E_H[rho] + E_x[rho]; per row when given a stack."""
        if not self.interacting:
            return np.zeros(np.shape(rho)[:-1]) if np.ndim(rho) > 1 else 0.0
        rho = np.asarray(rho)
        eh = 0.5 * np.sum(rho * self.hartree(rho), axis=-1) * self.grid.spacing
        ex = np.sum(self.table.energy_density(rho), axis=-1) * self.grid.spacing
        return eh + ex
