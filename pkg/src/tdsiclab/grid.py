"""Uniform periodic 1D grid and the small linear algebra used everywhere.

Orbitals are plain complex numpy arrays of length ``n_points``; an orbital
set is a 2D array of shape ``(N, n_points)`` with one orbital per row.
Square coefficient matrices (Lagrange multipliers, unitary maps) are plain
``(N, N)`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSetError, DimensionError, SymmetryViolationError

ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class Grid1D:
    """Uniform mesh ``x_k = origin + k * spacing`` with periodic spectral derivatives.

    ``n_points`` must be a power of two (>= 8). By default the grid is
    centred on x = 0.
    """

    n_points: int
    spacing: float
    origin: float | None = None
    x: np.ndarray = field(init=False, repr=False, compare=False)
    wave_numbers: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = int(self.n_points)
        if n < 8 or n & (n - 1):
            raise DimensionError(f"n_points must be a power of two >= 8, got {self.n_points}")
        if not self.spacing > 0:
            raise DimensionError(f"spacing must be positive, got {self.spacing}")
        if self.origin is None:
            object.__setattr__(self, "origin", -(n - 1) * self.spacing / 2)
        x = self.origin + self.spacing * np.arange(n)
        k = 2 * np.pi * np.fft.fftfreq(n, d=self.spacing)
        x.flags.writeable = False
        k.flags.writeable = False
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "wave_numbers", k)

    @property
    def length(self):
        return self.n_points * self.spacing

    @property
    def kinetic_symbol(self):
        return 0.5 * self.wave_numbers**2

    def _check(self, arr):
        if np.shape(arr)[-1] != self.n_points:
            raise DimensionError(
                f"array of trailing length {np.shape(arr)[-1]} does not live on a grid of {self.n_points} points"
            )


def inner_product(a, b, g: Grid1D) -> complex:
    """(a|b) = sum_k conj(a_k) b_k * dx."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    g._check(a)
    return complex(np.vdot(a, b) * g.spacing)


def overlap_matrix(left, right, g: Grid1D) -> np.ndarray:
    """Matrix of brackets ``S[i, j] = (left_i | right_j)``."""
    left = np.atleast_2d(left)
    right = np.atleast_2d(right)
    g._check(left)
    g._check(right)
    return (left.conj() @ right.T) * g.spacing


def gram_matrix(s, g: Grid1D) -> np.ndarray:
    return overlap_matrix(s, s, g)


def ortho_error(s, g: Grid1D) -> float:
    s = np.atleast_2d(s)
    return float(np.max(np.abs(gram_matrix(s, g) - np.eye(len(s)))))


def norms(s, g: Grid1D) -> np.ndarray:
    s = np.atleast_2d(s)
    return np.sum(np.abs(s) ** 2, axis=-1) * g.spacing


def apply_kinetic(o, g: Grid1D) -> np.ndarray:
    """-1/2 d^2/dx^2 evaluated spectrally. Works on a single orbital or a set."""
    o = np.asarray(o)
    g._check(o)
    return np.fft.ifft(np.fft.fft(o, axis=-1) * g.kinetic_symbol, axis=-1)


def spectral_derivative(f, g: Grid1D) -> np.ndarray:
    """d/dx by FFT; the Nyquist mode is dropped so real input stays real."""
    f = np.asarray(f)
    g._check(f)
    k = g.wave_numbers.copy()
    k[g.n_points // 2] = 0.0
    out = np.fft.ifft(1j * k * np.fft.fft(f, axis=-1), axis=-1)
    return out.real if np.isrealobj(f) else out


def hermitian_part(m):
    m = np.asarray(m)
    return 0.5 * (m + m.conj().T)


def antihermitian_part(m):
    m = np.asarray(m)
    return 0.5 * (m - m.conj().T)


def inverse_sqrt_hermitian(s, cond_max=1e12):
    w, v = np.linalg.eigh(hermitian_part(s))
    if w[0] <= 0 or w[-1] / w[0] > cond_max:
        raise DegenerateSetError(
            f"overlap matrix is singular or ill conditioned (eigenvalues {w[0]:.3e} .. {w[-1]:.3e})"
        )
    return (v / np.sqrt(w)) @ v.conj().T


def lowdin_coefficients(s, g: Grid1D) -> np.ndarray:
    """Return C such that ``C.T @ s`` is the symmetrically orthonormalized set."""
    return inverse_sqrt_hermitian(gram_matrix(s, g))


def lowdin_orthonormalize(s, g: Grid1D) -> np.ndarray:
    """Symmetric (S^-1/2) orthonormalization, the closest orthonormal set in least squares."""
    s = np.atleast_2d(np.asarray(s, dtype=complex))
    c = lowdin_coefficients(s, g)
    # psi'_a = sum_b psi_b (S^-1/2)_{ba}
    return c.T @ s


def lowdin_unitary(m) -> np.ndarray:
    """Closest unitary matrix to ``m`` (polar factor), i.e. Loewdin on the columns."""
    m = np.asarray(m, dtype=complex)
    return m @ inverse_sqrt_hermitian(m.conj().T @ m)


def gram_schmidt(s, g: Grid1D) -> np.ndarray:
    """Sequential Gram-Schmidt; kept as an order-dependent reference for tests."""
    s = np.atleast_2d(np.asarray(s, dtype=complex))
    out = np.zeros_like(s)
    for i, v in enumerate(s):
        w = v.copy()
        for j in range(i):
            w -= inner_product(out[j], w, g) * out[j]
        nrm = np.sqrt(inner_product(w, w, g).real)
        if nrm < 1e-12:
            raise DegenerateSetError(f"orbital {i} is linearly dependent on its predecessors")
        out[i] = w / nrm
    return out


def diagonalize_hermitian(m, tol=1e-8):
    """Eigenpairs of a hermitian matrix, ascending.

    Each eigenvector's phase is fixed so its largest-magnitude component is
    real and positive, which makes the output reproducible.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    asym = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if asym >= tol:
        raise SymmetryViolationError(f"matrix is not hermitian: max|m - m^+| = {asym:.3e}")
    w, v = np.linalg.eigh(hermitian_part(m))
    v = v.astype(complex)
    for i in range(v.shape[1]):
        col = v[:, i]
        j = np.argmax(np.abs(col))
        v[:, i] = col * (abs(col[j]) / col[j])
    return w, v
