"""Collocation grids, symmetry-restricted fields, and discrete Sobolev norms.

The computational domain is the periodic strip T x (-1, 1).  Angles use a
uniform periodic grid (so angular derivatives and convolutions are exact on
the retained trigonometric band) and the transverse coordinate uses
Gauss-Legendre nodes (so profile-weighted integrals are spectrally
accurate).  Fields carry parity (even/odd in alpha) and m-fold tags;
symmetry is enforced by averaging over the symmetry-group orbit after
nonlinear operations so round-off asymmetries cannot drift into Newton
iterations.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


def gauss_legendre(n: int):
    """Nodes and weights on (-1, 1)."""
    return np.polynomial.legendre.leggauss(n)


def lagrange_diff_matrix(nodes: np.ndarray) -> np.ndarray:
    """Differentiation matrix of the interpolating polynomial on `nodes`.

    Standard barycentric construction; exact (to round-off) on polynomials
    of degree < len(nodes).
    """
    x = np.asarray(nodes, dtype=float)
    n = len(x)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    # barycentric weights
    w = 1.0 / np.prod(diff, axis=1)
    D = np.empty((n, n))
    D[:] = (w[None, :] / w[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    x = np.asarray(nodes, dtype=float)
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def barycentric_interp(nodes, weights, values, targets):
    """Evaluate the interpolant of `values` (last axis = nodes) at `targets`."""
    t = np.asarray(targets, dtype=float)
    shape = t.shape
    t = t.ravel()
    d = t[:, None] - nodes[None, :]
    exact = np.isclose(d, 0.0, atol=1e-14)
    d = np.where(exact, 1.0, d)
    c = weights[None, :] / d
    num = values @ c.T
    den = c.sum(axis=1)
    out = num / den
    hit_rows, hit_cols = np.nonzero(exact)
    if hit_rows.size:
        out[..., hit_rows] = values[..., hit_cols]
    return out.reshape(values.shape[:-1] + shape)


class Grid:
    """Tensor collocation grid on T x (-1, 1).

    Parameters
    ----------
    n_alpha : uniform periodic angular nodes, alpha_i = 2*pi*i/n_alpha.
        Default: the smallest multiple of 2m that is >= 256 (even for the
        FFT, divisible by m for orbit averaging).
    n_s : Gauss-Legendre nodes on (-1, 1).
    m : fold symmetry (>= 2).
    n_harmonics : retained angular harmonics cos(j*m*alpha), j = 1..J.
        Default: 16, reduced if the angular grid cannot resolve that band.
    """

    def __init__(self, n_alpha: int | None = None, n_s: int = 48, m: int = 3,
                 n_harmonics: int | None = None):
        if m < 2:
            raise ValueError("fold symmetry m must be >= 2")
        if n_alpha is None:
            n_alpha = ((256 + 2 * m - 1) // (2 * m)) * 2 * m
        if n_harmonics is None:
            n_harmonics = min(16, n_alpha // (4 * m))
        if n_alpha < 4 * n_harmonics * m:
            raise ValueError(
                f"n_alpha={n_alpha} under-resolves harmonic {n_harmonics * m}: "
                f"need n_alpha >= {4 * n_harmonics * m}")
        if n_alpha % m:
            raise ValueError("n_alpha must be divisible by m (orbit averaging)")
        self.n_alpha = int(n_alpha)
        self.n_s = int(n_s)
        self.m = int(m)
        self.n_harmonics = int(n_harmonics)
        self.alpha = 2.0 * np.pi * np.arange(n_alpha) / n_alpha
        self.s, self.w_s = gauss_legendre(n_s)
        if not np.all(self.w_s > 0) or abs(self.w_s.sum() - 2.0) > 1e-14:
            raise AssertionError("Gauss weights failed sanity check")
        self.h_alpha = 2.0 * np.pi / n_alpha

    # -- derived operators -------------------------------------------------

    @cached_property
    def diff_s(self) -> np.ndarray:
        return lagrange_diff_matrix(self.s)

    @cached_property
    def bary_w(self) -> np.ndarray:
        return barycentric_weights(self.s)

    @cached_property
    def harmonics(self) -> np.ndarray:
        """Retained angular wavenumbers j*m for j = 1..J."""
        return self.m * np.arange(1, self.n_harmonics + 1)

    @cached_property
    def cos_table(self) -> np.ndarray:
        """cos(j*m*alpha_i), shape (J, n_alpha)."""
        return np.cos(np.outer(self.harmonics, self.alpha))

    @cached_property
    def sin_table(self) -> np.ndarray:
        return np.sin(np.outer(self.harmonics, self.alpha))

    def alpha_derivative(self, values: np.ndarray) -> np.ndarray:
        """Spectral d/d_alpha along axis 0 of an (n_alpha, ...) array."""
        vhat = np.fft.rfft(values, axis=0)
        k = np.arange(vhat.shape[0])
        if self.n_alpha % 2 == 0:
            k = k.copy()
            k[-1] = 0  # Nyquist mode has no well-defined odd derivative
        vhat *= 1j * k.reshape((-1,) + (1,) * (values.ndim - 1))
        return np.fft.irfft(vhat, n=self.n_alpha, axis=0)

    def __eq__(self, other):
        return (isinstance(other, Grid)
                and (self.n_alpha, self.n_s, self.m, self.n_harmonics)
                == (other.n_alpha, other.n_s, other.m, other.n_harmonics))

    def __hash__(self):
        return hash((self.n_alpha, self.n_s, self.m, self.n_harmonics))

    def __repr__(self):
        return (f"Grid(n_alpha={self.n_alpha}, n_s={self.n_s}, m={self.m}, "
                f"n_harmonics={self.n_harmonics})")


@dataclass
class Field:
    """Scalar samples on a Grid with symmetry tags.

    values has shape (n_alpha, n_s).  parity is "even", "odd" or "none"
    (about alpha = 0); fold is "m" (invariant under alpha -> alpha + 2*pi/m)
    or "none".
    """

    grid: Grid
    values: np.ndarray
    parity: str = "none"
    fold: str = "none"

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.grid.n_alpha, self.grid.n_s):
            raise ValueError("field values do not match grid shape")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.parity, self.fold)

    def check_symmetry(self, tol: float = 1e-12) -> float:
        """Worst violation of the declared parity/fold tags."""
        worst = 0.0
        v = self.values
        if self.parity in ("even", "odd"):
            sign = 1.0 if self.parity == "even" else -1.0
            refl = np.roll(v[::-1], 1, axis=0)  # alpha -> -alpha on the grid
            worst = max(worst, float(np.max(np.abs(v - sign * refl), initial=0.0)))
        if self.fold == "m":
            shift = self.grid.n_alpha // self.grid.m
            worst = max(worst, float(np.max(np.abs(v - np.roll(v, shift, axis=0)),
                                            initial=0.0)))
        if worst > tol:
            raise AssertionError(f"symmetry violation {worst:.3e} > {tol:.1e}")
        return worst


def symmetrize(grid: Grid, values: np.ndarray, parity: str, fold: str = "m") -> Field:
    """Project onto the declared symmetry class by orbit averaging."""
    v = np.asarray(values, dtype=values.dtype)
    if fold == "m":
        shift = grid.n_alpha // grid.m
        acc = np.zeros_like(v)
        for k in range(grid.m):
            acc += np.roll(v, k * shift, axis=0)
        v = acc / grid.m
    if parity in ("even", "odd"):
        sign = 1.0 if parity == "even" else -1.0
        refl = np.roll(v[::-1], 1, axis=0)
        v = 0.5 * (v + sign * refl)
    return Field(grid, v, parity=parity, fold=fold)


@dataclass
class ModeStack:
    """Angular-harmonic coefficients c_j(s_i), j = 1..J, on the retained band."""

    grid: Grid
    coeffs: np.ndarray  # (J, n_s)
    parity: str
    truncation: float = 0.0  # relative energy outside the retained band

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs)
        if self.coeffs.shape != (self.grid.n_harmonics, self.grid.n_s):
            raise ValueError("mode coefficients do not match grid")

    def ravel(self) -> np.ndarray:
        return self.coeffs.reshape(-1)

    @classmethod
    def from_vector(cls, grid: Grid, vec: np.ndarray, parity: str) -> "ModeStack":
        return cls(grid, np.asarray(vec).reshape(grid.n_harmonics, grid.n_s), parity)


def to_modes(f: Field) -> ModeStack:
    """Project a tagged field onto cos(j m alpha) (even) / sin(j m alpha) (odd).

    The truncation diagnostic reports the relative alpha-spectral energy the
    retained band misses (mean mode included for even fields is reported as
    truncation: the solver works on mean-free even fields).
    """
    if f.parity not in ("even", "odd"):
        raise ValueError("field must be tagged even or odd to extract modes")
    g = f.grid
    vhat = np.fft.rfft(f.values, axis=0) / g.n_alpha
    # cos coefficient of mode k>0 is 2*Re(vhat_k); sin coefficient -2*Im
    if f.parity == "even":
        coeffs = 2.0 * vhat[g.harmonics].real
    else:
        coeffs = -2.0 * vhat[g.harmonics].imag
    total = np.sum(np.abs(vhat) ** 2)
    kept = np.sum(np.abs(vhat[g.harmonics]) ** 2)
    trunc = float(np.sqrt(max(total - kept, 0.0) / total)) if total > 0 else 0.0
    return ModeStack(g, coeffs, f.parity, truncation=trunc)


def from_modes(ms: ModeStack) -> Field:
    g = ms.grid
    table = g.cos_table if ms.parity == "even" else g.sin_table
    values = table.T @ ms.coeffs
    return Field(g, values, parity=ms.parity, fold="m")


# -- norms -----------------------------------------------------------------


def l2_norm(f: Field) -> float:
    """Discrete L2(T x (-1,1)) norm."""
    g = f.grid
    return float(np.sqrt(g.h_alpha * np.sum(f.values**2 @ g.w_s)))


def sobolev_norm_43(f: Field) -> float:
    """Discrete anisotropic Sobolev norm.

    ||f||^2 = ||f||_{L2}^2 + ||d^3_s f||^2 + sum_{j=0}^{3} ||d_a^{4-j} d_s^j f||^2
    with spectral alpha-derivatives and the Gauss-node differentiation matrix
    in s.  (The physical transverse variable is rho = 1 + a*s; the norm is
    taken in the rescaled coordinates the solver works in.)
    """
    g = f.grid
    D = g.diff_s

    def nrm2(v):
        return g.h_alpha * float(np.sum(v**2 @ g.w_s))

    total = nrm2(f.values)
    ds = [f.values]
    for _ in range(3):
        ds.append(ds[-1] @ D.T)
    total += nrm2(ds[3])
    for j in range(4):
        v = ds[j]
        for _ in range(4 - j):
            v = g.alpha_derivative(v)
        total += nrm2(v)
    return float(np.sqrt(total))


def sobolev_norm_33(f: Field) -> float:
    """Discrete H^{3,3}-type norm used for the output space diagnostics."""
    g = f.grid
    D = g.diff_s

    def nrm2(v):
        return g.h_alpha * float(np.sum(v**2 @ g.w_s))

    total = nrm2(f.values)
    ds = [f.values]
    for _ in range(3):
        ds.append(ds[-1] @ D.T)
    total += nrm2(ds[3])
    for j in range(3):
        v = ds[j]
        for _ in range(3 - j):
            v = g.alpha_derivative(v)
        total += nrm2(v)
    return float(np.sqrt(total))
