"""Discrete linearization: assembly, kernel, image and transversality.

At the trivial state the shape linearization acts mode by mode: an even
input g_k(s) cos(k alpha) produces q_k(s) sin(k alpha) with

    q_k = k (1/2 - lam0) g_k + 1/2 int Fs g_k ds',   lam0 = (m-1)/(2m),

so for k = m the constants are an exact kernel and the image is cut out by
the single condition int Fs q_m ds = 0.  This module assembles the dense
Jacobian in harmonic x collocation coordinates (analytically or by finite
differences), certifies the kernel dimension and image codimension by SVD,
inverts the mode operator on its image with the closed-form constants, and
evaluates the transversality coefficient m * dlambda/da.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functional import Functional, FunctionalParams, symmetrize_values
from .grids import Field, Grid, ModeStack, from_modes, l2_norm, to_modes
from .profile import Profile

__all__ = [
    "DenseJacobian", "analytic_linear_mode", "assemble_jacobian",
    "kernel_vector", "solvability_defect", "solve_in_image",
    "transversality_coefficient", "basis_directions", "odd_modes",
]


def basis_directions(grid: Grid) -> np.ndarray:
    """Stack of cos(j m alpha) e_i(s) basis fields, column p = (j-1)*n_s + i.

    e_i is the cardinal (Lagrange) function of the Gauss node s_i, so basis
    coordinates are simply values at the nodes per harmonic.
    """
    P = grid.n_harmonics * grid.n_s
    out = np.zeros((grid.n_alpha, grid.n_s, P))
    for j in range(grid.n_harmonics):
        cj = grid.cos_table[j][:, None]
        for i in range(grid.n_s):
            col = j * grid.n_s + i
            out[:, i, col] = cj[:, 0]
    return out


def odd_modes(grid: Grid, values: np.ndarray) -> np.ndarray:
    """sin(j m alpha) coefficients of odd values (n_alpha, n_s[, P])."""
    vhat = np.fft.rfft(values, axis=0) / grid.n_alpha
    return -2.0 * vhat[grid.harmonics].imag


@dataclass
class DenseJacobian:
    """Shape linearization in (harmonic, node) coordinates.

    matrix maps even-cos coefficients to odd-sin coefficients; both sides
    use the column convention of basis_directions.
    """

    matrix: np.ndarray
    rtilde: np.ndarray
    a: float
    method: str
    grid: Grid

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        return self.matrix @ np.asarray(coeffs).reshape(-1)

    def harmonic_block(self, j: int) -> np.ndarray:
        """The (j, j) diagonal block, harmonic index j = 1..J."""
        ns = self.grid.n_s
        sl = slice((j - 1) * ns, j * ns)
        return self.matrix[sl, sl]

    def offdiag_ratio(self) -> float:
        """Frobenius norm of off-diagonal blocks over diagonal blocks."""
        ns, J = self.grid.n_s, self.grid.n_harmonics
        diag = off = 0.0
        for j in range(J):
            for k in range(J):
                blk = self.matrix[j * ns:(j + 1) * ns, k * ns:(k + 1) * ns]
                nrm = float(np.sum(blk**2))
                if j == k:
                    diag += nrm
                else:
                    off += nrm
        return np.sqrt(off) / np.sqrt(diag)

    def singular_values(self) -> np.ndarray:
        return np.linalg.svd(self.matrix, compute_uv=False)


def analytic_linear_mode(k: int, gk: np.ndarray, profile: Profile,
                         grid: Grid, lambda0: float | None = None) -> np.ndarray:
    """Mode-k action of the trivial-state linearization on an s-vector.

    Returns q_k = k (1/2 - lam0) g_k + 1/2 int Fs g_k, with lam0 defaulting
    to the bifurcation value (m-1)/(2m) (then the prefactor is k/(2m)).
    """
    if k % grid.m:
        raise ValueError(f"harmonic {k} is not a multiple of m={grid.m}")
    if lambda0 is None:
        lambda0 = (grid.m - 1.0) / (2.0 * grid.m)
    gk = np.asarray(gk, dtype=float)
    Fw = grid.w_s * profile.phi(grid.s)
    return k * (0.5 - lambda0) * gk + 0.5 * np.sum(Fw * gk)


def assemble_jacobian(rtilde, a: float, params: FunctionalParams,
                      method: str = "analytic",
                      fd_step: float = 1e-6) -> DenseJacobian:
    """Dense shape Jacobian at (rtilde, a) in basis_directions coordinates."""
    grid = params.grid
    r = rtilde.values if isinstance(rtilde, Field) else np.asarray(rtilde)
    fn = Functional(params)
    basis = basis_directions(grid)
    if method == "analytic":
        resp = fn.dG_dr_values(r, a, basis)
    elif method == "fd":
        P = basis.shape[2]
        resp = np.empty_like(basis)
        for p in range(P):
            d = fd_step * basis[:, :, p]
            resp[:, :, p] = (fn.G_values(r + d, a)
                             - fn.G_values(r - d, a)) / (2.0 * fd_step)
    else:
        raise ValueError(f"unknown assembly method {method!r}")
    resp = symmetrize_values(grid, resp, "odd")
    coeffs = odd_modes(grid, resp)                     # (J, n_s, P)
    matrix = coeffs.reshape(grid.n_harmonics * grid.n_s, -1)
    return DenseJacobian(matrix=matrix, rtilde=r, a=a, method=method,
                         grid=grid)


def kernel_vector(m: int, grid: Grid) -> Field:
    """cos(m alpha), constant in s, normalized in the discrete L2 norm."""
    if m != grid.m:
        raise ValueError("kernel harmonic must equal grid.m")
    v = np.repeat(np.cos(m * grid.alpha)[:, None], grid.n_s, axis=1)
    f = Field(grid, v, parity="even", fold="m")
    f.values = f.values / l2_norm(f)
    return f


def solvability_defect(q: Field, profile: Profile | None = None) -> float:
    """int Fs(s) q_m(s) ds for the m-harmonic sin coefficient of odd q.

    Zero exactly when q lies in the image of the trivial-state
    linearization (codimension-1 characterization).
    """
    if profile is None:
        profile = Profile()
    g = q.grid
    qm = odd_modes(g, q.values)[0]          # harmonic j=1, i.e. k=m
    Fw = g.w_s * profile.phi(g.s)
    return float(np.sum(Fw * qm))


def solve_in_image(q: Field, params: FunctionalParams,
                   tol: float = 1e-8) -> Field:
    """Invert the trivial-state linearization on its image.

    Mode-wise closed form: g_k = (2m/k) q_k + B_k with the constant
    B_k = 2 m^2/(k (m-k)) int Fs q_k for k != m and B_m = 0 (the kernel
    representative is fixed by a zero m-harmonic constant).
    """
    grid = params.grid
    m = params.m
    defect = solvability_defect(q, params.profile)
    if abs(defect) > tol:
        raise ValueError(f"right-hand side not in the image: defect "
                         f"{defect:.3e} > {tol:.1e}")
    qm = to_modes(q)
    Fw = grid.w_s * params.profile.phi(grid.s)
    gcoef = np.empty_like(qm.coeffs)
    for j, k in enumerate(grid.harmonics):
        mom = float(np.sum(Fw * qm.coeffs[j]))
        B = 0.0 if k == m else 2.0 * m * m / (k * (m - k)) * mom
        gcoef[j] = (2.0 * m / k) * qm.coeffs[j] + B
        back = analytic_linear_mode(int(k), gcoef[j], params.profile, grid)
        if np.max(np.abs(back - qm.coeffs[j])) > 1e3 * tol:
            raise AssertionError(f"mode {k} round-trip failed")
    return from_modes(ModeStack(grid, gcoef, parity="even"))


def transversality_coefficient(m: int, params: FunctionalParams) -> float:
    """Fs-weighted m-harmonic component of d2G/(da dr) along the kernel.

    Evaluated at the bifurcation point (0, 0); equals +/- m * dlambda/da.
    """
    grid = params.grid
    if m != grid.m:
        raise ValueError("m must match the grid fold symmetry")
    fn = Functional(params)
    direction = np.repeat(np.cos(m * grid.alpha)[:, None], grid.n_s, axis=1)
    v = fn.d2G_dadr_values(np.zeros((grid.n_alpha, grid.n_s)), 0.0,
                           direction[:, :, None])[:, :, 0]
    v = symmetrize_values(grid, v, "odd")
    coef = odd_modes(grid, v)[0]
    Fw = grid.w_s * params.profile.phi(grid.s)
    return float(np.sum(Fw * coef))
