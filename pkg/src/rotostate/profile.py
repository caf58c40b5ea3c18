"""Radial cross-section of the vorticity transition layer.

The vorticity is built from a monotone profile F with F = 1 inside, F = 0
outside and a C^3 transition of unit mass across s in (-1, 1):

    F(s) = 1 + integral_{-1}^{s} phi,     integral phi = -1.

The default transition density is the polynomial bump

    phi(x) = -c0 * (1 - x^2)^4,   c0 = 315/256,

the lowest even polynomial degree with phi and its first three derivatives
vanishing at both endpoints, which keeps every profile integral closed-form.
A tabulated variant is accepted for experiments.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

# Normalization so that integral_{-1}^{1} (1-x^2)^4 dx = 256/315 is scaled
# to unit mass.  Kept as an exact rational and converted once.
C0 = float(Fraction(315, 256))


class Profile:
    """Transition profile F and its density F_s = phi.

    Immutable after construction; every method is safe for concurrent use.

    Parameters
    ----------
    kind : "poly4" or "tabulated"
    table : optional (s, phi(s)) array of shape (n, 2) for kind="tabulated";
        renormalized by the trapezoid rule so that the mass is exactly -1.
    """

    def __init__(self, kind: str = "poly4", table=None):
        if kind == "poly4":
            self._table = None
        elif kind == "tabulated":
            if table is None:
                raise ValueError("kind='tabulated' requires a (s, phi) table")
            tab = np.asarray(table, dtype=float)
            if tab.ndim != 2 or tab.shape[1] != 2 or tab.shape[0] < 4:
                raise ValueError("table must have shape (n, 2) with n >= 4")
            s, phi = tab[:, 0], tab[:, 1]
            if np.any(np.diff(s) <= 0):
                raise ValueError("table abscissae must be strictly increasing")
            mass = np.trapezoid(phi, s)
            if mass == 0:
                raise ValueError("tabulated phi has zero mass")
            self._table = (s, phi * (-1.0 / mass))
        else:
            raise ValueError(f"unknown profile kind {kind!r}")
        self.kind = kind

    # -- phi ---------------------------------------------------------------

    def phi(self, x):
        """Transition density phi(x); zero outside (-1, 1)."""
        x = np.asarray(x, dtype=float)
        if self._table is None:
            inside = np.abs(x) < 1.0
            y = np.where(inside, 1.0 - x * x, 0.0)
            return -C0 * y**4
        s, p = self._table
        return np.where(np.abs(x) < 1.0, np.interp(x, s, p, left=0.0, right=0.0), 0.0)

    # -- F -----------------------------------------------------------------

    def F(self, rho):
        """Profile F(rho): 1 for rho <= -1, 0 for rho >= 1, smooth between."""
        rho = np.asarray(rho, dtype=float)
        out = np.empty(rho.shape, dtype=float)
        out[...] = np.where(rho <= -1.0, 1.0, 0.0)
        mid = (rho > -1.0) & (rho < 1.0)
        if np.any(mid):
            out[mid] = 1.0 + self._phi_antideriv(rho[mid])
        return out if out.shape else float(out)

    def _phi_antideriv(self, x):
        """integral_{-1}^{x} phi, closed form for poly4, trapezoid table else."""
        if self._table is None:
            # integral of -(c0)(1-t^2)^4 = -(c0)(x - 4x^3/3 + 6x^5/5 - 4x^7/7 + x^9/9) + const
            poly = x - 4 * x**3 / 3 + 6 * x**5 / 5 - 4 * x**7 / 7 + x**9 / 9
            at_m1 = -(1 - 4 / 3 + 6 / 5 - 4 / 7 + 1 / 9)
            return -C0 * (poly - at_m1)
        s, p = self._table
        # cumulative trapezoid on the table, then linear interp
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(s))])
        return np.interp(x, s, cum)

    # -- f^a ---------------------------------------------------------------

    def f_a(self, rho, a: float):
        """Layer profile f^a(rho) = F((rho-1)/a); requires a > 0."""
        if not a > 0:
            raise ValueError("layer width a must be positive")
        return self.F((np.asarray(rho, dtype=float) - 1.0) / a)


def make_profile(name: str = "poly4", table_path: str | None = None) -> Profile:
    """Profile factory used by the config layer."""
    if name == "poly4":
        return Profile("poly4")
    if name == "tabulated":
        if table_path is None:
            raise ValueError("tabulated profile needs a table file")
        tab = np.loadtxt(table_path, delimiter=",")
        return Profile("tabulated", table=tab)
    raise ValueError(f"unknown profile {name!r}")
