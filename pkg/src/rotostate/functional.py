"""The rescaled rotation functional and its analytic derivatives.

For a layer shape u = s + r(alpha, s) and width parameter a (b = a^2) the
rigid-rotation condition, rescaled to the unit strip, reads G[r, a] = 0 with

  G = lam(a) (1+bu) u_a
    + (1+bu)/(4 pi) II Fs' log A cos(da) u'_a
    -  u_a /(4 pi)  II Fs' log A cos(da) (1+bu')
    + 1/(4 pi)      II Fs' (1/b) log(A / A|_{b=0}) sin(da)
    + 1/(4 pi)      II Fs' log A sin(da) (u + u')
    +  b/(4 pi)     II Fs' log A sin(da) (u_a u'_a + u u')

where primes mark the integration point (alpha', s'), da = alpha - alpha',
Fs is the profile density and A is the squared chord of kernel.eval_A.

Discretization.  log A is factored (see kernel.py) as

  log A = log(1+bu) + log(1+bu') + log(4 sigma + b^2 w^2),
  w^2 = (u - u')^2 / ((1+bu)(1+bu')),

and the last piece is split against a target-frozen transverse scale
W(alpha, s, s') = w|_{alpha'=alpha}:

  log(4 sigma + b^2 w^2) = log(4 sigma + b^2 W^2) + log1p(z),
  z = b^2 (w^2 - W^2) / (4 sigma + b^2 W^2).

The W-part depends on alpha' only through sigma, so its angular integral
against every Fourier mode is known exactly (quadrature.log_moment); the
z-part vanishes identically on the alpha' = alpha column and on radial
states and is integrated by trapezoid x Gauss.  The (1/b)-scaled term uses
the same split through kappa(z) = log1p(z)/z, which removes the b -> 0
degeneracy with no small-b branch switching.  Every derivative routine
differentiates this discrete formula exactly, so Newton iterations built on
them converge quadratically; d2G/(da dr) is a central difference in the
scalar a through the analytic dG/dr.
"""

from __future__ import annotations

from dataclasses import dataclass, field as _field
from functools import lru_cache

import numpy as np

from .grids import Field, Grid, sobolev_norm_43
from .kernel import dkappa, kappa
from .profile import Profile

FOUR_PI = 4.0 * np.pi


@dataclass
class FunctionalParams:
    """Fold symmetry, angular-velocity schedule and evaluation state."""

    m: int
    dlambda_da: float = 1.0
    a: float = 0.0
    profile: Profile = _field(default_factory=Profile)
    grid: Grid = None
    ball: float = 0.5  # trust ball for the nonlinear evaluation, H^{4,3} size

    def __post_init__(self):
        if self.grid is None:
            self.grid = Grid(m=self.m)
        if self.grid.m != self.m:
            raise ValueError("params.m must match grid.m")

    @property
    def lambda0(self) -> float:
        return (self.m - 1.0) / (2.0 * self.m)

    def lam(self, a):
        return self.lambda0 + self.dlambda_da * a


@lru_cache(maxsize=8)
def _angular_tables(grid: Grid):
    """cos, sin and sin^2 of half the angle difference, (N, N) arrays."""
    d = grid.alpha[:, None] - grid.alpha[None, :]
    return np.cos(d), np.sin(d), np.sin(0.5 * d) ** 2


def _safe_div(num, den):
    """num/den with exact zeros in den paired with zero numerators."""
    zero = den == 0
    out = num / np.where(zero, 1.0, den)
    return np.where(zero, 0.0, out)



def _acc(out, contrib):
    """Accumulate a possibly-complex contribution into out (real-safe)."""
    out += contrib if np.iscomplexobj(out) else contrib.real

def symmetrize_values(grid: Grid, v: np.ndarray, parity: str) -> np.ndarray:
    """m-fold + parity orbit average along axis 0; trailing axes untouched."""
    shift = grid.n_alpha // grid.m
    acc = np.zeros_like(v)
    for k in range(grid.m):
        acc += np.roll(v, k * shift, axis=0)
    v = acc / grid.m
    sign = 1.0 if parity == "even" else -1.0
    return 0.5 * (v + sign * np.roll(v[::-1], 1, axis=0))


class KernelWorkspace:
    """Per-state precomputation shared by the functional and its derivatives.

    Holds the target-frozen transverse scale W, the exact-moment arguments
    and the angular tables for one (u, a) state.  Complex a propagates
    through every quantity, so complex-step differentiation in a of any
    routine here is exact.
    """

    def __init__(self, grid: Grid, profile: Profile, u: np.ndarray, a):
        self.grid = grid
        self.profile = profile
        self.u = u = np.asarray(u)
        self.a = a
        self.b = b = a * a
        self.is_zero_b = not (np.iscomplexobj(u) or np.iscomplexobj(b)) \
            and b == 0.0
        self.x = 1.0 + b * u
        self.logx = np.log(self.x) if np.iscomplexobj(self.x) \
            else np.log1p(b * u)
        self.cos_t, self.sin_t, self.sigma = _angular_tables(grid)
        self.Fw = grid.w_s * profile.phi(grid.s)   # Gauss x profile weights
        self.hFw = grid.h_alpha * self.Fw          # with the angular step
        # target-frozen transverse scale: dU[i,j,l] = u(i,j) - u(i,l)
        dU = u[:, :, None] - u[:, None, :]
        xt = self.x[:, :, None]
        xl = self.x[:, None, :]
        self.W2 = dU * dU / (xt * xl)
        self.W = np.sqrt(self.W2)
        self.c = 0.5 * b * self.W
        self.asc = np.arcsinh(self.c)
        self.sq = np.sqrt(1.0 + self.c * self.c)
        # directional derivatives of W2 wrt the target value g(i,j) (A1)
        # and the frozen source value g(i,l) (A3), and wrt b
        self.A1 = 2.0 * dU / (xt * xl) - self.W2 * b / xt
        self.A3 = -2.0 * dU / (xt * xl) - self.W2 * b / xl
        self.dbW2 = -self.W2 * (u[:, :, None] / xt + u[:, None, :] / xl)
        self._nyq = grid.n_alpha // 2
        self._n = np.arange(1, self._nyq + 1)
        # e^{-2 i n alpha_i}: folds -n frequencies onto the +n power table
        self._E2 = np.exp(-2j * np.outer(grid.alpha, self._n))

    # -- frequency machinery ----------------------------------------------

    def _freq_split(self, sources):
        """DFT the sources into mean / +n / -n coefficient stacks."""
        N = self.grid.n_alpha
        F = np.fft.fft(sources, axis=0) / N
        F0 = F[0]                            # (ns, nf)
        Fp = F[1:self._nyq + 1].copy()       # n = 1..N/2
        Fm = np.zeros_like(Fp)
        Fm[:self._nyq - 1] = F[-1:-self._nyq:-1]   # n = -1..-(N/2-1)
        return F0, Fp, Fm

    def _power_table(self, j):
        """T[i, l, n] = q^n e^{i n alpha_i}, q = e^{-2 asinh(c)}, n = 1..N/2."""
        base = np.exp(1j * self.grid.alpha[:, None] - 2.0 * self.asc[:, j, :])
        T = np.broadcast_to(base[:, :, None],
                            base.shape + (self._nyq,)).copy()
        np.cumprod(T, axis=2, out=T)
        return T

    def _mode_sum(self, T, F0, Fp, Fm):
        """S[i, l, f] = sum_n F_n e^{i n alpha_i} q^|n| over all frequencies."""
        S = np.einsum("iln,nlf->ilf", T, Fp, optimize=True)
        S += np.einsum("iln,in,nlf->ilf", T, self._E2, Fm, optimize=True)
        S += F0[None, :, :]
        return S

    def _zslab(self, j):
        """Remainder quantities on the (i, k, l) slab for target column j."""
        u, x, b = self.u, self.x, self.b
        ut = u[:, j][:, None, None]
        xt = x[:, j][:, None, None]
        us = u[None, :, :]
        xs = x[None, :, :]
        du = ut - us
        w2 = du * du / (xt * xs)
        W2 = self.W2[:, j, :][:, None, :]
        D = 4.0 * self.sigma[:, :, None] + b * b * W2
        dw = w2 - W2        # exactly zero on the k = i column
        zeta = b * _safe_div(dw, D)
        z = b * zeta
        return dict(du=du, w2=w2, W2=W2, D=D, dw=dw, zeta=zeta, z=z,
                    ut=ut, xt=xt, us=us, xs=xs,
                    dbW2=self.dbW2[:, j, :][:, None, :],
                    A1=self.A1[:, j, :][:, None, :],
                    A3=self.A3[:, j, :][:, None, :])

    # -- values ------------------------------------------------------------

    def log_integrals(self, sources):
        """I[f](i, j) = II Fs(s') log A  f(alpha', s') for stacked sources.

        sources: (n_alpha, n_s, nf) samples of the smooth factors.
        Returns the same shape.
        """
        g = self.grid
        src = np.asarray(sources)
        nf = src.shape[2]
        dtype = np.result_type(src.dtype, self.x.dtype, np.float64)
        out = np.zeros((g.n_alpha, g.n_s, nf), dtype=dtype)

        # additive smooth parts log(1+bu) + log(1+bu')
        P0 = np.einsum("klf,l->f", src, self.hFw)
        out += self.logx[:, :, None] * P0
        out += np.einsum("klf,kl,l->f", src, self.logx, self.hFw)

        F0, Fp, Fm = self._freq_split(src)
        if self.is_zero_b:
            # q = 1: the moments are -2 pi / |n|, a plain circular convolution
            N = g.n_alpha
            k = np.minimum(np.arange(N), N - np.arange(N)).astype(float)
            L = np.zeros(N)
            L[1:] = -2.0 * np.pi / k[1:]
            K = np.fft.ifft(np.fft.fft(src, axis=0) * L[:, None, None], axis=0)
            if not np.iscomplexobj(out):
                K = K.real
            out += np.einsum("ilf,l->if", K, self.Fw)[:, None, :]
            return out

        # mean mode against the exact zeroth moment 4 pi asinh(c)
        _acc(out, np.einsum("ijl,l,lf->ijf", FOUR_PI * self.asc, self.Fw,
                            F0, optimize=True))
        n = self._n
        Cp = (-2.0 * np.pi / n)[:, None, None] * Fp
        Cm = (-2.0 * np.pi / n)[:, None, None] * Fm
        for j in range(g.n_s):
            T = self._power_table(j)
            Mj = np.einsum("iln,nlf->ilf", T, Cp, optimize=True)
            Mj += np.einsum("iln,in,nlf->ilf", T, self._E2, Cm, optimize=True)
            _acc(out[:, j, :], np.einsum("ilf,l->if", Mj, self.Fw))
            # bounded remainder log1p(z), coincident node excluded exactly
            zs = self._zslab(j)
            rem = zs["z"] * kappa(zs["z"])
            out[:, j, :] += np.einsum("ikl,klf,l->if", rem, src, self.hFw,
                                      optimize=True)
        return out

    def g3_values(self):
        """The (1/b) log(A/A0) sin(da) term of the functional, full (i, j)."""
        g = self.grid
        b = self.b
        phi3 = self.u * kappa(b * self.u)          # source-smooth part
        sm = self.sin_t @ (phi3 @ self.hFw)        # (i,), j-independent
        out = np.repeat(sm[:, None], g.n_s, axis=1).astype(
            np.result_type(sm.dtype, self.x.dtype))
        if not self.is_zero_b:
            for j in range(g.n_s):
                zs = self._zslab(j)
                out[:, j] += np.einsum("ikl,ik,l->i",
                                       zs["zeta"] * kappa(zs["z"]),
                                       self.sin_t, self.hFw, optimize=True)
        return out / FOUR_PI

    # -- a-derivatives (at fixed u and fixed sources) ----------------------

    def da_log_integrals(self, sources):
        """d/da of log_integrals at fixed u and sources."""
        g = self.grid
        a, b = self.a, self.b
        src = np.asarray(sources)
        dtype = np.result_type(src.dtype, self.x.dtype, np.float64)
        out = np.zeros((g.n_alpha, g.n_s, src.shape[2]), dtype=dtype)

        dlogx = 2.0 * a * self.u / self.x
        P0 = np.einsum("klf,l->f", src, self.hFw)
        out += dlogx[:, :, None] * P0
        out += np.einsum("klf,kl,l->f", src, dlogx, self.hFw)
        if self.is_zero_b and a == 0.0:
            # c and z vanish to second order in a: the singular part is flat
            return out

        F0, Fp, Fm = self._freq_split(src)
        # dc/da with the W-factor kept outside any division
        ut = self.u[:, :, None] / self.x[:, :, None]
        ul = self.u[:, None, :] / self.x[:, None, :]
        dc = a * self.W * (1.0 - 0.5 * b * (ut + ul))
        for j in range(g.n_s):
            T = self._power_table(j)
            S = self._mode_sum(T, F0, Fp, Fm)
            coef = self.Fw[None, :] * FOUR_PI \
                * dc[:, j, :] / self.sq[:, j, :]
            _acc(out[:, j, :], np.einsum("il,ilf->if", coef, S))
            zs = self._zslab(j)
            dbz, _ = self._db_pieces(zs)
            drem = 2.0 * a * dbz / (1.0 + zs["z"])
            out[:, j, :] += np.einsum("ikl,klf,l->if", drem, src, self.hFw,
                                      optimize=True)
        return out

    def _db_pieces(self, zs):
        """b-derivatives of w2, D, z and zeta on a j-slab at fixed u."""
        b = self.b
        dbw2 = -zs["w2"] * (zs["ut"] / zs["xt"] + zs["us"] / zs["xs"])
        dbW2 = zs["dbW2"]
        dd = dbw2 - dbW2    # exactly zero on the k = i column
        dbD = 2.0 * b * zs["W2"] + b * b * dbW2
        dbz = _safe_div(2.0 * b * zs["dw"] + b * b * dd - zs["z"] * dbD,
                        zs["D"])
        dbzeta = _safe_div(zs["dw"] + b * dd - zs["zeta"] * dbD, zs["D"])
        return dbz, dbzeta

    def g3_da_values(self):
        """d/da of g3_values at fixed u."""
        g = self.grid
        a, b, u = self.a, self.b, self.u
        dphi3 = 2.0 * a * u * u * dkappa(b * u)
        sm = self.sin_t @ (dphi3 @ self.hFw)
        out = np.repeat(sm[:, None], g.n_s, axis=1).astype(
            np.result_type(sm.dtype, self.x.dtype))
        if not (self.is_zero_b and a == 0.0):
            for j in range(g.n_s):
                zs = self._zslab(j)
                dbz, dbzeta = self._db_pieces(zs)
                dval = 2.0 * a * (dbzeta * kappa(zs["z"])
                                  + zs["zeta"] * dkappa(zs["z"]) * dbz)
                out[:, j] += np.einsum("ikl,ik,l->i", dval, self.sin_t,
                                       self.hFw, optimize=True)
        return out / FOUR_PI

    # -- u-derivatives (directional, batched over directions) --------------

    def du_log_integrals(self, sources, gb):
        """Kernel part of the u-derivative of log_integrals.

        Directional derivative along each column of gb (n_alpha, n_s, P),
        holding the sources fixed; source-dependence on u is handled by the
        caller through extra source stacks.  Returns (n_alpha, n_s, nf, P).
        """
        g = self.grid
        b = self.b
        src = np.asarray(sources)
        gb = np.asarray(gb)
        nf, P = src.shape[2], gb.shape[2]
        dtype = np.result_type(src.dtype, gb.dtype, self.x.dtype, np.float64)
        out = np.zeros((g.n_alpha, g.n_s, nf, P), dtype=dtype)
        if self.is_zero_b:
            return out

        # smooth parts: d log(1+bu) = b g / (1+bu) at target and source
        P0 = np.einsum("klf,l->f", src, self.hFw)
        bgx = b * gb / self.x[:, :, None]
        out += bgx[:, :, None, :] * P0[None, None, :, None]
        out += np.einsum("klf,klp,l->fp", src, bgx, self.hFw)[None, None]

        # exact-moment part: dL_n/dc = 4 pi q^n / sqrt(1+c^2) for every n
        F0, Fp, Fm = self._freq_split(src)
        B1 = _safe_div(0.25 * b * self.A1, self.W)   # dc wrt g(i,j), /W-safe
        B3 = _safe_div(0.25 * b * self.A3, self.W)   # dc wrt g(i,l)
        FG = src[:, :, :, None] * gb[:, :, None, :]  # (k,l,f,p)
        for j in range(g.n_s):
            T = self._power_table(j)
            S = self._mode_sum(T, F0, Fp, Fm)        # (i,l,f)
            wS = FOUR_PI * self.Fw[None, :, None] \
                / self.sq[:, j, :][:, :, None] * S
            _acc(out[:, j], np.einsum("il,ilf->if", B1[:, j, :],
                                      wS)[:, :, None] * gb[:, j, None, :])
            _acc(out[:, j], np.einsum("il,ilf,ilp->ifp", B3[:, j, :], wS, gb,
                                      optimize=True))

            # remainder part
            zs = self._zslab(j)
            a1 = 2.0 * zs["du"] / (zs["xt"] * zs["xs"]) \
                - zs["w2"] * b / zs["xt"]
            a2 = -2.0 * zs["du"] / (zs["xt"] * zs["xs"]) \
                - zs["w2"] * b / zs["xs"]
            ib2D = _safe_div(b * b, zs["D"])
            opz = 1.0 + zs["z"]
            wsrc = src * self.hFw[None, :, None]     # (k,l,f)
            # coefficient of the target value g(i,j)
            Kt = ib2D * (a1 / opz - zs["A1"])
            out[:, j] += np.einsum("ikl,klf->if", Kt, wsrc,
                                   optimize=True)[:, :, None] \
                * gb[:, j, None, :]
            # coefficient of the running source value g(k,l)
            Ks = (ib2D * a2 / opz).reshape(g.n_alpha, -1)
            out[:, j] += (Ks @ (FG * self.hFw[None, :, None, None])
                          .reshape(-1, nf * P)).reshape(g.n_alpha, nf, P)
            # coefficient of the frozen source value g(i,l)
            Kl = np.einsum("ikl,klf->ilf", -ib2D * zs["A3"], wsrc,
                           optimize=True)
            out[:, j] += np.einsum("ilf,ilp->ifp", Kl, gb, optimize=True)
        return out

    def g3_du_values(self, gb):
        """Directional u-derivative of g3_values along each column of gb."""
        g = self.grid
        b, u = self.b, self.u
        gb = np.asarray(gb)
        P = gb.shape[2]
        dtype = np.result_type(gb.dtype, self.x.dtype, np.float64)
        # smooth part: d(u kappa(bu)) = g (kappa(bu) + bu dkappa(bu)) at source
        psi = kappa(b * u) + b * u * dkappa(b * u)
        sm = np.einsum("ik,kl,l,klp->ip", self.sin_t, psi, self.hFw, gb,
                       optimize=True)
        out = np.zeros((g.n_alpha, g.n_s, P), dtype=dtype)
        out += sm[:, None, :]
        if not self.is_zero_b:
            for j in range(g.n_s):
                zs = self._zslab(j)
                a1 = 2.0 * zs["du"] / (zs["xt"] * zs["xs"]) \
                    - zs["w2"] * b / zs["xt"]
                a2 = -2.0 * zs["du"] / (zs["xt"] * zs["xs"]) \
                    - zs["w2"] * b / zs["xs"]
                ibD = _safe_div(b, zs["D"])
                opz = 1.0 + zs["z"]
                tau = kappa(zs["z"]) + zs["z"] * dkappa(zs["z"])
                # d(zeta kappa(z)) = dzeta (kappa + z dkappa)
                Ct = ibD * tau * (a1 - opz * zs["A1"])
                Cs = ibD * tau * a2
                Cl = -ibD * tau * opz * zs["A3"]
                wt = np.einsum("ikl,ik,l->i", Ct, self.sin_t, self.hFw,
                               optimize=True)
                out[:, j] += wt[:, None] * gb[:, j, :]
                out[:, j] += np.einsum("ikl,ik,l,klp->ip", Cs, self.sin_t,
                                       self.hFw, gb, optimize=True)
                wl = np.einsum("ikl,ik,l->il", Cl, self.sin_t, self.hFw,
                               optimize=True)
                out[:, j] += np.einsum("il,ilp->ip", wl, gb)
        return out / FOUR_PI


def _3(v):
    return v[:, :, None]


class Functional:
    """Assembles G and its derivatives from the workspace primitives.

    Works on raw (n_alpha, n_s) value arrays; the eval_* wrappers below add
    the symmetry bookkeeping.  All angular structure enters through the six
    separable smooth factors {cos a', sin a'} x {1, u', u'_a}, so a single
    log_integrals call per evaluation covers every convolution term.
    """

    def __init__(self, params: FunctionalParams):
        self.params = params
        self.grid = params.grid
        self.profile = params.profile
        al = self.grid.alpha
        self._cosA = np.cos(al)[:, None]
        self._sinA = np.sin(al)[:, None]

    def _sources6(self, u, ua):
        ck, sk = self._cosA, self._sinA
        one = np.ones_like(u)
        return np.stack([ck * one, sk * one, ck * u, sk * u,
                         ck * ua, sk * ua], axis=2)

    def _state(self, r, a):
        u = self.grid.s[None, :] + np.asarray(r)
        ua = self.grid.alpha_derivative(np.asarray(r))
        ws = KernelWorkspace(self.grid, self.profile, u, a)
        return u, ua, ws

    def _terms(self, u, ua, I6):
        """The four log-convolution brackets from the six basic integrals."""
        cA, sA = self._cosA, self._sinA
        Ic, Is, Icu, Isu, Icua, Isua = (I6[:, :, k] for k in range(6))
        b = None  # placeholder; caller supplies b-weighted combination
        T1 = cA * Icua + sA * Isua
        T2c = cA * Ic + sA * Is          # the (1) part of (1 + b u')
        T2u = cA * Icu + sA * Isu        # the u' part
        T4 = u * (sA * Ic - cA * Is) + (sA * Icu - cA * Isu)
        T5 = ua * (sA * Icua - cA * Isua) + u * (sA * Icu - cA * Isu)
        return T1, T2c, T2u, T4, T5

    # -- values ------------------------------------------------------------

    def G_values(self, r, a):
        p = self.params
        b = a * a
        u, ua, ws = self._state(r, a)
        I6 = ws.log_integrals(self._sources6(u, ua))
        T1, T2c, T2u, T4, T5 = self._terms(u, ua, I6)
        X = 1.0 + b * u
        G = p.lam(a) * X * ua \
            + X / FOUR_PI * T1 \
            - ua / FOUR_PI * (T2c + b * T2u) \
            + ws.g3_values() \
            + T4 / FOUR_PI \
            + b / FOUR_PI * T5
        return G

    # -- d/da at fixed r ---------------------------------------------------

    def dG_da_values(self, r, a):
        p = self.params
        b = a * a
        u, ua, ws = self._state(r, a)
        src6 = self._sources6(u, ua)
        I6 = ws.log_integrals(src6)
        dI6 = ws.da_log_integrals(src6)
        T1, T2c, T2u, T4, T5 = self._terms(u, ua, I6)
        dT1, dT2c, dT2u, dT4, dT5 = self._terms(u, ua, dI6)
        X = 1.0 + b * u
        dG = p.dlambda_da * X * ua + p.lam(a) * 2.0 * a * u * ua \
            + (2.0 * a * u) / FOUR_PI * T1 + X / FOUR_PI * dT1 \
            - ua / FOUR_PI * (dT2c + 2.0 * a * T2u + b * dT2u) \
            + ws.g3_da_values() \
            + dT4 / FOUR_PI \
            + (2.0 * a) / FOUR_PI * T5 + b / FOUR_PI * dT5
        return dG

    # -- directional derivative in r, batched ------------------------------

    def dG_dr_values(self, r, a, directions, chunk: int = 64):
        gb = np.asarray(directions)
        if gb.ndim == 2:
            gb = gb[:, :, None]
        if gb.shape[2] > chunk:
            parts = [self.dG_dr_values(r, a, gb[:, :, k:k + chunk], chunk)
                     for k in range(0, gb.shape[2], chunk)]
            return np.concatenate(parts, axis=2)

        p = self.params
        b = a * a
        g = self.grid
        u, ua, ws = self._state(r, a)
        cA = self._cosA[:, :, None]
        sA = self._sinA[:, :, None]
        src6 = self._sources6(u, ua)
        I6 = ws.log_integrals(src6)
        T1, T2c, T2u, T4, T5 = self._terms(u, ua, I6)
        Ic, Is, Icu, Isu, Icua, Isua = (I6[:, :, k] for k in range(6))

        gba = g.alpha_derivative(gb)
        P = gb.shape[2]
        ck, sk = self._cosA[:, :, None], self._sinA[:, :, None]
        srcg = np.concatenate([ck * gb, sk * gb, ck * gba, sk * gba], axis=2)
        Ig = ws.log_integrals(srcg)
        Icg, Isg, Icga, Isga = (Ig[:, :, k * P:(k + 1) * P] for k in range(4))

        dIu = ws.du_log_integrals(src6, gb)
        dIc, dIs, dIcu, dIsu, dIcua, dIsua = (dIu[:, :, k, :]
                                              for k in range(6))
        X = 1.0 + b * u
        lam = p.lam(a)
        dG = lam * (b * gb * _3(ua) + _3(X) * gba) \
            + (b / FOUR_PI) * gb * _3(T1) \
            + (_3(X) / FOUR_PI) * (cA * (Icga + dIcua) + sA * (Isga + dIsua)) \
            - (gba / FOUR_PI) * _3(T2c + b * T2u) \
            - (_3(ua) / FOUR_PI) * (cA * dIc + sA * dIs
                                    + b * (cA * (Icg + dIcu)
                                           + sA * (Isg + dIsu))) \
            + ws.g3_du_values(gb) \
            + (1.0 / FOUR_PI) * (gb * _3(self._sinA * Ic - self._cosA * Is)
                                 + _3(u) * (sA * dIc - cA * dIs)
                                 + (sA * (Icg + dIcu) - cA * (Isg + dIsu))) \
            + (b / FOUR_PI) * (gba * _3(self._sinA * Icua
                                        - self._cosA * Isua)
                               + _3(ua) * (sA * (Icga + dIcua)
                                           - cA * (Isga + dIsua))
                               + gb * _3(self._sinA * Icu
                                         - self._cosA * Isu)
                               + _3(u) * (sA * (Icg + dIcu)
                                          - cA * (Isg + dIsu)))
        return dG

    # -- mixed second derivative -------------------------------------------

    def d2G_dadr_values(self, r, a, directions, step: float = 1e-5):
        """d/da of the directional derivative by central difference in a.

        dG/dr is analytic and evaluated to round-off, and every term is
        either linear or smooth in a (through b = a^2), so the central
        difference is accurate to ~step^2 + eps/step, far below the
        truncation level of the discretization.  Valid at a = 0.
        """
        h = step * max(1.0, abs(a))
        dp = self.dG_dr_values(r, a + h, directions)
        dm = self.dG_dr_values(r, a - h, directions)
        return (dp - dm) / (2.0 * h)


# -- public field-level API -------------------------------------------------

def _check_input(rtilde: Field, params: FunctionalParams):
    if rtilde.grid != params.grid:
        raise ValueError("field grid does not match params grid")
    if rtilde.parity != "even" or rtilde.fold != "m":
        raise ValueError("the shape perturbation must be even with m-fold "
                         "symmetry")
    nrm = sobolev_norm_43(rtilde)
    if not np.isfinite(nrm) or nrm > params.ball:
        raise ValueError(f"state norm {nrm:.3e} outside the trust ball "
                         f"{params.ball:g}")


def eval_G(rtilde: Field, params: FunctionalParams) -> Field:
    """The rotation functional at (rtilde, params.a); odd, m-fold output."""
    _check_input(rtilde, params)
    fn = Functional(params)
    v = fn.G_values(rtilde.values, params.a)
    return Field(params.grid, symmetrize_values(params.grid, v, "odd"),
                 parity="odd", fold="m")


def eval_dG_da(rtilde: Field, params: FunctionalParams) -> Field:
    """Partial derivative of G in the layer width a at fixed shape."""
    _check_input(rtilde, params)
    fn = Functional(params)
    v = fn.dG_da_values(rtilde.values, params.a)
    return Field(params.grid, symmetrize_values(params.grid, v, "odd"),
                 parity="odd", fold="m")


def eval_dG_dr(rtilde: Field, params: FunctionalParams,
               directions: np.ndarray) -> np.ndarray:
    """Directional shape derivatives of G.

    directions: (n_alpha, n_s, P) stack of even m-fold perturbations.
    Returns the (n_alpha, n_s, P) stack of odd responses.
    """
    _check_input(rtilde, params)
    fn = Functional(params)
    v = fn.dG_dr_values(rtilde.values, params.a, directions)
    return symmetrize_values(params.grid, v, "odd")


def eval_d2G_dadr(rtilde: Field, params: FunctionalParams,
                  directions: np.ndarray) -> np.ndarray:
    """Mixed derivative d^2 G / (da dr) along the given directions."""
    _check_input(rtilde, params)
    fn = Functional(params)
    v = fn.d2G_dadr_values(rtilde.values, params.a, directions)
    return symmetrize_values(params.grid, v, "odd")
