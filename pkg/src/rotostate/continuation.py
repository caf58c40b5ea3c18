"""Bifurcation-branch computation by amplitude-parametrized Newton.

The branch through the trivial state is parametrized by the amplitude xi of
the kernel direction g0 = cos(m alpha)/||.||: the state is

    r = xi g0 + w,   kernel-component(w) = 0,

and (w, a) solve G[r, a] = 0.  Fixing the kernel amplitude and freeing the
layer width a gives a square bordered system (the a-column lifts the
codimension-1 image obstruction), which avoids fold handling entirely near
the bifurcation point.  w is carried in retained-harmonic coefficients
(cos(j m alpha) x Gauss nodes), so the Newton matrix is exactly the dense
Jacobian of linearalg plus one a-column and one constraint row.

Branch files are JSON lines: a header object followed by one object per
accepted point, in xi order; written deterministically so identical
configurations reproduce byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as _field

import numpy as np

from . import __version__
from .functional import Functional, FunctionalParams, symmetrize_values
from .grids import Field, Grid, ModeStack, from_modes, l2_norm
from .linearalg import (assemble_jacobian, kernel_vector, odd_modes,
                        transversality_coefficient)

NEWTON_TOL = 1e-10     # L2 residual acceptance
STEP_TOL = 1e-12       # Newton step size acceptance
MAX_ITERS = 25
MAX_BACKTRACKS = 8
COND_LIMIT = 1e12
MIN_XI_STEP = 1e-7


class ConvergenceError(RuntimeError):
    pass


@dataclass
class BranchPoint:
    """One accepted point of the bifurcation branch."""

    xi: float
    a: float
    w_coeffs: np.ndarray          # (J, n_s) cos-harmonic coefficients of w
    lam: float
    newton_iters: int
    residual_L2: float
    min_ds_r: float               # min over the grid of 1 + d_s(rtilde)
    residual_history: list = _field(default_factory=list)

    def w_field(self, grid: Grid) -> Field:
        return from_modes(ModeStack(grid, self.w_coeffs, parity="even"))

    def rtilde(self, grid: Grid) -> Field:
        g0 = kernel_vector(grid.m, grid)
        v = self.xi * g0.values + self.w_field(grid).values
        return Field(grid, v, parity="even", fold="m")

    def to_json(self) -> dict:
        return {
            "xi": self.xi, "a": self.a, "lambda": self.lam,
            "newton_iters": self.newton_iters,
            "residual_L2": self.residual_L2, "min_ds_r": self.min_ds_r,
            "residual_history": list(self.residual_history),
            "w_coeffs": self.w_coeffs.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "BranchPoint":
        return cls(xi=d["xi"], a=d["a"],
                   w_coeffs=np.asarray(d["w_coeffs"], dtype=float),
                   lam=d["lambda"], newton_iters=d["newton_iters"],
                   residual_L2=d["residual_L2"], min_ds_r=d["min_ds_r"],
                   residual_history=list(d.get("residual_history", [])))


@dataclass
class BranchFile:
    header: dict
    points: list

    def __post_init__(self):
        xis = [p.xi for p in self.points]
        if any(b <= a for a, b in zip(xis, xis[1:])):
            raise ValueError("branch points must be strictly increasing in xi")

    @property
    def grid(self) -> Grid:
        h = self.header
        return Grid(n_alpha=h["n_alpha"], n_s=h["n_s"], m=h["m"],
                    n_harmonics=h["n_harmonics"])


def make_header(params: FunctionalParams, xi_step: float) -> dict:
    g = params.grid
    return {
        "format": "branch-v1",
        "code_version": __version__,
        "m": params.m, "n_alpha": g.n_alpha, "n_s": g.n_s,
        "n_harmonics": g.n_harmonics,
        "profile": params.profile.kind,
        "dlambda_da": params.dlambda_da,
        "xi_step": xi_step,
        "newton_tol": NEWTON_TOL,
    }


def _kernel_component(grid: Grid, w_coeffs: np.ndarray, g0_amp: float) -> float:
    """L2 component of w along the normalized kernel field.

    The kernel field is g0_amp * cos(m alpha); only the j=1 harmonic
    contributes, with <cos^2> = pi over the circle.
    """
    wm = w_coeffs[0]
    return float(np.pi * g0_amp * np.sum(grid.w_s * wm))


def newton_at_amplitude(xi: float, guess, params: FunctionalParams,
                        tol: float = NEWTON_TOL,
                        max_iters: int = MAX_ITERS) -> BranchPoint:
    """Solve the bordered system {G[xi g0 + w, a] = 0, ker-comp(w) = 0}.

    guess is (w_coeffs, a).  Damped Newton with backtracking; raises
    ConvergenceError on iteration exhaustion or near-singular systems.
    """
    grid = params.grid
    fn = Functional(params)
    g0 = kernel_vector(grid.m, grid)
    g0_amp = float(g0.values[0, 0])
    P = grid.n_harmonics * grid.n_s
    w_coeffs, a = guess
    w_coeffs = np.array(w_coeffs, dtype=float).reshape(grid.n_harmonics,
                                                       grid.n_s)
    a = float(a)

    def r_values(wc):
        return xi * g0.values + from_modes(
            ModeStack(grid, wc, parity="even")).values

    def residual(wc, aa):
        G = symmetrize_values(grid, fn.G_values(r_values(wc), aa), "odd")
        gl2 = float(np.sqrt(grid.h_alpha * np.sum(G**2 @ grid.w_s)))
        F = np.concatenate([odd_modes(grid, G).reshape(-1),
                            [_kernel_component(grid, wc, g0_amp)]])
        return F, gl2

    F, gl2 = residual(w_coeffs, a)
    history = [gl2]
    iters = 0
    while gl2 > tol and iters < max_iters:
        r = r_values(w_coeffs)
        J = assemble_jacobian(r, a, params, "analytic").matrix
        da_col = odd_modes(grid, symmetrize_values(
            grid, fn.dG_da_values(r, a), "odd")).reshape(-1)
        M = np.zeros((P + 1, P + 1))
        M[:P, :P] = J
        M[:P, P] = da_col
        # constraint row: kernel component of w (j=1 harmonic block)
        M[P, :grid.n_s] = np.pi * g0_amp * grid.w_s
        if np.linalg.cond(M) > COND_LIMIT:
            raise ConvergenceError(
                f"near-singular Newton system at xi={xi:g} (condition "
                f"number exceeds {COND_LIMIT:.0e})")
        step = np.linalg.solve(M, -F)
        # backtracking damping on the residual vector norm
        base_norm = np.linalg.norm(F)
        scale = 1.0
        for _ in range(MAX_BACKTRACKS + 1):
            wc_try = w_coeffs + scale * step[:P].reshape(w_coeffs.shape)
            a_try = a + scale * step[P]
            F_try, gl2_try = residual(wc_try, a_try)
            if np.linalg.norm(F_try) < base_norm or gl2_try <= tol:
                break
            scale *= 0.5
        else:
            raise ConvergenceError(f"backtracking failed at xi={xi:g}")
        w_coeffs, a, F, gl2 = wc_try, a_try, F_try, gl2_try
        history.append(gl2)
        iters += 1
        if scale * np.linalg.norm(step) <= STEP_TOL:
            break
    if gl2 > tol:
        raise ConvergenceError(
            f"Newton did not reach {tol:g} at xi={xi:g} "
            f"(residual {gl2:.3e} after {iters} iterations)")

    rt = Field(grid, r_values(w_coeffs), parity="even", fold="m")
    ds_r = rt.values @ grid.diff_s.T
    return BranchPoint(
        xi=float(xi), a=a, w_coeffs=w_coeffs,
        lam=float(params.lam(a)), newton_iters=iters,
        residual_L2=gl2, min_ds_r=float(1.0 + ds_r.min()),
        residual_history=history)


def continue_branch(params: FunctionalParams, xi_step: float, n_steps: int,
                    tol: float = NEWTON_TOL) -> BranchFile:
    """Follow the branch from xi = 0 with secant prediction of (w, a).

    Halves the step on non-convergence (floor MIN_XI_STEP); three
    consecutive failures abort with the partial branch returned.
    """
    grid = params.grid
    tc = transversality_coefficient(params.m, params)
    if abs(tc) < 1e-8:
        raise ValueError(
            f"transversality coefficient {tc:.2e} vanishes (dlambda_da = "
            f"{params.dlambda_da:g}); no branch crosses here")

    header = make_header(params, xi_step)
    zero_w = np.zeros((grid.n_harmonics, grid.n_s))
    trivial = BranchPoint(xi=0.0, a=0.0, w_coeffs=zero_w.copy(),
                          lam=float(params.lambda0), newton_iters=0,
                          residual_L2=0.0, min_ds_r=1.0,
                          residual_history=[0.0])
    points = [trivial]
    step = float(xi_step)
    failures = 0
    while len(points) - 1 < n_steps:
        xi_next = points[-1].xi + step
        # secant predictor through the last two accepted points
        if len(points) >= 2:
            p1, p0 = points[-1], points[-2]
            t = (xi_next - p1.xi) / (p1.xi - p0.xi)
            wg = p1.w_coeffs + t * (p1.w_coeffs - p0.w_coeffs)
            ag = p1.a + t * (p1.a - p0.a)
        else:
            wg, ag = points[-1].w_coeffs, points[-1].a
        try:
            bp = newton_at_amplitude(xi_next, (wg, ag), params, tol=tol)
        except ConvergenceError:
            failures += 1
            if failures >= 3 or step * 0.5 < MIN_XI_STEP:
                break
            step *= 0.5
            continue
        failures = 0
        points.append(bp)
        step = float(xi_step)
    return BranchFile(header=header, points=points)


# -- persistence ------------------------------------------------------------

def save_branch(bf: BranchFile, path) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(bf.header, sort_keys=True) + "\n")
        for p in bf.points:
            fh.write(json.dumps(p.to_json(), sort_keys=True) + "\n")


def load_branch(path, params: FunctionalParams | None = None) -> BranchFile:
    """Load and validate a branch file; optionally check config compatibility."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty branch file")
    try:
        header = json.loads(lines[0])
        if header.get("format") != "branch-v1":
            raise ValueError(f"{path}: not a branch file (bad format tag)")
        points = []
        for i, line in enumerate(lines[1:], start=2):
            try:
                points.append(BranchPoint.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as e:
                raise ValueError(
                    f"{path}: corrupt record at line {i} (last good point "
                    f"index {len(points) - 1}): {e}") from None
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: corrupt header: {e}") from None
    bf = BranchFile(header=header, points=points)
    if params is not None:
        g = params.grid
        current = dict(m=params.m, n_alpha=g.n_alpha, n_s=g.n_s,
                       n_harmonics=g.n_harmonics,
                       profile=params.profile.kind,
                       dlambda_da=params.dlambda_da)
        for k, v in current.items():
            if header.get(k) != v:
                raise ValueError(
                    f"{path}: incompatible restart: header {k}="
                    f"{header.get(k)!r} vs current {v!r}")
    return bf


def resume_branch(bf: BranchFile, params: FunctionalParams, xi_step: float,
                  n_steps: int, tol: float = NEWTON_TOL) -> BranchFile:
    """Continue an existing branch by n_steps further points."""
    points = list(bf.points)
    step = float(xi_step)
    failures = 0
    target = len(points) + n_steps
    while len(points) < target:
        xi_next = points[-1].xi + step
        if len(points) >= 2:
            p1, p0 = points[-1], points[-2]
            t = (xi_next - p1.xi) / (p1.xi - p0.xi)
            wg = p1.w_coeffs + t * (p1.w_coeffs - p0.w_coeffs)
            ag = p1.a + t * (p1.a - p0.a)
        else:
            wg, ag = points[-1].w_coeffs, points[-1].a
        try:
            bp = newton_at_amplitude(xi_next, (wg, ag), params, tol=tol)
        except ConvergenceError:
            failures += 1
            if failures >= 3 or step * 0.5 < MIN_XI_STEP:
                break
            step *= 0.5
            continue
        failures = 0
        points.append(bp)
        step = float(xi_step)
    return BranchFile(header=bf.header, points=points)
