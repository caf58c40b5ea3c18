"""Rotating compactly-supported vorticity solutions of the 2D Euler equations.

The package discretizes a level-set reformulation of the rigid-rotation
condition for a smooth annular vorticity transition layer, verifies the
simple-eigenvalue bifurcation hypotheses numerically, continues the
nontrivial m-fold branch from the radial state, and reconstructs the
physical vorticity/velocity fields.
"""

__version__ = "0.1.0"
