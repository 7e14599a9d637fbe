"""gcwaves: gravity-capillary dispersion censuses, Weyl paradifferential
calculus, good-variable constructors, a pseudospectral model-equation
solver, and modulation-split energy audits on the 2-torus."""

__version__ = "0.1.0"
