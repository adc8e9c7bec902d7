"""minl2: numerical laboratory for minimal weighted L2 integrals.

Computes minimal L2 integrals of constrained holomorphic extensions on model
domains (disk, ball, polydisc), verifies concavity of the tail-reparametrized
integral, linearity equivalences, the Bergman-kernel restriction law, the
closed-form cutoff ODE pair, layer-cake and integration-by-parts identities,
mollified cutoff constructions, and optimal extension equalities.
"""

__version__ = "0.1.0"
