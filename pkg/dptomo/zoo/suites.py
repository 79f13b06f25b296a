"""Ready-made lists of state specs."""

# pure single-mode test states
SINGLE_MODE = ["fock:1", "coherent:0.5", "even_cat:0.5", "superpos01"]

# entangled two-mode test states
TWO_MODE = ["entangled_cat:0.5", "bell_psi", "bell_phi"]

MIXING_LADDER = [0.0, 0.25, 0.5, 0.75, 1.0]

# p|0><0| + (1-p)|1><1|
MIXED_SINGLE_MODE = [f"mix01:p={p:g}" for p in MIXING_LADDER]

# (1-p)|psi+><psi+| + p|phi+><phi+|, separable only at p = 0.5
MIXED_TWO_MODE = [f"bell_mix:p={p:g}" for p in MIXING_LADDER]


def default_suite(modes: int):
    return list(SINGLE_MODE if modes == 1 else TWO_MODE)
