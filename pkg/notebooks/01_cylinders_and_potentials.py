# coding: utf-8

# # Words, cylinders and potential families
#
# Points of the full shift are infinite sequences over {0, ..., r-1}. We work
# with finite words: a function of depth k is a table with one entry per word
# of length k, and the distance between two points is 2^-n at the first
# position n where they differ.

# In[1]:

import numpy as np

from gcformalism import potentials as pot
from gcformalism.symbolic import CylinderFunction, Word, discrete_lipschitz, distance, prepend


# In[2]:

u, v = Word([0, 1, 1], 2), Word([0, 1, 0], 2)
print("d(u, v) =", distance(u, v))
print("d(1u, 1v) =", distance(prepend(1, u), prepend(1, v)), "(the branch map halves distances)")


# A depth-3 observable, here E(x) = x_1/2 + x_2/4 + x_3/8. Its discrete
# Lipschitz constant is exact over all pairs of depth-3 words.

# In[3]:

E = CylinderFunction.from_callable(lambda W: W @ (2.0 ** -np.arange(1, 4)), 2, 3)
print("E table:", E.values)
print("Lip(E) =", discrete_lipschitz(E))


# Three particle-number families built from E. The constructors pick default
# constants M, Kprime and delta from the table.

# In[4]:

families = {
    "A_N = 0.5 N + 0.3 + E": pot.affine(0.5, 0.3, E, 2),
    "A_N = (E + 0.2) / (N + 1)": pot.shared(CylinderFunction(E.values + 0.2, 2, 3), 2),
    "A_N = N E (not uniformly Lipschitz)": pot.per_particle(E, 2),
}
for name, fam in families.items():
    rep = pot.admissibility_report(fam, beta=1.0, mu=-0.5, depth=3, n_max=30)
    print(f"{name:40s} M={fam.M:.3f} K'={fam.Kprime:+.3f} delta={fam.delta:+.3f}",
          rep.verdicts)


# The per-particle family fails H1: the Lipschitz constant of N E grows with N.
# Truncation of the particle-number sum uses the geometric tail certificate.

# In[5]:

fam = families["A_N = 0.5 N + 0.3 + E"]
for eps in (1e-6, 1e-12):
    print("eps =", eps, "-> N_max =", pot.truncation_bound(fam, 1.0, -0.5, eps))
psi = pot.grand_potential(fam, 1.0, -0.5, 3)
print("psi on depth-3 words:", np.round(psi.psi.values, 6), "tail <=", psi.tail_bound)
