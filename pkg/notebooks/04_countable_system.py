# coding: utf-8

# # Countably many branches
#
# Instead of summing psi over N first, each pair (N, symbol) becomes its own
# branch j with particle number xi(j) = j // r. Grouping the branches by
# symbol gives back the finite weights.

# In[1]:

import numpy as np

from gcformalism import potentials as pot
from gcformalism import transfer as tr
from gcformalism.symbolic import CylinderFunction


# In[2]:

E = CylinderFunction([0.1, 0.8, 0.4, 0.3], 2, 2)
fam = pot.affine(0.7, 0.2, E, 2)
fin = pot.finite_weights(fam, 1.0, -0.5, 1)
cnt = pot.countable_weights(fam, 1.0, -0.5, 1)
print("branches:", cnt.n_branches, " J_max:", cnt.j_max, " tail bound:", cnt.tail_bound)
print("max |grouped - finite| =", np.abs(cnt.grouped() - fin.q).max())


# The pressure of the countable system is the infimum of (1/m) log Z_m, where
# Z_m sums the largest weight products over index words of length m.

# In[3]:

cp = tr.countable_partition(cnt, 12)
ll = tr.power_iterate(tr.assemble_grand(cnt), tol=1e-13).log_lambda
for m, (avg, inf) in enumerate(zip(cp.averages, cp.running_inf), 1):
    print(f"m={m:2d}  (1/m) log Z_m = {avg:.6f}  running inf = {inf:.6f}")
print("log lambda =", ll)


# Regularity of the weights: the Holder variations and the Dini modulus.

# In[4]:

hv = pot.holder_variation(cnt, n_max=3)
print("V_n:", hv.V, " V_alpha:", hv.V_alpha, " summable:", hv.summable)
d = pot.dini_modulus_check(pot.finite_weights(fam, 1.0, -0.5, 4))
print("max rho(t)/t:", d.max_ratio, " integral:", d.integral, " bound:", fam.M / 2)
