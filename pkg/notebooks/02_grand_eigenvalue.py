# coding: utf-8

# # The grand-canonical transfer operator
#
# Summing the Ruelle operators over particle number with fugacity e^{beta mu N}
# gives one operator with r branches, weighted by q_j = psi(j x). Its leading
# eigenvalue is found by power iteration on depth-k tables.

# In[1]:

import math

import numpy as np

from gcformalism import potentials as pot
from gcformalism import transfer as tr


# The zero family is the sanity check: psi is the constant 1/(1 - e^{beta mu})
# and lambda = r psi.

# In[2]:

w = pot.finite_weights(pot.constant(0.0), beta=1.0, mu=-1.0, depth=4)
sol = tr.power_iterate(tr.assemble_grand(w), tol=1e-12)
print("lambda =", sol.lam, " closed form =", 2 / (1 - math.exp(-1)))
print(sol.summary())


# A nonconstant family at depth 6, checked against a dense eigensolver.

# In[3]:

E = lambda W: W @ (2.0 ** -np.arange(1, W.shape[1] + 1))
fam = pot.affine(0.5, 0.3, E, 2, M=2.0, min_E=0.0)
T = tr.assemble_grand(pot.finite_weights(fam, 1.0, -0.5, 6))
sol = tr.power_iterate(T, tol=1e-13)
lam_dense, h_dense, nu_dense = tr.dense_spectrum(T)
print("power:", sol.lam, " dense:", lam_dense)
print("max |h - h_dense| =", np.abs(sol.h.values - h_dense).max())
print("convergence rate (approx |lambda_2| / lambda):", sol.rate, "after", sol.iterations, "steps")


# The normalised iterates (1/n) log (T^n 1)(w) approach log lambda at rate 1/n.

# In[4]:

seq = tr.partition_iterate(T, 200, 0)
for n in (10, 50, 100, 200):
    print(n, seq.averages[n - 1] - sol.log_lambda)


# Refining the cylinder depth changes log lambda by at most beta M 2^-k.

# In[5]:

prev = None
for k in range(3, 11):
    ll = tr.power_iterate(tr.assemble_grand(pot.finite_weights(fam, 1.0, -0.5, k)),
                          tol=1e-13).log_lambda
    if prev is not None:
        print(f"k={k - 1}: |change| = {abs(ll - prev):.3e}  bound = {fam.M * 2.0 ** -(k - 1):.3e}")
    prev = ll
