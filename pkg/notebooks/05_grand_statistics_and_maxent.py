# coding: utf-8

# # Grand-canonical statistics and maximum entropy
#
# Without spatial structure the energies are a scalar sequence A_N and the
# grand partition sum is an ordinary series in N.

# In[1]:

import math

import numpy as np

from gcformalism import grandstats as gs


# Each particle carries energy 1, beta = 1, mu = -1: a geometric distribution.

# In[2]:

e = gs.energy_per_particle(1.0, beta=1.0, mu=-1.0)
print("Z =", gs.grand_partition(e), " closed form:", 1 / (1 - math.exp(-2)))
print("P_0..P_4 =", gs.particle_distribution(e)[:5])
print("<N>, <A> =", gs.moments(e))
d = gs.log_partition_derivatives(e)
print("d/dbeta log Z:", d.d_beta_fd, "vs", d.d_beta_expect)
print("d/dmu   log Z:", d.d_mu_fd, "vs", d.d_mu_expect)


# Physical units: a litre of gas at 300 K with particle energy 1e-21 J.

# In[3]:

T = 300.0
si = gs.energy_per_particle(1e-21, 1 / (gs.BOLTZMANN_SI * T), -4e-21, V=1e-3,
                            k_B=gs.BOLTZMANN_SI)
print("p =", gs.gas_pressure(si), "Pa at T =", si.temperature, "K")


# Maximum entropy on three states with a prescribed mean energy. The answer
# is a canonical distribution; a brute-force grid over the simplex agrees.

# In[4]:

c = gs.FiniteCanonical([0.0, 0.5, 2.0])
alpha = 0.6
p, beta = gs.maxent_solve(c, alpha)
print("MaxEnt p =", p, " beta =", beta, " entropy =", gs.shannon_entropy(p))
grid = gs.simplex_grid(3, 0.01)
ok = np.abs(grid @ c.energies - alpha) <= 5e-3
best = grid[ok][np.argmax(gs.grid_entropies(grid[ok]))]
print("best grid point:", best, " entropy:", gs.shannon_entropy(best))


# The canonical distribution minimises the free energy, whose minimum is -log Z / beta.

# In[5]:

c = gs.FiniteCanonical([0.0, math.log(2)], beta=1.0)
fe = gs.free_energy_check(c, gs.canonical_distribution(c))
print("F =", fe.value, " -log Z / beta =", fe.minus_log_Z_over_beta, " grid gap:", fe.minimality_gap)
