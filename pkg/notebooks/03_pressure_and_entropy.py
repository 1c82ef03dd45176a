# coding: utf-8

# # Pressure, equilibrium measure and variational entropy
#
# The equilibrium state is stored as a base measure on depth-k words plus a
# branch kernel p_j(w). Its variational entropy plus the integral of log psi
# should recover log lambda.

# In[1]:

import numpy as np

from gcformalism import potentials as pot
from gcformalism import thermo
from gcformalism import transfer as tr
from gcformalism.symbolic import CylinderFunction


# In[2]:

E = CylinderFunction([0.1, 0.8, 0.4, 0.3], 2, 2)  # depends on two symbols
fam = pot.affine(0.7, 0.2, E, 2)
w = pot.finite_weights(fam, 1.0, -0.5, depth=1)
T = tr.assemble_grand(w)
sol = tr.power_iterate(T, tol=1e-13)
m = thermo.equilibrium_holonomic(sol, T)
print("kernel:\n", m.kernel)
print("holonomy defect on a random test function:",
      thermo.holonomy_check(m, np.random.default_rng(0).normal(size=2)))


# In[3]:

rep = thermo.grand_pressure(sol, w, m)
print(rep.to_dict())
print("chain entropy:", thermo.chain_entropy(m))


# Perturbing the kernel moves away from equilibrium and the entropy plus
# energy term drops below log lambda.

# In[4]:

rng = np.random.default_rng(1)
for _ in range(3):
    p = thermo.perturb_kernel(m, rng, size=0.5)
    print(thermo.chain_entropy(p) + thermo.integrate_log_psi(p, w) - sol.log_lambda)


# The derivative of the classical eigenvalue in beta equals minus the
# integral of A_N, and the central difference error is quadratic in the step.

# In[5]:

for step in (1e-3, 5e-4, 2.5e-4):
    d = thermo.derivative_identity(fam, 2, 1.0, 1, step=step)
    print(f"step={step:.1e}  lhs={d.lhs:.10f}  rhs={d.rhs:.10f}  gap={d.gap:.2e}")


# A sweep over (beta, mu) shows log lambda varying smoothly until mu gets
# close to 0, where the particle-number series diverges.

# In[6]:

res = thermo.analyticity_sweep(fam, np.linspace(0.5, 2.0, 4), [-2.0, -1.0, -0.5, -1e-7], 1,
                               threads=2)
for row in res.rows():
    print(f"beta={row['beta']:.2f} mu={row['mu']:+.1e} {row['status']:10s} "
          f"log lambda={row['log_lambda']:.6f}")
