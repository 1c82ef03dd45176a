"""Grand-canonical thermodynamic formalism on the full shift.

Cylinder approximations of particle-number potential families, Ruelle
transfer operators with countably many branches, pressure and equilibrium
measures, and scalar grand-canonical statistics.
"""

__version__ = "0.1.0"

from .symbolic import (  # noqa: E402
    CylinderFunction, CylinderMeasure, Word, all_words, discrete_lipschitz, distance,
)
from .potentials import (  # noqa: E402
    AdmissibilityError, OverflowDiagnostic, PotentialFamily, WeightSystem,
    admissibility_report, affine, constant, countable_weights, finite_weights,
    grand_potential, per_particle, shared, truncation_bound,
)
from .transfer import (  # noqa: E402
    BudgetError, ConvergenceError, SpectralSolution, TransferMatrix, assemble_classical,
    assemble_grand, countable_partition, partition_iterate, power_iterate,
)
from .thermo import (  # noqa: E402
    HolonomicMeasure, analyticity_sweep, chain_entropy, derivative_identity,
    equilibrium_holonomic, grand_pressure, variational_entropy,
)
from .grandstats import (  # noqa: E402
    FiniteCanonical, GrandCanonicalEnsemble, InfeasibleConstraint, grand_partition,
    maxent_solve, particle_distribution,
)
