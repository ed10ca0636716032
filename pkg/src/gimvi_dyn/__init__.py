"""Third-order dynamics and a double-momentum scheme for inverse mixed variational inequalities."""

from .analysis import (RateFit, TheoremMode, Verdict, fit_exponential_rate, fit_linear_rate,
                       reference_solution, verify_theorem)
from .core import (InstanceConstants, InstanceRecipe, ProblemInstance, TripleVec, canonical_instance,
                   compute_c, compute_c1, gamma_bar, instance_checks, load_instance,
                   make_affine_instance, save_instance)
from .discrete import IterateHistory, run_scheme
from .dynamics import (DynParams, Trajectory, integrate_first_order_baseline,
                       integrate_second_order_baseline, integrate_third_order, residual)
from .prox import FeasibleSet, HSpec, prox

__version__ = "0.1.0"
