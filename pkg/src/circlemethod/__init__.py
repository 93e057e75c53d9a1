"""Executable circle-method apparatus for systems of integral forms of
differing degrees: invariants and admissibility conditions in exact
arithmetic, brute-force counts, local densities and exponential sums.
"""

from .counting import CountReport, count_solutions, empirical_ratio
from .densities import count_mod, euler_product, predict_main_term, sigma_infinity, sigma_p
from .document import SystemDocument, parse_system, serialize_system
from .errors import BudgetExceeded, CircleMethodError, InputError, NonConvergence
from .forms import FormSystem, IntegerForm, Polynomial, polar_form
from .invariants import InvariantReport, estimate_Bd, invariant_report, n0_values

__version__ = "0.1.0"
