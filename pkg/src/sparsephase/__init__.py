"""Sparse linear regression in high and ultra-high dimension: designs,
deviation bounds, adaptive tests, model selection, screening, minimax rate
functionals and a reproducible simulation harness.
"""

from sparsephase._subsets import BudgetExceededError
from sparsephase.design import (DesignMatrix, RestrictedSpectrum, SparseVector, generate_gaussian_design,
                                hypercube_vectors, make_theta_experiment, normalize_columns, project_onto_span,
                                restricted_eigenvalues)
from sparsephase.detection import (SeparationEstimate, TestReport, estimate_separation_distance, kstar_sqrt,
                                   test_known_variance, test_unknown_variance)
from sparsephase.distributions import (TailBoundReport, chi2_deviation_thresholds, chi2_upper_quantile,
                                       fisher_upper_quantile, hypergeom_tail_bound, verify_tail_bound,
                                       wishart_deviation_thresholds)
from sparsephase.estimators import SelectionResult, best_subset_ls, kstar_n, select_bm, select_v
from sparsephase.rates import classify_regime, lower_bound_radius, rate_value, second_moment_certificate
from sparsephase.screening import PowerCurve, lasso_screen, power_metric, sis_screen

__version__ = "0.1.0"
