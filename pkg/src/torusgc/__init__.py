"""Spectral solver and analysis toolkit for the prescribed Gauss
curvature equation -Delta u = (f0 + lambda) e^{2u} on the flat unit
torus, across the admissible range lambda in (0, -mean(f0)): constrained
energy minimization, parameter continuation, the comparison-function
machinery near lambda = 0, concentration analysis, and the degeneration
study near lambda_max."""

__version__ = "0.1.0"

from .blowup import (BubbleReport, DichotomyResult, PeakInfo,
                     classify_and_rescale, curvature_mass, dichotomy_detect,
                     locate_peaks)
from .comparison import (ComparisonFn, MonotonicityProbe, I_map,
                         alpha_threshold, build_phi, epsilon_star,
                         eps_star_window, probe_h, solve_alpha)
from .config import RunConfig, build_from_config, config_hash, load_config, parse_family
from .continuation import (CSV_COLUMNS, ContinuationRecord, SliceResult,
                           SweepConfig, empirical_c0, estimate_beta_prime,
                           lambda_max_report, parse_schedule, slice_construct,
                           sweep)
from .errors import (ChartTooLarge, DegenerateMaximum, DivisionDegenerate,
                     MeanNotZero, MultiplierNonpositive, NoSignChange,
                     NonpositiveEpsilon, NotNonpositive, PeakTooWeak,
                     RootNotBracketed, TorusGCError, UnresolvedCore,
                     VerificationFailed)
from .minimize import (MinimizeResult, SolverConfig, extract_multiplier,
                       minimize, pde_residual, project_constraint)
from .problem import (F0Family, Problem, build_problem, compute_L,
                      constraint_value, cosine,f_lambda, multibump,
                      problem_from_field, tabulated)
from .spectral import (Field, Grid, SpectralCoeffs, constant, dirichlet_energy,
                       eval_at, from_function, gradient, inner_grad, integrate,
                       integrate_exp, inverse, laplacian, load_field, mean,
                       pad_to, sample_rescaled, save_field, solve_poisson,
                       transform)

__all__ = [name for name in dir() if not name.startswith("_")]
