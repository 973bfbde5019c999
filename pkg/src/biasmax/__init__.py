"""Subset selection under group-dependent bias in observed utilities."""

from .bias import (AffineSkew, BiasFunction, BiasSpec, Identity, Multiplicative, Table, TfIdfSkew,
                   apply_bias, reduce_overlapping_groups)
from .datagen import (NegativeInstance, SyntheticParams1, gen_negative, gen_synthetic1,
                      gen_synthetic2)
from .debias import (BudgetVector, algorithm1, apportion, part1_budgets, part2_select,
                     rescaled_objective)
from .errors import (BiasmaxError, ConfigurationError, DataError, FormatError, InputError,
                     PreconditionError, SizeError, UndefinedNLUError)
from .groups import (CategoryStructure, FairnessConstraint, GroupStructure,
                     categories_from_support, fairness_caps, make_rng, sample_groups)
from .harness import (NegativeReport, SweepConfig, TrialRecord, aggregate,
                      normalized_latent_utility, run_negative_demo, run_sweep)
from .maximizers import (SelectionResult, exhaustive_opt, greedy_cardinality, greedy_with_caps,
                         two_type_exact_opt)
from .objective import (ConcaveCurve, CubeRoot, Linear, Log1p, NegExpCoverage, ObjectiveSpec,
                        ScaledSqrt, Sqrt, UtilityMatrix, WeightedLog1p, eval_objective,
                        marginal_gain, web_search_objective)

__version__ = "0.1.0"
