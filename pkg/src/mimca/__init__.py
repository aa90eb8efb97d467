"""Multiple imputation of categorical data with multiple correspondence analysis."""

__version__ = "0.1.0"

from .data import (MISSING, CategoricalTable, IndicatorMatrix, VariableMeta,
                   column_proportions, decode_categories, encode_disjunctive,
                   read_table, read_tables, write_table)
from .errors import DataError, MimcaError, NumericalError, SeparationError
from .glm import LogisticFit, ModelFormula, build_design, fit_formula, fit_logistic
from .iterative import IterativeConfig, IterativeResult, initialize_missing, iterative_mca
from .mca import (McaModel, TripletSpec, fit_mca, loglinear_twoway_param_count,
                  mca_param_count, normal_param_count, reconstruct,
                  shrink_singular_values, weighted_svd_triplet)
from .multiple import (ImputationSet, bootstrap_weights, coin_flip, listwise_delete,
                       mimca, sample_impute)
from .pooling import (PooledEstimate, barnard_rubin_df, confidence_interval, pool,
                      pool_fits)
from .select import cross_validate_dims
from .simulation import (SimulationConfig, SimulationReport, agresti_coull_lower,
                         amputate_mcar, latent_class_table, run_simulation,
                         synthetic_population)
