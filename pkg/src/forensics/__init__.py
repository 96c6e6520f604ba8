"""Statistical forensics for precinct-level referendum returns."""

from .domain import (Dataset, ExitPollRow, MachineRecord, PrecinctRecord, ValidationReport,
                     Violation, validate_dataset)
from .exceptions import (DataError, ForensicsError, RankDeficientError, SimulationError,
                         WeakInstrumentError)
from .regression import (CovarianceTest, DesignMatrix, RegressionFit, iv_fit, ols_fit,
                         residual_covariance_test, robust_se)
from .ingest import ComparisonReport, compare_polls_to_votes, load_dataset, load_directory, write_dataset
from .diagnostics import (DispersionReport, RepeatReport, binomial_dispersion,
                          repeat_max_randomness_check, repeated_counts)
from .fraudtest import FraudTestReport, run_fraud_test
from .audit import (AuditFit, BootstrapDistribution, NaiveReport, bootstrap_t_distribution,
                    interaction_regression, naive_checks, randomness_verdict)
from .simulator import (AuditStrategy, FraudMechanism, SimulationParams, simulate,
                        simulate_preset)

__version__ = "0.1.0"
