//! Bootstrap percolation on `G(n, p)`: exact laws of the final active-set
//! size, samplers, critical quantities, regime classification, large
//! deviation rate functions, binomial deviation bounds and Monte Carlo
//! estimators for the tail of `n - A*`.

pub mod binom;
pub mod bounds;
pub mod error;
pub mod ext;
pub mod model;
pub mod montecarlo;
pub mod oracle;
pub mod process;
pub mod rate;
pub mod scaled;
pub mod sequence;
pub mod trend;
pub mod validation;

pub use bounds::{BoundReport, DiagnosticTable, Relation};
pub use error::{Error, Result};
pub use ext::ExtReal;
pub use model::{activation_prob, critical_quantities, ActivationProb, CriticalQuantities, LnCritical, ModelParams};
pub use montecarlo::{ConvergenceRow, SplittingConfig, StudyMethod, TailEstimate};
pub use oracle::{exact_pmf, exact_stop_cdf, exact_tail_query, FinalSizePmf, StopProbability};
pub use process::{PercolationOutcome, RngSpec};
pub use rate::{minimize_rate, tail_exponent, FRule, GRule, RateMinimum, ScalingFamily, TailExponent};
pub use scaled::ScaledFloat;
pub use sequence::{check_hypotheses, classify_regime, AcNpRegime, PRule, Regime, SequenceSpec, DEFAULT_LADDER};
pub use trend::{Trend, TrendConfig};
