//! Online portfolio selection: price data, rolling statistics, the
//! projected trading loop, wealth evolution, and regret analysis.

pub mod ops;
pub mod prices;
pub mod regret;
pub mod stats;

pub use ops::{run_ops, run_statistics, OpsAlgorithm, OpsRun, OpsSummary};
pub use prices::{ingest_prices, returns, synthesize_prices, PriceSeries, ReturnSeries, SynthSpec};
pub use regret::{
    benchmark_return_curve, hindsight_crp, mean_best_return_curve, pearson_correlation, regret,
    RegretReport,
};
pub use stats::{rolling_stats, RollingStats};
