mod config;
mod emit;
mod experiments;
mod hit_time;
mod runner;

pub use config::{
    load_config, parse_config, AgentConfig, AmseConfig, BiasConfig, BuiltEnvironment,
    CartPoleConfig, EnvironmentConfig, EvalProtocol, ExperimentConfig, TabularEnv, SCHEMA_VERSION,
};
pub use emit::{
    emit_results, hit_summary, read_runs_csv, render_svg, runs_csv, summarize, summary_csv,
    EmitOptions, HitSummary, RunRow, SummaryRow,
};
pub use experiments::{
    empirical_linearized_amse, reference_parameters, run_amse, run_bias, smallest_gap_state,
    AmseComparison,
};
pub use hit_time::{evaluate_hit_time, evaluation_reward, HitOutcome, HitTime};
pub use runner::{run_experiment, RunRecord};
