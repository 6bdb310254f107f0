//! Experiment configuration files.
//!
//! Configs are JSON documents with a `schema_version`. Unknown keys are
//! rejected at every level; all remaining problems are collected and
//! reported together as [`Error::Validation`].

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::agents::{AgentSpec, Decay, Init, RhoMode, RhoSchedule, Variant};
use crate::environments::{
    build_baird, build_random_env, BairdSpec, CartPoleParams, Discretizer, RandomEnvSpec,
};
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::mdp::TabularMdp;

pub const SCHEMA_VERSION: u32 = 1;

const TOP_KEYS: &[&str] = &[
    "schema_version",
    "name",
    "master_seed",
    "num_seeds",
    "discount",
    "environment",
    "agents",
    "max_steps",
    "max_episodes",
    "metric_every",
    "evaluation",
    "output_dir",
    "bias",
    "amse",
];
const BAIRD_KEYS: &[&str] = &["kind", "reward_low", "reward_high", "features", "seed"];
const BAIRD_FEATURE_KEYS: &[&str] = &["mode", "matrix"];
const RANDOM_KEYS: &[&str] = &[
    "kind",
    "num_states",
    "num_actions",
    "dirichlet_alpha",
    "q",
    "p",
    "seed",
];
const TABULAR_KEYS: &[&str] = &[
    "kind",
    "num_states",
    "num_actions",
    "kernel",
    "reward",
    "initial_dist",
];
const CARTPOLE_KEYS: &[&str] = &["kind", "params", "discretizer", "epsilon"];
const CARTPOLE_PARAM_KEYS: &[&str] = &[
    "gravity",
    "cart_mass",
    "pole_mass",
    "half_length",
    "force",
    "dt",
    "angle_threshold",
    "x_threshold",
    "init_jitter",
    "train_step_cap",
    "eval_step_cap",
];
const DISCRETIZER_KEYS: &[&str] = &["bins", "low", "high"];
const AGENT_KEYS: &[&str] = &[
    "id",
    "variant",
    "copies",
    "alpha0",
    "w_alpha",
    "decay",
    "scale_lr",
    "rho0",
    "w_rho",
    "rho_mode",
    "init",
    "identical_init",
];
const INIT_KEYS: &[&str] = &["kind", "low", "high", "theta"];
const EVAL_KEYS: &[&str] = &[
    "eval_every",
    "eval_episodes",
    "eval_step_cap",
    "solve_threshold",
];
const BIAS_KEYS: &[&str] = &["next_state", "n_snapshot", "num_runs", "rho"];
const AMSE_KEYS: &[&str] = &["copies", "gain_factor", "steps", "num_seeds"];

/// Explicit finite MDP; the discount comes from the top-level config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularEnv {
    pub num_states: usize,
    pub num_actions: usize,
    pub kernel: Vec<f64>,
    pub reward: Vec<f64>,
    pub initial_dist: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartPoleConfig {
    #[serde(default)]
    pub params: CartPoleParams,
    #[serde(default)]
    pub discretizer: Discretizer,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    0.1
}

impl Default for CartPoleConfig {
    fn default() -> Self {
        CartPoleConfig {
            params: CartPoleParams::default(),
            discretizer: Discretizer::default(),
            epsilon: default_epsilon(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvironmentConfig {
    Baird(BairdSpec),
    RandomEnv(RandomEnvSpec),
    Tabular(TabularEnv),
    #[serde(rename = "cartpole")]
    CartPole(CartPoleConfig),
}

/// A finite MDP with its feature map, or the episodic cart-pole task.
#[derive(Debug, Clone)]
pub enum BuiltEnvironment {
    Mdp {
        mdp: TabularMdp,
        features: FeatureMap,
    },
    CartPole(CartPoleConfig),
}

impl EnvironmentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            EnvironmentConfig::Baird(_) => "baird",
            EnvironmentConfig::RandomEnv(_) => "random-env",
            EnvironmentConfig::Tabular(_) => "tabular",
            EnvironmentConfig::CartPole(_) => "cartpole",
        }
    }

    pub fn is_episodic(&self) -> bool {
        matches!(self, EnvironmentConfig::CartPole(_))
    }

    pub fn build(&self, discount: f64) -> Result<BuiltEnvironment> {
        let wrap = |e: Error| Error::EnvironmentBuild(e.to_string());
        Ok(match self {
            EnvironmentConfig::Baird(spec) => {
                let spec = BairdSpec {
                    discount,
                    ..spec.clone()
                };
                let (mdp, features) = build_baird(&spec).map_err(wrap)?;
                BuiltEnvironment::Mdp { mdp, features }
            }
            EnvironmentConfig::RandomEnv(spec) => {
                let spec = RandomEnvSpec {
                    discount,
                    ..spec.clone()
                };
                let mdp = build_random_env(&spec).map_err(wrap)?;
                let features = FeatureMap::canonical(mdp.num_states(), mdp.num_actions());
                BuiltEnvironment::Mdp { mdp, features }
            }
            EnvironmentConfig::Tabular(t) => {
                let mdp = TabularMdp::new(
                    t.num_states,
                    t.num_actions,
                    t.kernel.clone(),
                    t.reward.clone(),
                    discount,
                    t.initial_dist.clone(),
                )
                .map_err(wrap)?;
                let features = FeatureMap::canonical(t.num_states, t.num_actions);
                BuiltEnvironment::Mdp { mdp, features }
            }
            EnvironmentConfig::CartPole(c) => BuiltEnvironment::CartPole(c.clone()),
        })
    }
}

/// One learner in an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentConfig {
    pub id: String,
    pub variant: Variant,
    /// `N` for Maxmin/2RA, `K` for Averaged.
    pub copies: usize,
    pub alpha0: f64,
    pub w_alpha: f64,
    pub decay: Decay,
    pub scale_lr: bool,
    pub rho0: f64,
    pub w_rho: f64,
    pub rho_mode: RhoMode,
    pub init: Init,
    pub identical_init: bool,
}

impl AgentConfig {
    pub fn rho(&self) -> RhoSchedule {
        RhoSchedule::new(self.rho0, self.w_rho, self.rho_mode)
    }

    pub fn spec(&self) -> AgentSpec {
        let mut spec = AgentSpec::new(self.variant, self.copies, self.alpha0, self.w_alpha)
            .with_rho(self.rho())
            .with_init(self.init.clone(), self.identical_init);
        spec.decay = self.decay;
        spec.scale_lr = self.scale_lr;
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub eval_step_cap: usize,
    pub solve_threshold: f64,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            eval_every: 50,
            eval_episodes: 100,
            eval_step_cap: 210,
            solve_threshold: 195.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasConfig {
    /// Defaults to the state with the smallest optimal action gap.
    pub next_state: Option<usize>,
    pub n_snapshot: u64,
    pub num_runs: usize,
    /// Evaluation radius; defaults to each agent's `ρ` at the snapshot.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmseConfig {
    pub copies: usize,
    /// `g = gain_factor · g₀`.
    pub gain_factor: f64,
    pub steps: u64,
    pub num_seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub name: String,
    pub master_seed: u64,
    pub num_seeds: usize,
    pub discount: f64,
    pub environment: EnvironmentConfig,
    pub agents: Vec<AgentConfig>,
    pub max_steps: u64,
    pub max_episodes: u64,
    pub metric_every: u64,
    pub evaluation: EvalProtocol,
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub bias: Option<BiasConfig>,
    pub amse: Option<AmseConfig>,
}

impl ExperimentConfig {
    /// SHA-256 (first 16 hex digits) of the canonical JSON form. The output
    /// directory does not enter the hash.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serialisation cannot fail");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn agent(&self, id: &str) -> Option<&AgentConfig> {
        self.agents.iter().find(|a| a.id == id)
    }
}

#[derive(Deserialize)]
struct RawAgent {
    id: Option<String>,
    variant: Option<Variant>,
    copies: Option<usize>,
    alpha0: Option<f64>,
    w_alpha: Option<f64>,
    decay: Option<Decay>,
    scale_lr: Option<bool>,
    rho0: Option<f64>,
    w_rho: Option<f64>,
    rho_mode: Option<RhoMode>,
    init: Option<Init>,
    identical_init: Option<bool>,
}

#[derive(Deserialize)]
struct RawEval {
    eval_every: Option<u64>,
    eval_episodes: Option<usize>,
    eval_step_cap: Option<usize>,
    solve_threshold: Option<f64>,
}

fn check_keys(value: &Value, path: &str, allowed: &[&str]) -> Result<()> {
    if let Value::Object(map) = value {
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::UnknownKey(format!("{path}{key}")));
            }
        }
    }
    Ok(())
}

fn decode<T: DeserializeOwned>(value: Value, path: &str) -> Result<T> {
    serde_json::from_value(value).map_err(|e| Error::Parse(format!("{path}: {e}")))
}

fn field<T: DeserializeOwned>(map: &Map<String, Value>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => decode(v.clone(), key).map(Some),
    }
}

fn check_unknown(root: &Value) -> Result<()> {
    check_keys(root, "", TOP_KEYS)?;
    if let Some(env) = root.get("environment") {
        let kind = env.get("kind").and_then(Value::as_str).unwrap_or("");
        let allowed = match kind {
            "baird" => BAIRD_KEYS,
            "random-env" => RANDOM_KEYS,
            "tabular" => TABULAR_KEYS,
            "cartpole" => CARTPOLE_KEYS,
            _ => &["kind"][..],
        };
        if !kind.is_empty() {
            check_keys(env, "environment.", allowed)?;
        }
        if let Some(f) = env.get("features") {
            check_keys(f, "environment.features.", BAIRD_FEATURE_KEYS)?;
        }
        if let Some(p) = env.get("params") {
            check_keys(p, "environment.params.", CARTPOLE_PARAM_KEYS)?;
        }
        if let Some(d) = env.get("discretizer") {
            check_keys(d, "environment.discretizer.", DISCRETIZER_KEYS)?;
        }
    }
    if let Some(Value::Array(agents)) = root.get("agents") {
        for (i, agent) in agents.iter().enumerate() {
            let path = format!("agents[{i}].");
            check_keys(agent, &path, AGENT_KEYS)?;
            if let Some(init) = agent.get("init") {
                check_keys(init, &format!("{path}init."), INIT_KEYS)?;
            }
        }
    }
    if let Some(e) = root.get("evaluation") {
        check_keys(e, "evaluation.", EVAL_KEYS)?;
    }
    if let Some(b) = root.get("bias") {
        check_keys(b, "bias.", BIAS_KEYS)?;
    }
    if let Some(a) = root.get("amse") {
        check_keys(a, "amse.", AMSE_KEYS)?;
    }
    Ok(())
}

fn parse_environment(
    value: &Value,
    problems: &mut Vec<String>,
) -> Result<Option<EnvironmentConfig>> {
    let Value::Object(map) = value else {
        problems.push("environment: expected an object".into());
        return Ok(None);
    };
    let mut rest = map.clone();
    let kind = rest.remove("kind");
    let rest = Value::Object(rest);
    Ok(match kind.as_ref().and_then(Value::as_str) {
        Some("baird") => {
            let spec: BairdSpec = decode(rest, "environment")?;
            if !(spec.reward_low <= spec.reward_high) {
                problems.push("environment.reward_low: must not exceed reward_high".into());
            }
            Some(EnvironmentConfig::Baird(spec))
        }
        Some("random-env") => {
            let spec: RandomEnvSpec = decode(rest, "environment")?;
            if !(spec.p < spec.q) {
                problems.push("environment.p: must be below q".into());
            }
            if spec.num_states == 0 || spec.num_actions == 0 {
                problems.push(
                    "environment.num_states: state and action counts must be positive".into(),
                );
            }
            Some(EnvironmentConfig::RandomEnv(spec))
        }
        Some("tabular") => Some(EnvironmentConfig::Tabular(decode(rest, "environment")?)),
        Some("cartpole") => {
            let c: CartPoleConfig = decode(rest, "environment")?;
            if !(0.0..=1.0).contains(&c.epsilon) {
                problems.push("environment.epsilon: must lie in [0, 1]".into());
            }
            if !c.discretizer.is_valid() {
                problems
                    .push("environment.discretizer: bins must be positive and low < high".into());
            }
            Some(EnvironmentConfig::CartPole(c))
        }
        Some(other) => {
            problems.push(format!("environment.kind: unknown environment `{other}`"));
            None
        }
        None => {
            problems.push("environment.kind: missing".into());
            None
        }
    })
}

fn parse_agent(
    i: usize,
    raw: RawAgent,
    episodic: bool,
    problems: &mut Vec<String>,
) -> Option<AgentConfig> {
    let path = format!("agents[{i}]");
    let Some(variant) = raw.variant else {
        problems.push(format!("{path}.variant: missing"));
        return None;
    };
    let copies = match variant {
        Variant::Watkins => 1,
        Variant::Double => 2,
        _ => raw.copies.unwrap_or(1),
    };
    if copies == 0 {
        problems.push(format!("{path}.copies: must be at least 1"));
    }
    let alpha0 = raw.alpha0.unwrap_or_else(|| {
        problems.push(format!("{path}.alpha0: missing"));
        f64::NAN
    });
    if alpha0.is_finite() && alpha0 <= 0.0 {
        problems.push(format!("{path}.alpha0: must be positive"));
    }
    let decay = raw.decay.unwrap_or(if episodic {
        Decay::PerEpisode
    } else {
        Decay::PerStep
    });
    let w_alpha = raw.w_alpha.unwrap_or(1.0);
    if !(w_alpha > 0.0) {
        problems.push(format!("{path}.w_alpha: must be positive"));
    }
    let rho0 = raw.rho0.unwrap_or(0.0);
    if !(rho0 >= 0.0) {
        problems.push(format!("{path}.rho0: must be non-negative"));
    }
    let w_rho = raw.w_rho.unwrap_or(1.0);
    if !(w_rho > 0.0) {
        problems.push(format!("{path}.w_rho: must be positive"));
    }
    if variant == Variant::TwoRaLinearized {
        problems.push(format!(
            "{path}.variant: the linearized recursion is only available through the amse command"
        ));
    }
    if let Some(Init::Uniform { low, high }) = raw.init {
        if !(low <= high) {
            problems.push(format!("{path}.init: low must not exceed high"));
        }
    }
    let scale_lr = raw.scale_lr.unwrap_or(variant.scales_learning_rate());
    let id = raw.id.unwrap_or_else(|| match variant {
        Variant::Watkins | Variant::Double => variant.name().to_string(),
        _ => format!("{}-{copies}", variant.name()),
    });
    Some(AgentConfig {
        id,
        variant,
        copies,
        alpha0,
        w_alpha,
        decay,
        scale_lr,
        rho0,
        w_rho,
        rho_mode: raw.rho_mode.unwrap_or(RhoMode::Linear),
        init: raw.init.unwrap_or(Init::Zero),
        identical_init: raw.identical_init.unwrap_or(false),
    })
}

/// Parse and validate a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let Value::Object(map) = &root else {
        return Err(Error::Parse("config must be a JSON object".into()));
    };
    check_unknown(&root)?;
    let mut problems = Vec::new();

    let schema_version: Option<u32> = field(map, "schema_version")?;
    match schema_version {
        None => problems.push("schema_version: missing".into()),
        Some(v) if v != SCHEMA_VERSION => {
            problems.push(format!("schema_version: unsupported version {v}"))
        }
        _ => {}
    }
    let discount: Option<f64> = field(map, "discount")?;
    match discount {
        None => problems.push("discount: missing".into()),
        Some(g) if !(g > 0.0 && g < 1.0) => {
            problems.push(format!("discount: {g} is outside (0, 1)"))
        }
        _ => {}
    }
    let num_seeds: usize = field(map, "num_seeds")?.unwrap_or(100);
    if num_seeds == 0 {
        problems.push("num_seeds: must be at least 1".into());
    }
    let environment = match map.get("environment") {
        None | Some(Value::Null) => {
            problems.push("environment: missing".into());
            None
        }
        Some(v) => parse_environment(v, &mut problems)?,
    };
    let episodic = environment.as_ref().is_some_and(|e| e.is_episodic());

    let raw_agents: Vec<Value> = field(map, "agents")?.unwrap_or_default();
    if raw_agents.is_empty() {
        problems.push("agents: at least one agent is required".into());
    }
    let mut agents = Vec::new();
    for (i, value) in raw_agents.into_iter().enumerate() {
        let raw: RawAgent = decode(value, &format!("agents[{i}]"))?;
        if let Some(agent) = parse_agent(i, raw, episodic, &mut problems) {
            if agents.iter().any(|a: &AgentConfig| a.id == agent.id) {
                problems.push(format!("agents[{i}].id: duplicate id `{}`", agent.id));
            }
            agents.push(agent);
        }
    }

    let max_steps: Option<u64> = field(map, "max_steps")?;
    if !episodic && environment.is_some() && !max_steps.is_some_and(|s| s > 0) {
        problems.push("max_steps: a positive step budget is required for MDP environments".into());
    }
    let max_episodes: u64 = field(map, "max_episodes")?.unwrap_or(3000);
    if max_episodes == 0 {
        problems.push("max_episodes: must be positive".into());
    }
    let metric_every: u64 = field(map, "metric_every")?.unwrap_or(1000);
    if metric_every == 0 {
        problems.push("metric_every: must be positive".into());
    }
    let evaluation = match field::<RawEval>(map, "evaluation")? {
        None => EvalProtocol::default(),
        Some(raw) => {
            let d = EvalProtocol::default();
            EvalProtocol {
                eval_every: raw.eval_every.unwrap_or(d.eval_every),
                eval_episodes: raw.eval_episodes.unwrap_or(d.eval_episodes),
                eval_step_cap: raw.eval_step_cap.unwrap_or(d.eval_step_cap),
                solve_threshold: raw.solve_threshold.unwrap_or(d.solve_threshold),
            }
        }
    };
    if evaluation.eval_every == 0 || evaluation.eval_episodes == 0 || evaluation.eval_step_cap == 0
    {
        problems.push(
            "evaluation: eval_every, eval_episodes and eval_step_cap must be positive".into(),
        );
    }
    let bias: Option<BiasConfig> = field(map, "bias")?;
    if let Some(b) = &bias {
        if b.num_runs < crate::analysis::MIN_BIAS_RUNS {
            problems.push(format!(
                "bias.num_runs: at least {} runs are required",
                crate::analysis::MIN_BIAS_RUNS
            ));
        }
    }
    let amse: Option<AmseConfig> = field(map, "amse")?;
    if let Some(a) = &amse {
        if a.copies == 0 || a.num_seeds == 0 || a.steps == 0 || !(a.gain_factor > 1.0) {
            problems.push(
                "amse: copies, num_seeds and steps must be positive and gain_factor above 1".into(),
            );
        }
    }

    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }
    Ok(ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        name: field(map, "name")?.unwrap_or_else(|| "experiment".to_string()),
        master_seed: field(map, "master_seed")?.unwrap_or(0),
        num_seeds,
        discount: discount.expect("validated"),
        environment: environment.expect("validated"),
        agents,
        max_steps: max_steps.unwrap_or(0),
        max_episodes,
        metric_every,
        evaluation,
        output_dir: field::<PathBuf>(map, "output_dir")?
            .unwrap_or_else(|| PathBuf::from("results")),
        bias,
        amse,
    })
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}
