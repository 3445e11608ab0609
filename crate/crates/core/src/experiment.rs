//! Simulation harness: problem instances, the optimistic learning loop, the
//! explore-then-exploit baseline, regret accounting, estimation-error studies
//! and the selector timing benchmark.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::armsel::{
    binomial, exact_select, grab_arm_light, grab_arm_light_from, select, ArmSelectConfig, Selection,
    Selector, UcbObjective, DEFAULT_ENUMERATION_BUDGET,
};
use crate::error::{invalid, Error, Result};
use crate::graph::{generate_ba, generate_rbf, Graph};
use crate::learner::{
    confidence_radius, log_det_bound, HyperParams, LearnerState, RadiusMode,
};
use crate::process::{
    diffusion_poly_coefficients, feature_matrix, random_mask, unit_features, ActionSignal, Environment,
    KernelCoefficients, Mask, Network, TrueKernel,
};
use crate::rng::{stream, Stream};

/// How the network is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum GraphSpec {
    /// Random geometric graph with Gaussian weights.
    Rbf { n: usize, sigma: f64, threshold: f64 },
    /// Preferential attachment.
    Ba { n: usize, m0: usize, m: usize },
}

impl GraphSpec {
    pub fn n(&self) -> usize {
        match *self {
            GraphSpec::Rbf { n, .. } | GraphSpec::Ba { n, .. } => n,
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        let mut out = self.clone();
        match &mut out {
            GraphSpec::Rbf { n: size, .. } | GraphSpec::Ba { n: size, .. } => *size = n,
        }
        out
    }

    pub fn generate(&self, seed: u64) -> Result<Graph> {
        match *self {
            GraphSpec::Rbf { n, sigma, threshold } => generate_rbf(n, sigma, threshold, seed),
            GraphSpec::Ba { n, m0, m } => generate_ba(n, m0, m, seed),
        }
    }
}

/// The generating kernel of the simulated process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelSpec {
    Diffusion { tau: f64 },
    Polynomial { alpha: Vec<f64> },
}

impl KernelSpec {
    fn to_kernel(&self, k: usize) -> Result<TrueKernel> {
        match self {
            KernelSpec::Diffusion { tau } => {
                if !(tau.is_finite() && *tau > 0.0) {
                    return Err(invalid("kernel.tau", format!("{tau} must be positive")));
                }
                Ok(TrueKernel::Diffusion { tau: *tau })
            }
            KernelSpec::Polynomial { alpha } => {
                if alpha.len() != k {
                    return Err(Error::DimensionMismatch {
                        context: "kernel.alpha length vs learner.k",
                        expected: k,
                        actual: alpha.len(),
                    });
                }
                Ok(TrueKernel::Polynomial(KernelCoefficients::new(alpha.clone())?))
            }
        }
    }
}

/// Rule for the sub-Gaussian noise scale of the confidence radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseRule {
    /// `sigma_e`: each observed node contributes one noisy row.
    PerNode,
    /// `sqrt(N) sigma_e`: noise of the whole resultant signal.
    Aggregate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseBound {
    Rule(NoiseRule),
    Fixed(f64),
}

/// Rule for the bound on the coefficient norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoefficientRule {
    /// Polynomial truth: its coefficient norm. Diffusion truth: the norm of
    /// the best dictionary fit of the true responses.
    Oracle,
    /// Diffusion truth: the norm of the truncated Taylor coefficients.
    Taylor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientBound {
    Rule(CoefficientRule),
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    /// Fraction of nodes whose signal is observed.
    pub mask_fraction: f64,
    /// Observation noise variance `sigma_e^2`.
    pub noise_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub mu: f64,
    pub delta: f64,
    /// Number of dictionary powers.
    pub k: usize,
    pub r: NoiseBound,
    pub s: CoefficientBound,
    pub radius: RadiusMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectorConfig {
    pub t0: usize,
    pub max_iter: usize,
    pub kind: Selector,
    /// Largest number of supports enumeration may evaluate.
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub horizon: usize,
    pub realizations: usize,
    /// Realization `i` uses seed `seed + i`.
    pub seed: u64,
    /// Exploration lengths of the two baseline variants.
    pub aal_short: usize,
    pub aal_long: usize,
    /// Random restarts when the best arm cannot be enumerated.
    pub oracle_restarts: usize,
}

/// Everything needed to reproduce a regret experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub kernel: KernelSpec,
    pub observation: ObservationConfig,
    pub learner: LearnerConfig,
    pub selector: SelectorConfig,
    pub run: RunConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            graph: GraphSpec::Rbf {
                n: 100,
                sigma: 0.5,
                threshold: 0.15,
            },
            kernel: KernelSpec::Diffusion { tau: 5.0 },
            observation: ObservationConfig {
                mask_fraction: 0.2,
                noise_var: 1e-2,
            },
            learner: LearnerConfig {
                mu: 0.01,
                delta: 0.01,
                k: 5,
                r: NoiseBound::Rule(NoiseRule::PerNode),
                s: CoefficientBound::Rule(CoefficientRule::Oracle),
                radius: RadiusMode::ExactLogdet,
            },
            selector: SelectorConfig {
                t0: 5,
                max_iter: 100,
                kind: Selector::Walk,
                budget: DEFAULT_ENUMERATION_BUDGET as u64,
            },
            run: RunConfig {
                horizon: 100,
                realizations: 100,
                seed: 0,
                aal_short: 10,
                aal_long: 20,
                oracle_restarts: 20,
            },
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.graph.n();
        if n == 0 {
            return Err(invalid("graph.n", "must be at least 1"));
        }
        let frac = self.observation.mask_fraction;
        if !(frac > 0.0 && frac <= 1.0) {
            return Err(invalid("observation.mask_fraction", format!("{frac} must lie in (0, 1]")));
        }
        let var = self.observation.noise_var;
        if !(var.is_finite() && var >= 0.0) {
            return Err(invalid("observation.noise_var", format!("{var} must be non-negative")));
        }
        let l = &self.learner;
        if !(l.mu.is_finite() && l.mu > 0.0) {
            return Err(invalid("learner.mu", format!("{} must be positive", l.mu)));
        }
        if !(l.delta > 0.0 && l.delta < 1.0) {
            return Err(invalid("learner.delta", format!("{} must lie in (0, 1)", l.delta)));
        }
        if l.k == 0 {
            return Err(invalid("learner.k", "must be at least 1"));
        }
        if let NoiseBound::Fixed(r) = l.r {
            if !(r.is_finite() && r >= 0.0) {
                return Err(invalid("learner.r", format!("{r} must be non-negative")));
            }
        }
        if let CoefficientBound::Fixed(s) = l.s {
            if !(s.is_finite() && s > 0.0) {
                return Err(invalid("learner.s", format!("{s} must be positive")));
            }
        }
        let s = &self.selector;
        if s.t0 == 0 || s.t0 > n {
            return Err(invalid("selector.t0", format!("{} must lie in [1, {n}]", s.t0)));
        }
        if s.max_iter == 0 {
            return Err(invalid("selector.max_iter", "must be at least 1"));
        }
        let r = &self.run;
        if r.horizon == 0 {
            return Err(invalid("run.horizon", "must be at least 1"));
        }
        if r.realizations == 0 {
            return Err(invalid("run.realizations", "must be at least 1"));
        }
        for (name, tl) in [("run.aal_short", r.aal_short), ("run.aal_long", r.aal_long)] {
            if tl >= r.horizon {
                return Err(invalid(name, format!("{tl} must be below the horizon {}", r.horizon)));
            }
        }
        self.kernel.to_kernel(l.k)?;
        Ok(())
    }

    /// Seeds of all realizations.
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.run.realizations as u64).map(|i| self.run.seed.wrapping_add(i)).collect()
    }

    pub fn arm_config(&self) -> ArmSelectConfig {
        ArmSelectConfig::new(self.selector.t0, self.selector.max_iter)
    }

    pub fn noise_std(&self) -> f64 {
        self.observation.noise_var.sqrt()
    }
}

/// Ridge fit of the true noiseless responses to every unit source onto the
/// dictionary, i.e. the coefficients the learner converges to.
pub fn kernel_projection(env: &Environment, mu: f64) -> Result<KernelCoefficients> {
    let net = env.network();
    let mut state = LearnerState::new(net.k(), mu)?;
    for node in 0..net.n() {
        let mut h = DVector::zeros(net.n());
        h[node] = 1.0;
        let z = feature_matrix(net.basis(), env.mask(), &h)?;
        let w = env.mask().apply(&env.resultant(&h)?);
        state.ingest(&z, &w)?;
    }
    Ok(state.alpha_hat().clone())
}

/// A generated problem: network, environment in its initial state, the
/// learner's constants and the per-node features.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub network: Arc<Network>,
    pub env: Environment,
    pub hyper: HyperParams,
    pub features: DMatrix<f64>,
}

impl Instance {
    pub fn build(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        Self::build_with_noise_seed(cfg, seed, seed)
    }

    /// Graph and mask come from `seed`, observation noise from `noise_seed`.
    pub fn build_with_noise_seed(cfg: &ExperimentConfig, seed: u64, noise_seed: u64) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.learner.k;
        let network = Arc::new(Network::new(cfg.graph.generate(seed)?, k)?);
        let mask = random_mask(network.n(), cfg.observation.mask_fraction, seed)?;
        let kernel = cfg.kernel.to_kernel(k)?;
        let env = Environment::new(network.clone(), kernel, mask, cfg.noise_std(), noise_seed)?;
        let r = match cfg.learner.r {
            NoiseBound::Fixed(r) => r,
            NoiseBound::Rule(NoiseRule::PerNode) => cfg.noise_std(),
            NoiseBound::Rule(NoiseRule::Aggregate) => (network.n() as f64).sqrt() * cfg.noise_std(),
        };
        let s = match (&cfg.learner.s, &cfg.kernel) {
            (CoefficientBound::Fixed(s), _) => *s,
            (CoefficientBound::Rule(_), KernelSpec::Polynomial { alpha }) => {
                alpha.iter().map(|a| a * a).sum::<f64>().sqrt()
            }
            (CoefficientBound::Rule(CoefficientRule::Taylor), KernelSpec::Diffusion { tau }) => {
                diffusion_poly_coefficients(*tau, k)?.norm()
            }
            (CoefficientBound::Rule(CoefficientRule::Oracle), KernelSpec::Diffusion { .. }) => {
                kernel_projection(&env, cfg.learner.mu)?.norm()
            }
        };
        let hyper = HyperParams {
            mu: cfg.learner.mu,
            delta: cfg.learner.delta,
            r,
            s,
            k,
            t0: cfg.selector.t0,
            q: env.mask().observed(),
            d: network.power_sum(),
        };
        hyper.validate()?;
        let features = unit_features(network.basis(), env.mask())?;
        Ok(Self {
            seed,
            network,
            env,
            hyper,
            features,
        })
    }
}

/// How the best arm is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    Enumerate,
    Walk,
    /// Enumerate when within budget, otherwise walk with restarts.
    #[default]
    Auto,
}

/// The best fixed arm under the true kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleArm {
    pub support: Vec<usize>,
    pub reward: f64,
    /// False when found by local search rather than enumeration.
    pub exact: bool,
}

/// Maximizes the expected reward over supports of size `T0`.
pub fn oracle_best_arm(
    env: &Environment,
    t0: usize,
    method: OracleMethod,
    budget: u128,
    restarts: usize,
    seed: u64,
) -> Result<OracleArm> {
    let obj = UcbObjective::linear(env.reward_weights().clone())?;
    let n = obj.n();
    let enumerate = match method {
        OracleMethod::Enumerate => true,
        OracleMethod::Walk => false,
        OracleMethod::Auto => binomial(n, t0) <= budget,
    };
    if enumerate {
        let sel = exact_select(&obj, t0, budget)?;
        return Ok(OracleArm {
            support: sel.support,
            reward: sel.value,
            exact: true,
        });
    }
    let cfg = ArmSelectConfig::new(t0, 10 * n);
    let mut best = grab_arm_light(&obj, &cfg)?;
    let mut rng = stream(seed, Stream::Restarts);
    for _ in 0..restarts {
        let start = random_support(&mut rng, n, t0);
        let sel = grab_arm_light_from(&obj, &cfg, &start)?;
        if sel.value > best.value {
            best = sel;
        }
    }
    Ok(OracleArm {
        support: best.support,
        reward: best.value,
        exact: false,
    })
}

fn random_support(rng: &mut ChaCha8Rng, n: usize, t0: usize) -> Vec<usize> {
    let mut s = index::sample(rng, n, t0).into_vec();
    s.sort_unstable();
    s
}

/// Learner quantities after a round's ingest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnerSnapshot {
    pub alpha_hat: Vec<f64>,
    pub c_exact: f64,
    pub c_bound: f64,
    pub logdet: f64,
    pub log_det_bound: f64,
}

/// One round of play.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub t: usize,
    pub support: Vec<usize>,
    pub mean_reward: f64,
    pub realized_reward: f64,
    /// `r* - mean_reward`.
    pub regret: f64,
    /// Exploration weight used to pick the action.
    pub radius: f64,
    pub objective: f64,
    pub linear_term: f64,
    pub bonus_term: f64,
    pub iterations: usize,
    /// Present on rounds whose observation was ingested.
    pub learner: Option<LearnerSnapshot>,
}

/// Which policy produced a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Algorithm {
    /// Optimistic selection with the confidence radius.
    GrabUcb,
    /// Same loop with the radius forced to zero.
    GrabUcbGreedy,
    /// Random exploration for `explore` rounds, then a fixed arm.
    Aal { explore: usize },
}

impl Algorithm {
    pub fn label(&self) -> String {
        match self {
            Algorithm::GrabUcb => "grab_ucb".into(),
            Algorithm::GrabUcbGreedy => "grab_ucb_c0".into(),
            Algorithm::Aal { explore } => format!("aal_{explore}"),
        }
    }
}

/// Wall-clock breakdown in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timings {
    pub select_ms: f64,
    pub observe_ms: f64,
    pub ingest_ms: f64,
    pub total_ms: f64,
}

/// A complete run of one policy on one instance.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub oracle: OracleArm,
    pub hyper: HyperParams,
    pub rounds: Vec<RoundRecord>,
    pub timings: Timings,
}

impl RunRecord {
    pub fn cumulative_regret(&self) -> Vec<f64> {
        cumulative_regret(&self.rounds, self.oracle.reward)
    }
}

/// Prefix sums of `r* - mean_reward(h_t)`.
pub fn cumulative_regret(rounds: &[RoundRecord], r_star: f64) -> Vec<f64> {
    rounds
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r_star - r.mean_reward;
            Some(*acc)
        })
        .collect()
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn snapshot(state: &LearnerState, hyper: &HyperParams) -> Result<LearnerSnapshot> {
    Ok(LearnerSnapshot {
        alpha_hat: state.alpha_hat().as_slice().to_vec(),
        c_exact: confidence_radius(state, hyper, RadiusMode::ExactLogdet)?,
        c_bound: confidence_radius(state, hyper, RadiusMode::DeterminantBound)?,
        logdet: state.logdet(),
        log_det_bound: log_det_bound(hyper, state.t()),
    })
}

/// Step-by-step optimistic learning loop.
#[derive(Debug, Clone)]
pub struct GrabUcbRun {
    env: Environment,
    network: Arc<Network>,
    hyper: HyperParams,
    features: DMatrix<f64>,
    arm: ArmSelectConfig,
    selector: Selector,
    budget: u128,
    radius: RadiusMode,
    greedy: bool,
    state: LearnerState,
    oracle: OracleArm,
    timings: Timings,
}

impl GrabUcbRun {
    pub fn new(cfg: &ExperimentConfig, instance: &Instance, greedy: bool) -> Result<Self> {
        let oracle = instance_oracle(cfg, instance)?;
        Ok(Self {
            env: instance.env.clone(),
            network: instance.network.clone(),
            hyper: instance.hyper,
            features: instance.features.clone(),
            arm: cfg.arm_config(),
            selector: cfg.selector.kind,
            budget: cfg.selector.budget as u128,
            radius: cfg.learner.radius,
            greedy,
            state: LearnerState::init(&instance.hyper)?,
            oracle,
            timings: Timings::default(),
        })
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hyper
    }

    pub fn oracle(&self) -> &OracleArm {
        &self.oracle
    }

    pub fn timings(&self) -> Timings {
        self.timings
    }

    /// Select, observe, ingest.
    pub fn step(&mut self) -> Result<RoundRecord> {
        let started = Instant::now();
        let c = if self.greedy {
            0.0
        } else {
            confidence_radius(&self.state, &self.hyper, self.radius)?
        };
        let obj = UcbObjective::new(&self.features, self.state.alpha_hat(), c, &self.state)?;
        let sel = select(&obj, &self.arm, self.selector, self.budget)?;
        self.timings.select_ms += elapsed_ms(started);

        let observed = Instant::now();
        let obs = self.env.observe(&sel.action)?;
        let z = feature_matrix(self.network.basis(), self.env.mask(), sel.action.values())?;
        self.timings.observe_ms += elapsed_ms(observed);

        let ingested = Instant::now();
        self.state.ingest(&z, &obs.w)?;
        let snap = snapshot(&self.state, &self.hyper)?;
        self.timings.ingest_ms += elapsed_ms(ingested);
        self.timings.total_ms += elapsed_ms(started);

        Ok(round_record(self.state.t(), &sel, c, obs.mean_reward, obs.realized_reward(), self.oracle.reward, Some(snap)))
    }
}

fn round_record(
    t: usize,
    sel: &Selection,
    radius: f64,
    mean_reward: f64,
    realized_reward: f64,
    r_star: f64,
    learner: Option<LearnerSnapshot>,
) -> RoundRecord {
    RoundRecord {
        t,
        support: sel.support.clone(),
        mean_reward,
        realized_reward,
        regret: r_star - mean_reward,
        radius,
        objective: sel.value,
        linear_term: sel.linear_term,
        bonus_term: sel.bonus_term,
        iterations: sel.iterations,
        learner,
    }
}

fn instance_oracle(cfg: &ExperimentConfig, instance: &Instance) -> Result<OracleArm> {
    oracle_best_arm(
        &instance.env,
        cfg.selector.t0,
        OracleMethod::Auto,
        cfg.selector.budget as u128,
        cfg.run.oracle_restarts,
        instance.seed,
    )
}

/// Runs the optimistic loop for the configured horizon.
pub fn run_grab_ucb(cfg: &ExperimentConfig, instance: &Instance, greedy: bool) -> Result<RunRecord> {
    let mut run = GrabUcbRun::new(cfg, instance, greedy)?;
    let rounds = (0..cfg.run.horizon).map(|_| run.step()).collect::<Result<Vec<_>>>()?;
    Ok(RunRecord {
        algorithm: if greedy { Algorithm::GrabUcbGreedy } else { Algorithm::GrabUcb },
        seed: instance.seed,
        oracle: run.oracle,
        hyper: run.hyper,
        rounds,
        timings: run.timings,
    })
}

/// Explore uniformly at random for `explore` rounds, fit once, then play the
/// arm that is best under the fitted coefficients for the remaining rounds.
pub fn run_aal(cfg: &ExperimentConfig, instance: &Instance, explore: usize) -> Result<RunRecord> {
    if explore >= cfg.run.horizon {
        return Err(invalid(
            "explore",
            format!("{explore} must be below the horizon {}", cfg.run.horizon),
        ));
    }
    let oracle = instance_oracle(cfg, instance)?;
    let mut env = instance.env.clone();
    let hyper = instance.hyper;
    let n = instance.network.n();
    let t0 = cfg.selector.t0;
    let mut state = LearnerState::init(&hyper)?;
    let mut rng = stream(instance.seed, Stream::Baseline);
    let mut timings = Timings::default();
    let mut rounds = Vec::with_capacity(cfg.run.horizon);
    let mut exploit: Option<Selection> = None;
    for t in 1..=cfg.run.horizon {
        let started = Instant::now();
        let sel = if t <= explore {
            let support = random_support(&mut rng, n, t0);
            let (linear_term, bonus_term) = (0.0, 0.0);
            Selection {
                action: ActionSignal::binary(n, &support)?,
                support,
                value: 0.0,
                linear_term,
                bonus_term,
                iterations: 0,
                path: Vec::new(),
            }
        } else {
            if exploit.is_none() {
                let obj = UcbObjective::new(&instance.features, state.alpha_hat(), 0.0, &state)?;
                exploit = Some(grab_arm_light(&obj, &cfg.arm_config())?);
            }
            exploit.clone().expect("exploitation arm was just set")
        };
        timings.select_ms += elapsed_ms(started);
        let observed = Instant::now();
        let obs = env.observe(&sel.action)?;
        timings.observe_ms += elapsed_ms(observed);
        let snap = if t <= explore {
            let ingested = Instant::now();
            let z = feature_matrix(instance.network.basis(), env.mask(), sel.action.values())?;
            state.ingest(&z, &obs.w)?;
            let snap = snapshot(&state, &hyper)?;
            timings.ingest_ms += elapsed_ms(ingested);
            Some(snap)
        } else {
            None
        };
        timings.total_ms += elapsed_ms(started);
        rounds.push(round_record(t, &sel, 0.0, obs.mean_reward, obs.realized_reward(), oracle.reward, snap));
    }
    Ok(RunRecord {
        algorithm: Algorithm::Aal { explore },
        seed: instance.seed,
        oracle,
        hyper,
        rounds,
        timings,
    })
}

/// Maps `f` over `items` on a pool of `threads` workers (0 = all cores),
/// keeping input order.
pub fn parallel_map<T, U, F>(items: &[T], threads: usize, f: F) -> Result<Vec<U>>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> Result<U> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::ResourceLimit(format!("thread pool: {e}")))?;
    pool.install(|| items.par_iter().map(&f).collect())
}

/// All four policies on one realization.
#[derive(Debug, Clone, Serialize)]
pub struct RealizationRuns {
    pub seed: u64,
    pub runs: Vec<RunRecord>,
    pub setup_ms: f64,
}

/// Runs Grab-UCB, its zero-radius ablation and both baselines on every seed.
pub fn regret_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<RealizationRuns>> {
    cfg.validate()?;
    parallel_map(&cfg.seeds(), threads, |&seed| {
        let started = Instant::now();
        let instance = Instance::build(cfg, seed)?;
        let setup_ms = elapsed_ms(started);
        let runs = vec![
            run_grab_ucb(cfg, &instance, false)?,
            run_grab_ucb(cfg, &instance, true)?,
            run_aal(cfg, &instance, cfg.run.aal_short)?,
            run_aal(cfg, &instance, cfg.run.aal_long)?,
        ];
        Ok(RealizationRuns { seed, runs, setup_ms })
    })
}

/// Mean, sample standard deviation and standard error.
pub fn mean_std_stderr(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    (mean, std, std / n.sqrt())
}

/// One point of an averaged regret curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretRow {
    pub algorithm: String,
    pub t: usize,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub stderr_regret: f64,
}

/// Averages cumulative regret across realizations, per algorithm and round.
pub fn summarize_regret(results: &[RealizationRuns]) -> Vec<RegretRow> {
    let Some(first) = results.first() else {
        return Vec::new();
    };
    let mut rows = Vec::new();
    for (a, run) in first.runs.iter().enumerate() {
        let curves: Vec<Vec<f64>> = results.iter().map(|r| r.runs[a].cumulative_regret()).collect();
        for t in 0..run.rounds.len() {
            let at_t: Vec<f64> = curves.iter().map(|c| c[t]).collect();
            let (mean, std, se) = mean_std_stderr(&at_t);
            rows.push(RegretRow {
                algorithm: run.algorithm.label(),
                t: t + 1,
                mean_regret: mean,
                std_regret: std,
                stderr_regret: se,
            });
        }
    }
    rows
}

/// Estimation-error study settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorStudyConfig {
    pub graph: GraphSpec,
    pub kernel: KernelSpec,
    pub mask_fraction: f64,
    pub noise_var: f64,
    pub k: usize,
    pub mu: f64,
    pub t0: usize,
    pub n_train: usize,
    pub n_test: usize,
}

/// Average test error of one fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorOutcome {
    /// Mean over test actions of `|y - D h|^2 / |y|^2`.
    pub normalized_error: f64,
    /// Mean over test actions of `|y - D h|^2 / N`.
    pub mean_squared_error: f64,
}

/// Fits the coefficients from `n_train` noisy random actions, then measures
/// how well the fitted kernel predicts the noiseless response to `n_test`
/// fresh random actions on all nodes.
pub fn error_study(cfg: &ErrorStudyConfig, seed: u64) -> Result<ErrorOutcome> {
    if cfg.n_train == 0 || cfg.n_test == 0 {
        return Err(invalid("n_train/n_test", "sample counts must be at least 1"));
    }
    let n = cfg.graph.n();
    if cfg.t0 == 0 || cfg.t0 > n {
        return Err(invalid("t0", format!("{} must lie in [1, {n}]", cfg.t0)));
    }
    if !(cfg.noise_var.is_finite() && cfg.noise_var >= 0.0) {
        return Err(invalid("noise_var", format!("{} must be non-negative", cfg.noise_var)));
    }
    let network = Arc::new(Network::new(cfg.graph.generate(seed)?, cfg.k)?);
    let mask = if cfg.mask_fraction >= 1.0 {
        Mask::full(n)
    } else {
        random_mask(n, cfg.mask_fraction, seed)?
    };
    let kernel = cfg.kernel.to_kernel(cfg.k)?;
    let mut env = Environment::new(network.clone(), kernel, mask, cfg.noise_var.sqrt(), seed)?;
    let mut rng = stream(seed, Stream::Actions);
    let mut state = LearnerState::new(cfg.k, cfg.mu)?;
    for _ in 0..cfg.n_train {
        let h = ActionSignal::binary(n, &random_support(&mut rng, n, cfg.t0))?;
        let obs = env.observe(&h)?;
        let z = feature_matrix(network.basis(), env.mask(), h.values())?;
        state.ingest(&z, &obs.w)?;
    }
    let alpha = state.alpha_hat();
    let mut normalized = 0.0;
    let mut squared = 0.0;
    for _ in 0..cfg.n_test {
        let h = ActionSignal::binary(n, &random_support(&mut rng, n, cfg.t0))?;
        let y = env.resultant(h.values())?;
        let fitted = crate::process::apply_poly_kernel(network.basis(), alpha, h.values())?;
        let err = (&y - fitted).norm_squared();
        let scale = y.norm_squared();
        if scale == 0.0 {
            return Err(Error::NumericFailure("test signal with zero energy".into()));
        }
        normalized += err / scale;
        squared += err / n as f64;
    }
    Ok(ErrorOutcome {
        normalized_error: normalized / cfg.n_test as f64,
        mean_squared_error: squared / cfg.n_test as f64,
    })
}

/// Averaged error at one study setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    /// The varied quantity: BA attachment count or sparsity ratio.
    pub parameter: f64,
    pub observability: f64,
    pub noise_var: f64,
    pub mean_error: f64,
    pub stderr: f64,
    pub mean_squared_error: f64,
}

/// A labelled study setting.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyPoint {
    pub parameter: f64,
    pub config: ErrorStudyConfig,
}

/// Evaluates every point on every seed and averages.
pub fn run_study(points: &[StudyPoint], seeds: &[u64], threads: usize) -> Result<Vec<StudyRow>> {
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let outcomes = parallel_map(&jobs, threads, |&(p, s)| error_study(&points[p].config, s))?;
    Ok(points
        .iter()
        .enumerate()
        .map(|(p, point)| {
            let mine = &outcomes[p * seeds.len()..(p + 1) * seeds.len()];
            let errs: Vec<f64> = mine.iter().map(|o| o.normalized_error).collect();
            let mses: Vec<f64> = mine.iter().map(|o| o.mean_squared_error).collect();
            let (mean, _, se) = mean_std_stderr(&errs);
            StudyRow {
                parameter: point.parameter,
                observability: point.config.mask_fraction,
                noise_var: point.config.noise_var,
                mean_error: mean,
                stderr: se,
                mean_squared_error: mean_std_stderr(&mses).0,
            }
        })
        .collect())
}

/// Connectivity study: one point per BA attachment count and observability.
pub fn topology_points(base: &ErrorStudyConfig, ms: &[usize], observability: &[f64]) -> Result<Vec<StudyPoint>> {
    let GraphSpec::Ba { n, m0, .. } = base.graph else {
        return Err(invalid("graph.model", "the topology study needs a BA graph"));
    };
    let mut points = Vec::new();
    for &m in ms {
        for &frac in observability {
            let mut config = base.clone();
            config.graph = GraphSpec::Ba { n, m0, m };
            config.mask_fraction = frac;
            points.push(StudyPoint {
                parameter: m as f64,
                config,
            });
        }
    }
    Ok(points)
}

/// Sparsity study: one point per `T0 / N` ratio and noise level.
pub fn sparsity_points(base: &ErrorStudyConfig, ratios: &[f64], noise_vars: &[f64]) -> Result<Vec<StudyPoint>> {
    let n = base.graph.n();
    let mut points = Vec::new();
    for &ratio in ratios {
        let t0 = (ratio * n as f64).round() as usize;
        if t0 == 0 || t0 > n {
            return Err(invalid("ratio", format!("{ratio} gives T0 = {t0} for N = {n}")));
        }
        for &var in noise_vars {
            let mut config = base.clone();
            config.t0 = t0;
            config.noise_var = var;
            points.push(StudyPoint {
                parameter: ratio,
                config,
            });
        }
    }
    Ok(points)
}

/// Which selector a benchmark row measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    Walk,
    Exact,
}

impl SolverMethod {
    pub fn label(&self) -> &'static str {
        match self {
            SolverMethod::Walk => "grab_arm_light",
            SolverMethod::Exact => "exact",
        }
    }
}

/// Timing of one selector at one graph size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverBenchRow {
    pub n: usize,
    pub method: SolverMethod,
    /// Median per-call wall time; `None` when enumeration was over budget.
    pub time_ms: Option<f64>,
    /// Expected reward of the chosen arm under the true kernel.
    pub reward: Option<f64>,
    /// Objective value of the chosen arm.
    pub objective: Option<f64>,
}

/// Runs `f` once to warm up, then `reps` timed batches, and returns the
/// median per-call time in milliseconds. Fast calls are batched so each
/// timed batch lasts at least `min_batch_ms`.
pub fn median_time_ms<T>(reps: usize, min_batch_ms: f64, mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    let started = Instant::now();
    let out = f()?;
    let once = elapsed_ms(started).max(1e-6);
    let inner = ((min_batch_ms / once).ceil() as usize).clamp(1, 1_000_000);
    let mut times = Vec::with_capacity(reps.max(1));
    for _ in 0..reps.max(1) {
        let started = Instant::now();
        for _ in 0..inner {
            std::hint::black_box(f()?);
        }
        times.push(elapsed_ms(started) / inner as f64);
    }
    times.sort_by(f64::total_cmp);
    Ok((times[times.len() / 2], out))
}

/// Objective after `warmup_rounds` of optimistic play, used to compare
/// selectors on a realistic state.
pub fn warmed_objective(cfg: &ExperimentConfig, instance: &Instance, warmup_rounds: usize) -> Result<UcbObjective> {
    let mut run = GrabUcbRun::new(cfg, instance, false)?;
    for _ in 0..warmup_rounds {
        run.step()?;
    }
    let c = confidence_radius(run.state(), run.hyper(), cfg.learner.radius)?;
    UcbObjective::new(&instance.features, run.state().alpha_hat(), c, run.state())
}

/// Times the walk and enumeration on identical objectives for each size.
pub fn solver_bench(
    cfg: &ExperimentConfig,
    sizes: &[usize],
    warmup_rounds: usize,
    reps: usize,
    min_batch_ms: f64,
) -> Result<Vec<SolverBenchRow>> {
    let mut rows = Vec::new();
    for &n in sizes {
        let mut sized = cfg.clone();
        sized.graph = cfg.graph.with_n(n);
        let instance = Instance::build(&sized, sized.run.seed)?;
        let obj = warmed_objective(&sized, &instance, warmup_rounds)?;
        let arm = sized.arm_config();
        let (t, sel) = median_time_ms(reps, min_batch_ms, || grab_arm_light(&obj, &arm))?;
        rows.push(SolverBenchRow {
            n,
            method: SolverMethod::Walk,
            time_ms: Some(t),
            reward: Some(instance.env.mean_reward(&sel.action)),
            objective: Some(sel.value),
        });
        let budget = sized.selector.budget as u128;
        let row = if binomial(n, arm.t0) <= budget {
            let (t, sel) = median_time_ms(reps, 0.0, || exact_select(&obj, arm.t0, budget))?;
            SolverBenchRow {
                n,
                method: SolverMethod::Exact,
                time_ms: Some(t),
                reward: Some(instance.env.mean_reward(&sel.action)),
                objective: Some(sel.value),
            }
        } else {
            SolverBenchRow {
                n,
                method: SolverMethod::Exact,
                time_ms: None,
                reward: None,
                objective: None,
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}
