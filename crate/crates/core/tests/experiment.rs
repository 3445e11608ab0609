use grab_core::experiment::{
    error_study, kernel_projection, CoefficientBound, ErrorStudyConfig, GraphSpec, KernelSpec, NoiseBound,
    NoiseRule,
};
use grab_core::{
    cumulative_regret, exact_select, oracle_best_arm, run_aal, run_grab_ucb, ActionSignal, ExperimentConfig,
    GrabUcbRun, Instance, OracleMethod, RoundRecord, Selector, UcbObjective,
};
use nalgebra::DVector;

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.graph = GraphSpec::Rbf {
        n: 12,
        sigma: 0.5,
        threshold: 0.5,
    };
    cfg.selector.t0 = 2;
    cfg.observation.mask_fraction = 0.5;
    cfg.learner.k = 3;
    cfg.run.horizon = 60;
    cfg.run.aal_short = 10;
    cfg.run.aal_long = 20;
    cfg
}

fn polynomial(cfg: &mut ExperimentConfig, alpha: Vec<f64>) {
    cfg.learner.k = alpha.len();
    cfg.kernel = KernelSpec::Polynomial { alpha };
}

#[test]
fn walk_oracle_agrees_with_enumeration() {
    let mut cfg = small_config();
    cfg.graph = GraphSpec::Rbf {
        n: 10,
        sigma: 0.5,
        threshold: 0.5,
    };
    let mut agree = 0;
    for seed in 0..20 {
        let inst = Instance::build(&cfg, seed).unwrap();
        let exact = oracle_best_arm(&inst.env, 2, OracleMethod::Enumerate, 1000, 0, seed).unwrap();
        let walk = oracle_best_arm(&inst.env, 2, OracleMethod::Walk, 1000, 20, seed).unwrap();
        assert!(exact.exact && !walk.exact);
        if (walk.reward - exact.reward).abs() <= 1e-12 * exact.reward.abs().max(1.0) {
            agree += 1;
        } else {
            assert!(walk.reward >= 0.99 * exact.reward);
        }
    }
    assert!(agree >= 16, "{agree}/20");
}

#[test]
fn identity_kernel_oracle_reward_is_source_count() {
    let mut cfg = small_config();
    polynomial(&mut cfg, vec![1.0, 0.0, 0.0]);
    cfg.observation.mask_fraction = 1.0;
    let inst = Instance::build(&cfg, 3).unwrap();
    let best = oracle_best_arm(&inst.env, 2, OracleMethod::Auto, 1000, 0, 3).unwrap();
    assert!((best.reward - 2.0).abs() < 1e-12);
    let all = oracle_best_arm(&inst.env, 12, OracleMethod::Auto, 1000, 0, 3).unwrap();
    assert_eq!(all.support, (0..12).collect::<Vec<_>>());
}

fn round(t: usize, mean_reward: f64) -> RoundRecord {
    RoundRecord {
        t,
        support: vec![0],
        mean_reward,
        realized_reward: mean_reward,
        regret: 0.0,
        radius: 0.0,
        objective: 0.0,
        linear_term: 0.0,
        bonus_term: 0.0,
        iterations: 0,
        learner: None,
    }
}

#[test]
fn cumulative_regret_examples() {
    let optimal: Vec<_> = (1..=5).map(|t| round(t, 2.0)).collect();
    assert!(cumulative_regret(&optimal, 2.0).iter().all(|&r| r == 0.0));
    let gap: Vec<_> = (1..=5).map(|t| round(t, 1.5)).collect();
    let curve = cumulative_regret(&gap, 2.0);
    for (t, r) in curve.iter().enumerate() {
        assert!((r - 0.5 * (t + 1) as f64).abs() < 1e-12);
    }
}

#[test]
fn first_round_maximizes_the_bonus() {
    let mut cfg = small_config();
    cfg.selector.kind = Selector::Exact;
    let inst = Instance::build(&cfg, 5).unwrap();
    let rec = run_grab_ucb(&cfg, &inst, false).unwrap();
    // A fresh learner has V = mu I, so the bonus is c |x| / sqrt(mu).
    let norms = |s: &[usize]| inst.features.tr_mul(ActionSignal::binary(12, s).unwrap().values()).norm();
    let mut best = 0.0f64;
    for a in 0..12 {
        for b in (a + 1)..12 {
            best = best.max(norms(&[a, b]));
        }
    }
    assert!((norms(&rec.rounds[0].support) - best).abs() < 1e-12);
}

#[test]
fn noiseless_polynomial_truth_is_learned_and_exploited() {
    let mut cfg = small_config();
    polynomial(&mut cfg, vec![1.0, -0.3, 0.05]);
    cfg.observation.noise_var = 0.0;
    cfg.run.horizon = 100;
    for seed in 0..5 {
        let inst = Instance::build(&cfg, seed).unwrap();
        let mut run = GrabUcbRun::new(&cfg, &inst, false).unwrap();
        let rounds: Vec<_> = (0..100).map(|_| run.step().unwrap()).collect();
        assert!(run.oracle().exact);
        let tail = &rounds[80..];
        assert!(tail.iter().all(|r| r.regret.abs() < 1e-9), "seed {seed}");
        let err = (run.state().alpha_hat().as_vector() - DVector::from_vec(vec![1.0, -0.3, 0.05])).norm();
        // Ridge bias bound mu |V^-1| |alpha|.
        let vinv = run.state().v().clone().try_inverse().unwrap();
        let bound = cfg.learner.mu * vinv.norm() * (1.0f64 + 0.09 + 0.0025).sqrt();
        assert!(err <= bound + 1e-12, "{err} > {bound}");
    }
}

#[test]
fn regret_is_monotone_with_an_exact_oracle() {
    let cfg = small_config();
    for seed in 0..5 {
        let inst = Instance::build(&cfg, seed).unwrap();
        for rec in [
            run_grab_ucb(&cfg, &inst, false).unwrap(),
            run_grab_ucb(&cfg, &inst, true).unwrap(),
            run_aal(&cfg, &inst, 10).unwrap(),
        ] {
            assert!(rec.oracle.exact);
            assert!(rec.rounds.iter().all(|r| r.regret >= -1e-9));
            let curve = rec.cumulative_regret();
            assert!(curve.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        }
    }
}

#[test]
fn baseline_plays_a_fixed_arm_after_exploring() {
    let cfg = small_config();
    let inst = Instance::build(&cfg, 2).unwrap();
    let rec = run_aal(&cfg, &inst, 10).unwrap();
    let arm = &rec.rounds[10].support;
    assert!(rec.rounds[10..].iter().all(|r| &r.support == arm));
    assert!(rec.rounds[..10].iter().all(|r| r.learner.is_some()));
    assert!(rec.rounds[10..].iter().all(|r| r.learner.is_none()));
    assert!(run_aal(&cfg, &inst, 60).is_err());
}

#[test]
fn noiseless_baseline_exploits_the_oracle_arm() {
    let mut cfg = small_config();
    polynomial(&mut cfg, vec![1.0, -0.3, 0.05]);
    cfg.observation.noise_var = 0.0;
    for seed in 0..5 {
        let inst = Instance::build(&cfg, seed).unwrap();
        let rec = run_aal(&cfg, &inst, 10).unwrap();
        let arm = &rec.rounds[10];
        assert!((arm.mean_reward - rec.oracle.reward).abs() < 1e-9, "seed {seed}");
    }
}

#[test]
fn longer_exploration_finds_better_arms_for_local_processes() {
    let mut cfg = ExperimentConfig::default();
    cfg.kernel = KernelSpec::Diffusion { tau: 0.5 };
    let (mut short, mut long) = (0.0, 0.0);
    for seed in 0..50 {
        let inst = Instance::build(&cfg, seed).unwrap();
        short += run_aal(&cfg, &inst, 10).unwrap().rounds[99].mean_reward;
        long += run_aal(&cfg, &inst, 20).unwrap().rounds[99].mean_reward;
    }
    assert!(long >= short, "long {long} short {short}");
}

#[test]
fn seeds_are_isolated_and_runs_reproducible() {
    let cfg = small_config();
    let a = Instance::build_with_noise_seed(&cfg, 4, 1).unwrap();
    let b = Instance::build_with_noise_seed(&cfg, 4, 2).unwrap();
    assert_eq!(a.network.graph(), b.network.graph());
    assert_eq!(a.env.mask(), b.env.mask());
    let ra = run_grab_ucb(&cfg, &a, false).unwrap();
    let rb = run_grab_ucb(&cfg, &b, false).unwrap();
    assert_ne!(ra.rounds, rb.rounds);
    let again = run_grab_ucb(&cfg, &Instance::build_with_noise_seed(&cfg, 4, 1).unwrap(), false).unwrap();
    assert_eq!(ra.rounds, again.rounds);
}

#[test]
fn coefficient_and_noise_rules() {
    let mut cfg = small_config();
    cfg.observation.noise_var = 0.04;
    cfg.learner.r = NoiseBound::Rule(NoiseRule::Aggregate);
    let inst = Instance::build(&cfg, 1).unwrap();
    assert!((inst.hyper.r - 12f64.sqrt() * 0.2).abs() < 1e-12);
    cfg.learner.r = NoiseBound::Rule(NoiseRule::PerNode);
    cfg.learner.s = CoefficientBound::Fixed(3.0);
    let inst = Instance::build(&cfg, 1).unwrap();
    assert_eq!((inst.hyper.r, inst.hyper.s), (0.2, 3.0));
    // The dictionary fit reproduces a polynomial truth exactly.
    polynomial(&mut cfg, vec![0.8, -0.2, 0.01]);
    let inst = Instance::build(&cfg, 1).unwrap();
    let fit = kernel_projection(&inst.env, 1e-9).unwrap();
    assert!((fit.as_vector() - DVector::from_vec(vec![0.8, -0.2, 0.01])).norm() < 1e-6);
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = small_config();
    cfg.selector.t0 = 13;
    assert!(cfg.validate().is_err());
    let mut cfg = small_config();
    cfg.learner.delta = 1.0;
    assert!(cfg.validate().is_err());
    let mut cfg = small_config();
    cfg.run.aal_long = cfg.run.horizon;
    assert!(cfg.validate().is_err());
    let mut cfg = small_config();
    cfg.kernel = KernelSpec::Polynomial { alpha: vec![1.0] };
    assert!(cfg.validate().is_err());
    let mut cfg = small_config();
    cfg.kernel = KernelSpec::Diffusion { tau: 0.0 };
    assert!(cfg.validate().is_err());
}

#[test]
fn noiseless_error_study_recovers_polynomial_kernel() {
    let cfg = ErrorStudyConfig {
        graph: GraphSpec::Ba { n: 30, m0: 5, m: 2 },
        kernel: KernelSpec::Polynomial {
            alpha: vec![1.0, -0.2, 0.01],
        },
        mask_fraction: 1.0,
        noise_var: 0.0,
        k: 3,
        mu: 1e-8,
        t0: 3,
        n_train: 20,
        n_test: 10,
    };
    let out = error_study(&cfg, 1).unwrap();
    assert!(out.normalized_error <= 1e-6, "{}", out.normalized_error);
}

#[test]
fn linear_objective_oracle_matches_enumeration_of_weights() {
    let cfg = small_config();
    let inst = Instance::build(&cfg, 9).unwrap();
    let obj = UcbObjective::linear(inst.env.reward_weights().clone()).unwrap();
    let exact = exact_select(&obj, 2, 1000).unwrap();
    let mut w: Vec<(f64, usize)> = inst.env.reward_weights().iter().copied().zip(0..).collect();
    w.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut top = vec![w[0].1, w[1].1];
    top.sort_unstable();
    assert_eq!(exact.support, top);
}
