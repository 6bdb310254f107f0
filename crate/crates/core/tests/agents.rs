mod common;

use proptest::prelude::*;
use robustq::agents::{AgentSpec, Init, RhoMode, RhoSchedule, SelectorDraw, Variant};
use robustq::mdp::{sample_step, solve_optimal_q};
use robustq::rng::stream;
use robustq::simulate::Trajectory;
use robustq::{FeatureMap, Policy, Transition};

fn build(
    spec: &AgentSpec,
    features: &FeatureMap,
    actions: usize,
    gamma: f64,
) -> robustq::agents::Agent {
    spec.build(features.dim(), actions, gamma, &mut stream(0, "init"))
        .unwrap()
}

#[test]
fn first_watkins_update_is_alpha_times_reward() {
    let f = FeatureMap::canonical(3, 2);
    let mut agent = build(&AgentSpec::new(Variant::Watkins, 1, 0.3, 100.0), &f, 2, 0.9);
    let alpha = agent.current_alpha();
    agent
        .step(&Transition::new(1, 1, 2.0, 0), &f, &mut stream(0, "sel"))
        .unwrap();
    let theta = agent.estimate();
    assert!((theta[3] - alpha * 2.0).abs() < 1e-15);
    assert!(theta.iter().enumerate().all(|(i, &v)| i == 3 || v == 0.0));
    assert_eq!(agent.step_counter(), 1);
}

#[test]
fn every_variant_learns_the_reference_mdp() {
    let mdp = common::reference_mdp();
    let f = common::reference_features();
    let q_star = solve_optimal_q(&mdp, 1e-13);
    let behavior = Policy::uniform(5, 2);
    for v in Variant::ALL {
        if v == Variant::TwoRaLinearized {
            continue;
        }
        let spec =
            AgentSpec::new(v, 4, 0.1, 2e4).with_rho(RhoSchedule::new(0.1, 100.0, RhoMode::Linear));
        let mut agent = build(&spec, &f, 2, mdp.discount());
        let mut env = stream(3, "env");
        let mut sel = stream(3, "agent");
        let mut traj = Trajectory::start(&mdp, &behavior, &mut env);
        traj.train(&mut agent, &f, 300_000, &mut env, &mut sel)
            .unwrap();
        let est = agent.estimate();
        let err = est
            .iter()
            .zip(&q_star)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if v == Variant::Maxmin {
            // The min over copies biases every entry downward.
            assert!(est.iter().zip(&q_star).all(|(a, b)| a < b));
            assert!(err < 0.5, "maxmin: sup error {err}");
        } else {
            assert!(err < 0.15, "{}: sup error {err}", v.name());
        }
    }
}

#[test]
fn json_round_trip_resumes_identically() {
    let mdp = common::reference_mdp();
    let f = common::reference_features();
    let spec = AgentSpec::new(Variant::TwoRa, 3, 0.1, 1e3)
        .with_rho(RhoSchedule::new(0.5, 10.0, RhoMode::Quadratic))
        .with_init(
            Init::Uniform {
                low: 0.0,
                high: 1.0,
            },
            false,
        );
    let mut a = build(&spec, &f, 2, 0.8);
    let behavior = Policy::uniform(5, 2);
    let mut env = stream(1, "env");
    let mut sel = stream(1, "agent");
    let mut traj = Trajectory::start(&mdp, &behavior, &mut env);
    traj.train(&mut a, &f, 5_000, &mut env, &mut sel).unwrap();
    let mut b = robustq::agents::Agent::from_json(&a.to_json()).unwrap();
    assert_eq!(a.digest(), b.digest());
    let (mut env_b, mut sel_b) = (env.clone(), sel.clone());
    let mut traj_b = traj.clone();
    traj.train(&mut a, &f, 5_000, &mut env, &mut sel).unwrap();
    traj_b
        .train(&mut b, &f, 5_000, &mut env_b, &mut sel_b)
        .unwrap();
    assert_eq!(a.thetas(), b.thetas());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// A single copy with a zero radius is ordinary Q-learning.
    #[test]
    fn twora_with_one_copy_and_zero_radius_is_watkins(seed in 0u64..500, steps in 1usize..400) {
        let mdp = common::small_mdp(4, 3, seed, 0.9);
        let f = FeatureMap::canonical(4, 3);
        let behavior = Policy::uniform(4, 3);
        let mut w = build(&AgentSpec::new(Variant::Watkins, 1, 0.2, 50.0), &f, 3, 0.9);
        let mut r = build(
            &AgentSpec::new(Variant::TwoRa, 1, 0.2, 50.0).with_rho(RhoSchedule::zero()),
            &f, 3, 0.9,
        );
        let mut rng = stream(seed, "env");
        let mut s = 0;
        for _ in 0..steps {
            let a = behavior.sample_action(s, &mut rng);
            let t = sample_step(&mdp, s, a, &mut rng);
            w.step_selected(&t, &f, SelectorDraw(0)).unwrap();
            r.step_selected(&t, &f, SelectorDraw(0)).unwrap();
            s = t.next_state;
        }
        prop_assert_eq!(w.estimate(), r.estimate());
    }

    /// Only the selected copy moves.
    #[test]
    fn twora_updates_one_copy(pick in 0usize..5, reward in -3.0f64..3.0) {
        let f = FeatureMap::canonical(2, 2);
        let spec = AgentSpec::new(Variant::TwoRa, 5, 0.1, 10.0)
            .with_rho(RhoSchedule::constant(0.3))
            .with_init(Init::Uniform { low: -1.0, high: 1.0 }, false);
        let mut agent = build(&spec, &f, 2, 0.7);
        let before = agent.thetas().to_vec();
        agent.step_selected(&Transition::new(0, 1, reward, 1), &f, SelectorDraw(pick)).unwrap();
        for (k, (old, new)) in before.iter().zip(agent.thetas()).enumerate() {
            if k == pick {
                prop_assert!(old[1] != new[1] || reward == 0.0);
                prop_assert!(old.iter().zip(new).enumerate().all(|(i, (a, b))| i == 1 || a == b));
            } else {
                prop_assert_eq!(old, new);
            }
        }
    }
}
