use robustq::environments::{
    build_baird, build_random_env, cartpole_step, BairdSpec, CartPole, CartPoleParams,
    CartPoleState, RandomEnvSpec,
};
use robustq::mdp::stationary_distribution;
use robustq::rng::stream;
use robustq::Policy;

#[test]
fn baird_uniform_behaviour_stationary_law() {
    // Action 0 spreads uniformly, action 1 jumps to the last state.
    let (mdp, _) = build_baird(&BairdSpec::default()).unwrap();
    let mu = stationary_distribution(&mdp, &Policy::uniform(6, 2), 1e-14).unwrap();
    for s in 0..6 {
        let state_mass = if s == 5 { 7.0 / 12.0 } else { 1.0 / 12.0 };
        for a in 0..2 {
            assert!((mu[s * 2 + a] - state_mass / 2.0).abs() < 1e-12);
        }
    }
}

#[test]
fn baird_rewards_depend_only_on_seed() {
    let a = build_baird(&BairdSpec {
        seed: 3,
        ..BairdSpec::default()
    })
    .unwrap()
    .0;
    let b = build_baird(&BairdSpec {
        seed: 3,
        discount: 0.5,
        ..BairdSpec::default()
    })
    .unwrap()
    .0;
    let c = build_baird(&BairdSpec {
        seed: 4,
        ..BairdSpec::default()
    })
    .unwrap()
    .0;
    assert_eq!(a.rewards(), b.rewards());
    assert_ne!(a.rewards(), c.rewards());
    assert!(a.rewards().iter().all(|r| (-0.05..=0.05).contains(r)));
}

#[test]
fn random_env_rewards_and_bad_coefficients() {
    let mdp = build_random_env(&RandomEnvSpec::default()).unwrap();
    assert!((mdp.reward(9, 2) + 10.09).abs() < 1e-12);
    assert!(build_random_env(&RandomEnvSpec {
        p: 0.2,
        q: 0.1,
        ..RandomEnvSpec::default()
    })
    .is_err());
}

#[test]
fn cartpole_first_step_from_rest() {
    let params = CartPoleParams::default();
    let rest = CartPoleState {
        x: 0.0,
        x_dot: 0.0,
        theta: 0.0,
        theta_dot: 0.0,
    };
    let (next, reward, done) = cartpole_step(&params, &rest, 1).unwrap();
    assert_eq!(reward, 1.0);
    assert!(!done);
    assert!((next.x_dot - 0.1951219512195122).abs() < 1e-15);
    assert!((next.theta_dot + 0.2926829268292683).abs() < 1e-15);
    let (left, _, _) = cartpole_step(&params, &rest, 0).unwrap();
    assert_eq!(left.x_dot, -next.x_dot);
}

#[test]
fn cartpole_falls_when_pushed_one_way() {
    let mut env = CartPole::new(CartPoleParams::default());
    env.reset(&mut stream(0, "reset"), 500);
    let mut steps = 0;
    loop {
        let (_, _, done, _) = env.step(1).unwrap();
        steps += 1;
        if done {
            break;
        }
        assert!(steps < 200);
    }
    assert!(env.is_done());
    assert!(env.step(1).is_err());
}
