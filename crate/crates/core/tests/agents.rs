use p2p_core::agents::*;
use p2p_core::optim::Optimizer;
use p2p_core::rewards::{AgentAction, N_ACTIONS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn net(seed: u64, dim: usize, hidden: usize) -> QNetwork<f64> {
    QNetwork::new(dim, hidden, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[test]
fn full_exploration_is_uniform() {
    let q = net(0, 7, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut counts = [0usize; N_ACTIONS];
    let n = 10_000;
    for _ in 0..n {
        counts[select_action(&q, &[0.3; 7], 1.0, &mut rng).unwrap().index()] += 1;
    }
    let expected = n as f64 / N_ACTIONS as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((N_ACTIONS - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 {chi2}, p {p}, counts {counts:?}");
}

#[test]
fn greedy_picks_max_and_breaks_ties_low() {
    let mut q = net(0, 7, 8);
    // zero the output layer so the bias alone sets the values
    for x in q.tensors[4].as_mut_slice() {
        *x = 0.0;
    }
    q.tensors[5].as_mut_slice()[3] = 5.0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        assert_eq!(select_action(&q, &[0.1; 7], 0.0, &mut rng).unwrap(), AgentAction::DischargeAndSell);
    }
    q.tensors[5].as_mut_slice()[3] = 0.0;
    assert_eq!(select_action(&q, &[0.1; 7], 0.0, &mut rng).unwrap(), AgentAction::ChargeAndBuy);
}

fn transition(state: Vec<f64>, action: usize, reward: f64, next: Vec<f64>, terminal: bool) -> Transition<f64> {
    Transition { state, action, reward, next_state: next, terminal }
}

#[test]
fn td_gradient_matches_finite_differences() {
    let q0 = net(3, 4, 5);
    let target = net(4, 4, 5);
    let t = transition(vec![0.5, -0.2, 0.8, 0.1], 2, 0.7, vec![0.1, 0.4, -0.3, 0.9], false);
    let gamma = 0.9;
    let y = 0.7 + gamma * target.q_values(&t.next_state).unwrap().into_iter().fold(f64::NEG_INFINITY, f64::max);
    let loss = |q: &QNetwork<f64>| 0.5 * (y - q.q_values(&t.state).unwrap()[2]).powi(2);

    let lr = 1e-3;
    let mut q1 = q0.clone();
    let mut opt = Optimizer::sgd(lr, &q1.tensors);
    td_update(&mut q1, &target, &[&t], gamma, &mut opt).unwrap();

    let h = 1e-6;
    for p in 0..q0.tensors.len() {
        for i in 0..q0.tensors[p].len() {
            let analytic = (q0.tensors[p].as_slice()[i] - q1.tensors[p].as_slice()[i]) / lr;
            let mut plus = q0.clone();
            plus.tensors[p].as_mut_slice()[i] += h;
            let mut minus = q0.clone();
            minus.tensors[p].as_mut_slice()[i] -= h;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            let rel = (fd - analytic).abs() / fd.abs().max(analytic.abs()).max(1e-6);
            assert!(rel < 1e-4, "tensor {p}[{i}]: fd {fd}, analytic {analytic}");
        }
    }
}

#[test]
fn zero_td_error_is_a_no_op() {
    let mut q = net(3, 4, 5);
    let target = net(4, 4, 5);
    let s = vec![0.2, 0.2, -0.1, 0.4];
    let next = vec![0.3, 0.1, 0.0, -0.2];
    let gamma = 0.95;
    let bootstrap = gamma * target.q_values(&next).unwrap().into_iter().fold(f64::NEG_INFINITY, f64::max);
    let r = q.q_values(&s).unwrap()[1] - bootstrap;
    let before = q.clone();
    let mut opt = Optimizer::sgd(0.1, &q.tensors);
    let loss = td_update(&mut q, &target, &[&transition(s, 1, r, next, false)], gamma, &mut opt).unwrap();
    assert!(loss < 1e-20);
    for (a, b) in q.tensors.iter().zip(&before.tensors) {
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn myopic_and_terminal_targets_are_the_reward() {
    let target = net(4, 4, 5);
    for (gamma, terminal) in [(0.0, false), (0.9, true)] {
        let mut q = net(3, 4, 5);
        let s = vec![0.1, 0.2, 0.3, 0.4];
        let q_sa = q.q_values(&s).unwrap()[0];
        let mut opt = Optimizer::sgd(0.0, &q.tensors);
        let loss = td_update(&mut q, &target, &[&transition(s, 0, 2.0, vec![1.0; 4], terminal)], gamma, &mut opt).unwrap();
        assert!((loss - 0.5 * (2.0 - q_sa).powi(2)).abs() < 1e-12);
    }
}

#[test]
fn empty_batch_is_rejected() {
    let mut q = net(3, 4, 5);
    let target = q.clone();
    let mut opt = Optimizer::sgd(0.1, &q.tensors);
    assert!(matches!(td_update(&mut q, &target, &[], 0.9, &mut opt), Err(AgentError::EmptyBatch)));
}

fn agent_cfg(sync: u64) -> LearnerConfig {
    LearnerConfig { hidden: 8, batch_size: 4, learning_starts: 4, target_sync_period: sync, seed: 7, ..LearnerConfig::default() }
}

#[test]
fn target_sync_copies_and_isolates() {
    let mut agent = DqnAgent::<f64>::new(agent_cfg(10), 3).unwrap();
    let states = [[0.1, 0.2, 0.3], [0.9, -0.4, 0.0]];
    for i in 0..9 {
        agent.observe(transition(vec![0.1 * i as f64; 3], i % 8, 1.0, vec![0.2; 3], false)).unwrap();
    }
    // updates have happened, target not yet synced
    assert!(agent.updates() > 0);
    assert_ne!(agent.q(), agent.target());
    let frozen = agent.target().clone();
    agent.observe(transition(vec![0.0; 3], 0, 1.0, vec![0.2; 3], false)).unwrap();
    assert_eq!(agent.q(), agent.target());
    for s in &states {
        assert_eq!(agent.q().q_values(s).unwrap(), agent.target().q_values(s).unwrap());
    }
    assert_ne!(&frozen, agent.target());
    agent.observe(transition(vec![0.0; 3], 0, 1.0, vec![0.2; 3], false)).unwrap();
    assert_ne!(agent.q(), agent.target());
}

#[test]
fn sync_every_step_keeps_target_one_update_behind() {
    let mut agent = DqnAgent::<f64>::new(agent_cfg(1), 3).unwrap();
    for i in 0..6 {
        agent.observe(transition(vec![0.1 * i as f64; 3], i % 8, 1.0, vec![0.2; 3], false)).unwrap();
        assert_eq!(agent.q(), agent.target());
    }
}

#[test]
fn identical_seeds_give_identical_trajectories() {
    let run = || {
        let mut agent = DqnAgent::<f64>::new(agent_cfg(5), 3).unwrap();
        let mut actions = Vec::new();
        for i in 0..40 {
            let s = vec![(i as f64 * 0.3).sin(), (i as f64 * 0.7).cos(), 0.5];
            let a = agent.act_explore(&s).unwrap();
            actions.push(a);
            agent.observe(transition(s, a.index(), (i % 3) as f64, vec![0.0, 0.1, 0.2], i % 10 == 9)).unwrap();
        }
        (actions, agent.q().clone())
    };
    assert_eq!(run(), run());
}
