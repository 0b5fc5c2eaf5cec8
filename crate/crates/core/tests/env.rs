use chrono::NaiveDate;
use p2p_core::agents::{LearnerConfig, StateMode, StateSpec};
use p2p_core::env::*;
use p2p_core::profiles::{EnergyProfile, ProsumerKind};
use p2p_core::rewards::{reward, AgentAction, TariffCalendar};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HORIZON: usize = 3;

fn profile(id: &str, load: Vec<f64>, generation: Vec<f64>) -> EnergyProfile {
    EnergyProfile {
        prosumer_id: id.into(),
        start: NaiveDate::from_ymd_opt(2023, 6, 1).unwrap().and_hms_opt(0, 0, 0).unwrap(),
        load,
        generation,
    }
}

fn flat(id: &str, len: usize, load: f64, generation: f64) -> EnergyProfile {
    profile(id, vec![load; len], vec![generation; len])
}

fn setup(id: &str, battery: BatteryState) -> AgentSetup {
    AgentSetup { id: id.into(), kind: ProsumerKind::Household, battery }
}

fn env_of(profiles: Vec<EnergyProfile>, batteries: Vec<BatteryState>, p2p: bool) -> Environment {
    let agents = profiles.iter().zip(batteries).map(|(p, b)| setup(&p.prosumer_id, b)).collect();
    let noiseless = OracleNoise { relative: 0.0, absolute: 0.0 };
    let forecasts = ForecastTable::oracle(&profiles, HORIZON, noiseless, 0).unwrap();
    Environment::new(agents, profiles, forecasts, TariffCalendar::default(), p2p).unwrap()
}

fn house_battery(soc_fraction: f64) -> BatteryState {
    BatteryState::new(10.0, 5.0, 0.9, soc_fraction).unwrap()
}

#[test]
fn balanced_self_consumption_is_a_closed_system() {
    let env = env_of(vec![flat("a", 48, 2.0, 2.0), flat("b", 48, 1.0, 1.0)], vec![house_battery(0.5); 2], true);
    let world = env.reset(18).unwrap();
    let (_, r) = env.step(&world, &[AgentAction::SelfConsumption; 2]).unwrap();
    assert!(r.settlement.trades.is_empty());
    for a in &r.agents {
        assert_eq!((a.grid_import, a.grid_export, a.cost, a.revenue), (0.0, 0.0, 0.0, 0.0));
        // balanced within 0.1 at a peak hour
        assert_eq!(a.reward, 1.2);
        assert_eq!(a.reward, reward(AgentAction::SelfConsumption, &a.observation));
    }
}

#[test]
fn without_market_buyer_pays_retail() {
    let env = env_of(vec![flat("a", 48, 2.0, 0.0), flat("b", 48, 1.0, 1.0)], vec![BatteryState::none(); 2], false);
    let world = env.reset(0).unwrap();
    let (_, r) = env.step(&world, &[AgentAction::Buy, AgentAction::SelfConsumption]).unwrap();
    assert!(r.settlement.trades.is_empty());
    assert_eq!(r.agents[0].grid_import, 2.0);
    // 00:00 is night tariff
    assert!((r.agents[0].cost - 2.0 * 0.08).abs() < 1e-12);
}

#[test]
fn complementary_agents_trade_internally() {
    let env = env_of(vec![flat("s", 48, 0.0, 3.0), flat("d", 48, 3.0, 0.0)], vec![BatteryState::none(); 2], true);
    let world = env.reset(10).unwrap();
    let (_, r) = env.step(&world, &[AgentAction::Sell, AgentAction::Buy]).unwrap();
    assert_eq!(r.settlement.trades.len(), 1);
    assert!((r.settlement.trades[0].quantity - 3.0).abs() < 1e-12);
    for a in &r.agents {
        assert_eq!((a.grid_import, a.grid_export), (0.0, 0.0));
    }
    // supply equals demand: both internal prices sit at the feed-in price
    assert!((r.prices.isp - 0.05).abs() < 1e-12 && (r.prices.ibp - 0.05).abs() < 1e-12);
}

#[test]
fn time_and_day_advance() {
    let env = env_of(vec![flat("a", 72, 1.0, 0.0)], vec![BatteryState::none()], true);
    let mut world = env.reset(22).unwrap();
    assert_eq!(world.hour, 22);
    for expected in [(23, 0), (0, 1), (1, 1)] {
        world = env.step(&world, &[AgentAction::Buy]).unwrap().0;
        assert_eq!((world.hour, world.day), expected);
    }
    assert_eq!((world.step, world.cursor), (3, 25));
}

#[test]
fn all_zero_profiles_give_zero_kpis() {
    let env = env_of(vec![flat("a", 48, 0.0, 0.0), flat("b", 48, 0.0, 0.0)], vec![BatteryState::none(); 2], true);
    let log = run_episode(&env, 0, 24, &mut [Policy::RuleBased, Policy::Fixed(AgentAction::Buy)]).unwrap();
    let c = log.community();
    assert_eq!((c.cost_bought, c.revenue_sold, c.peak_hour_grid_demand, c.grid_imports), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn forced_buy_over_a_day_costs_the_tariff_sum() {
    let env = env_of(vec![flat("a", 48, 1.0, 0.0)], vec![BatteryState::none()], true);
    let log = run_episode(&env, 0, 24, &mut [Policy::Fixed(AgentAction::Buy)]).unwrap();
    let c = log.community();
    // 7 night hours, 2 pre-peak, 5 peak and 10 day hours
    let expected = 7.0 * 0.08 + 2.0 * 0.12 + 5.0 * 0.28 + 10.0 * 0.15;
    assert!((c.cost_bought - expected).abs() < 1e-12, "{} vs {expected}", c.cost_bought);
    assert!((c.peak_hour_grid_demand - 5.0).abs() < 1e-12);
    assert_eq!(log.rows.len(), 24);
}

#[test]
fn episode_needs_forecasts_for_the_whole_span() {
    let env = env_of(vec![flat("a", 30, 1.0, 0.0)], vec![BatteryState::none()], true);
    assert!(matches!(run_episode(&env, 0, 27, &mut [Policy::RuleBased]), Err(EnvError::InvalidSpan(_))));
    assert!(run_episode(&env, 0, 26, &mut [Policy::RuleBased]).is_ok());
}

fn random_env(rng: &mut ChaCha8Rng, n_agents: usize, len: usize, p2p: bool) -> Environment {
    let profiles = (0..n_agents)
        .map(|i| {
            let load = (0..len).map(|_| rng.random_range(0.0..6.0)).collect();
            let generation = (0..len).map(|t| if t % 24 < 6 { 0.0 } else { rng.random_range(0.0..6.0) }).collect();
            profile(&format!("agent-{i}"), load, generation)
        })
        .collect();
    let batteries = (0..n_agents)
        .map(|i| {
            if i % 3 == 2 {
                BatteryState::none()
            } else {
                BatteryState::new(rng.random_range(1.0..30.0), rng.random_range(0.5..10.0), rng.random_range(0.5..1.0), rng.random_range(0.0..1.0)).unwrap()
            }
        })
        .collect();
    env_of(profiles, batteries, p2p)
}

fn random_actions(rng: &mut ChaCha8Rng, n: usize) -> Vec<AgentAction> {
    (0..n).map(|_| AgentAction::ALL[rng.random_range(0..8)]).collect()
}

/// Independent recomputation of the books from the step records.
fn check_books(r: &StepResult, world: &WorldState) {
    for (a, b) in r.agents.iter().zip(&world.batteries) {
        let inflow = a.generation + a.flows.discharge + a.p2p_bought + a.grid_import;
        let outflow = a.load + a.flows.charge + a.p2p_sold + a.grid_export;
        assert!((inflow - outflow).abs() <= 1e-9, "{a:?}");
        assert!(b.soc >= 0.0 && b.soc <= b.capacity, "{b:?}");
        assert!(a.flows.charge <= b.max_charge + 1e-12 && a.flows.discharge <= b.max_discharge + 1e-12);
    }
    let paid: f64 = r.settlement.trades.iter().map(|t| t.quantity * t.buyer_price).sum();
    let received: f64 = r.settlement.trades.iter().map(|t| t.quantity * t.seller_price).sum();
    let imports: f64 = r.agents.iter().map(|a| a.grid_import).sum();
    let exports: f64 = r.agents.iter().map(|a| a.grid_export).sum();
    let agents: f64 = r.agents.iter().map(|a| a.revenue - a.cost).sum();
    let grid = imports * r.prices.lambda_buy - exports * r.prices.lambda_sell;
    assert!((agents + (paid - received) + grid).abs() <= 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    // 20 cases x 500 steps = 10^4 random-policy steps.
    #[test]
    fn random_policies_conserve_energy_and_cash(seed in any::<u64>(), n_agents in 2usize..6, p2p in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let env = random_env(&mut rng, n_agents, 520, p2p);
        let mut world = env.reset(0).unwrap();
        let mut spread = 0.0;
        for _ in 0..500 {
            let actions = random_actions(&mut rng, n_agents);
            let (next, r) = env.step(&world, &actions).unwrap();
            check_books(&r, &next);
            spread += r.settlement.operator_spread;
            world = next;
        }
        prop_assert!((world.operator_spread - spread).abs() < 1e-9);
    }

    #[test]
    fn market_never_costs_more_than_the_grid(seed in any::<u64>(), n_agents in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let on = random_env(&mut rng, n_agents, 130, true);
        let off = on.with_p2p(false);
        let (mut w_on, mut w_off) = (on.reset(0).unwrap(), off.reset(0).unwrap());
        for _ in 0..100 {
            let actions = random_actions(&mut rng, n_agents);
            let (n_on, r_on) = on.step(&w_on, &actions).unwrap();
            let (n_off, r_off) = off.step(&w_off, &actions).unwrap();
            prop_assert!(r_on.prices.lambda_sell <= r_on.prices.isp && r_on.prices.isp <= r_on.prices.ibp && r_on.prices.ibp <= r_on.prices.lambda_buy);
            for (a, b) in r_on.agents.iter().zip(&r_off.agents) {
                prop_assert!(a.cost <= b.cost + 1e-12, "{} {} vs {}", a.agent, a.cost, b.cost);
                prop_assert!(a.revenue >= b.revenue - 1e-12);
                prop_assert_eq!(a.reward, b.reward);
            }
            prop_assert_eq!(&n_on.batteries, &n_off.batteries);
            w_on = n_on;
            w_off = n_off;
        }
    }
}

#[test]
fn step_is_pure() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let env = random_env(&mut rng, 4, 60, true);
    let world = env.reset(7).unwrap();
    let actions = random_actions(&mut rng, 4);
    let (a, ra) = env.step(&world, &actions).unwrap();
    let (b, rb) = env.step(&world, &actions).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
}

#[test]
fn tampered_books_are_rejected() {
    let env = env_of(vec![flat("s", 48, 0.0, 3.0), flat("d", 48, 3.0, 0.0)], vec![house_battery(0.5); 2], true);
    let world = env.reset(10).unwrap();
    let (next, mut r) = env.step(&world, &[AgentAction::Sell, AgentAction::Buy]).unwrap();
    assert!(check_invariants(&r, &next.batteries).is_ok());
    r.agents[1].grid_import += 0.5;
    assert!(matches!(check_invariants(&r, &next.batteries), Err(EnvError::Invariant(_))));
}

fn small_community(p2p: bool) -> Environment {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    random_env(&mut rng, 2, 24 * 12, p2p)
}

#[test]
fn episodes_and_reports_are_reproducible() {
    let env = small_community(true);
    let run = |seed| {
        let mut policies = vec![Policy::Random(ChaCha8Rng::seed_from_u64(seed)), Policy::RuleBased];
        run_episode(&env, 24, 72, &mut policies).unwrap()
    };
    let (a, b) = (run(3), run(3));
    assert_eq!(a, b);
    let report = kpi_report("demo", "mixed", &[a.clone(), b]).unwrap();
    assert_eq!(report, kpi_report("demo", "mixed", &[a.clone(), a.clone()]).unwrap());
    assert_eq!(report.community.cost_bought.std, 0.0);
    let c = &report.community;
    assert!(c.cost_bought.mean >= 0.0 && c.revenue_sold.mean >= 0.0);
    assert!(c.peak_hour_grid_demand.mean <= c.grid_imports.mean + 1e-12);
    let mut csv = Vec::new();
    a.write_steps_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("step,hour,agent,action,load,generation,soc,trade_kwh,grid_kwh,reward,isp,ibp"));
    assert_eq!(text.lines().count(), 1 + 72 * 2);
    assert_eq!(a.daily_soc_profile().len(), 2 * 24);
}

fn learner(seed: u64) -> LearnerConfig {
    LearnerConfig {
        hidden: 16,
        batch_size: 16,
        learning_starts: 32,
        target_sync_period: 50,
        epsilon_decay_steps: 200,
        buffer_capacity: 1000,
        seed,
        ..LearnerConfig::default()
    }
}

fn training(total_steps: u64) -> TrainingConfig {
    TrainingConfig {
        total_steps,
        episode_hours: 48,
        train_start: 0,
        train_end: 24 * 8,
        eval_every: 96,
        eval_start: 24 * 9,
        eval_hours: 48,
        seed: 1,
    }
}

#[test]
fn training_is_deterministic_and_zero_budget_is_a_no_op() {
    let env = small_community(true);
    let setups: Vec<_> = (0..2)
        .map(|i| LearnerSetup { config: learner(i), state: StateSpec::new(StateMode::Summary, HORIZON, env.energy_scale(i as usize)) })
        .collect();
    let a = train_agents(&env, &setups, &training(300)).unwrap();
    let b = train_agents(&env, &setups, &training(300)).unwrap();
    assert_eq!(a.curve, b.curve);
    assert_eq!(a.eval, b.eval);
    assert_eq!(a.curve.last().unwrap().step, 300);
    assert!(a.agents.iter().all(|ag| ag.updates() > 0));

    let idle = train_agents(&env, &setups, &training(0)).unwrap();
    assert!(idle.curve.is_empty());
    for (i, ag) in idle.agents.iter().enumerate() {
        let fresh = p2p_core::agents::DqnAgent::<f64>::new(learner(i as u64), 7).unwrap();
        assert_eq!(ag.q(), fresh.q());
    }
}

#[test]
fn convergence_step_measure() {
    let pts = |rs: &[f64]| -> Vec<EvalPoint> {
        rs.iter().enumerate().map(|(i, &r)| EvalPoint { step: i as u64 * 10, agent: "a".into(), reward: r }).collect()
    };
    assert_eq!(steps_to_fraction(&pts(&[0.0, 5.0, 9.0, 10.0, 10.0]), 0.9, 1), Some(20));
    assert_eq!(steps_to_fraction(&pts(&[0.0, 4.0, 8.0, 9.5, 10.0, 12.0, 11.0]), 0.9, 2), Some(50));
    assert_eq!(steps_to_fraction(&pts(&[1.0]), 0.9, 2), None);
}
