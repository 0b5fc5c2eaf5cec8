use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{EnvError, Environment, Policy, StepResult};
use crate::rewards::{AgentAction, TariffPeriod};

/// One row of the per-step log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub step: u64,
    pub hour: u32,
    pub agent: String,
    pub action: AgentAction,
    pub load: f64,
    pub generation: f64,
    /// State of charge after the step, percent.
    pub soc: f64,
    /// Internal trades, bought minus sold.
    pub trade_kwh: f64,
    /// Grid exchange, imports minus exports.
    pub grid_kwh: f64,
    pub reward: f64,
    pub isp: f64,
    pub ibp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeRow {
    pub step: u64,
    pub buyer: String,
    pub seller: String,
    pub quantity: f64,
    pub buyer_price: f64,
    pub seller_price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceRow {
    pub step: u64,
    pub hour: u32,
    pub supply: f64,
    pub demand: f64,
    pub sdr: f64,
    pub isp: f64,
    pub ibp: f64,
    pub lambda_buy: f64,
    pub lambda_sell: f64,
}

/// Per-agent totals of one episode.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AgentTotals {
    pub agent: String,
    pub cost_bought: f64,
    pub revenue_sold: f64,
    /// Grid imports during peak-tariff hours, kWh.
    pub peak_hour_grid_demand: f64,
    pub grid_imports: f64,
    pub grid_exports: f64,
    pub p2p_bought: f64,
    pub p2p_sold: f64,
    pub reward: f64,
}

impl AgentTotals {
    fn add(&mut self, other: &AgentTotals) {
        self.cost_bought += other.cost_bought;
        self.revenue_sold += other.revenue_sold;
        self.peak_hour_grid_demand += other.peak_hour_grid_demand;
        self.grid_imports += other.grid_imports;
        self.grid_exports += other.grid_exports;
        self.p2p_bought += other.p2p_bought;
        self.p2p_sold += other.p2p_sold;
        self.reward += other.reward;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub p2p_enabled: bool,
    pub start: usize,
    pub hours: usize,
    pub rows: Vec<StepRow>,
    pub trades: Vec<TradeRow>,
    pub prices: Vec<PriceRow>,
    pub totals: Vec<AgentTotals>,
}

impl EpisodeLog {
    fn new(env: &Environment, start: usize, hours: usize) -> Self {
        let totals = env.agents().iter().map(|a| AgentTotals { agent: a.id.clone(), ..AgentTotals::default() }).collect();
        Self { p2p_enabled: env.p2p_enabled(), start, hours, rows: Vec::new(), trades: Vec::new(), prices: Vec::new(), totals }
    }

    pub fn record(&mut self, step: u64, r: &StepResult) {
        for (a, tot) in r.agents.iter().zip(&mut self.totals) {
            self.rows.push(StepRow {
                step,
                hour: r.hour,
                agent: a.agent.clone(),
                action: a.action,
                load: a.load,
                generation: a.generation,
                soc: a.soc_pct_after,
                trade_kwh: a.p2p_bought - a.p2p_sold,
                grid_kwh: a.grid_import - a.grid_export,
                reward: a.reward,
                isp: r.prices.isp,
                ibp: r.prices.ibp,
            });
            tot.add(&AgentTotals {
                agent: String::new(),
                cost_bought: a.cost,
                revenue_sold: a.revenue,
                peak_hour_grid_demand: if r.period == TariffPeriod::P { a.grid_import } else { 0.0 },
                grid_imports: a.grid_import,
                grid_exports: a.grid_export,
                p2p_bought: a.p2p_bought,
                p2p_sold: a.p2p_sold,
                reward: a.reward,
            });
        }
        for t in &r.settlement.trades {
            self.trades.push(TradeRow {
                step,
                buyer: t.buyer_id.clone(),
                seller: t.seller_id.clone(),
                quantity: t.quantity,
                buyer_price: t.buyer_price,
                seller_price: t.seller_price,
            });
        }
        let p = &r.prices;
        self.prices.push(PriceRow {
            step,
            hour: r.hour,
            supply: r.supply,
            demand: r.demand,
            sdr: p.sdr,
            isp: p.isp,
            ibp: p.ibp,
            lambda_buy: p.lambda_buy,
            lambda_sell: p.lambda_sell,
        });
    }

    /// Community totals.
    pub fn community(&self) -> AgentTotals {
        let mut sum = AgentTotals { agent: "community".into(), ..AgentTotals::default() };
        for t in &self.totals {
            sum.add(t);
        }
        sum
    }

    pub fn write_steps_csv<W: Write>(&self, w: W) -> Result<(), EnvError> {
        write_rows(w, &self.rows)
    }

    pub fn write_trades_csv<W: Write>(&self, w: W) -> Result<(), EnvError> {
        write_rows(w, &self.trades)
    }

    pub fn write_prices_csv<W: Write>(&self, w: W) -> Result<(), EnvError> {
        write_rows(w, &self.prices)
    }

    /// Mean state of charge by hour of day, per agent.
    pub fn daily_soc_profile(&self) -> Vec<SocProfileRow> {
        let mut out = Vec::new();
        for tot in &self.totals {
            let mut sum = [0.0; 24];
            let mut n = [0usize; 24];
            for r in self.rows.iter().filter(|r| r.agent == tot.agent) {
                sum[r.hour as usize] += r.soc;
                n[r.hour as usize] += 1;
            }
            for h in 0..24 {
                if n[h] > 0 {
                    out.push(SocProfileRow { agent: tot.agent.clone(), hour: h as u32, mean_soc: sum[h] / n[h] as f64 });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocProfileRow {
    pub agent: String,
    pub hour: u32,
    pub mean_soc: f64,
}

pub fn write_rows<W: Write, R: Serialize>(w: W, rows: &[R]) -> Result<(), EnvError> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Simulates `hours` steps from profile hour `start` with one policy per agent.
pub fn run_episode(env: &Environment, start: usize, hours: usize, policies: &mut [Policy]) -> Result<EpisodeLog, EnvError> {
    if policies.len() != env.n_agents() {
        return Err(EnvError::Misaligned(format!("{} policies for {} agents", policies.len(), env.n_agents())));
    }
    env.check_span(start, hours)?;
    let mut world = env.reset(start)?;
    let mut log = EpisodeLog::new(env, start, hours);
    for _ in 0..hours {
        let mut actions = Vec::with_capacity(policies.len());
        for (i, p) in policies.iter_mut().enumerate() {
            let obs = env.observe(&world, i)?;
            actions.push(p.act(&obs, env.forecast(&world, i)?)?);
        }
        let (next, result) = env.step(&world, &actions)?;
        log.record(world.step, &result);
        world = next;
    }
    Ok(log)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryStat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single episode.
    pub std: f64,
}

impl SummaryStat {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Self::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiSummary {
    pub agent: String,
    pub cost_bought: SummaryStat,
    pub revenue_sold: SummaryStat,
    pub peak_hour_grid_demand: SummaryStat,
    pub grid_imports: SummaryStat,
    pub grid_exports: SummaryStat,
    pub p2p_traded: SummaryStat,
    pub reward: SummaryStat,
}

impl KpiSummary {
    fn from_totals(agent: &str, totals: &[AgentTotals]) -> Self {
        let stat = |f: fn(&AgentTotals) -> f64| SummaryStat::of(&totals.iter().map(f).collect::<Vec<_>>());
        Self {
            agent: agent.to_owned(),
            cost_bought: stat(|t| t.cost_bought),
            revenue_sold: stat(|t| t.revenue_sold),
            peak_hour_grid_demand: stat(|t| t.peak_hour_grid_demand),
            grid_imports: stat(|t| t.grid_imports),
            grid_exports: stat(|t| t.grid_exports),
            p2p_traded: stat(|t| t.p2p_bought),
            reward: stat(|t| t.reward),
        }
    }
}

/// Multi-episode KPI summary for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub scenario: String,
    pub policy: String,
    pub p2p_enabled: bool,
    pub episodes: usize,
    pub hours_per_episode: usize,
    pub community: KpiSummary,
    pub agents: Vec<KpiSummary>,
}

pub fn kpi_report(scenario: &str, policy: &str, logs: &[EpisodeLog]) -> Result<KpiReport, EnvError> {
    let first = logs.first().ok_or_else(|| EnvError::InvalidSpan("no episodes to report".into()))?;
    if logs.iter().any(|l| l.p2p_enabled != first.p2p_enabled || l.totals.len() != first.totals.len()) {
        return Err(EnvError::Misaligned("episodes mix scenarios".into()));
    }
    let community: Vec<_> = logs.iter().map(EpisodeLog::community).collect();
    let agents = first
        .totals
        .iter()
        .enumerate()
        .map(|(i, t)| KpiSummary::from_totals(&t.agent, &logs.iter().map(|l| l.totals[i].clone()).collect::<Vec<_>>()))
        .collect();
    Ok(KpiReport {
        scenario: scenario.to_owned(),
        policy: policy.to_owned(),
        p2p_enabled: first.p2p_enabled,
        episodes: logs.len(),
        hours_per_episode: first.hours,
        community: KpiSummary::from_totals("community", &community),
        agents,
    })
}
