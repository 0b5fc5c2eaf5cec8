use chrono::Timelike;
use serde::{Deserialize, Serialize};

use super::{energy_balance, translate_action, ActionFlows, BatteryState, EnvError, ForecastTable};
use crate::ktu::ForecastDistribution;
use crate::market::{clear_double_auction, compute_sdr, internal_prices, settle, Order, PriceSignal, Settlement, Side};
use crate::profiles::{EnergyProfile, ProsumerKind};
use crate::rewards::{reward, AgentAction, AgentObservation, TariffCalendar, TariffPeriod};

/// Tolerance for the per-step conservation checks.
pub const CONSERVATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSetup {
    pub id: String,
    pub kind: ProsumerKind,
    /// State at the start of every episode.
    pub battery: BatteryState,
}

/// Mutable part of the simulation. Everything else lives in [`Environment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Steps taken since reset.
    pub step: u64,
    /// Day counter, incremented when the hour wraps.
    pub day: u64,
    pub hour: u32,
    /// Profile index of the current hour (shared by all agents).
    pub cursor: usize,
    pub batteries: Vec<BatteryState>,
    pub operator_spread: f64,
}

/// One agent's books for one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub agent: String,
    pub action: AgentAction,
    pub observation: AgentObservation<f64>,
    pub load: f64,
    pub generation: f64,
    pub flows: ActionFlows,
    pub soc_before: f64,
    pub soc_after: f64,
    pub soc_pct_after: f64,
    pub p2p_bought: f64,
    pub p2p_sold: f64,
    /// Grid energy including residual orders and direct fallback.
    pub grid_import: f64,
    pub grid_export: f64,
    /// Paid for energy: grid imports and internal purchases.
    pub cost: f64,
    /// Received for energy: grid exports and internal sales.
    pub revenue: f64,
    pub reward: f64,
}

impl AgentStep {
    pub fn cash(&self) -> f64 {
        self.revenue - self.cost
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub hour: u32,
    pub period: TariffPeriod,
    pub agents: Vec<AgentStep>,
    pub settlement: Settlement<f64>,
    pub prices: PriceSignal<f64>,
    pub supply: f64,
    pub demand: f64,
}

impl StepResult {
    pub fn rewards(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.reward).collect()
    }
}

/// Static description of a community run: agents, aligned profiles,
/// precomputed forecasts, tariff and market switch.
#[derive(Debug, Clone)]
pub struct Environment {
    agents: Vec<AgentSetup>,
    profiles: Vec<EnergyProfile>,
    forecasts: ForecastTable,
    calendar: TariffCalendar,
    p2p_enabled: bool,
}

impl Environment {
    pub fn new(
        agents: Vec<AgentSetup>,
        profiles: Vec<EnergyProfile>,
        forecasts: ForecastTable,
        calendar: TariffCalendar,
        p2p_enabled: bool,
    ) -> Result<Self, EnvError> {
        if agents.is_empty() {
            return Err(EnvError::Misaligned("no agents".into()));
        }
        if agents.len() != profiles.len() || forecasts.n_agents() != agents.len() {
            return Err(EnvError::Misaligned(format!(
                "{} agents, {} profiles, {} forecast series",
                agents.len(),
                profiles.len(),
                forecasts.n_agents()
            )));
        }
        let (start, len) = (profiles[0].start, profiles[0].len());
        for (a, p) in agents.iter().zip(&profiles) {
            if p.start != start || p.len() != len {
                return Err(EnvError::Misaligned(format!("profile {} does not match the first profile's span", p.prosumer_id)));
            }
            if a.id != p.prosumer_id {
                return Err(EnvError::Misaligned(format!("agent {} paired with profile {}", a.id, p.prosumer_id)));
            }
            a.battery.validate()?;
        }
        calendar.validate()?;
        Ok(Self { agents, profiles, forecasts, calendar, p2p_enabled })
    }

    pub fn agents(&self) -> &[AgentSetup] {
        &self.agents
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn profiles(&self) -> &[EnergyProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forecasts(&self) -> &ForecastTable {
        &self.forecasts
    }

    pub fn calendar(&self) -> &TariffCalendar {
        &self.calendar
    }

    pub fn p2p_enabled(&self) -> bool {
        self.p2p_enabled
    }

    /// Same community with the market switched on or off.
    pub fn with_p2p(&self, enabled: bool) -> Self {
        Self { p2p_enabled: enabled, ..self.clone() }
    }

    /// Largest hourly load or generation of an agent, for state scaling.
    pub fn energy_scale(&self, agent: usize) -> f64 {
        let p = &self.profiles[agent];
        p.load.iter().chain(&p.generation).fold(0.0_f64, |m, &x| m.max(x)).max(1e-6)
    }

    /// Checks that `hours` steps from `start` stay inside the profiles and
    /// that a forecast exists for every visited hour and the one after.
    pub fn check_span(&self, start: usize, hours: usize) -> Result<(), EnvError> {
        if hours == 0 || start + hours >= self.len() {
            return Err(EnvError::InvalidSpan(format!("{hours} hours from {start} do not fit {} profile hours", self.len())));
        }
        for i in 0..self.n_agents() {
            for t in start..=start + hours {
                if self.forecasts.get(i, t).is_none() {
                    return Err(EnvError::InvalidSpan(format!(
                        "no forecast for agent {} at hour {t}; the forecaster needs more history or future",
                        self.agents[i].id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn reset(&self, start: usize) -> Result<WorldState, EnvError> {
        if start >= self.len() {
            return Err(EnvError::InvalidSpan(format!("start {start} beyond {} hours", self.len())));
        }
        Ok(WorldState {
            step: 0,
            day: 0,
            hour: self.profiles[0].timestamp(start).hour(),
            cursor: start,
            batteries: self.agents.iter().map(|a| a.battery).collect(),
            operator_spread: 0.0,
        })
    }

    pub fn forecast(&self, world: &WorldState, agent: usize) -> Result<&ForecastDistribution<f64>, EnvError> {
        self.forecasts.get(agent, world.cursor).ok_or(EnvError::MissingForecast { agent, hour: world.cursor })
    }

    /// What the reward engine sees for `agent` before it acts.
    pub fn observe(&self, world: &WorldState, agent: usize) -> Result<AgentObservation<f64>, EnvError> {
        let p = &self.profiles[agent];
        let t = world.cursor;
        let f = self.forecast(world, agent)?;
        let soc = world.batteries[agent].soc_pct();
        Ok(AgentObservation::from_forecast(p.load[t], p.generation[t], soc, world.hour, &self.calendar, f))
    }

    /// One synchronous step: translate actions, price and clear the market,
    /// settle, score and advance. Pure in `(world, actions)`.
    pub fn step(&self, world: &WorldState, actions: &[AgentAction]) -> Result<(WorldState, StepResult), EnvError> {
        if actions.len() != self.n_agents() {
            return Err(EnvError::Misaligned(format!("{} actions for {} agents", actions.len(), self.n_agents())));
        }
        let t = world.cursor;
        if t >= self.len() {
            return Err(EnvError::InvalidSpan(format!("cursor {t} past the end of the profiles")));
        }
        let mut next = world.clone();
        let mut flows = Vec::with_capacity(actions.len());
        let mut observations = Vec::with_capacity(actions.len());
        for (i, &action) in actions.iter().enumerate() {
            observations.push(self.observe(world, i)?);
            let p = &self.profiles[i];
            let e = energy_balance(p.generation[t], p.load[t]);
            let (b, f) = translate_action(action, e, world.batteries[i]);
            next.batteries[i] = b;
            flows.push(f);
        }

        let side_total = |side: Side| -> f64 { flows.iter().filter_map(|f| f.order).filter(|o| o.0 == side).map(|o| o.1).sum() };
        let (supply, demand) = (side_total(Side::Sell), side_total(Side::Buy));
        let sdr = compute_sdr(supply, demand)?;
        let prices = internal_prices(sdr, self.calendar.buy_price_at(world.hour), self.calendar.lambda_sell)?;
        let mut buys = Vec::new();
        let mut sells = Vec::new();
        for (a, f) in self.agents.iter().zip(&flows) {
            match f.order {
                Some((Side::Buy, q)) => buys.push(Order::buy(a.id.clone(), q, prices.ibp)?),
                Some((Side::Sell, q)) => sells.push(Order::sell(a.id.clone(), q, prices.isp)?),
                None => {}
            }
        }
        let mut settlement = if self.p2p_enabled {
            let c = clear_double_auction(&buys, &sells, &prices);
            settle(c.trades, &c.residual_buys, &c.residual_sells, &prices)
        } else {
            settle(Vec::new(), &buys, &sells, &prices)
        };
        for (a, f) in self.agents.iter().zip(&flows) {
            settlement.add_grid_flow(&a.id, f.grid_import, f.grid_export);
        }

        let mut agents = Vec::with_capacity(actions.len());
        for (i, (&action, f)) in actions.iter().zip(flows).enumerate() {
            let id = &self.agents[i].id;
            let p = &self.profiles[i];
            let paid: f64 = settlement.trades.iter().filter(|tr| &tr.buyer_id == id).map(|tr| tr.quantity * tr.buyer_price).sum();
            let received: f64 = settlement.trades.iter().filter(|tr| &tr.seller_id == id).map(|tr| tr.quantity * tr.seller_price).sum();
            let grid_import = settlement.grid_purchase(id);
            let grid_export = settlement.grid_sale(id);
            agents.push(AgentStep {
                agent: id.clone(),
                action,
                observation: observations[i],
                load: p.load[t],
                generation: p.generation[t],
                flows: f,
                soc_before: world.batteries[i].soc,
                soc_after: next.batteries[i].soc,
                soc_pct_after: next.batteries[i].soc_pct(),
                p2p_bought: settlement.p2p_bought(id),
                p2p_sold: settlement.p2p_sold(id),
                grid_import,
                grid_export,
                cost: grid_import * prices.lambda_buy + paid,
                revenue: grid_export * prices.lambda_sell + received,
                reward: reward(action, &observations[i]),
            });
        }
        let result = StepResult { hour: world.hour, period: self.calendar.period(world.hour), agents, settlement, prices, supply, demand };
        check_invariants(&result, &next.batteries)?;

        next.step += 1;
        next.cursor += 1;
        next.hour = (world.hour + 1) % 24;
        if next.hour == 0 {
            next.day += 1;
        }
        next.operator_spread += result.settlement.operator_spread;
        Ok((next, result))
    }
}

/// Energy balance per agent, cash balance across the community and SoC bounds.
pub fn check_invariants(result: &StepResult, batteries: &[BatteryState]) -> Result<(), EnvError> {
    for (a, b) in result.agents.iter().zip(batteries) {
        let inflow = a.generation + a.flows.discharge + a.p2p_bought + a.grid_import;
        let outflow = a.load + a.flows.charge + a.p2p_sold + a.grid_export;
        if (inflow - outflow).abs() > CONSERVATION_TOL {
            return Err(EnvError::Invariant(format!("agent {}: energy in {inflow} != out {outflow} ({:?})", a.agent, a.action)));
        }
        if !(b.soc >= 0.0 && b.soc <= b.capacity + CONSERVATION_TOL) {
            return Err(EnvError::Invariant(format!("agent {}: soc {} outside [0, {}]", a.agent, b.soc, b.capacity)));
        }
        let cash = result.settlement.cash_flow(&a.agent);
        if (cash - a.cash()).abs() > CONSERVATION_TOL {
            return Err(EnvError::Invariant(format!("agent {}: settlement cash {cash} != books {}", a.agent, a.cash())));
        }
    }
    let agents_cash: f64 = result.agents.iter().map(AgentStep::cash).sum();
    let residual = agents_cash + result.settlement.operator_spread + result.settlement.grid_cash();
    if residual.abs() > CONSERVATION_TOL {
        return Err(EnvError::Invariant(format!("cash does not balance: residual {residual}")));
    }
    Ok(())
}
