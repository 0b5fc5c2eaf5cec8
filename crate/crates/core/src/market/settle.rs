//! Grid fallback and per-agent cash accounting.

use std::collections::BTreeMap;

use super::{Order, PriceSignal, Trade};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Settlement<T> {
    pub trades: Vec<Trade<T>>,
    /// kWh bought from the grid at `lambda_buy`, per agent.
    pub grid_purchases: BTreeMap<String, T>,
    /// kWh exported to the grid at `lambda_sell`, per agent.
    pub grid_sales: BTreeMap<String, T>,
    /// Net cash per agent: receipts positive, payments negative.
    pub cash_flows: BTreeMap<String, T>,
    /// Buyer payments minus seller receipts on internal trades.
    pub operator_spread: T,
    pub prices: PriceSignal<T>,
}

impl<T: Scalar> Settlement<T> {
    fn lookup(map: &BTreeMap<String, T>, agent: &str) -> T {
        map.get(agent).copied().unwrap_or_else(T::zero)
    }

    pub fn grid_purchase(&self, agent: &str) -> T {
        Self::lookup(&self.grid_purchases, agent)
    }

    pub fn grid_sale(&self, agent: &str) -> T {
        Self::lookup(&self.grid_sales, agent)
    }

    pub fn cash_flow(&self, agent: &str) -> T {
        Self::lookup(&self.cash_flows, agent)
    }

    pub fn p2p_bought(&self, agent: &str) -> T {
        self.trades.iter().filter(|t| t.buyer_id == agent).map(|t| t.quantity).sum()
    }

    pub fn p2p_sold(&self, agent: &str) -> T {
        self.trades.iter().filter(|t| t.seller_id == agent).map(|t| t.quantity).sum()
    }

    /// Grid operator income: imports billed minus exports paid.
    pub fn grid_cash(&self) -> T {
        let bought: T = self.grid_purchases.values().copied().sum();
        let sold: T = self.grid_sales.values().copied().sum();
        bought * self.prices.lambda_buy - sold * self.prices.lambda_sell
    }

    /// Adds energy that bypasses the market (imbalance sent straight to the grid).
    pub fn add_grid_flow(&mut self, agent: &str, import: T, export: T) {
        if import > T::zero() {
            *self.grid_purchases.entry(agent.to_owned()).or_insert_with(T::zero) += import;
            *self.cash_flows.entry(agent.to_owned()).or_insert_with(T::zero) -= import * self.prices.lambda_buy;
        }
        if export > T::zero() {
            *self.grid_sales.entry(agent.to_owned()).or_insert_with(T::zero) += export;
            *self.cash_flows.entry(agent.to_owned()).or_insert_with(T::zero) += export * self.prices.lambda_sell;
        }
    }
}

/// Residual bids are filled from the grid at `lambda_buy`, residual asks
/// exported at `lambda_sell`.
pub fn settle<T: Scalar>(trades: Vec<Trade<T>>, residual_buys: &[Order<T>], residual_sells: &[Order<T>], prices: &PriceSignal<T>) -> Settlement<T> {
    let mut s = Settlement {
        trades: Vec::new(),
        grid_purchases: BTreeMap::new(),
        grid_sales: BTreeMap::new(),
        cash_flows: BTreeMap::new(),
        operator_spread: T::zero(),
        prices: *prices,
    };
    for t in &trades {
        *s.cash_flows.entry(t.buyer_id.clone()).or_insert_with(T::zero) -= t.quantity * t.buyer_price;
        *s.cash_flows.entry(t.seller_id.clone()).or_insert_with(T::zero) += t.quantity * t.seller_price;
        s.operator_spread += t.quantity * (t.buyer_price - t.seller_price);
    }
    s.trades = trades;
    for o in residual_buys {
        s.add_grid_flow(&o.agent_id, o.quantity, T::zero());
    }
    for o in residual_sells {
        s.add_grid_flow(&o.agent_id, T::zero(), o.quantity);
    }
    s
}
