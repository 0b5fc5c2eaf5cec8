//! Price-priority double auction.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{MarketError, PriceSignal};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Buy,
    Sell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Order<T> {
    pub agent_id: String,
    pub side: Side,
    /// kWh, strictly positive.
    pub quantity: T,
    /// Currency per kWh.
    pub price: T,
}

impl<T: Scalar> Order<T> {
    pub fn new(agent_id: impl Into<String>, side: Side, quantity: T, price: T) -> Result<Self, MarketError> {
        let agent_id = agent_id.into();
        if !(quantity > T::zero()) || !quantity.is_finite() {
            return Err(MarketError::InvalidOrder { agent_id, reason: format!("quantity {quantity} must be positive") });
        }
        if !(price >= T::zero()) || !price.is_finite() {
            return Err(MarketError::InvalidOrder { agent_id, reason: format!("price {price} must be non-negative") });
        }
        Ok(Self { agent_id, side, quantity, price })
    }

    pub fn buy(agent_id: impl Into<String>, quantity: T, price: T) -> Result<Self, MarketError> {
        Self::new(agent_id, Side::Buy, quantity, price)
    }

    pub fn sell(agent_id: impl Into<String>, quantity: T, price: T) -> Result<Self, MarketError> {
        Self::new(agent_id, Side::Sell, quantity, price)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Trade<T> {
    pub buyer_id: String,
    pub seller_id: String,
    pub quantity: T,
    pub buyer_price: T,
    pub seller_price: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clearing<T> {
    pub trades: Vec<Trade<T>>,
    pub residual_buys: Vec<Order<T>>,
    pub residual_sells: Vec<Order<T>>,
}

impl<T: Scalar> Clearing<T> {
    pub fn matched_volume(&self) -> T {
        self.trades.iter().map(|t| t.quantity).sum()
    }
}

/// Ties: larger quantity first, then agent id.
fn tie_break<T: Scalar>(a: &Order<T>, b: &Order<T>) -> Ordering {
    b.quantity.partial_cmp(&a.quantity).unwrap_or(Ordering::Equal).then_with(|| a.agent_id.cmp(&b.agent_id))
}

/// Bids sorted by descending price, asks by ascending price.
pub fn sort_books<T: Scalar>(buy_book: &mut [Order<T>], sell_book: &mut [Order<T>]) {
    buy_book.sort_by(|a, b| b.price.partial_cmp(&a.price).unwrap_or(Ordering::Equal).then_with(|| tie_break(a, b)));
    sell_book.sort_by(|a, b| a.price.partial_cmp(&b.price).unwrap_or(Ordering::Equal).then_with(|| tie_break(a, b)));
}

/// Walks both books while the best bid is at least the best ask. Every match
/// executes at the uniform community prices: buyers pay IBP, sellers receive
/// ISP. Unmatched quantity is returned in book order for grid settlement.
pub fn clear_double_auction<T: Scalar>(buy_book: &[Order<T>], sell_book: &[Order<T>], prices: &PriceSignal<T>) -> Clearing<T> {
    let mut bids = buy_book.to_vec();
    let mut asks = sell_book.to_vec();
    sort_books(&mut bids, &mut asks);

    let mut trades = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < bids.len() && j < asks.len() && bids[i].price >= asks[j].price {
        let q = bids[i].quantity.min(asks[j].quantity);
        trades.push(Trade {
            buyer_id: bids[i].agent_id.clone(),
            seller_id: asks[j].agent_id.clone(),
            quantity: q,
            buyer_price: prices.ibp,
            seller_price: prices.isp,
        });
        // One side is always exhausted exactly since q equals its quantity.
        bids[i].quantity -= q;
        asks[j].quantity -= q;
        if bids[i].quantity <= T::zero() {
            i += 1;
        }
        if asks[j].quantity <= T::zero() {
            j += 1;
        }
    }
    let residual_buys = bids.into_iter().skip(i).filter(|o| o.quantity > T::zero()).collect();
    let residual_sells = asks.into_iter().skip(j).filter(|o| o.quantity > T::zero()).collect();
    Clearing { trades, residual_buys, residual_sells }
}
