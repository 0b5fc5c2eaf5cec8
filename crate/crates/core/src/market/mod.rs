//! Community market: supply-demand-ratio pricing, double-auction clearing and
//! grid settlement.

mod auction;
mod pricing;
mod settle;

use thiserror::Error;

pub use auction::{clear_double_auction, sort_books, Clearing, Order, Side, Trade};
pub use pricing::{compute_sdr, internal_prices, PriceSignal};
pub use settle::{settle, Settlement};

#[derive(Debug, Error, PartialEq)]
pub enum MarketError {
    #[error("supply ({supply}) and demand ({demand}) must be non-negative")]
    NegativeVolume { supply: f64, demand: f64 },
    #[error("grid prices need 0 < lambda_sell < lambda_buy, got buy {lambda_buy}, sell {lambda_sell}")]
    InvalidGridPrices { lambda_buy: f64, lambda_sell: f64 },
    #[error("supply-demand ratio must be non-negative, got {0}")]
    InvalidSdr(f64),
    #[error("order from {agent_id}: {reason}")]
    InvalidOrder { agent_id: String, reason: String },
}
