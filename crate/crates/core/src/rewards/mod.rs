//! Time-of-use tariff calendar, forecast confidence and peak-deficit signals,
//! and the eight per-action reward tables.

mod reward;
mod signals;
mod tariff;

use thiserror::Error;

pub use reward::{reward, AgentAction, AgentObservation, N_ACTIONS};
pub use signals::{confidence_score, forecast_confidence, peak_deficit, CONFIDENCE_EPS};
pub use tariff::{tariff_period, TariffCalendar, TariffPeriod, TariffPrices};

#[derive(Debug, Error, PartialEq)]
pub enum RewardError {
    #[error("invalid tariff calendar: {0}")]
    InvalidCalendar(String),
    #[error("hour {0} outside 0..=23")]
    InvalidHour(u32),
    #[error("action index {0} outside 0..8")]
    InvalidAction(usize),
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
}
