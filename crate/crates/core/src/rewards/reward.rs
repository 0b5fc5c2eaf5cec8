use std::fmt;

use serde::{Deserialize, Serialize};

use super::{forecast_confidence, peak_deficit, RewardError, TariffCalendar, TariffPeriod};
use crate::ktu::ForecastDistribution;
use crate::Scalar;

pub const N_ACTIONS: usize = 8;

/// The discrete action set. Discriminants are the network output indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentAction {
    ChargeAndBuy = 0,
    Buy = 1,
    Sell = 2,
    DischargeAndSell = 3,
    DischargeAndBuy = 4,
    SelfConsumption = 5,
    SelfAndCharge = 6,
    SelfAndDischarge = 7,
}

impl AgentAction {
    pub const ALL: [AgentAction; N_ACTIONS] = [
        AgentAction::ChargeAndBuy,
        AgentAction::Buy,
        AgentAction::Sell,
        AgentAction::DischargeAndSell,
        AgentAction::DischargeAndBuy,
        AgentAction::SelfConsumption,
        AgentAction::SelfAndCharge,
        AgentAction::SelfAndDischarge,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self, RewardError> {
        Self::ALL.get(i).copied().ok_or(RewardError::InvalidAction(i))
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentAction::ChargeAndBuy => "charge_and_buy",
            AgentAction::Buy => "buy",
            AgentAction::Sell => "sell",
            AgentAction::DischargeAndSell => "discharge_and_sell",
            AgentAction::DischargeAndBuy => "discharge_and_buy",
            AgentAction::SelfConsumption => "self_consumption",
            AgentAction::SelfAndCharge => "self_and_charge",
            AgentAction::SelfAndDischarge => "self_and_discharge",
        }
    }
}

impl fmt::Display for AgentAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What the reward engine sees of one agent at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AgentObservation<T> {
    /// kWh this hour.
    pub load: T,
    /// kWh this hour.
    pub generation: T,
    /// State of charge in percent.
    pub soc_pct: T,
    pub tariff: TariffPeriod,
    /// Forecast confidence in `[0, 1]`.
    pub confidence: T,
    /// Forecast net demand over upcoming peak hours, kWh.
    pub peak_deficit: T,
}

impl<T: Scalar> AgentObservation<T> {
    /// Derives tariff, confidence and peak deficit from the calendar and forecast.
    pub fn from_forecast(
        load: T,
        generation: T,
        soc_pct: T,
        hour: u32,
        calendar: &TariffCalendar,
        forecast: &ForecastDistribution<T>,
    ) -> Self {
        Self {
            load,
            generation,
            soc_pct,
            tariff: calendar.period(hour),
            confidence: forecast_confidence(forecast),
            peak_deficit: peak_deficit(forecast, hour, calendar),
        }
    }

    pub fn validate(&self) -> Result<(), RewardError> {
        let fields = [self.load, self.generation, self.soc_pct, self.confidence, self.peak_deficit];
        if fields.iter().any(|x| !x.is_finite()) {
            return Err(RewardError::InvalidObservation("non-finite field".into()));
        }
        if self.soc_pct < T::zero() || self.soc_pct > T::of(100.0) {
            return Err(RewardError::InvalidObservation(format!("soc {} outside [0, 100]", self.soc_pct)));
        }
        if self.confidence < T::zero() || self.confidence > T::one() {
            return Err(RewardError::InvalidObservation(format!("confidence {} outside [0, 1]", self.confidence)));
        }
        Ok(())
    }
}

/// Piecewise reward of `action` given `obs`. Cases are checked top to bottom
/// and the first match wins; anything unmatched scores 0. For
/// `ChargeAndBuy` and `SelfAndCharge` the peak-tariff zero case is checked
/// first so that charging at peak never pays.
pub fn reward<T: Scalar>(action: AgentAction, obs: &AgentObservation<T>) -> T {
    use TariffPeriod::*;
    let c = |x: f64| T::of(x);
    let a = obs.confidence;
    let soc = obs.soc_pct;
    let t = obs.tariff;
    let surplus = obs.generation > obs.load;
    let deficit = obs.generation < obs.load;
    let r = match action {
        AgentAction::ChargeAndBuy => {
            if t == P {
                c(0.0)
            } else if soc <= c(90.0) && t == NP && obs.peak_deficit > T::zero() {
                c(0.5) + c(1.5) * a + c(1.0)
            } else if soc <= c(90.0) && t == N {
                c(0.5) + a
            } else if soc <= c(90.0) && deficit {
                c(0.5)
            } else {
                c(0.0)
            }
        }
        AgentAction::Buy => {
            let phi = deficit && soc < c(10.0);
            if phi && t == P {
                c(0.25)
            } else if phi {
                c(0.5)
            } else {
                c(0.0)
            }
        }
        AgentAction::Sell => {
            let phi = surplus && soc >= c(90.0);
            if phi && t == P {
                c(0.75)
            } else if phi {
                c(0.5)
            } else {
                c(0.0)
            }
        }
        AgentAction::DischargeAndSell => {
            if surplus && soc >= c(20.0) && t == P {
                (c(0.5) + c(0.5) * a) * c(1.5)
            } else if surplus && soc >= c(90.0) {
                c(0.5)
            } else {
                c(0.0)
            }
        }
        AgentAction::DischargeAndBuy => {
            let phi = deficit && soc >= c(10.0);
            if phi && t == P {
                (c(0.5) + c(0.5) * a) * c(1.5)
            } else if phi {
                c(0.5)
            } else {
                c(0.0)
            }
        }
        AgentAction::SelfConsumption => {
            let gap = (obs.generation - obs.load).abs();
            if gap <= c(0.1) && t == P {
                c(1.2)
            } else if gap <= c(0.1) {
                c(1.0)
            } else if gap <= c(0.2) {
                c(0.5)
            } else {
                c(0.0)
            }
        }
        AgentAction::SelfAndCharge => {
            if t == P {
                c(0.0)
            } else if surplus && soc <= c(90.0) && t == NP {
                c(0.5) + c(2.0) * a + c(1.0)
            } else if surplus && soc <= c(90.0) {
                c(0.5) + c(0.5) * a
            } else {
                c(0.0)
            }
        }
        AgentAction::SelfAndDischarge => {
            let phi = deficit && soc >= c(20.0);
            if phi && t == P {
                (c(0.5) + c(0.5) * a) * c(1.5)
            } else if phi {
                c(0.5)
            } else {
                c(0.0)
            }
        }
    };
    if r.is_finite() {
        r
    } else {
        T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_are_stable() {
        for (i, a) in AgentAction::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(AgentAction::from_index(i).unwrap(), *a);
        }
        assert!(AgentAction::from_index(8).is_err());
        assert_eq!(serde_json::to_string(&AgentAction::SelfAndDischarge).unwrap(), "\"self_and_discharge\"");
    }

    #[test]
    fn observation_from_forecast() {
        let f = ForecastDistribution::constant(3, 2.0, 0.0, 0.0);
        let o = AgentObservation::from_forecast(1.0, 0.0, 50.0, 16, &TariffCalendar::default(), &f);
        assert_eq!(o.tariff, TariffPeriod::NP);
        assert_eq!(o.peak_deficit, 6.0);
        // PV mean 0 with variance 0 is perfectly confident
        assert_eq!(o.confidence, 1.0);
        o.validate().unwrap();
        assert!(AgentObservation { soc_pct: 101.0, ..o }.validate().is_err());
    }
}
