use crate::rewards::{AgentAction, AgentObservation, TariffPeriod};
use crate::Scalar;

/// Heuristic baseline:
///
/// | condition | action |
/// |---|---|
/// | `\|G − L\| ≤ 0.1` | self-consumption |
/// | surplus, SoC < 90 | self and charge |
/// | surplus, SoC ≥ 90 | sell |
/// | deficit, SoC ≥ 20 | self and discharge |
/// | deficit, SoC < 20, night | charge and buy |
/// | deficit, SoC < 20, otherwise | buy |
pub fn rule_based_policy<T: Scalar>(obs: &AgentObservation<T>) -> AgentAction {
    let e = obs.generation - obs.load;
    if e.abs() <= T::of(0.1) {
        AgentAction::SelfConsumption
    } else if e > T::zero() {
        if obs.soc_pct < T::of(90.0) {
            AgentAction::SelfAndCharge
        } else {
            AgentAction::Sell
        }
    } else if obs.soc_pct >= T::of(20.0) {
        AgentAction::SelfAndDischarge
    } else if obs.tariff == TariffPeriod::N {
        AgentAction::ChargeAndBuy
    } else {
        AgentAction::Buy
    }
}
