use serde::{Deserialize, Serialize};

use super::{apply_battery, BatteryDirection, BatteryState};
use crate::market::Side;
use crate::rewards::AgentAction;

/// Below this an imbalance is treated as zero.
const TOLERANCE: f64 = 1e-12;

/// Physical consequences of one action before the market runs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActionFlows {
    /// Grid-side energy into the battery.
    pub charge: f64,
    /// Energy delivered by the battery.
    pub discharge: f64,
    /// Market order, if any: side and quantity.
    pub order: Option<(Side, f64)>,
    /// Imbalance settled directly with the grid, never offered to the market.
    pub grid_import: f64,
    pub grid_export: f64,
}

/// Maps an action and the energy balance `e = G − L` to battery and order
/// flows. Buy-type actions only emit buy orders and sell-type actions only
/// sell orders; an imbalance of the other sign goes straight to the grid.
///
/// | action | battery | remaining imbalance `n` |
/// |---|---|---|
/// | charge and buy | charge at the acceptable maximum | `n < 0` buy order, `n > 0` export |
/// | buy | none | `n < 0` buy order, `n > 0` export |
/// | sell | none | `n > 0` sell order, `n < 0` import |
/// | discharge and sell | discharge at the deliverable maximum | `n > 0` sell order, `n < 0` import |
/// | discharge and buy | discharge up to the deficit | `n < 0` buy order, `n > 0` export |
/// | self-consumption | none | grid |
/// | self and charge | charge up to the surplus | grid |
/// | self and discharge | discharge up to the deficit | grid |
pub fn translate_action(action: AgentAction, e: f64, battery: BatteryState) -> (BatteryState, ActionFlows) {
    use AgentAction::*;
    let surplus = e.max(0.0);
    let deficit = (-e).max(0.0);
    let (b, charge, discharge) = match action {
        ChargeAndBuy => {
            let (b, c) = apply_battery(battery, battery.acceptable(), BatteryDirection::Charge);
            (b, c, 0.0)
        }
        SelfAndCharge => {
            let (b, c) = apply_battery(battery, surplus, BatteryDirection::Charge);
            (b, c, 0.0)
        }
        DischargeAndSell => {
            let (b, d) = apply_battery(battery, battery.deliverable(), BatteryDirection::Discharge);
            (b, 0.0, d)
        }
        DischargeAndBuy | SelfAndDischarge => {
            let (b, d) = apply_battery(battery, deficit, BatteryDirection::Discharge);
            (b, 0.0, d)
        }
        Buy | Sell | SelfConsumption => (battery, 0.0, 0.0),
    };
    let net = e + discharge - charge;
    let mut flows = ActionFlows { charge, discharge, ..ActionFlows::default() };
    if net.abs() <= TOLERANCE {
        return (b, flows);
    }
    let market_side = match action {
        ChargeAndBuy | Buy | DischargeAndBuy => Some(Side::Buy),
        Sell | DischargeAndSell => Some(Side::Sell),
        SelfConsumption | SelfAndCharge | SelfAndDischarge => None,
    };
    match (market_side, net > 0.0) {
        (Some(Side::Sell), true) => flows.order = Some((Side::Sell, net)),
        (Some(Side::Buy), false) => flows.order = Some((Side::Buy, -net)),
        (_, true) => flows.grid_export = net,
        (_, false) => flows.grid_import = -net,
    }
    (b, flows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batt(soc: f64) -> BatteryState {
        BatteryState { soc, capacity: 10.0, max_charge: 5.0, max_discharge: 5.0, efficiency: 1.0 }
    }

    #[test]
    fn self_and_charge_absorbs_surplus() {
        let (b, f) = translate_action(AgentAction::SelfAndCharge, 2.0, batt(5.0));
        assert_eq!((f.charge, f.order, f.grid_export, f.grid_import), (2.0, None, 0.0, 0.0));
        assert_eq!(b.soc, 7.0);
    }

    #[test]
    fn discharge_and_buy_covers_part_of_deficit() {
        let (b, f) = translate_action(AgentAction::DischargeAndBuy, -3.0, batt(2.0));
        assert_eq!(f.discharge, 2.0);
        assert_eq!(f.order, Some((Side::Buy, 1.0)));
        assert_eq!(b.soc, 0.0);
    }

    #[test]
    fn sell_surplus() {
        let (b, f) = translate_action(AgentAction::Sell, 2.0, batt(9.5));
        assert_eq!(f.order, Some((Side::Sell, 2.0)));
        assert_eq!(b, batt(9.5));
    }

    #[test]
    fn opposite_imbalance_goes_to_grid() {
        let (_, f) = translate_action(AgentAction::Sell, -2.0, batt(5.0));
        assert_eq!((f.order, f.grid_import), (None, 2.0));
        let (_, f) = translate_action(AgentAction::Buy, 1.5, batt(5.0));
        assert_eq!((f.order, f.grid_export), (None, 1.5));
        let (_, f) = translate_action(AgentAction::SelfConsumption, -0.5, batt(5.0));
        assert_eq!((f.order, f.grid_import), (None, 0.5));
    }

    #[test]
    fn charge_and_buy_buys_for_battery() {
        let (b, f) = translate_action(AgentAction::ChargeAndBuy, 1.0, batt(8.0));
        assert_eq!(f.charge, 2.0);
        assert_eq!(f.order, Some((Side::Buy, 1.0)));
        assert_eq!(b.soc, 10.0);
    }

    #[test]
    fn discharge_and_sell_exports_battery() {
        let (_, f) = translate_action(AgentAction::DischargeAndSell, 1.0, batt(3.0));
        assert_eq!(f.discharge, 3.0);
        assert_eq!(f.order, Some((Side::Sell, 4.0)));
        let (_, f) = translate_action(AgentAction::DischargeAndSell, -4.0, batt(1.0));
        assert_eq!((f.order, f.grid_import), (None, 3.0));
    }
}
