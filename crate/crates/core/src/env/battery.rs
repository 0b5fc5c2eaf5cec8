use serde::{Deserialize, Serialize};

use super::EnvError;

/// Battery with symmetric one-way efficiency `√(round trip)`. Hourly steps,
/// so power limits are also per-step energy limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    /// Stored energy, kWh.
    pub soc: f64,
    pub capacity: f64,
    pub max_charge: f64,
    pub max_discharge: f64,
    /// Round-trip efficiency in `(0, 1]`.
    pub efficiency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatteryDirection {
    Charge,
    Discharge,
}

impl BatteryState {
    pub fn new(capacity: f64, power: f64, efficiency: f64, soc_fraction: f64) -> Result<Self, EnvError> {
        let b = Self { soc: capacity * soc_fraction, capacity, max_charge: power, max_discharge: power, efficiency };
        b.validate()?;
        Ok(b)
    }

    /// No storage at all.
    pub fn none() -> Self {
        Self { soc: 0.0, capacity: 0.0, max_charge: 0.0, max_discharge: 0.0, efficiency: 1.0 }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let ok = self.capacity >= 0.0
            && self.max_charge >= 0.0
            && self.max_discharge >= 0.0
            && self.efficiency > 0.0
            && self.efficiency <= 1.0
            && (0.0..=self.capacity).contains(&self.soc);
        if ok {
            Ok(())
        } else {
            Err(EnvError::InvalidBattery(format!("{self:?}")))
        }
    }

    pub fn one_way(&self) -> f64 {
        self.efficiency.sqrt()
    }

    pub fn soc_pct(&self) -> f64 {
        if self.capacity > 0.0 {
            100.0 * self.soc / self.capacity
        } else {
            0.0
        }
    }

    pub fn soc_fraction(&self) -> f64 {
        self.soc_pct() / 100.0
    }

    /// Largest grid-side energy the battery can absorb this step.
    pub fn acceptable(&self) -> f64 {
        self.max_charge.min((self.capacity - self.soc).max(0.0) / self.one_way())
    }

    /// Largest energy the battery can deliver this step.
    pub fn deliverable(&self) -> f64 {
        self.max_discharge.min(self.soc * self.one_way())
    }
}

/// Charges or discharges by up to `requested` kWh (grid side), clamping to
/// power, headroom and stored energy. Returns the new state and the energy
/// actually moved on the grid side.
pub fn apply_battery(battery: BatteryState, requested: f64, direction: BatteryDirection) -> (BatteryState, f64) {
    let req = requested.max(0.0);
    let eta = battery.one_way();
    let mut b = battery;
    match direction {
        BatteryDirection::Charge => {
            let actual = req.min(battery.acceptable());
            b.soc = (b.soc + actual * eta).min(b.capacity);
            (b, actual)
        }
        BatteryDirection::Discharge => {
            let delivered = req.min(battery.deliverable());
            b.soc = (b.soc - delivered / eta).max(0.0);
            (b, delivered)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batt(soc: f64, cap: f64, power: f64, eff: f64) -> BatteryState {
        BatteryState { soc, capacity: cap, max_charge: power, max_discharge: power, efficiency: eff }
    }

    #[test]
    fn charge_with_losses() {
        let (b, actual) = apply_battery(batt(4.0, 10.0, 5.0, 0.9025), 2.0, BatteryDirection::Charge);
        assert!((b.soc - 5.9).abs() < 1e-12);
        assert_eq!(actual, 2.0);
    }

    #[test]
    fn headroom_limits_charge() {
        let (b, actual) = apply_battery(batt(9.5, 10.0, 5.0, 0.9025), 5.0, BatteryDirection::Charge);
        assert!((b.soc - 10.0).abs() < 1e-12);
        assert!((actual - 0.5 / 0.95).abs() < 1e-12);
    }

    #[test]
    fn empty_battery_delivers_nothing() {
        let (b, actual) = apply_battery(batt(0.0, 10.0, 5.0, 0.9), 3.0, BatteryDirection::Discharge);
        assert_eq!((b.soc, actual), (0.0, 0.0));
    }

    #[test]
    fn discharge_limited_by_power_and_content() {
        let (b, actual) = apply_battery(batt(10.0, 10.0, 5.0, 1.0), 8.0, BatteryDirection::Discharge);
        assert_eq!((b.soc, actual), (5.0, 5.0));
        let (b, actual) = apply_battery(batt(1.0, 10.0, 5.0, 0.81), 8.0, BatteryDirection::Discharge);
        assert!((actual - 0.9).abs() < 1e-12);
        assert!(b.soc.abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(BatteryState::new(10.0, 5.0, 0.9, 0.5).is_ok());
        assert!(BatteryState::new(10.0, 5.0, 0.0, 0.5).is_err());
        assert!(BatteryState::new(10.0, 5.0, 0.9, 1.5).is_err());
        assert_eq!(BatteryState::none().soc_pct(), 0.0);
    }
}
