use std::fmt;

use serde::{Deserialize, Serialize};

use super::RewardError;

/// Night, pre-peak shoulder, evening peak, standard day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TariffPeriod {
    N,
    NP,
    P,
    D,
}

impl TariffPeriod {
    pub const ALL: [TariffPeriod; 4] = [TariffPeriod::N, TariffPeriod::NP, TariffPeriod::P, TariffPeriod::D];
}

impl fmt::Display for TariffPeriod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TariffPeriod::N => "N",
            TariffPeriod::NP => "NP",
            TariffPeriod::P => "P",
            TariffPeriod::D => "D",
        };
        f.write_str(s)
    }
}

/// Grid retail price per period, currency per kWh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffPrices {
    pub n: f64,
    pub np: f64,
    pub p: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffCalendar {
    /// Period of each hour of day, index 0 = 00:00.
    pub hours: [TariffPeriod; 24],
    pub lambda_buy: TariffPrices,
    /// Flat feed-in price.
    pub lambda_sell: f64,
}

impl Default for TariffCalendar {
    fn default() -> Self {
        use TariffPeriod::*;
        let mut hours = [D; 24];
        for (h, p) in hours.iter_mut().enumerate() {
            *p = match h {
                0..=6 => N,
                15..=16 => NP,
                17..=21 => P,
                _ => D,
            };
        }
        Self { hours, lambda_buy: TariffPrices { n: 0.08, np: 0.12, p: 0.28, d: 0.15 }, lambda_sell: 0.05 }
    }
}

impl TariffCalendar {
    pub fn period(&self, hour: u32) -> TariffPeriod {
        self.hours[(hour % 24) as usize]
    }

    pub fn buy_price(&self, period: TariffPeriod) -> f64 {
        match period {
            TariffPeriod::N => self.lambda_buy.n,
            TariffPeriod::NP => self.lambda_buy.np,
            TariffPeriod::P => self.lambda_buy.p,
            TariffPeriod::D => self.lambda_buy.d,
        }
    }

    pub fn buy_price_at(&self, hour: u32) -> f64 {
        self.buy_price(self.period(hour))
    }

    /// Hours whose period is `P`.
    pub fn peak_hours(&self) -> Vec<u32> {
        (0..24).filter(|&h| self.period(h) == TariffPeriod::P).collect()
    }

    /// Peak hours form one block (wrapping past midnight is allowed), the
    /// pre-peak hours form one block ending right before it, and
    /// `λP > λD ≥ λNP ≥ λN > λsell > 0`.
    pub fn validate(&self) -> Result<(), RewardError> {
        let err = |m: String| Err(RewardError::InvalidCalendar(m));
        let peak = match block(&self.hours, TariffPeriod::P) {
            Some(b) => b,
            None => return err("peak hours must form one non-empty contiguous block".into()),
        };
        let pre = match block(&self.hours, TariffPeriod::NP) {
            Some(b) => b,
            None => return err("pre-peak hours must form one non-empty contiguous block".into()),
        };
        if (pre.0 + pre.1) % 24 != peak.0 {
            return err(format!("pre-peak block must end at hour {} (just before the peak)", (peak.0 + 23) % 24));
        }
        let p = &self.lambda_buy;
        let finite = [p.n, p.np, p.p, p.d, self.lambda_sell].iter().all(|x| x.is_finite());
        if !finite || !(p.p > p.d && p.d >= p.np && p.np >= p.n && p.n > self.lambda_sell && self.lambda_sell > 0.0) {
            return err(format!(
                "prices must satisfy P > D >= NP >= N > sell > 0, got P {} D {} NP {} N {} sell {}",
                p.p, p.d, p.np, p.n, self.lambda_sell
            ));
        }
        Ok(())
    }
}

/// `(start, len)` of the single cyclic block of `period`, if it is one.
fn block(hours: &[TariffPeriod; 24], period: TariffPeriod) -> Option<(u32, u32)> {
    let len = hours.iter().filter(|&&p| p == period).count() as u32;
    if len == 0 || len == 24 {
        return None;
    }
    let start = (0..24u32).find(|&h| hours[h as usize] == period && hours[((h + 23) % 24) as usize] != period)?;
    (0..len).all(|k| hours[((start + k) % 24) as usize] == period).then_some((start, len))
}

pub fn tariff_period(hour: u32, calendar: &TariffCalendar) -> Result<TariffPeriod, RewardError> {
    if hour > 23 {
        return Err(RewardError::InvalidHour(hour));
    }
    Ok(calendar.period(hour))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_table() {
        let c = TariffCalendar::default();
        c.validate().unwrap();
        assert_eq!(tariff_period(18, &c).unwrap(), TariffPeriod::P);
        assert_eq!(tariff_period(3, &c).unwrap(), TariffPeriod::N);
        assert_eq!(tariff_period(15, &c).unwrap(), TariffPeriod::NP);
        assert_eq!(tariff_period(23, &c).unwrap(), TariffPeriod::D);
        assert_eq!(c.peak_hours(), vec![17, 18, 19, 20, 21]);
        assert!(tariff_period(24, &c).is_err());
    }

    #[test]
    fn rejects_split_peak_and_detached_shoulder() {
        let mut c = TariffCalendar::default();
        c.hours[12] = TariffPeriod::P;
        assert!(c.validate().is_err());

        let mut c = TariffCalendar::default();
        c.hours[16] = TariffPeriod::D;
        assert!(c.validate().is_err());

        let mut c = TariffCalendar::default();
        c.lambda_buy.d = 0.30;
        assert!(c.validate().is_err());
    }

    #[test]
    fn wrapping_peak_is_accepted() {
        use TariffPeriod::*;
        let mut hours = [D; 24];
        hours[21] = N;
        hours[22] = NP;
        hours[23] = P;
        hours[0] = P;
        let c = TariffCalendar { hours, ..TariffCalendar::default() };
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let c = TariffCalendar::default();
        let text = toml::to_string(&c).unwrap();
        let back: TariffCalendar = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    proptest! {
        // Every accepted calendar maps each hour to exactly one period and its
        // shoulder block sits right before the peak block.
        #[test]
        fn accepted_calendars_are_ordered(
            hours in proptest::array::uniform24(0usize..4),
            prices in proptest::array::uniform5(0.01f64..1.0),
        ) {
            let c = TariffCalendar {
                hours: hours.map(|i| TariffPeriod::ALL[i]),
                lambda_buy: TariffPrices { n: prices[0], np: prices[1], p: prices[2], d: prices[3] },
                lambda_sell: prices[4],
            };
            if c.validate().is_ok() {
                let p = c.peak_hours();
                prop_assert!(!p.is_empty());
                let start = (0..24u32).find(|&h| c.period(h) == TariffPeriod::P && c.period((h + 23) % 24) != TariffPeriod::P).unwrap();
                prop_assert_eq!(c.period((start + 23) % 24), TariffPeriod::NP);
                prop_assert!(c.lambda_buy.p > c.lambda_buy.d && c.lambda_buy.n > c.lambda_sell);
            }
        }
    }
}
