//! Supply-demand ratio and the internal selling/buying prices derived from it.

use serde::{Deserialize, Serialize};

use super::MarketError;
use crate::Scalar;

/// Internal prices for one clearing step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PriceSignal<T> {
    /// Internal selling price.
    pub isp: T,
    /// Internal buying price.
    pub ibp: T,
    /// Infinite when there is supply but no demand.
    pub sdr: T,
    pub lambda_buy: T,
    pub lambda_sell: T,
}

impl<T: Scalar> PriceSignal<T> {
    /// True when internal supply covers demand (SDR > 1 or no demand).
    pub fn is_saturated(&self) -> bool {
        self.sdr > T::one()
    }
}

/// `Σ supply / Σ demand`. Supply without demand gives `+∞` (saturated);
/// both zero gives 1.
pub fn compute_sdr<T: Scalar>(total_supply: T, total_demand: T) -> Result<T, MarketError> {
    if !(total_supply >= T::zero()) || !(total_demand >= T::zero()) {
        return Err(MarketError::NegativeVolume { supply: total_supply.f64(), demand: total_demand.f64() });
    }
    Ok(if total_demand == T::zero() {
        if total_supply == T::zero() {
            T::one()
        } else {
            T::infinity()
        }
    } else {
        total_supply / total_demand
    })
}

/// For `sdr ∈ [0, 1]`:
///
/// ```text
/// ISP = λs·λb / ((λb − λs)·SDR + λs)
/// IBP = ISP·SDR + λb·(1 − SDR)
/// ```
///
/// Above 1 both collapse to the feed-in price `λs`.
pub fn internal_prices<T: Scalar>(sdr: T, lambda_buy: T, lambda_sell: T) -> Result<PriceSignal<T>, MarketError> {
    if !(lambda_sell > T::zero()) || !(lambda_sell < lambda_buy) || !lambda_buy.is_finite() {
        return Err(MarketError::InvalidGridPrices { lambda_buy: lambda_buy.f64(), lambda_sell: lambda_sell.f64() });
    }
    if !(sdr >= T::zero()) {
        return Err(MarketError::InvalidSdr(sdr.f64()));
    }
    let (isp, ibp) = if sdr <= T::one() {
        // λb · (λs / denominator): the ratio is exactly 1 at SDR = 0.
        let isp = lambda_buy * (lambda_sell / ((lambda_buy - lambda_sell) * sdr + lambda_sell));
        let ibp = isp * sdr + lambda_buy * (T::one() - sdr);
        (isp, ibp)
    } else {
        (lambda_sell, lambda_sell)
    };
    Ok(PriceSignal { isp, ibp, sdr, lambda_buy, lambda_sell })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sdr_examples() {
        assert!((compute_sdr(3.0, 5.0).unwrap() - 0.6_f64).abs() < 1e-15);
        assert_eq!(compute_sdr(0.0, 7.0).unwrap(), 0.0_f64);
        assert!(compute_sdr(4.0_f64, 0.0).unwrap().is_infinite());
        assert_eq!(compute_sdr(0.0_f64, 0.0).unwrap(), 1.0);
        assert!(compute_sdr(-1.0_f64, 2.0).is_err());
    }

    #[test]
    fn price_endpoints_and_midpoint() {
        let p0 = internal_prices(0.0_f64, 0.20, 0.05).unwrap();
        assert_eq!((p0.isp, p0.ibp), (0.20, 0.20));
        let p1 = internal_prices(1.0_f64, 0.20, 0.05).unwrap();
        assert!((p1.isp - 0.05).abs() < 1e-15 && (p1.ibp - 0.05).abs() < 1e-15);
        let half = internal_prices(0.5_f64, 0.20, 0.05).unwrap();
        assert!((half.isp - 0.08).abs() < 1e-12);
        assert!((half.ibp - 0.14).abs() < 1e-12);
    }

    #[test]
    fn single_precision_midpoint() {
        let half = internal_prices(0.5_f32, 0.20, 0.05).unwrap();
        assert!((half.isp - 0.08).abs() < 1e-6 && (half.ibp - 0.14).abs() < 1e-6);
    }

    #[test]
    fn saturation_and_rejections() {
        let sat = internal_prices(f64::INFINITY, 0.20, 0.05).unwrap();
        assert_eq!((sat.isp, sat.ibp), (0.05, 0.05));
        assert!(sat.is_saturated());
        assert!(internal_prices(1.7_f64, 0.20, 0.05).unwrap().is_saturated());
        assert!(internal_prices(0.5_f64, 0.05, 0.05).is_err());
        assert!(internal_prices(0.5_f64, 0.04, 0.05).is_err());
        assert!(internal_prices(-0.1_f64, 0.2, 0.05).is_err());
    }

    proptest! {
        #[test]
        fn prices_stay_within_grid_bounds(sdr in 0.0f64..=1.0, ls in 0.001f64..1.0, spread in 0.001f64..1.0) {
            let lb = ls + spread;
            let p = internal_prices(sdr, lb, ls).unwrap();
            let tol = 1e-12;
            prop_assert!(p.isp >= ls - tol && p.isp <= lb + tol);
            prop_assert!(p.ibp >= ls - tol && p.ibp <= lb + tol);
            prop_assert!(p.ibp >= p.isp - tol);
        }

        #[test]
        fn isp_non_increasing(mut sdrs in prop::collection::vec(0.0f64..=1.0, 2..20), ls in 0.01f64..0.2, spread in 0.01f64..0.5) {
            sdrs.sort_by(f64::total_cmp);
            let isps: Vec<f64> = sdrs.iter().map(|&s| internal_prices(s, ls + spread, ls).unwrap().isp).collect();
            for w in isps.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-15);
            }
        }
    }
}
