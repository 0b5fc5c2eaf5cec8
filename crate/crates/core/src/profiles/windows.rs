//! Supervised sliding windows and the chronological split.

use chrono::Timelike;

use super::{EnergyProfile, FeatureSeries, ProfileError};
use crate::linalg::Matrix;
use crate::Scalar;

/// Calendar inputs the forecaster needs for each future step.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonExo<T> {
    pub daylight_flag: Vec<T>,
    pub norm_daylight: Vec<T>,
    /// Hour of day of each future step.
    pub hour: Vec<u32>,
}

impl<T: Scalar> HorizonExo<T> {
    pub fn len(&self) -> usize {
        self.daylight_flag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.daylight_flag.is_empty()
    }

    pub fn cast<U: Scalar>(&self) -> HorizonExo<U> {
        HorizonExo {
            daylight_flag: self.daylight_flag.iter().map(|x| U::of(x.f64())).collect(),
            norm_daylight: self.norm_daylight.iter().map(|x| U::of(x.f64())).collect(),
            hour: self.hour.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    /// `window × feature_dim`.
    pub input: Matrix<T>,
    /// `horizon × 2`: column 0 load, column 1 PV, in kWh.
    pub target: Matrix<T>,
    pub exo: HorizonExo<T>,
    /// Profile hour index of the first target step.
    pub origin: usize,
}

impl<T: Scalar> Sample<T> {
    pub fn target_load(&self) -> Vec<T> {
        (0..self.target.rows()).map(|k| self.target[(k, 0)]).collect()
    }

    pub fn target_pv(&self) -> Vec<T> {
        (0..self.target.rows()).map(|k| self.target[(k, 1)]).collect()
    }

    pub fn cast<U: Scalar>(&self) -> Sample<U> {
        let conv = |m: &Matrix<T>| Matrix::from_vec(m.rows(), m.cols(), m.as_slice().iter().map(|x| U::of(x.f64())).collect());
        Sample { input: conv(&self.input), target: conv(&self.target), exo: self.exo.cast(), origin: self.origin }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset<T> {
    pub samples: Vec<Sample<T>>,
    pub window: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplits<T> {
    pub train: WindowedDataset<T>,
    pub validation: WindowedDataset<T>,
    pub test: WindowedDataset<T>,
}

impl<T: Scalar> WindowedDataset<T> {
    pub fn empty(window: usize, horizon: usize) -> Self {
        Self { samples: Vec::new(), window, horizon }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.input.cols())
    }

    /// Appends another dataset with the same window and horizon.
    pub fn extend(&mut self, other: WindowedDataset<T>) {
        assert_eq!((self.window, self.horizon), (other.window, other.horizon), "window mismatch");
        self.samples.extend(other.samples);
    }

    pub fn cast<U: Scalar>(&self) -> WindowedDataset<U> {
        WindowedDataset { samples: self.samples.iter().map(Sample::cast).collect(), window: self.window, horizon: self.horizon }
    }

    /// Chronological split by sample order. `window + horizon - 1` samples
    /// are dropped at each boundary so that no hour, input or target, is
    /// shared between two splits.
    pub fn split(self, train_fraction: f64, validation_fraction: f64) -> DatasetSplits<T> {
        let n = self.samples.len();
        let purge = self.window + self.horizon - 1;
        let train_end = ((n as f64) * train_fraction).floor() as usize;
        let val_end = ((n as f64) * (train_fraction + validation_fraction)).floor() as usize;
        let (window, horizon) = (self.window, self.horizon);
        let mut train = Vec::new();
        let mut validation = Vec::new();
        let mut test = Vec::new();
        for (i, s) in self.samples.into_iter().enumerate() {
            if i < train_end {
                train.push(s);
            } else if i >= train_end + purge && i < val_end {
                validation.push(s);
            } else if i >= val_end + purge {
                test.push(s);
            }
        }
        let wrap = |samples| WindowedDataset { samples, window, horizon };
        DatasetSplits { train: wrap(train), validation: wrap(validation), test: wrap(test) }
    }
}

impl<T: Scalar> DatasetSplits<T> {
    pub fn extend(&mut self, other: DatasetSplits<T>) {
        self.train.extend(other.train);
        self.validation.extend(other.validation);
        self.test.extend(other.test);
    }
}

/// Sample `i` takes feature rows `i..i+window` as input and the profile's
/// next `horizon` hours as target.
pub fn build_windows(profile: &EnergyProfile, features: &FeatureSeries, window: usize, horizon: usize) -> Result<WindowedDataset<f64>, ProfileError> {
    if window == 0 || horizon == 0 {
        return Err(ProfileError::EmptyWindow);
    }
    let len = features.rows.len();
    if len < window + horizon {
        return Err(ProfileError::SeriesTooShort { len, window, horizon });
    }
    if features.start + len > profile.len() {
        return Err(ProfileError::Misaligned(format!(
            "features cover hours {}..{} but the profile has {}",
            features.start,
            features.start + len,
            profile.len()
        )));
    }
    let dim = features.rows[0].to_vec().len();
    let count = len - window - horizon + 1;
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let mut input = Matrix::zeros(window, dim);
        for r in 0..window {
            input.row_mut(r).copy_from_slice(&features.rows[i + r].to_vec());
        }
        let mut target = Matrix::zeros(horizon, 2);
        let mut exo = HorizonExo { daylight_flag: Vec::with_capacity(horizon), norm_daylight: Vec::with_capacity(horizon), hour: Vec::with_capacity(horizon) };
        for k in 0..horizon {
            let row = i + window + k;
            let t = features.start + row;
            target[(k, 0)] = profile.load[t];
            target[(k, 1)] = profile.generation[t];
            exo.daylight_flag.push(features.rows[row].daylight_flag);
            exo.norm_daylight.push(features.rows[row].norm_daylight);
            exo.hour.push(profile.timestamp(t).hour());
        }
        samples.push(Sample { input, target, exo, origin: features.start + i + window });
    }
    Ok(WindowedDataset { samples, window, horizon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{encode_profile, FeatureEncoder, NormStats, ProsumerKind, HELSINKI_LATITUDE};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn profile(len: usize) -> EnergyProfile {
        EnergyProfile {
            prosumer_id: "p".into(),
            start: NaiveDate::from_ymd_opt(2023, 6, 1).unwrap().and_hms_opt(0, 0, 0).unwrap(),
            load: (0..len).map(|t| t as f64).collect(),
            generation: vec![0.0; len],
        }
    }

    fn windows(len: usize, window: usize, horizon: usize) -> Result<WindowedDataset<f64>, ProfileError> {
        let p = profile(len);
        let enc = FeatureEncoder::new(HELSINKI_LATITUDE, NormStats::identity(), 1).unwrap();
        let f = encode_profile(&enc, &p, ProsumerKind::Household).unwrap();
        build_windows(&p, &f, window, horizon)
    }

    #[test]
    fn sample_counts_from_examples() {
        assert_eq!(windows(10, 4, 3).unwrap().len(), 4);
        assert_eq!(windows(7, 4, 3).unwrap().len(), 1);
        assert!(matches!(windows(6, 4, 3), Err(ProfileError::SeriesTooShort { .. })));
    }

    #[test]
    fn targets_follow_inputs() {
        let ds = windows(10, 4, 3).unwrap();
        for (i, s) in ds.samples.iter().enumerate() {
            assert_eq!(s.origin, i + 4);
            // The load lag feature of the last input row is the hour before the first target.
            let last_lag = s.input[(3, 11)];
            assert_eq!(last_lag, (i + 3) as f64);
            assert_eq!(s.target_load(), vec![(i + 4) as f64, (i + 5) as f64, (i + 6) as f64]);
        }
    }

    #[test]
    fn split_has_no_shared_hours() {
        let ds = windows(400, 24, 3).unwrap();
        let n = ds.len();
        let splits = ds.split(0.7, 0.15);
        assert!(splits.train.len() + splits.validation.len() + splits.test.len() < n);
        let span = |s: &Sample<f64>| (s.origin - 24, s.origin + 3);
        let last_train = splits.train.samples.last().map(span).unwrap();
        let first_val = splits.validation.samples.first().map(span).unwrap();
        let last_val = splits.validation.samples.last().map(span).unwrap();
        let first_test = splits.test.samples.first().map(span).unwrap();
        assert!(last_train.1 <= first_val.0);
        assert!(last_val.1 <= first_test.0);
    }

    proptest! {
        #[test]
        fn count_formula_matches_enumeration(len in 2usize..80, window in 1usize..20, horizon in 1usize..6) {
            prop_assume!(len >= window + horizon);
            let enumerated = (0..len).filter(|&s| s + window + horizon <= len).count();
            prop_assert_eq!(windows(len, window, horizon).unwrap().len(), enumerated);
            prop_assert_eq!(enumerated, len - window - horizon + 1);
        }
    }
}
