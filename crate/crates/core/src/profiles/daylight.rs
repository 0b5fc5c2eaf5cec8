//! Day length from the solar declination approximation.

use std::f64::consts::PI;

use super::ProfileError;

/// Latitudes beyond this see polar day or night for part of the year.
pub const MAX_ABS_LATITUDE: f64 = 66.5;

/// Helsinki, the default site.
pub const HELSINKI_LATITUDE: f64 = 60.17;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Daylight {
    /// Local solar hour of sunrise.
    pub sunrise: f64,
    /// Local solar hour of sunset.
    pub sunset: f64,
    pub daylight_hours: f64,
}

impl Daylight {
    /// True iff `hour` lies in `[sunrise, sunset)`.
    pub fn is_daylight(&self, hour: u32) -> bool {
        let h = f64::from(hour);
        h >= self.sunrise && h < self.sunset
    }
}

/// Solar declination in degrees for a day of the year.
pub fn declination_deg(day_of_year: u32) -> f64 {
    23.44 * (2.0 * PI * (f64::from(day_of_year) - 81.0) / 365.0).sin()
}

pub fn compute_daylight(latitude: f64, day_of_year: u32) -> Result<Daylight, ProfileError> {
    if !latitude.is_finite() || latitude.abs() >= MAX_ABS_LATITUDE {
        return Err(ProfileError::PolarLatitude(latitude));
    }
    if !(1..=366).contains(&day_of_year) {
        return Err(ProfileError::InvalidDayOfYear(day_of_year));
    }
    let decl = declination_deg(day_of_year).to_radians();
    let cos_h = (-latitude.to_radians().tan() * decl.tan()).clamp(-1.0, 1.0);
    let half_day = cos_h.acos().to_degrees() / 15.0;
    Ok(Daylight { sunrise: 12.0 - half_day, sunset: 12.0 + half_day, daylight_hours: 2.0 * half_day })
}

/// Per-day daylight for one site, plus the yearly maximum used to normalise.
#[derive(Debug, Clone)]
pub struct DaylightTable {
    latitude: f64,
    days: Vec<Daylight>,
    max_hours: f64,
}

impl DaylightTable {
    pub fn new(latitude: f64) -> Result<Self, ProfileError> {
        let days = (1..=366).map(|d| compute_daylight(latitude, d)).collect::<Result<Vec<_>, _>>()?;
        let max_hours = days.iter().map(|d| d.daylight_hours).fold(0.0, f64::max);
        Ok(Self { latitude, days, max_hours })
    }

    pub fn latitude(&self) -> f64 {
        self.latitude
    }

    /// `day_of_year` is 1-based.
    pub fn day(&self, day_of_year: u32) -> &Daylight {
        &self.days[(day_of_year.clamp(1, 366) - 1) as usize]
    }

    pub fn max_daylight_hours(&self) -> f64 {
        self.max_hours
    }

    /// Daylight hours of the day divided by the yearly maximum.
    pub fn normalized(&self, day_of_year: u32) -> f64 {
        self.day(day_of_year).daylight_hours / self.max_hours
    }

    pub fn flag(&self, day_of_year: u32, hour: u32) -> bool {
        self.day(day_of_year).is_daylight(hour)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// NOAA-style sunrise equation: Spencer's declination series and a
    /// sun-centre zenith of 90.833° (refraction plus solar radius).
    fn noaa_day_length(latitude: f64, day_of_year: u32) -> f64 {
        let g = 2.0 * PI / 365.0 * (f64::from(day_of_year) - 1.0);
        let decl = 0.006918 - 0.399912 * g.cos() + 0.070257 * g.sin() - 0.006758 * (2.0 * g).cos()
            + 0.000907 * (2.0 * g).sin()
            - 0.002697 * (3.0 * g).cos()
            + 0.00148 * (3.0 * g).sin();
        let lat = latitude.to_radians();
        let zenith = 90.833_f64.to_radians();
        let cos_h = zenith.cos() / (lat.cos() * decl.cos()) - lat.tan() * decl.tan();
        2.0 * cos_h.acos().to_degrees() / 15.0
    }

    #[test]
    fn equinox_is_about_twelve_hours() {
        let d = compute_daylight(HELSINKI_LATITUDE, 80).unwrap();
        assert!((d.daylight_hours - 12.0).abs() <= 0.5, "{d:?}");
    }

    #[test]
    fn solstice_agrees_with_noaa_oracle() {
        let d = compute_daylight(HELSINKI_LATITUDE, 172).unwrap();
        let oracle = noaa_day_length(HELSINKI_LATITUDE, 172);
        assert!((d.daylight_hours - oracle).abs() <= 0.5, "{} vs {}", d.daylight_hours, oracle);
    }

    #[test]
    fn equator_is_twelve_hours_all_year() {
        for day in 1..=366 {
            let d = compute_daylight(0.0, day).unwrap();
            assert!((d.daylight_hours - 12.0).abs() <= 0.2);
        }
    }

    #[test]
    fn polar_latitudes_are_rejected() {
        assert!(matches!(compute_daylight(70.0, 10), Err(ProfileError::PolarLatitude(_))));
        assert!(compute_daylight(-66.5, 10).is_err());
    }

    #[test]
    fn solstice_normalized_daylight_near_one() {
        let table = DaylightTable::new(HELSINKI_LATITUDE).unwrap();
        let oracle_max = (1..=366).map(|d| noaa_day_length(HELSINKI_LATITUDE, d)).fold(0.0, f64::max);
        let oracle_ratio = noaa_day_length(HELSINKI_LATITUDE, 172) / oracle_max;
        let n = table.normalized(172);
        assert!(n > 0.95 && n <= 1.0, "{n}");
        assert!((n - oracle_ratio).abs() < 0.01);
    }

    #[test]
    fn flag_follows_sunrise_and_sunset() {
        let table = DaylightTable::new(HELSINKI_LATITUDE).unwrap();
        // Mid-winter: roughly 09:20-14:40 solar time.
        assert!(!table.flag(355, 8));
        assert!(table.flag(355, 12));
        assert!(!table.flag(355, 15));
        assert!(table.flag(172, 4));
    }
}
