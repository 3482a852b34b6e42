//! Unit conversion table.
//!
//! Internally everything is meters, minutes, watts and watt-hours. These
//! factors convert *into* canonical units: `x_canonical = x_other * FACTOR`.

/// km -> m
pub const KM: f64 = 1_000.0;
/// per km -> per m
pub const PER_KM: f64 = 1.0e-3;
/// per km² -> per m²
pub const PER_KM2: f64 = 1.0e-6;
/// hours -> minutes
pub const HOUR: f64 = 60.0;
/// seconds -> minutes
pub const SECOND: f64 = 1.0 / 60.0;
/// kWh -> Wh
pub const KWH: f64 = 1_000.0;
/// kW -> W
pub const KW: f64 = 1_000.0;
/// minutes in a (365-day) year
pub const MINUTES_PER_YEAR: f64 = 365.0 * 24.0 * 60.0;
/// hours in a (365-day) year
pub const HOURS_PER_YEAR: f64 = 365.0 * 24.0;

/// Decibels to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// m/s -> m/min
pub fn mps_to_m_per_min(v: f64) -> f64 {
    v * 60.0
}

/// Energy drawn at `watts` for `minutes`, in Wh.
pub fn energy_wh(watts: f64, minutes: f64) -> f64 {
    watts * minutes / HOUR
}

/// Minutes needed to drain `wh` at `watts`.
pub fn drain_minutes(wh: f64, watts: f64) -> f64 {
    wh / watts * HOUR
}

#[cfg(test)]
mod tests {
    use super::*;

    // Canonical fixture: every time-valued quantity downstream is in minutes.
    #[test]
    fn canonical_fixture() {
        assert_eq!(HOUR, 60.0);
        assert_eq!(MINUTES_PER_YEAR, 525_600.0);
        assert_eq!(HOURS_PER_YEAR, 8_760.0);
        assert!((SECOND * 60.0 - 1.0).abs() < 1e-15);
        // 177.6 Wh drained at 177.5 W lasts just over an hour.
        let t = drain_minutes(177.6, 177.5);
        assert!((t - 60.033_802_816_9).abs() < 1e-9);
        assert!((energy_wh(177.5, t) - 177.6).abs() < 1e-12);
        assert!((db_to_linear(-20.0) - 0.01).abs() < 1e-15);
        assert_eq!(db_to_linear(0.0), 1.0);
        assert!((linear_to_db(0.01) + 20.0).abs() < 1e-12);
        assert!((mps_to_m_per_min(18.46) - 1107.6).abs() < 1e-9);
        assert!((1.0 * PER_KM2 * 1.0e6 - 1.0).abs() < 1e-15);
    }
}
