//! Decibel/linear conversions.
//!
//! All internal impairment math runs on linear quantities (watts and
//! dimensionless ratios); decibel values appear only at configuration I/O.

/// Converts a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to dB.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Converts an absolute power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts an absolute power in watts to dBm.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Converts a fiber attenuation figure in dB/km into the power attenuation
/// coefficient in 1/km used inside the nonlinear-interference formulas.
pub fn attenuation_per_km(db_per_km: f64) -> f64 {
    db_per_km * std::f64::consts::LN_10 / 10.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_db() {
        for db in [-52.0, -40.0, -12.0, 0.0, 3.0, 12.6, 22.4, 80.0] {
            let lin = db_to_linear(db);
            let back = linear_to_db(lin);
            assert!(
                (back - db).abs() <= 1e-12 * db.abs().max(1.0),
                "dB round trip drifted: {db} -> {back}"
            );
        }
    }

    #[test]
    fn round_trip_dbm() {
        for dbm in [-12.0, 0.0, 17.0] {
            let w = dbm_to_watts(dbm);
            assert!((watts_to_dbm(w) - dbm).abs() < 1e-12);
        }
    }

    #[test]
    fn known_values() {
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        assert!((db_to_linear(-40.0) - 1e-4).abs() < 1e-19);
        // 0.2 dB/km fiber loss
        assert!((attenuation_per_km(0.2) - 0.046051701859880916).abs() < 1e-15);
    }
}
