//! Receiver measurements: where the receiver stood and what it saw.

use crate::TrainerError;
use signal_model::{AngularSpectrum, GRID_CELLS};

/// Receiver placement. Orientation is an optional unit quaternion
/// (w, x, y, z) for receivers whose array frame is not world-aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct RxPose {
    pub position: [f64; 3],
    pub orientation: Option<[f64; 4]>,
}

impl RxPose {
    /// World-aligned receiver at a position.
    pub fn at(position: [f64; 3]) -> Self {
        Self { position, orientation: None }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|c| c.is_finite())
            && self
                .orientation
                .map_or(true, |q| q.iter().all(|c| c.is_finite()))
    }
}

/// What the receiver recorded at a pose: either a scalar power reading in
/// dBm or a full beam-steered angular spectrum.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    Rssi(f64),
    Spectrum(AngularSpectrum),
}

/// One labelled sample: pose, frequency band, and observation. Records
/// whose five raw power readings were all at the sentinel floor arrive
/// with `valid == false` and are skipped by training and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub pose: RxPose,
    pub band: String,
    pub observation: Observation,
    pub valid: bool,
}

impl MeasurementRecord {
    pub fn validate(&self) -> Result<(), TrainerError> {
        if !self.pose.is_finite() {
            return Err(TrainerError::InvalidSpec("measurement pose is not finite"));
        }
        match &self.observation {
            Observation::Rssi(dbm) => {
                if !dbm.is_finite() {
                    return Err(TrainerError::InvalidSpec("RSSI observation is not finite"));
                }
            }
            Observation::Spectrum(spectrum) => {
                // The grid size is enforced by construction; re-check so a
                // future loosening of AngularSpectrum cannot slip through.
                if spectrum.values().len() != GRID_CELLS {
                    return Err(TrainerError::SizeMismatch {
                        what: "angular spectrum cells",
                        expected: GRID_CELLS,
                        got: spectrum.values().len(),
                    });
                }
                if spectrum.values().iter().any(|v| !v.is_finite()) {
                    return Err(TrainerError::InvalidSpec(
                        "angular spectrum contains non-finite power",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_records_validate() {
        let record = MeasurementRecord {
            pose: RxPose::at([1.0, -2.0, 0.5]),
            band: "2.4GHz".to_string(),
            observation: Observation::Rssi(-61.0),
            valid: true,
        };
        record.validate().unwrap();

        let spectrum = AngularSpectrum::from_values(vec![0.25; GRID_CELLS]).unwrap();
        let record = MeasurementRecord {
            pose: RxPose { position: [0.0; 3], orientation: Some([1.0, 0.0, 0.0, 0.0]) },
            band: "2.4GHz".to_string(),
            observation: Observation::Spectrum(spectrum),
            valid: true,
        };
        record.validate().unwrap();
    }

    #[test]
    fn non_finite_poses_and_readings_are_rejected() {
        let record = MeasurementRecord {
            pose: RxPose::at([f64::NAN, 0.0, 0.0]),
            band: "2.4GHz".to_string(),
            observation: Observation::Rssi(-61.0),
            valid: true,
        };
        assert!(record.validate().is_err());

        let record = MeasurementRecord {
            pose: RxPose::at([0.0; 3]),
            band: "2.4GHz".to_string(),
            observation: Observation::Rssi(f64::INFINITY),
            valid: true,
        };
        assert!(record.validate().is_err());

        let mut values = vec![0.0; GRID_CELLS];
        values[17] = f64::NAN;
        let record = MeasurementRecord {
            pose: RxPose::at([0.0; 3]),
            band: "2.4GHz".to_string(),
            observation: Observation::Spectrum(
                AngularSpectrum::from_values(values).unwrap(),
            ),
            valid: true,
        };
        assert!(record.validate().is_err());
    }
}
