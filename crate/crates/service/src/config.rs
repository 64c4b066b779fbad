use emocal_core::behavior::MOOD_COUNT;
use emocal_core::scheduler::{ConstraintThresholds, ObjectiveWeights};
use emocal_core::{Horizon, WallTime};
use serde::{Deserialize, Serialize};

use crate::ServiceError;

/// Scheduler settings plus the emotion assigned to each behavior class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub horizon: Horizon,
    pub weights: ObjectiveWeights,
    pub thresholds: ConstraintThresholds,
    /// Valence, arousal and dominance for each of the twelve behavior classes.
    pub class_vad: Vec<[f64; 3]>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            horizon: Horizon::default(),
            weights: ObjectiveWeights::default(),
            thresholds: ConstraintThresholds::default(),
            class_vad: vec![[0.5; 3]; MOOD_COUNT],
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<(), ServiceError> {
        let invalid = |e: &dyn std::fmt::Display| ServiceError::ValidationFailed(e.to_string());
        self.horizon.validate().map_err(|e| invalid(&e))?;
        self.weights.validate().map_err(|e| invalid(&e))?;
        self.thresholds.validate().map_err(|e| invalid(&e))?;
        if self.class_vad.len() != MOOD_COUNT {
            return Err(ServiceError::ValidationFailed(format!(
                "class_vad needs {MOOD_COUNT} entries, got {}",
                self.class_vad.len()
            )));
        }
        if let Some(v) = self.class_vad.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ServiceError::ValidationFailed(format!("class_vad value {v} outside [0, 1]")));
        }
        Ok(())
    }
}

/// A flat partial update. Used both as the `POST /config` body and as the
/// TOML config file of the command line tool.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigPatch {
    pub alpha_temporal: Option<f64>,
    pub alpha_cognitive: Option<f64>,
    pub alpha_emotional: Option<f64>,
    pub t_stress: Option<f64>,
    pub c_high: Option<f64>,
    pub c_low: Option<f64>,
    pub break_slots: Option<u32>,
    pub day_start: Option<WallTime>,
    pub day_end: Option<WallTime>,
    pub slot_minutes: Option<u32>,
    pub class_vad: Option<Vec<[f64; 3]>>,
}

impl ConfigPatch {
    /// The patched configuration, validated as a whole.
    pub fn apply(&self, base: &ServiceConfig) -> Result<ServiceConfig, ServiceError> {
        let mut c = base.clone();
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut c.weights.temporal, self.alpha_temporal);
        set(&mut c.weights.cognitive, self.alpha_cognitive);
        set(&mut c.weights.emotional, self.alpha_emotional);
        set(&mut c.thresholds.t_stress, self.t_stress);
        set(&mut c.thresholds.c_high, self.c_high);
        set(&mut c.thresholds.c_low, self.c_low);
        if let Some(v) = self.break_slots {
            c.thresholds.break_slots = v;
        }
        if let Some(v) = self.day_start {
            c.horizon.day_start = v;
        }
        if let Some(v) = self.day_end {
            c.horizon.day_end = v;
        }
        if let Some(v) = self.slot_minutes {
            c.horizon.slot_minutes = v;
        }
        if let Some(v) = &self.class_vad {
            c.class_vad = v.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_patch_is_identity() {
        let base = ServiceConfig::default();
        assert_eq!(ConfigPatch::default().apply(&base).unwrap(), base);
    }

    #[test]
    fn patch_is_validated_as_a_whole() {
        let patch = ConfigPatch {
            c_low: Some(0.8),
            ..Default::default()
        };
        assert!(matches!(
            patch.apply(&ServiceConfig::default()),
            Err(ServiceError::ValidationFailed(_))
        ));
        let patch = ConfigPatch {
            c_low: Some(0.8),
            c_high: Some(0.9),
            day_end: Some(WallTime::hm(12, 0)),
            ..Default::default()
        };
        let c = patch.apply(&ServiceConfig::default()).unwrap();
        assert_eq!(c.horizon.slot_count(), 6);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<ConfigPatch>(r#"{"alpha_temporl": 1}"#).is_err());
        let p: ConfigPatch = serde_json::from_str(r#"{"day_start": "08:30", "alpha_emotional": 2}"#).unwrap();
        assert_eq!(p.day_start, Some(WallTime::hm(8, 30)));
    }
}
