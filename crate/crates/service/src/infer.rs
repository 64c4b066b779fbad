use emocal_core::behavior::{read_log, ActivityModels};
use emocal_core::ecg::{
    binarize_rating, detect_r_peaks, hr_range, make_windows, normalize_with_range, peaks_to_hr, prepare_from_hr, Channel,
    EcgError, EcgRecording,
};
use emocal_core::par;
use emocal_core::seqnet::{train, CellKind, RecurrentModel, TrainConfig, TrainingCurves};
use emocal_core::{Dimension, EmotionSource, EmotionState, Level};
use serde::{Deserialize, Serialize};

use crate::{ServiceConfig, ServiceError};

/// On-disk form of the heart-rate classifiers: the window and normalization
/// range used in training plus one model text per dimension.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SequenceBundle {
    pub window: usize,
    /// Heart-rate range (bpm) that training normalized against.
    pub bpm_range: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valence: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arousal: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dominance: Option<String>,
}

impl SequenceBundle {
    pub fn slot(&mut self, dim: Dimension) -> &mut Option<String> {
        match dim {
            Dimension::Valence => &mut self.valence,
            Dimension::Arousal => &mut self.arousal,
            Dimension::Dominance => &mut self.dominance,
        }
    }
}

/// Trains one classifier per requested dimension on labeled recordings and
/// packs them with the window and normalization range they were trained with.
pub fn train_bundle(
    recordings: &[EcgRecording],
    dims: &[Dimension],
    kind: CellKind,
    cfg: &TrainConfig,
    channel: Channel,
    window: usize,
) -> Result<(SequenceBundle, Vec<TrainingCurves>), ServiceError> {
    let invalid = |e: EcgError| ServiceError::ValidationFailed(e.to_string());
    let series: Vec<Vec<f64>> = par::map(recordings, |r| {
        detect_r_peaks(r, channel).and_then(|p| peaks_to_hr(&p, r.sample_rate_hz()))
    })
    .into_iter()
    .map(|hr| hr.map(|h| h.bpm))
    .collect::<Result<_, _>>()
    .map_err(invalid)?;
    let (lo, hi) = hr_range(&series);
    let mut bundle = SequenceBundle {
        window,
        bpm_range: [lo, hi],
        ..Default::default()
    };
    let mut curves = Vec::with_capacity(dims.len());
    for &dim in dims {
        let labels = recordings
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let ratings = r.ratings().ok_or(EcgError::MissingRatings(i))?;
                binarize_rating(ratings.get(dim))
            })
            .collect::<Result<Vec<Level>, _>>()
            .map_err(invalid)?;
        let data = prepare_from_hr(&series, &labels, window).map_err(invalid)?;
        let (model, c) = train(&data, kind, cfg).map_err(|e| ServiceError::ValidationFailed(format!("{dim}: {e}")))?;
        *bundle.slot(dim) = Some(model.to_text());
        curves.push(c);
    }
    Ok((bundle, curves))
}

/// Parsed heart-rate classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceModels {
    pub window: usize,
    pub bpm_range: [f64; 2],
    /// Indexed like [`Dimension::ALL`].
    pub models: [Option<RecurrentModel>; 3],
}

impl TryFrom<&SequenceBundle> for SequenceModels {
    type Error = ServiceError;

    fn try_from(b: &SequenceBundle) -> Result<Self, ServiceError> {
        if b.window == 0 {
            return Err(ServiceError::ValidationFailed("bundle window must be positive".into()));
        }
        let parse = |text: &Option<String>| {
            text.as_deref()
                .map(RecurrentModel::from_text)
                .transpose()
                .map_err(|e| ServiceError::ValidationFailed(e.to_string()))
        };
        Ok(Self {
            window: b.window,
            bpm_range: b.bpm_range,
            models: [parse(&b.valence)?, parse(&b.arousal)?, parse(&b.dominance)?],
        })
    }
}

/// Majority level per dimension over every heart-rate window of a
/// recording. Ties count as low.
pub fn levels_from_ecg(
    models: &SequenceModels,
    recording: &EcgRecording,
    channel: Channel,
) -> Result<[Level; 3], ServiceError> {
    let invalid = |e: emocal_core::ecg::EcgError| ServiceError::ValidationFailed(e.to_string());
    let nets: Vec<&RecurrentModel> = Dimension::ALL
        .iter()
        .zip(&models.models)
        .map(|(d, m)| m.as_ref().ok_or_else(|| ServiceError::ModelMissing(format!("{d} sequence"))))
        .collect::<Result<_, _>>()?;
    let peaks = detect_r_peaks(recording, channel).map_err(invalid)?;
    let hr = peaks_to_hr(&peaks, recording.sample_rate_hz()).map_err(invalid)?;
    let mut series = normalize_with_range(&hr.bpm, models.bpm_range[0], models.bpm_range[1]);
    if series.len() <= models.window {
        series.resize(models.window + 1, 0.0);
    }
    let windows = make_windows(&series, Level::Low, models.window).map_err(invalid)?;
    let mut out = [Level::Low; 3];
    for (slot, net) in out.iter_mut().zip(nets) {
        let mut high = 0;
        for w in &windows.windows {
            if net.predict(w).map_err(|e| ServiceError::Internal(e.to_string()))? == Level::High {
                high += 1;
            }
        }
        *slot = if 2 * high > windows.len() { Level::High } else { Level::Low };
    }
    Ok(out)
}

/// Emotion of an activity log: the majority predicted class, looked up in
/// the configured class table.
pub fn emotion_from_activity(
    models: &ActivityModels,
    log_csv: &str,
    config: &ServiceConfig,
) -> Result<EmotionState, ServiceError> {
    let events = read_log(log_csv.as_bytes()).map_err(|e| ServiceError::ValidationFailed(e.to_string()))?;
    let class = models
        .majority(&events)
        .ok_or_else(|| ServiceError::ModelMissing("activity model for these event kinds".into()))?;
    let [v, a, d] = config.class_vad[class];
    let state = EmotionState::new(v, a, d).map_err(|e| ServiceError::ValidationFailed(e.to_string()))?;
    Ok(state.with_source(EmotionSource::Behavioral))
}
