use std::sync::Arc;

use emocal_core::behavior::{
    generate_activity_log, write_log, ActivityEvent, ActivityKind, ActivityLogConfig, ActivityModels, Method,
    PipelineConfig, MOOD_COUNT,
};
use emocal_core::ecg::{planted_clips, Channel};
use emocal_core::seqnet::{CellKind, TrainConfig};
use emocal_core::{Dimension, EmotionSource};
use emocal_service::{
    train_bundle, ConfigPatch, EmotionInput, ManualClock, SequenceBundle, SequenceModels, Service, ServiceError,
};

fn service() -> Service {
    Service::in_memory(Arc::new(ManualClock::new(10.0)))
}

#[test]
fn ecg_readings_go_through_the_sequence_models() {
    let cfg = TrainConfig {
        hidden_size: 8,
        epochs: 15,
        ..Default::default()
    };
    let clips = planted_clips(3, 40, 20.0, 5);
    let (bundle, curves) = train_bundle(&clips, &Dimension::ALL, CellKind::Gru, &cfg, Channel::First, 16).unwrap();
    assert_eq!(curves.len(), 3);
    assert!(bundle.bpm_range[0] < 65.0 && bundle.bpm_range[1] > 95.0);

    // the bundle survives its JSON form
    let json = serde_json::to_string(&bundle).unwrap();
    let back: SequenceBundle = serde_json::from_str(&json).unwrap();
    let models = SequenceModels::try_from(&back).unwrap();
    let svc = service().with_sequence_models(models);

    let fresh = planted_clips(1, 40, 20.0, 99);
    for (clip, expected) in fresh.iter().zip([0.25, 0.75]) {
        let got = svc
            .set_emotion(EmotionInput::Ecg {
                recording: clip.to_text(),
                channel: 1,
            })
            .unwrap();
        assert_eq!([got.valence, got.arousal, got.dominance], [expected; 3]);
        assert_eq!(got.source, EmotionSource::Biometric);
        assert_eq!(svc.state().emotion, got);
    }
    let bad = svc.set_emotion(EmotionInput::Ecg {
        recording: "not an ecg".into(),
        channel: 1,
    });
    assert!(matches!(bad, Err(ServiceError::ValidationFailed(_))));
    assert_eq!(svc.seq(), 2);
}

#[test]
fn partial_bundle_reports_the_missing_model() {
    let bundle = SequenceBundle {
        window: 8,
        bpm_range: [50.0, 120.0],
        ..Default::default()
    };
    let svc = service().with_sequence_models(SequenceModels::try_from(&bundle).unwrap());
    let clip = &planted_clips(1, 10, 20.0, 1)[0];
    let err = svc
        .set_emotion(EmotionInput::Ecg {
            recording: clip.to_text(),
            channel: 2,
        })
        .unwrap_err();
    assert!(matches!(err, ServiceError::ModelMissing(ref m) if m.contains("valence")), "{err}");
}

#[test]
fn activity_logs_map_through_the_class_table() {
    let log_cfg = ActivityLogConfig {
        sessions: 8,
        events_per_session: 300,
        ..Default::default()
    };
    let pipeline = PipelineConfig {
        targets: [300; 6],
        ..Default::default()
    };
    let models = ActivityModels::fit(&generate_activity_log(&log_cfg), Method::Tree, &pipeline).unwrap();
    let svc = service().with_activity_models(models);
    let table: Vec<[f64; 3]> = (0..MOOD_COUNT).map(|c| [c as f64 / 11.0, 0.5, 1.0 - c as f64 / 11.0]).collect();
    svc.set_config(&ConfigPatch {
        class_vad: Some(table.clone()),
        ..Default::default()
    })
    .unwrap();

    // cursor activity well inside the cell of the most frequent mood
    let mood = 0;
    let interior = |x: i64, y: i64| [(-60, 0), (60, 0), (0, -60), (0, 60)]
        .iter()
        .all(|(dx, dy)| log_cfg.planted_mood(x + dx, y + dy) == mood);
    let points: Vec<(i64, i64)> = (0..1920)
        .step_by(40)
        .flat_map(|x| (0..1080).step_by(40).map(move |y| (x, y)))
        .filter(|&(x, y)| log_cfg.planted_mood(x, y) == mood && interior(x, y))
        .take(20)
        .collect();
    let events: Vec<ActivityEvent> = points
        .iter()
        .map(|&(x, y)| ActivityEvent::mouse(ActivityKind::MouseMovement, x, y, None, [0.0; MOOD_COUNT]))
        .collect();
    let mut csv = Vec::new();
    write_log(&events, &mut csv).unwrap();
    let got = svc
        .set_emotion(EmotionInput::Activity {
            log: String::from_utf8(csv).unwrap(),
        })
        .unwrap();
    assert_eq!([got.valence, got.arousal, got.dominance], table[mood]);
    assert_eq!(got.source, EmotionSource::Behavioral);
}
