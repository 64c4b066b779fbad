use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActivityEvent, ActivityKind, MOOD_COUNT};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityLogConfig {
    pub sessions: usize,
    pub events_per_session: usize,
    /// Probability that an event's strongest mood is not the planted one.
    pub label_noise: f64,
    pub screen_width: i64,
    pub screen_height: i64,
    pub seed: u64,
}

impl Default for ActivityLogConfig {
    fn default() -> Self {
        Self {
            sessions: 36,
            events_per_session: 400,
            label_noise: 0.02,
            screen_width: 1920,
            screen_height: 1080,
            seed: 0,
        }
    }
}

const GRID_COLS: i64 = 4;
const GRID_ROWS: i64 = 3;

impl ActivityLogConfig {
    /// The planted mapping: the screen is a 4 x 3 grid and each cell belongs
    /// to one mood. Cell `c` carries mood `5c mod 12`.
    pub fn planted_mood(&self, x: i64, y: i64) -> usize {
        let col = (x * GRID_COLS / self.screen_width).clamp(0, GRID_COLS - 1);
        let row = (y * GRID_ROWS / self.screen_height).clamp(0, GRID_ROWS - 1);
        ((row * GRID_COLS + col) as usize * 5) % MOOD_COUNT
    }

    /// A uniformly random point in the cell owned by `mood`.
    fn point_for(&self, mood: usize, rng: &mut impl Rng) -> (i64, i64) {
        // 5 is its own inverse modulo 12
        let cell = (mood * 5 % MOOD_COUNT) as i64;
        let (col, row) = (cell % GRID_COLS, cell / GRID_COLS);
        let (w, h) = (
            self.screen_width / GRID_COLS,
            self.screen_height / GRID_ROWS,
        );
        (
            col * w + rng.random_range(0..w),
            row * h + rng.random_range(0..h),
        )
    }
}

fn intensities(mood: usize, noise: f64, rng: &mut impl Rng) -> [f64; MOOD_COUNT] {
    let mut m = [0.0; MOOD_COUNT];
    for v in &mut m {
        *v = (rng.random_range(0.0..50.0_f64) * 100.0).round() / 100.0;
    }
    let winner = if rng.random_bool(noise) {
        (mood + rng.random_range(1..MOOD_COUNT)) % MOOD_COUNT
    } else {
        mood
    };
    m[winner] = (rng.random_range(55.0..95.0_f64) * 100.0).round() / 100.0;
    m
}

const KIND_WEIGHTS: [f64; 6] = [0.70, 0.05, 0.05, 0.05, 0.075, 0.075];
const COMMON_KEYS: [&str; 8] = ["e", "t", "a", "space", "backspace", "enter", "o", "n"];

fn session(cfg: &ActivityLogConfig, index: usize) -> Vec<ActivityEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    // skewed mood frequencies so oversampling has work to do
    let moods = WeightedIndex::new((0..MOOD_COUNT).map(|k| 1.0 / (1.0 + k as f64)))
        .expect("positive weights");
    let kinds = WeightedIndex::new(KIND_WEIGHTS).expect("positive weights");
    let mut mood = moods.sample(&mut rng);
    let mut events = Vec::with_capacity(cfg.events_per_session);
    for _ in 0..cfg.events_per_session {
        if rng.random_bool(1.0 / 40.0) {
            mood = moods.sample(&mut rng);
        }
        let kind = ActivityKind::ALL[kinds.sample(&mut rng)];
        let feel = intensities(mood, cfg.label_noise, &mut rng);
        let event = if kind.is_mouse() {
            let (x, y) = cfg.point_for(mood, &mut rng);
            let button = (kind != ActivityKind::MouseMovement).then(|| {
                if rng.random_bool(0.85) {
                    1
                } else {
                    2
                }
            });
            ActivityEvent::mouse(kind, x, y, button, feel)
        } else {
            let key = match rng.random_range(0..10) {
                0..=4 => format!("k{mood}"),
                5 | 6 => "ANONYMIZED".to_owned(),
                _ => COMMON_KEYS[rng.random_range(0..COMMON_KEYS.len())].to_owned(),
            };
            let shift_bias = if mood % 2 == 0 { 0.6 } else { 0.1 };
            let modifiers = [
                rng.random_bool(0.05),
                rng.random_bool(if mood % 3 == 0 { 0.5 } else { 0.05 }),
                rng.random_bool(shift_bias),
                rng.random_bool(0.02),
            ];
            ActivityEvent::key(kind, key, modifiers, rng.random_bool(0.1), feel)
        };
        events.push(event);
    }
    events
}

/// Synthetic interaction log with a planted activity-to-mood relation:
/// cursor position determines the mood through a screen grid, and key
/// events carry mood-specific keys and modifier habits.
pub fn generate_activity_log(cfg: &ActivityLogConfig) -> Vec<ActivityEvent> {
    par::map_range(cfg.sessions, |s| session(cfg, s))
        .into_iter()
        .flatten()
        .collect()
}
