use super::reduce::decode_depth;

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerConfig {
    /// Usage band inside which thresholds stay put.
    pub band: (f64, f64),
    pub initial_step: f64,
    pub step_min: f64,
    pub step_max: f64,
    /// Frames within which two moves count as successive.
    pub window: u64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig { band: (0.5, 0.8), initial_step: 0.05, step_min: 0.005, step_max: 0.5, window: 30 }
    }
}

/// Distance thresholds between LOD levels, adapted to buffer usage.
#[derive(Clone, Debug, PartialEq)]
pub struct LodController {
    /// Strictly increasing; `thresholds.len() + 1` levels.
    pub thresholds: Vec<f64>,
    pub step: f64,
    pub config: ControllerConfig,
    /// +1 after growing, −1 after shrinking, 0 before any move.
    pub last_direction: i8,
    pub last_move_frame: Option<u64>,
}

impl LodController {
    pub fn new(thresholds: Vec<f64>, config: ControllerConfig) -> LodController {
        assert!(thresholds.windows(2).all(|w| w[0] < w[1]), "thresholds must increase");
        LodController { thresholds, step: config.initial_step, config, last_direction: 0, last_move_frame: None }
    }

    /// Thresholds `R/2^(L-2), …, R/2, R` for `levels` levels over a scene of
    /// bounding radius `radius`.
    pub fn geometric(levels: u32, radius: f64, config: ControllerConfig) -> LodController {
        let n = levels.saturating_sub(1) as i32;
        let thresholds = (0..n).map(|i| radius / 2f64.powi(n - 1 - i)).collect();
        LodController::new(thresholds, config)
    }

    /// A single level; everything renders at level 0.
    pub fn disabled() -> LodController {
        LodController::new(Vec::new(), ControllerConfig::default())
    }

    pub fn level_count(&self) -> u32 {
        self.thresholds.len() as u32 + 1
    }

    /// Number of thresholds strictly below the distance.
    pub fn select_level(&self, distance: f64) -> u32 {
        self.thresholds.iter().filter(|&&t| t < distance).count() as u32
    }

    pub fn select_lod(&self, encoded_depth: u32) -> u32 {
        self.select_level(decode_depth(encoded_depth) as f64)
    }

    /// Moves thresholds towards the camera when usage is above the band and
    /// away when below. The step grows 1% after successive moves in one
    /// direction and shrinks 1% when the direction flips quickly.
    pub fn adapt(&mut self, usage: f64, frame: u64) {
        if self.thresholds.is_empty() {
            return;
        }
        let (lo, hi) = self.config.band;
        let direction: i8 = if usage > hi {
            -1
        } else if usage < lo {
            1
        } else {
            return;
        };
        let factor = 1.0 + direction as f64 * self.step;
        let (first, last) = (self.thresholds[0] * factor, self.thresholds[self.thresholds.len() - 1] * factor);
        if !last.is_finite() || first < f64::MIN_POSITIVE {
            return;
        }
        for t in &mut self.thresholds {
            *t *= factor;
        }
        let recent = self.last_move_frame.is_some_and(|f| frame.saturating_sub(f) <= self.config.window);
        if recent {
            self.step *= if direction == self.last_direction { 1.01 } else { 0.99 };
        }
        self.step = self.step.clamp(self.config.step_min, self.config.step_max);
        self.last_direction = direction;
        self.last_move_frame = Some(frame);
    }
}
