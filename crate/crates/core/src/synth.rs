//! Synthetic pointing trials drawn from known model constants.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::fitting::TrialRecord;
use crate::model::{AmplitudeConstants, ModelConstants};

/// Coordinate frame the generated endpoints are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SynthFrame {
    #[default]
    Movement,
    /// Endpoints rotated by the direction of a movement between targets on a
    /// ring, as recorded by a tracker that ignores movement direction.
    World,
}

/// Number of targets on the ring used for world-frame trials.
pub const RING_TARGETS: usize = 21;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDesign {
    pub seed: u64,
    pub participants: usize,
    pub widths: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub trials_per_cell: usize,
    pub constants: ModelConstants,
    pub amplitude_constants: Option<AmplitudeConstants>,
    /// Fraction of all trials replaced by an outlier, at most one per cell.
    pub outlier_rate: f64,
    /// Outlier displacement in generating standard deviations.
    pub outlier_sd: f64,
    pub mt_mean: f64,
    pub mt_sd: f64,
    pub frame: SynthFrame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub trials: Vec<TrialRecord>,
    /// `true` where a trial was displaced as an outlier.
    pub outlier: Vec<bool>,
}

impl SyntheticData {
    pub fn injected(&self) -> usize {
        self.outlier.iter().filter(|&&o| o).count()
    }
}

impl SyntheticDesign {
    /// 18 participants, W = 1.0..4.5 step 0.5, A in {30, 35, 40}, 20 trials per
    /// cell, the shipped baseline constants and 3.5% outliers.
    pub fn full_size(seed: u64) -> Self {
        Self {
            seed,
            participants: 18,
            widths: (0..8).map(|i| 1.0 + 0.5 * i as f64).collect(),
            amplitudes: vec![30.0, 35.0, 40.0],
            trials_per_cell: 20,
            constants: ModelConstants::BASELINE,
            amplitude_constants: None,
            outlier_rate: 0.035,
            outlier_sd: 8.0,
            mt_mean: 800.0,
            mt_sd: 120.0,
            frame: SynthFrame::Movement,
        }
    }

    /// Same design without outliers.
    pub fn clean(self) -> Self {
        Self { outlier_rate: 0.0, ..self }
    }

    fn cell_count(&self) -> usize {
        self.participants * self.widths.len() * self.amplitudes.len()
    }

    /// Generating distribution `(mu_x, sigma_x, sigma_y)` for a condition.
    pub fn params(&self, w: f64, a: f64) -> (f64, f64, f64) {
        let k = &self.constants;
        let g = self.amplitude_constants.unwrap_or(AmplitudeConstants { sigma_x: 0.0, sigma_y: 0.0, mu_x: 0.0 });
        (k.e * w + k.f + g.mu_x * a, k.a * w + k.b + g.sigma_x * a, k.c * w + k.d + g.sigma_y * a)
    }

    pub fn generate(&self) -> SyntheticData {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let cells = self.cell_count();
        let total = cells * self.trials_per_cell;
        let n_out = ((self.outlier_rate * total as f64).round() as usize).min(cells);
        let mut outlier_cell = vec![false; cells];
        for i in sample(&mut rng, cells, n_out) {
            outlier_cell[i] = true;
        }

        let mut trials = Vec::with_capacity(total);
        let mut outlier = Vec::with_capacity(total);
        let mut cell = 0;
        for p in 0..self.participants {
            let participant = format!("P{:02}", p + 1);
            for &w in &self.widths {
                for &a in &self.amplitudes {
                    let (mu_x, sigma_x, sigma_y) = self.params(w, a);
                    let displaced = outlier_cell[cell]
                        .then(|| (rng.random_range(0..self.trials_per_cell), rng.random_range(0..3u8)));
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    for i in 0..self.trials_per_cell {
                        let mut dx: f64 = sigma_x * rng.sample::<f64, _>(StandardNormal);
                        let mut dy: f64 = sigma_y * rng.sample::<f64, _>(StandardNormal);
                        let mut mt = self.mt_mean + self.mt_sd * rng.sample::<f64, _>(StandardNormal);
                        let is_outlier = displaced.is_some_and(|(j, _)| j == i);
                        if is_outlier {
                            match displaced.map(|d| d.1) {
                                Some(0) => dx = sign * self.outlier_sd * sigma_x,
                                Some(1) => dy = sign * self.outlier_sd * sigma_y,
                                // slow trials only: a fast one would go negative
                                _ => mt = self.mt_mean + self.outlier_sd * self.mt_sd,
                            }
                        }
                        let (x, y) = self.to_frame(mu_x + dx, dy, trials.len());
                        trials.push(TrialRecord {
                            participant: participant.clone(),
                            w,
                            a,
                            x,
                            y,
                            movement_time: mt.max(1.0),
                            success: None,
                        });
                        outlier.push(is_outlier);
                    }
                    cell += 1;
                }
            }
        }
        SyntheticData { trials, outlier }
    }

    fn to_frame(&self, x: f64, y: f64, index: usize) -> (f64, f64) {
        match self.frame {
            SynthFrame::Movement => (x, y),
            SynthFrame::World => {
                let phi = ring_direction(index);
                let (s, c) = phi.sin_cos();
                (c * x - s * y, s * x + c * y)
            }
        }
    }
}

/// Direction of the `index`-th movement on the target ring, visiting targets
/// in the order `11 t mod 21`.
pub fn ring_direction(index: usize) -> f64 {
    let n = RING_TARGETS;
    let at = |t: usize| {
        let k = (11 * t) % n;
        let theta = std::f64::consts::TAU * k as f64 / n as f64;
        (theta.cos(), theta.sin())
    };
    let t = index % n;
    let from = at((t + n - 1) % n);
    let to = at(t);
    (to.1 - from.1).atan2(to.0 - from.0)
}
