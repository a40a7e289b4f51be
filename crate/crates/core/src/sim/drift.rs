use serde::{Deserialize, Serialize};

use super::{SimError, SimStats};
use crate::refchain::least_squares;

pub const MIN_DRIFT_SAMPLES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

/// Mean frame drift restricted to frames whose starting backlog exceeds a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDrift {
    pub threshold_total_r: u64,
    pub samples: usize,
    pub mean: f64,
    pub std_error: f64,
    pub ci95: [f64; 2],
}

/// Least-squares slope of frame-start `Σ R` against time over the second half of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthTest {
    pub slope_per_slot: f64,
    pub std_error: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub samples: usize,
    pub mean_drift: f64,
    pub std_error: f64,
    pub ci95: [f64; 2],
    pub positive_fraction: f64,
    pub max_total_r: u64,
    pub conditional: Option<ConditionalDrift>,
    pub growth: GrowthTest,
    pub verdict: Verdict,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn ci(mean: f64, se: f64) -> [f64; 2] {
    [mean - 1.96 * se, mean + 1.96 * se]
}

/// Summarises Lyapunov drift over complete post-warmup frames.
///
/// Stable: the conditional drift above the median backlog has its 95% interval
/// strictly below zero and the backlog shows no significant upward trend.
/// Unstable: the backlog grows with a slope at least three standard errors above zero.
pub fn drift_report(stats: &SimStats) -> Result<DriftReport, SimError> {
    let frames: Vec<_> = stats.measured_frames().collect();
    if frames.len() < MIN_DRIFT_SAMPLES {
        return Err(SimError::InsufficientSamples {
            need: MIN_DRIFT_SAMPLES,
            have: frames.len(),
        });
    }
    let drifts: Vec<f64> = frames
        .iter()
        .map(|f| f.lyapunov_end.unwrap() - f.lyapunov_start)
        .collect();
    let (mean_drift, std_error) = mean_se(&drifts);
    let positive_fraction =
        drifts.iter().filter(|&&d| d > 0.0).count() as f64 / drifts.len() as f64;

    let mut totals: Vec<u64> = frames.iter().map(|f| f.total_r_start).collect();
    totals.sort_unstable();
    let threshold = totals[totals.len() / 2];
    let above: Vec<f64> = frames
        .iter()
        .zip(&drifts)
        .filter(|(f, _)| f.total_r_start > threshold)
        .map(|(_, &d)| d)
        .collect();
    let conditional = (above.len() >= 2).then(|| {
        let (mean, se) = mean_se(&above);
        ConditionalDrift {
            threshold_total_r: threshold,
            samples: above.len(),
            mean,
            std_error: se,
            ci95: ci(mean, se),
        }
    });

    let tail = &frames[frames.len() / 2..];
    let xs: Vec<f64> = tail.iter().map(|f| f.start as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|f| f.total_r_start as f64).collect();
    let growth = slope_with_se(&xs, &ys);

    let growing = growth.slope_per_slot > 0.0 && growth.slope_per_slot > 3.0 * growth.std_error;
    let contracting = conditional.as_ref().is_some_and(|c| c.ci95[1] < 0.0);
    let verdict = if growing {
        Verdict::Unstable
    } else if contracting {
        Verdict::Stable
    } else {
        Verdict::Inconclusive
    };

    Ok(DriftReport {
        samples: drifts.len(),
        mean_drift,
        std_error,
        ci95: ci(mean_drift, std_error),
        positive_fraction,
        max_total_r: stats
            .max_total_r_first_half
            .max(stats.max_total_r_second_half),
        conditional,
        growth,
        verdict,
    })
}

fn slope_with_se(xs: &[f64], ys: &[f64]) -> GrowthTest {
    let n = xs.len();
    let Some(fit) = least_squares(xs, ys) else {
        return GrowthTest {
            slope_per_slot: 0.0,
            std_error: f64::INFINITY,
            samples: n,
        };
    };
    let mx = xs.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - fit.intercept - fit.slope * x).powi(2))
        .sum();
    let std_error = if n > 2 && sxx > 0.0 {
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    GrowthTest {
        slope_per_slot: fit.slope,
        std_error,
        samples: n,
    }
}
