use crate::error::{invalid, Error, Result};
use crate::reassign::{CloudPoint, ReassignedPointCloud};

/// How each cloud point contributes to its frequency bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Every point adds 1.
    #[default]
    Count,
    /// Every point adds its linear magnitude `10^(mag_db / 20)`.
    Magnitude,
}

impl std::str::FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "count" => Ok(Self::Count),
            "magnitude" | "mag" => Ok(Self::Magnitude),
            other => Err(invalid(format!("unknown histogram weighting '{other}'"))),
        }
    }
}

impl std::fmt::Display for Weighting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Count => "count",
            Self::Magnitude => "magnitude",
        })
    }
}

/// Frequency projection of a point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<f64>,
    /// Number of points that fell into a bin.
    pub total: usize,
    pub weighting: Weighting,
}

impl FrequencyHistogram {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges
            .windows(2)
            .map(|e| 0.5 * (e[0] + e[1]))
            .collect()
    }

    pub fn nonzero_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0.0).count()
    }

    pub fn max_count(&self) -> f64 {
        self.counts.iter().copied().fold(0.0, f64::max)
    }
}

/// Histogram over the cloud's own pruning band.
pub fn histogram(
    cloud: &ReassignedPointCloud,
    bin_width: f64,
    weighting: Weighting,
) -> Result<FrequencyHistogram> {
    histogram_in_band(
        &cloud.points,
        cloud.prune.f_min,
        cloud.prune.f_max,
        bin_width,
        weighting,
    )
}

/// Histogram of `points` over `[f_min, f_max]` with bins of `bin_width` Hz.
/// The last bin is closed on the right; points outside the band are ignored.
pub fn histogram_in_band(
    points: &[CloudPoint],
    f_min: f64,
    f_max: f64,
    bin_width: f64,
    weighting: Weighting,
) -> Result<FrequencyHistogram> {
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(bin_width > 0.0) || !bin_width.is_finite() {
        return Err(invalid(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    if !(f_min < f_max) {
        return Err(invalid(format!("empty band [{f_min}, {f_max}]")));
    }
    let bins = (((f_max - f_min) / bin_width) - 1e-9).ceil().max(1.0) as usize;
    let bin_edges: Vec<f64> = (0..=bins).map(|i| f_min + i as f64 * bin_width).collect();
    let mut counts = vec![0.0; bins];
    let mut total = 0;
    for pt in points {
        if !(pt.f_hz >= f_min && pt.f_hz <= f_max) {
            continue;
        }
        let idx = (((pt.f_hz - f_min) / bin_width) as usize).min(bins - 1);
        counts[idx] += match weighting {
            Weighting::Count => 1.0,
            Weighting::Magnitude => 10f64.powf(pt.mag_db / 20.0),
        };
        total += 1;
    }
    Ok(FrequencyHistogram {
        bin_edges,
        counts,
        total,
        weighting,
    })
}
