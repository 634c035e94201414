use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::objectives::FitnessFunction;

#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub center: Vec<f64>,
    /// Diagonal of the covariance.
    pub variance: Vec<f64>,
    pub weight: f64,
}

/// Weighted sum of axis-aligned Gaussians. The loss is the negated density.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    modes: Vec<Mode>,
    dims: usize,
}

impl GaussianMixture {
    pub fn new(modes: Vec<Mode>) -> Result<Self> {
        let first = modes.first().ok_or_else(|| Error::InvalidConfig("mixture has no modes".into()))?;
        let dims = first.center.len();
        if dims == 0 {
            return Err(Error::InvalidConfig("mixture modes must have at least one dimension".into()));
        }
        let mut total = 0.0;
        for (i, m) in modes.iter().enumerate() {
            if m.center.len() != dims || m.variance.len() != dims {
                return Err(Error::InvalidConfig(format!("mode {i} does not have {dims} dimensions")));
            }
            if !(m.weight > 0.0) {
                return Err(Error::InvalidConfig(format!("mode {i} weight {} is not positive", m.weight)));
            }
            if m.variance.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::InvalidConfig(format!("mode {i} has a non-positive variance")));
            }
            total += m.weight;
        }
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!("mixture weights sum to {total}, expected 1")));
        }
        Ok(Self { modes, dims })
    }

    /// Nine equal-variance modes on a 3x3 grid centered at the origin.
    /// The middle mode gets `center_weight`, the other eight share the rest.
    pub fn grid3x3(spacing: f64, variance: f64, center_weight: f64) -> Result<Self> {
        let rest = (1.0 - center_weight) / 8.0;
        let mut modes = Vec::with_capacity(9);
        for row in -1..=1 {
            for col in -1..=1 {
                let weight = if row == 0 && col == 0 { center_weight } else { rest };
                modes.push(Mode {
                    center: vec![col as f64 * spacing, row as f64 * spacing],
                    variance: vec![variance; 2],
                    weight,
                });
            }
        }
        Self::new(modes)
    }

    /// Parses one mode per line: center components, then a scalar variance,
    /// then the weight. Fields split on commas or whitespace; `#` starts a
    /// comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut modes = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|e| Error::Parse { line: idx + 1, message: format!("`{s}`: {e}") })
                })
                .collect::<Result<_>>()?;
            if fields.len() < 3 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "expected center components, variance and weight".into(),
                });
            }
            let d = fields.len() - 2;
            modes.push(Mode {
                center: fields[..d].to_vec(),
                variance: vec![fields[d]; d],
                weight: fields[d + 1],
            });
        }
        Self::new(modes)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let mut quad = 0.0;
                let mut det = 1.0;
                for i in 0..self.dims {
                    let d = x[i] - m.center[i];
                    quad += d * d / m.variance[i];
                    det *= m.variance[i];
                }
                let norm = ((2.0 * PI).powi(self.dims as i32) * det).sqrt();
                m.weight * (-0.5 * quad).exp() / norm
            })
            .sum()
    }

    /// Center of the mode with the lowest loss at its own center.
    pub fn global_mode(&self) -> &[f64] {
        let best = self
            .modes
            .iter()
            .min_by(|a, b| self.loss(&a.center).total_cmp(&self.loss(&b.center)))
            .expect("mixture is never empty");
        &best.center
    }

    pub fn loss(&self, x: &[f64]) -> f64 {
        -self.density(x)
    }
}

pub fn gaussian_mixture_loss(x: &[f64], gm: &GaussianMixture) -> Result<f64> {
    if x.len() != gm.dims {
        return Err(Error::DimensionMismatch { expected: gm.dims, got: x.len() });
    }
    Ok(gm.loss(x))
}

impl FitnessFunction for GaussianMixture {
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.loss(x)
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn name(&self) -> &str {
        "mixture"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_peaks_at_center() {
        let gm = GaussianMixture::new(vec![Mode { center: vec![1.0, 2.0], variance: vec![1.0, 1.0], weight: 1.0 }])
            .unwrap();
        let at = gaussian_mixture_loss(&[1.0, 2.0], &gm).unwrap();
        let off = gaussian_mixture_loss(&[1.1, 2.0], &gm).unwrap();
        assert!(at < off);
        assert!((at + 1.0 / (2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn symmetric_grid_has_equal_peaks() {
        let gm = GaussianMixture::grid3x3(4.0, 1.0, 1.0 / 9.0).unwrap();
        let vals: Vec<f64> = gm.modes().iter().map(|m| gm.loss(&m.center)).collect();
        // corners, edges and the center are each related by grid symmetries
        for class in [[0, 2, 6, 8], [1, 3, 5, 7]] {
            for &i in &class[1..] {
                assert!((vals[i] - vals[class[0]]).abs() < 1e-15);
            }
        }
        // across classes the peaks differ only through tails of modes at
        // distance >= 4, which scale like exp(-8)
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tail = 4.0 * (1.0 / 9.0) * (-8.0f64).exp() / (2.0 * PI);
        assert!(hi - lo < tail, "spread {}", hi - lo);
    }

    #[test]
    fn boosted_center_is_unique_global_minimum() {
        let gm = GaussianMixture::grid3x3(4.0, 1.0, 0.2).unwrap();
        assert!((gm.modes()[1].weight - 0.1).abs() < 1e-15);
        let center = gm.loss(&[0.0, 0.0]);
        for m in gm.modes().iter().filter(|m| m.center != [0.0, 0.0]) {
            assert!(gm.loss(&m.center) > center);
        }
        assert_eq!(gm.global_mode(), &[0.0, 0.0]);
    }

    #[test]
    fn parse_mode_file() {
        let text = "# x y var weight\n0 0 1 0.5\n3, 4, 2.0, 0.5\n";
        let gm = GaussianMixture::parse(text).unwrap();
        assert_eq!(gm.dims(), 2);
        assert_eq!(gm.modes()[1].variance, vec![2.0, 2.0]);
        assert!(matches!(GaussianMixture::parse("1 2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(GaussianMixture::parse("0 1 0.3\n").is_err());
        assert!(matches!(GaussianMixture::parse("0 1 x\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn dims_mismatch() {
        let gm = GaussianMixture::grid3x3(4.0, 1.0, 0.2).unwrap();
        assert!(gaussian_mixture_loss(&[0.0], &gm).is_err());
    }
}
