use super::Matrix;

/// Classification losses over a batch of logits, averaged over rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    CrossEntropy,
    /// `sum_{i != y} max(0, 1 - x_y + x_i) / C` per row.
    MultiMargin,
}

impl LossKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cross-entropy" | "cross_entropy" | "ce" => Some(Self::CrossEntropy),
            "multi-margin" | "multi_margin" | "margin" => Some(Self::MultiMargin),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::CrossEntropy => "cross-entropy",
            Self::MultiMargin => "multi-margin",
        }
    }

    /// Loss of `rows x classes` logits stored flat in `logits`.
    pub fn loss_flat(&self, logits: &[f64], classes: usize, labels: &[usize]) -> f64 {
        let rows = labels.len();
        let mut total = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let row = &logits[r * classes..(r + 1) * classes];
            total += match self {
                Self::CrossEntropy => {
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    lse - row[y]
                }
                Self::MultiMargin => {
                    row.iter()
                        .enumerate()
                        .filter(|&(i, _)| i != y)
                        .map(|(_, &v)| (1.0 - row[y] + v).max(0.0))
                        .sum::<f64>()
                        / classes as f64
                }
            };
        }
        total / rows as f64
    }

    pub fn loss(&self, logits: &Matrix, labels: &[usize]) -> f64 {
        self.loss_flat(logits.as_slice(), logits.cols(), labels)
    }

    /// Gradient of [`LossKind::loss`] with respect to the logits.
    pub fn grad(&self, logits: &Matrix, labels: &[usize]) -> Matrix {
        let (rows, classes) = logits.shape();
        let mut g = Matrix::zeros(rows, classes);
        let scale = 1.0 / rows as f64;
        for (r, &y) in labels.iter().enumerate() {
            let row = logits.row(r);
            let out = g.row_mut(r);
            match self {
                Self::CrossEntropy => {
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
                    for i in 0..classes {
                        out[i] = ((row[i] - max).exp() / z - if i == y { 1.0 } else { 0.0 }) * scale;
                    }
                }
                Self::MultiMargin => {
                    for i in (0..classes).filter(|&i| i != y) {
                        if 1.0 - row[y] + row[i] > 0.0 {
                            out[i] += scale / classes as f64;
                            out[y] -= scale / classes as f64;
                        }
                    }
                }
            }
        }
        g
    }
}
