//! Golomb rulers as an unconstrained minimization problem.
//!
//! A real position vector decodes to a multiset of marks `floor(|p_i|)`.
//! The loss is the number of repeated pairwise distances plus a length term
//! scaled by `10^-k`, small enough that any violation outweighs any length.

use crate::error::{Error, Result};
use crate::objectives::FitnessFunction;

/// Optimal lengths for orders 1 through 28.
const OPTIMAL_LENGTHS: [u64; 28] = [
    0, 1, 3, 6, 11, 17, 25, 34, 44, 55, 72, 85, 106, 127, 151, 177, 199, 216, 246, 283, 333, 356, 372, 425, 480, 492,
    553, 585,
];

/// A multiset of non-negative integer marks, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GolombRuler {
    marks: Vec<u64>,
}

impl GolombRuler {
    pub fn from_marks(mut marks: Vec<u64>) -> Self {
        marks.sort_unstable();
        Self { marks }
    }

    pub fn marks(&self) -> &[u64] {
        &self.marks
    }

    pub fn order(&self) -> usize {
        self.marks.len()
    }

    pub fn length(&self) -> u64 {
        self.marks.last().copied().unwrap_or(0)
    }

    pub fn is_valid(&self) -> bool {
        total_violation(self) == 0
    }

    /// Known optimal length for rulers of this order, where tabulated.
    pub fn optimal_length(order: usize) -> Option<u64> {
        order.checked_sub(1).and_then(|i| OPTIMAL_LENGTHS.get(i).copied())
    }
}

impl std::fmt::Display for GolombRuler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("{")?;
        for (i, m) in self.marks.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{m}")?;
        }
        f.write_str("}")
    }
}

/// `floor(|p_i|)` per component. Duplicates are preserved.
pub fn decode_ruler(p: &[f64]) -> GolombRuler {
    GolombRuler::from_marks(p.iter().map(|x| x.abs().floor() as u64).collect())
}

/// Excess occurrences of distance `d` among pairs of marks.
pub fn violation_score(g: &GolombRuler, d: u64) -> u64 {
    let m = g.marks();
    let mut count = 0u64;
    for i in 1..m.len() {
        for j in 0..i {
            if m[i] - m[j] == d {
                count += 1;
            }
        }
    }
    count.saturating_sub(1)
}

/// Sum of [`violation_score`] over every distance `1..=length`, plus one
/// per duplicated mark.
pub fn total_violation(g: &GolombRuler) -> u64 {
    let m = g.marks();
    let n = m.len();
    let mut diffs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 1..n {
        for j in 0..i {
            diffs.push(m[i] - m[j]);
        }
    }
    diffs.sort_unstable();

    let mut v = 0u64;
    let mut k = 0;
    while k < diffs.len() {
        let d = diffs[k];
        let run = diffs[k..].iter().take_while(|&&x| x == d).count();
        if d > 0 {
            v += run as u64 - 1;
        }
        k += run;
    }

    let mut distinct = m.to_vec();
    distinct.dedup();
    v + (n - distinct.len()) as u64
}

/// `V(G) + 10^-k * length`. Fails when the length term would reach 1.
pub fn golomb_loss(g: &GolombRuler, k: u32) -> Result<f64> {
    let length = g.length();
    let scale = 10f64.powi(k as i32);
    if length as f64 >= scale {
        return Err(Error::LengthPenaltyOverflow { k, length });
    }
    Ok(total_violation(g) as f64 + length as f64 / scale)
}

/// Smallest positive `k` with `10^-k * max_length < 1`.
pub fn length_scale_for(max_length: f64) -> u32 {
    let mut k = 1;
    while 10f64.powi(k as i32) <= max_length {
        k += 1;
    }
    k
}

/// Golomb loss as a fitness function over `R^order`.
///
/// Positions whose decoded length does not fit under `10^k` are scored as
/// carrying one extra violation, so they lose to every in-range ruler with
/// the same violation count but still rank by length among themselves.
#[derive(Debug, Clone)]
pub struct GolombObjective {
    order: usize,
    k: u32,
    name: String,
}

impl GolombObjective {
    pub fn new(order: usize, k: u32) -> Self {
        Self { order, k, name: format!("golomb-{order}") }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn loss_of(&self, g: &GolombRuler) -> f64 {
        let scale = 10f64.powi(self.k as i32);
        let v = total_violation(g) as f64;
        let len = g.length() as f64;
        if len < scale {
            v + len / scale
        } else {
            v + 1.0 + len / scale
        }
    }
}

impl FitnessFunction for GolombObjective {
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.loss_of(&decode_ruler(x))
    }

    fn dims(&self) -> usize {
        self.order
    }

    fn name(&self) -> &str {
        &self.name
    }
}
