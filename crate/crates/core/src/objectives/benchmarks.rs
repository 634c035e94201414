//! Classic continuous test functions with known optima.

use std::f64::consts::{E, PI};

use crate::objectives::FitnessFunction;

#[derive(Debug, Clone)]
pub struct Benchmark {
    name: &'static str,
    dims: usize,
    f: fn(&[f64]) -> f64,
    /// Search box, the same bound on every axis.
    pub lo: f64,
    pub hi: f64,
    pub optimum_value: f64,
    pub optimum_position: Vec<f64>,
}

impl Benchmark {
    pub fn sphere(dims: usize) -> Self {
        Self {
            name: "sphere",
            dims,
            f: sphere,
            lo: -5.12,
            hi: 5.12,
            optimum_value: 0.0,
            optimum_position: vec![0.0; dims],
        }
    }

    pub fn rastrigin(dims: usize) -> Self {
        Self {
            name: "rastrigin",
            dims,
            f: rastrigin,
            lo: -5.12,
            hi: 5.12,
            optimum_value: 0.0,
            optimum_position: vec![0.0; dims],
        }
    }

    pub fn ackley(dims: usize) -> Self {
        Self {
            name: "ackley",
            dims,
            f: ackley,
            lo: -32.768,
            hi: 32.768,
            optimum_value: 0.0,
            optimum_position: vec![0.0; dims],
        }
    }

    pub fn rosenbrock(dims: usize) -> Self {
        Self {
            name: "rosenbrock",
            dims,
            f: rosenbrock,
            lo: -5.0,
            hi: 10.0,
            optimum_value: 0.0,
            optimum_position: vec![1.0; dims],
        }
    }

    /// `x^4 - 16 x^2 + 5 x` on one axis: two wells, the left one deeper.
    pub fn double_well() -> Self {
        Self {
            name: "double-well",
            dims: 1,
            f: double_well,
            lo: -5.0,
            hi: 5.0,
            optimum_value: double_well(&[DOUBLE_WELL_MIN]),
            optimum_position: vec![DOUBLE_WELL_MIN],
        }
    }

    /// Looks a benchmark up by name.
    pub fn by_name(name: &str, dims: usize) -> Option<Self> {
        match name {
            "sphere" => Some(Self::sphere(dims)),
            "rastrigin" => Some(Self::rastrigin(dims)),
            "ackley" => Some(Self::ackley(dims)),
            "rosenbrock" if dims >= 2 => Some(Self::rosenbrock(dims)),
            "double-well" if dims == 1 => Some(Self::double_well()),
            _ => None,
        }
    }
}

impl FitnessFunction for Benchmark {
    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn dims(&self) -> usize {
        self.dims
    }

    fn name(&self) -> &str {
        self.name
    }
}

/// Every benchmark at `dims` dimensions plus the 1-d double well.
pub fn benchmark_suite(dims: usize) -> Vec<Benchmark> {
    let mut out = vec![Benchmark::sphere(dims), Benchmark::rastrigin(dims), Benchmark::ackley(dims)];
    if dims >= 2 {
        out.push(Benchmark::rosenbrock(dims));
    }
    out.push(Benchmark::double_well());
    out
}

fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
}

fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2)).sum()
}

// root of 4x^3 - 32x + 5 in the left well
const DOUBLE_WELL_MIN: f64 = -2.903_534_027_771_177_6;

fn double_well(x: &[f64]) -> f64 {
    let v = x[0];
    v.powi(4) - 16.0 * v * v + 5.0 * v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_optima() {
        assert_eq!(Benchmark::sphere(4).evaluate(&[0.0; 4]), 0.0);
        assert_eq!(Benchmark::rastrigin(3).evaluate(&[0.0; 3]), 0.0);
        assert!(Benchmark::ackley(5).evaluate(&[0.0; 5]).abs() < 1e-12);
        assert_eq!(Benchmark::rosenbrock(3).evaluate(&[1.0; 3]), 0.0);
    }

    #[test]
    fn suite_optimum_metadata_is_consistent() {
        for b in benchmark_suite(3) {
            let at = b.evaluate(&b.optimum_position);
            assert!((at - b.optimum_value).abs() < 1e-12, "{}", b.name());
            // the optimum beats a grid over the box
            for i in 0..=200 {
                let t = b.lo + (b.hi - b.lo) * i as f64 / 200.0;
                let mut x = b.optimum_position.clone();
                x[0] = t;
                assert!(b.evaluate(&x) >= b.optimum_value - 1e-9, "{} at {t}", b.name());
            }
        }
    }

    #[test]
    fn double_well_stationary_point() {
        let x = DOUBLE_WELL_MIN;
        assert!((4.0 * x.powi(3) - 32.0 * x + 5.0).abs() < 1e-9);
        // the right well is shallower
        assert!(double_well(&[2.74]) > double_well(&[x]));
    }

    #[test]
    fn lookup() {
        assert_eq!(Benchmark::by_name("ackley", 2).unwrap().dims(), 2);
        assert!(Benchmark::by_name("double-well", 2).is_none());
        assert!(Benchmark::by_name("nope", 2).is_none());
    }
}
