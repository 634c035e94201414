//! Fitness functions the optimizer can minimize.

mod benchmarks;
mod golomb;
mod mixture;

pub use benchmarks::{benchmark_suite, Benchmark};
pub use golomb::{
    decode_ruler, golomb_loss, length_scale_for, total_violation, violation_score, GolombObjective, GolombRuler,
};
pub use mixture::{gaussian_mixture_loss, GaussianMixture, Mode};

/// A scalar loss over a fixed-dimension search space. Lower is better.
///
/// Implementations must be deterministic. Regions that should never win can
/// return `f64::INFINITY`; `NaN` aborts a run.
pub trait FitnessFunction: Send + Sync {
    fn evaluate(&self, x: &[f64]) -> f64;
    fn dims(&self) -> usize;
    fn name(&self) -> &str;
}

impl<T: FitnessFunction + ?Sized> FitnessFunction for &T {
    fn evaluate(&self, x: &[f64]) -> f64 {
        (**self).evaluate(x)
    }
    fn dims(&self) -> usize {
        (**self).dims()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<T: FitnessFunction + ?Sized> FitnessFunction for Box<T> {
    fn evaluate(&self, x: &[f64]) -> f64 {
        (**self).evaluate(x)
    }
    fn dims(&self) -> usize {
        (**self).dims()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Adapts a closure into a [`FitnessFunction`].
pub struct FnObjective<F> {
    name: String,
    dims: usize,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    pub fn new(name: impl Into<String>, dims: usize, f: F) -> Self {
        Self { name: name.into(), dims, f }
    }
}

impl<F> FitnessFunction for FnObjective<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn dims(&self) -> usize {
        self.dims
    }
    fn name(&self) -> &str {
        &self.name
    }
}
