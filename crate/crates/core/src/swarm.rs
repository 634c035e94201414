//! EM-PSO particle dynamics.
//!
//! Each particle carries an exponentially averaged momentum alongside its
//! velocity. One step of the swarm is
//!
//! ```text
//! m' = beta * m + (1 - beta) * v
//! v' = w * m' + c1 r1 (pbest - x) + c2 r2 (gbest - x)
//! x' = x + v'
//! ```
//!
//! with `r1`, `r2` drawn once per particle per iteration and shared across
//! dimensions. The same `c1 r1`, `c2 r2` pair also drives the gradient
//! surrogate handed to the HMC particle, see [`approx_gradient`].

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PsoParams {
    /// Cognitive coefficient.
    pub c1: f64,
    /// Social coefficient.
    pub c2: f64,
    /// Fraction of the averaged momentum retained in the new velocity.
    pub inertia_w: f64,
    /// Decay of the exponentially averaged momentum.
    pub beta: f64,
    pub dims: usize,
}

impl PsoParams {
    pub fn new(dims: usize) -> Self {
        Self { c1: 2.0, c2: 2.0, inertia_w: 0.7, beta: 0.9, dims }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "c1 and c2 must be positive (got {}, {})",
                self.c1, self.c2
            )));
        }
        if !(0.0..=1.0).contains(&self.inertia_w) {
            return Err(Error::InvalidConfig(format!("inertia_w {} outside [0, 1]", self.inertia_w)));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidConfig(format!("beta {} outside [0, 1)", self.beta)));
        }
        if self.dims == 0 {
            return Err(Error::InvalidConfig("dims must be at least 1".into()));
        }
        Ok(())
    }
}

/// The products `c1 * r1` and `c2 * r2` for one particle and one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampledCoeffs {
    pub c1r1: f64,
    pub c2r2: f64,
}

impl SampledCoeffs {
    /// Scales the two uniforms by the swarm coefficients.
    pub fn from_uniforms(params: &PsoParams, u1: f64, u2: f64) -> Self {
        Self { c1r1: params.c1 * u1, c2r2: params.c2 * u2 }
    }

    pub fn total(&self) -> f64 {
        self.c1r1 + self.c2r2
    }
}

/// Draws `r1`, `r2` uniformly from the unit interval.
pub fn sample_coeffs<R: Rng + ?Sized>(params: &PsoParams, rng: &mut R) -> SampledCoeffs {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    SampledCoeffs::from_uniforms(params, u1, u2)
}

/// Best value a single particle has seen and where it saw it.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonalBest {
    pub value: f64,
    pub position: Vec<f64>,
}

impl PersonalBest {
    pub fn unset(position: &[f64]) -> Self {
        Self { value: f64::INFINITY, position: position.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub em_momentum: Vec<f64>,
    pub best: PersonalBest,
    pub last_coeffs: Option<SampledCoeffs>,
}

impl ParticleState {
    /// A particle at rest at `position` that has not been evaluated yet.
    pub fn at(position: Vec<f64>) -> Self {
        let dims = position.len();
        Self {
            best: PersonalBest::unset(&position),
            position,
            velocity: vec![0.0; dims],
            em_momentum: vec![0.0; dims],
            last_coeffs: None,
        }
    }

    /// Uniform draw from the box `[lo, hi]`, zero velocity and momentum.
    pub fn uniform_in<R: Rng + ?Sized>(lo: &[f64], hi: &[f64], rng: &mut R) -> Self {
        Self::at(uniform_point(lo, hi, rng))
    }

    pub fn dims(&self) -> usize {
        self.position.len()
    }

    /// Samples fresh coefficients and records them as the particle's last draw.
    pub fn sample_coeffs<R: Rng + ?Sized>(&mut self, params: &PsoParams, rng: &mut R) -> SampledCoeffs {
        let c = sample_coeffs(params, rng);
        self.last_coeffs = Some(c);
        c
    }

    pub fn update_best(&mut self, gbest: &mut GlobalBest, f: f64) -> Result<BestUpdate> {
        update_best(&self.position, &mut self.best, gbest, f)
    }
}

pub(crate) fn uniform_point<R: Rng + ?Sized>(lo: &[f64], hi: &[f64], rng: &mut R) -> Vec<f64> {
    lo.iter().zip(hi).map(|(&l, &h)| l + (h - l) * rng.random::<f64>()).collect()
}

/// Best fitness seen by any particle. `position` is `None` until the first
/// finite evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalBest {
    pub value: f64,
    pub position: Option<Vec<f64>>,
}

impl Default for GlobalBest {
    fn default() -> Self {
        Self::new()
    }
}

impl GlobalBest {
    pub fn new() -> Self {
        Self { value: f64::INFINITY, position: None }
    }

    pub fn is_defined(&self) -> bool {
        self.position.is_some()
    }

    pub fn position(&self) -> Result<&[f64]> {
        self.position.as_deref().ok_or(Error::UndefinedGlobalBest)
    }
}

/// What [`update_best`] changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BestUpdate {
    pub personal: bool,
    pub global: bool,
}

/// One EM-PSO move. Personal bests are left alone; see [`update_best`].
pub fn empso_step(
    p: &mut ParticleState,
    gbest: &GlobalBest,
    params: &PsoParams,
    coeffs: SampledCoeffs,
) -> Result<()> {
    let g = gbest.position()?;
    check_dims(p.dims(), g.len())?;
    let SampledCoeffs { c1r1, c2r2 } = coeffs;
    let beta = params.beta;
    for i in 0..p.position.len() {
        let x = p.position[i];
        let m = beta * p.em_momentum[i] + (1.0 - beta) * p.velocity[i];
        let v = params.inertia_w * m + c1r1 * (p.best.position[i] - x) + c2r2 * (g[i] - x);
        p.em_momentum[i] = m;
        p.velocity[i] = v;
        p.position[i] = x + v;
    }
    Ok(())
}

/// Applies a fitness value observed at `position`.
///
/// The global best is only consulted when the personal best improves, and
/// both comparisons are strict.
pub fn update_best(
    position: &[f64],
    pbest: &mut PersonalBest,
    gbest: &mut GlobalBest,
    f: f64,
) -> Result<BestUpdate> {
    if f.is_nan() {
        return Err(Error::NanFitness);
    }
    let mut out = BestUpdate::default();
    if f < pbest.value {
        pbest.value = f;
        pbest.position.clear();
        pbest.position.extend_from_slice(position);
        out.personal = true;
        if f < gbest.value {
            gbest.value = f;
            gbest.position = Some(position.to_vec());
            out.global = true;
        }
    }
    Ok(out)
}

/// Closed-form stand-in for the potential gradient, built from the same
/// attraction terms that move an EM-PSO particle:
/// `-(c1r1 (pbest - x) + c2r2 (gbest - x)) / eta`.
pub fn approx_gradient(
    x: &[f64],
    pbest: &[f64],
    gbest: &[f64],
    coeffs: SampledCoeffs,
    eta: f64,
) -> Result<Vec<f64>> {
    if !(eta > 0.0) {
        return Err(Error::NonPositivePathLength(eta));
    }
    check_dims(x.len(), pbest.len())?;
    check_dims(x.len(), gbest.len())?;
    let mut out = vec![0.0; x.len()];
    approx_gradient_into(x, pbest, gbest, coeffs, eta, &mut out);
    Ok(out)
}

/// Unchecked form of [`approx_gradient`] writing into `out`.
pub fn approx_gradient_into(
    x: &[f64],
    pbest: &[f64],
    gbest: &[f64],
    coeffs: SampledCoeffs,
    eta: f64,
    out: &mut [f64],
) {
    let SampledCoeffs { c1r1, c2r2 } = coeffs;
    for i in 0..x.len() {
        out[i] = -(c1r1 * (pbest[i] - x[i]) + c2r2 * (gbest[i] - x[i])) / eta;
    }
}

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
