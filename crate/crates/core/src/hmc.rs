//! The Hamiltonian Monte Carlo particle.
//!
//! The particle integrates Hamilton's equations with a leapfrog scheme, but
//! the force comes from the swarm: [`crate::swarm::approx_gradient`] built
//! from the particle's own best, the global best and one frozen coefficient
//! draw. The potential used in the acceptance test is the fitness itself.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::objectives::FitnessFunction;
use crate::swarm::{approx_gradient_into, check_dims, update_best, GlobalBest, PersonalBest, SampledCoeffs};

/// Moves whose energy error exceeds this are treated as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct HmcConfig {
    pub step_size: f64,
    pub num_steps: usize,
    /// Diagonal of the mass matrix.
    pub mass_diag: Vec<f64>,
    /// Apply the Metropolis correction. Off means every finite proposal is kept.
    pub metropolis: bool,
}

impl HmcConfig {
    pub fn new(dims: usize) -> Self {
        Self { step_size: 0.05, num_steps: 10, mass_diag: vec![1.0; dims], metropolis: true }
    }

    /// Total path length of one move, `step_size * num_steps`.
    pub fn eta(&self) -> f64 {
        self.step_size * self.num_steps as f64
    }

    pub fn dims(&self) -> usize {
        self.mass_diag.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidConfig(format!("step_size {} must be positive", self.step_size)));
        }
        check_mass(&self.mass_diag)
    }
}

fn check_mass(mass: &[f64]) -> Result<()> {
    match mass.iter().position(|&m| !(m > 0.0)) {
        Some(index) => Err(Error::NonPositiveMass { index, value: mass[index] }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HmcStats {
    pub moves: u64,
    pub accepted: u64,
    pub divergences: u64,
}

impl HmcStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.moves == 0 {
            0.0
        } else {
            self.accepted as f64 / self.moves as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmcParticle {
    pub position: Vec<f64>,
    /// Momentum at the end of the last trajectory. Resampled every move.
    pub last_momentum: Vec<f64>,
    pub best: PersonalBest,
    pub stats: HmcStats,
    /// Fitness at `position`, when already known.
    pub(crate) value: Option<f64>,
}

impl HmcParticle {
    pub fn at(position: Vec<f64>) -> Self {
        Self {
            last_momentum: vec![0.0; position.len()],
            best: PersonalBest::unset(&position),
            position,
            stats: HmcStats::default(),
            value: None,
        }
    }

    pub fn dims(&self) -> usize {
        self.position.len()
    }

    /// Fitness at the current position, evaluated at most once per position.
    pub fn current_value<F: FitnessFunction + ?Sized>(&mut self, fitness: &F) -> f64 {
        match self.value {
            Some(v) => v,
            None => {
                let v = fitness.evaluate(&self.position);
                self.value = Some(v);
                v
            }
        }
    }
}

/// `sum p_i^2 / (2 m_i)`.
pub fn kinetic_energy(p: &[f64], mass_diag: &[f64]) -> Result<f64> {
    check_dims(mass_diag.len(), p.len())?;
    check_mass(mass_diag)?;
    Ok(kinetic_unchecked(p, mass_diag))
}

fn kinetic_unchecked(p: &[f64], mass_diag: &[f64]) -> f64 {
    0.5 * p.iter().zip(mass_diag).map(|(pi, mi)| pi * pi / mi).sum::<f64>()
}

pub fn hamiltonian(potential: f64, kinetic: f64) -> Result<f64> {
    if potential.is_nan() || kinetic.is_nan() {
        return Err(Error::NonFinite("hamiltonian term is NaN"));
    }
    Ok(potential + kinetic)
}

/// Leapfrog integration of `num_steps` steps under the force `-grad_fn`.
///
/// `grad_fn(q, out)` writes the potential gradient at `q` into `out`.
/// Returns [`Error::Divergence`] as soon as the state stops being finite.
pub fn leapfrog<G>(q: &[f64], p: &[f64], mut grad_fn: G, cfg: &HmcConfig) -> Result<(Vec<f64>, Vec<f64>)>
where
    G: FnMut(&[f64], &mut [f64]),
{
    check_dims(cfg.dims(), q.len())?;
    check_dims(cfg.dims(), p.len())?;
    let mut q = q.to_vec();
    let mut p = p.to_vec();
    let steps = cfg.num_steps;
    if steps == 0 {
        return Ok((q, p));
    }
    let eps = cfg.step_size;
    let inv_mass: Vec<f64> = cfg.mass_diag.iter().map(|m| 1.0 / m).collect();
    let mut grad = vec![0.0; q.len()];

    grad_fn(&q, &mut grad);
    for (pi, gi) in p.iter_mut().zip(&grad) {
        *pi -= 0.5 * eps * gi;
    }
    for step in 0..steps {
        for i in 0..q.len() {
            q[i] += eps * inv_mass[i] * p[i];
        }
        grad_fn(&q, &mut grad);
        let scale = if step + 1 == steps { 0.5 * eps } else { eps };
        for (pi, gi) in p.iter_mut().zip(&grad) {
            *pi -= scale * gi;
        }
        if !(q.iter().all(|v| v.is_finite()) && p.iter().all(|v| v.is_finite())) {
            return Err(Error::Divergence { step });
        }
    }
    Ok((q, p))
}

/// Accepts with probability `min(1, exp(h_old - h_new))`. A non-finite
/// `h_new` is always rejected.
pub fn metropolis_accept<R: Rng + ?Sized>(h_old: f64, h_new: f64, rng: &mut R) -> bool {
    if !h_new.is_finite() || h_old.is_nan() {
        return false;
    }
    let delta = h_new - h_old;
    if delta <= 0.0 {
        return true;
    }
    rng.random::<f64>() < (-delta).exp()
}

/// Result of one HMC move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveOutcome {
    pub accepted: bool,
    pub diverged: bool,
    /// `H_new - H_old`, NaN when the trajectory diverged.
    pub delta_h: f64,
    /// Fitness at the particle's position after the move.
    pub fitness: f64,
}

/// One move under an arbitrary gradient. Personal and global bests are not
/// touched; [`hmc_move`] layers the swarm bookkeeping on top.
pub fn hmc_move_with<F, G, R>(
    h: &mut HmcParticle,
    fitness: &F,
    grad_fn: G,
    cfg: &HmcConfig,
    rng: &mut R,
) -> Result<MoveOutcome>
where
    F: FitnessFunction + ?Sized,
    G: FnMut(&[f64], &mut [f64]),
    R: Rng + ?Sized,
{
    check_dims(cfg.dims(), h.dims())?;
    let p0: Vec<f64> = cfg
        .mass_diag
        .iter()
        .map(|m| m.sqrt() * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect();
    let u_old = h.current_value(fitness);
    if u_old.is_nan() {
        return Err(Error::NanFitness);
    }
    h.stats.moves += 1;
    let h_old = u_old + kinetic_unchecked(&p0, &cfg.mass_diag);

    let (q_new, p_new) = match leapfrog(&h.position, &p0, grad_fn, cfg) {
        Ok(state) => state,
        Err(Error::Divergence { .. }) => {
            h.stats.divergences += 1;
            h.last_momentum = p0;
            return Ok(MoveOutcome { accepted: false, diverged: true, delta_h: f64::NAN, fitness: u_old });
        }
        Err(e) => return Err(e),
    };

    let u_new = fitness.evaluate(&q_new);
    if u_new.is_nan() {
        return Err(Error::NanFitness);
    }
    let h_new = u_new + kinetic_unchecked(&p_new, &cfg.mass_diag);
    let delta_h = h_new - h_old;
    h.last_momentum = p_new;

    if !h_new.is_finite() || delta_h.abs() > DIVERGENCE_THRESHOLD {
        h.stats.divergences += 1;
        return Ok(MoveOutcome { accepted: false, diverged: true, delta_h, fitness: u_old });
    }

    let accepted = !cfg.metropolis || metropolis_accept(h_old, h_new, rng);
    if accepted {
        h.stats.accepted += 1;
        h.position = q_new;
        h.value = Some(u_new);
    }
    let fitness = if accepted { u_new } else { u_old };
    Ok(MoveOutcome { accepted, diverged: false, delta_h, fitness })
}

/// One move of the swarm-coupled HMC particle.
///
/// The force is the swarm surrogate with `coeffs` frozen for the whole
/// trajectory. The fitness at the final position then goes through the
/// usual personal/global best update.
pub fn hmc_move<F, R>(
    h: &mut HmcParticle,
    gbest: &mut GlobalBest,
    fitness: &F,
    coeffs: SampledCoeffs,
    cfg: &HmcConfig,
    rng: &mut R,
) -> Result<MoveOutcome>
where
    F: FitnessFunction + ?Sized,
    R: Rng + ?Sized,
{
    let g = gbest.position()?.to_vec();
    check_dims(h.dims(), g.len())?;
    let pbest = h.best.position.clone();
    let eta = cfg.eta();
    let grad = |x: &[f64], out: &mut [f64]| approx_gradient_into(x, &pbest, &g, coeffs, eta, out);
    let outcome = hmc_move_with(h, fitness, grad, cfg, rng)?;
    update_best(&h.position, &mut h.best, gbest, outcome.fitness)?;
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::FnObjective;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn harmonic(q: &[f64], out: &mut [f64]) {
        out.copy_from_slice(q);
    }

    fn cfg(step: f64, steps: usize, dims: usize) -> HmcConfig {
        HmcConfig { step_size: step, num_steps: steps, ..HmcConfig::new(dims) }
    }

    #[test]
    fn kinetic_examples() {
        assert_eq!(kinetic_energy(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(kinetic_energy(&[1.0, 2.0], &[1.0, 1.0]).unwrap(), 2.5);
        assert_eq!(kinetic_energy(&[2.0], &[4.0]).unwrap(), 0.5);
        assert!(matches!(kinetic_energy(&[1.0], &[0.0]), Err(Error::NonPositiveMass { index: 0, .. })));
        assert!(kinetic_energy(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn hamiltonian_examples() {
        assert_eq!(hamiltonian(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(hamiltonian(1.5, 2.5).unwrap(), 4.0);
        assert!(hamiltonian(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn config_eta_and_validation() {
        let c = cfg(0.25, 8, 2);
        assert_eq!(c.eta(), 2.0);
        assert!(c.validate().is_ok());
        assert!(HmcConfig { mass_diag: vec![1.0, -1.0], ..c.clone() }.validate().is_err());
        assert!(HmcConfig { step_size: 0.0, ..c }.validate().is_err());
    }

    #[test]
    fn free_particle() {
        let c = HmcConfig { mass_diag: vec![2.0, 0.5], ..cfg(0.1, 7, 2) };
        let (q, p) = leapfrog(&[1.0, -1.0], &[0.4, 0.3], |_: &[f64], o: &mut [f64]| o.fill(0.0), &c).unwrap();
        let eta = c.eta();
        assert!((q[0] - (1.0 + eta * 0.4 / 2.0)).abs() < 1e-12);
        assert!((q[1] - (-1.0 + eta * 0.3 / 0.5)).abs() < 1e-12);
        assert_eq!(p, vec![0.4, 0.3]);
    }

    #[test]
    fn harmonic_matches_closed_form() {
        let (q, p) = leapfrog(&[1.0], &[0.0], harmonic, &cfg(0.01, 100, 1)).unwrap();
        assert!((q[0] - 1f64.cos()).abs() < 1e-3);
        assert!((p[0] + 1f64.sin()).abs() < 1e-3);
    }

    #[test]
    fn energy_conservation_unit_oscillator() {
        let c = cfg(1e-3, 1000, 1);
        let (q, p) = leapfrog(&[1.0], &[0.5], harmonic, &c).unwrap();
        let h0 = 0.5 + 0.125;
        let h1 = 0.5 * q[0] * q[0] + 0.5 * p[0] * p[0];
        assert!((h1 - h0).abs() < 1e-4);
    }

    #[test]
    fn zero_steps_is_identity() {
        let (q, p) = leapfrog(&[3.0], &[1.0], harmonic, &cfg(0.1, 0, 1)).unwrap();
        assert_eq!((q, p), (vec![3.0], vec![1.0]));
    }

    #[test]
    fn divergence_is_reported() {
        let blowup = |q: &[f64], o: &mut [f64]| o[0] = -q[0] * 1e200;
        let err = leapfrog(&[1.0], &[1.0], blowup, &cfg(1.0, 50, 1));
        assert!(matches!(err, Err(Error::Divergence { .. })));
    }

    #[test]
    fn volume_preservation() {
        // nonlinear force so the Jacobian is not trivially constant
        let force = |q: &[f64], o: &mut [f64]| {
            o[0] = q[0].powi(3) + 0.3 * q[1];
            o[1] = q[1].sin() + 0.3 * q[0] + q[2] * 0.1;
            o[2] = 0.5 * q[2] + 0.1 * q[1];
        };
        let c = HmcConfig { mass_diag: vec![1.0, 2.0, 0.5], ..cfg(0.05, 20, 3) };
        let z0 = [0.3, -0.7, 1.1, 0.2, 0.5, -0.4];
        let map = |z: &[f64]| {
            let (q, p) = leapfrog(&z[..3], &z[3..], force, &c).unwrap();
            [q, p].concat()
        };
        let h = 1e-6;
        let mut jac = [[0.0; 6]; 6];
        for j in 0..6 {
            let mut zp = z0;
            let mut zm = z0;
            zp[j] += h;
            zm[j] -= h;
            let (fp, fm) = (map(&zp), map(&zm));
            for i in 0..6 {
                jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        assert!((determinant(jac) - 1.0).abs() < 1e-6);
    }

    fn determinant<const N: usize>(mut a: [[f64; N]; N]) -> f64 {
        let mut det = 1.0;
        for col in 0..N {
            let pivot = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            if pivot != col {
                a.swap(pivot, col);
                det = -det;
            }
            det *= a[col][col];
            for r in (col + 1)..N {
                let f = a[r][col] / a[col][col];
                for k in col..N {
                    a[r][k] -= f * a[col][k];
                }
            }
        }
        det
    }

    proptest! {
        #[test]
        fn leapfrog_is_reversible(
            q in prop::collection::vec(-3.0..3.0f64, 2),
            p in prop::collection::vec(-3.0..3.0f64, 2),
            steps in 1usize..40,
        ) {
            let force = |x: &[f64], o: &mut [f64]| {
                o[0] = x[0] + 0.2 * x[1].sin();
                o[1] = 2.0 * x[1] + 0.1 * x[0] * x[0];
            };
            let c = HmcConfig { mass_diag: vec![1.5, 0.7], ..cfg(0.05, steps, 2) };
            let (q1, p1) = leapfrog(&q, &p, force, &c).unwrap();
            let neg: Vec<f64> = p1.iter().map(|v| -v).collect();
            let (q2, p2) = leapfrog(&q1, &neg, force, &c).unwrap();
            for i in 0..2 {
                prop_assert!((q2[i] - q[i]).abs() < 1e-9);
                prop_assert!((p2[i] + p[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn metropolis_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert!(metropolis_accept(1.0, 0.5, &mut rng));
            assert!(metropolis_accept(1.0, 1.0, &mut rng));
            assert!(!metropolis_accept(0.0, f64::INFINITY, &mut rng));
            assert!(!metropolis_accept(0.0, f64::NAN, &mut rng));
        }
    }

    #[test]
    fn metropolis_half_acceptance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 10_000;
        let hits = (0..n).filter(|_| metropolis_accept(0.0, 2f64.ln(), &mut rng)).count();
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.5).abs() < 0.02, "rate {rate}");
    }

    #[test]
    fn move_with_zero_steps_keeps_position() {
        let f = FnObjective::new("bowl", 2, |x: &[f64]| x.iter().map(|v| v * v).sum());
        let mut h = HmcParticle::at(vec![1.0, 2.0]);
        h.best = PersonalBest { value: 5.0, position: vec![1.0, 2.0] };
        let mut g = GlobalBest { value: 5.0, position: Some(vec![1.0, 2.0]) };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = cfg(0.1, 0, 2);
        let out = hmc_move(&mut h, &mut g, &f, SampledCoeffs { c1r1: 1.0, c2r2: 1.0 }, &c, &mut rng).unwrap();
        assert_eq!(h.position, vec![1.0, 2.0]);
        assert_eq!(out.fitness, 5.0);
        assert_ne!(h.last_momentum, vec![0.0, 0.0]);
    }

    #[test]
    fn move_requires_gbest() {
        let f = FnObjective::new("bowl", 1, |x: &[f64]| x[0] * x[0]);
        let mut h = HmcParticle::at(vec![1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = hmc_move(&mut h, &mut GlobalBest::new(), &f, SampledCoeffs::default(), &cfg(0.1, 3, 1), &mut rng);
        assert!(matches!(r, Err(Error::UndefinedGlobalBest)));
    }

    #[test]
    fn move_never_worsens_pbest() {
        let f = FnObjective::new("wells", 2, |x: &[f64]| (x[0] * 3.0).sin() + x[1] * x[1] * 0.1);
        let mut h = HmcParticle::at(vec![0.5, 0.5]);
        let mut g = GlobalBest::new();
        let v = h.current_value(&f);
        update_best(&h.position.clone(), &mut h.best, &mut g, v).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let c = cfg(0.2, 15, 2);
        let mut last = h.best.value;
        for _ in 0..500 {
            let coeffs = SampledCoeffs { c1r1: rng.random::<f64>() * 2.0, c2r2: rng.random::<f64>() * 2.0 };
            hmc_move(&mut h, &mut g, &f, coeffs, &c, &mut rng).unwrap();
            assert!(h.best.value <= last);
            assert!(g.value <= h.best.value);
            last = h.best.value;
        }
        assert!(h.stats.accepted > 0);
    }

    #[test]
    fn converged_swarm_yields_gaussian_cloud() {
        // pbest = gbest = x0: the surrogate is a harmonic force toward x0.
        let x0 = 2.0;
        let f = FnObjective::new("flat", 1, |_: &[f64]| 0.0);
        let mut h = HmcParticle::at(vec![x0]);
        h.best = PersonalBest { value: -1.0, position: vec![x0] };
        let mut g = GlobalBest { value: -1.0, position: Some(vec![x0]) };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = HmcConfig { metropolis: false, ..cfg(0.1, 13, 1) };
        let coeffs = SampledCoeffs { c1r1: 0.6, c2r2: 0.9 };
        let n = 20_000;
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            hmc_move(&mut h, &mut g, &f, coeffs, &c, &mut rng).unwrap();
            xs.push(h.position[0]);
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        // exact HMC on U = K (x - x0)^2 / 2 samples N(x0, 1/K); leapfrog
        // shifts the variance by O(step^2) only
        let k = coeffs.total() / c.eta();
        assert!((mean - x0).abs() < 0.05, "mean {mean}");
        assert!((var * k - 1.0).abs() < 0.1, "var {var}, 1/K {}", 1.0 / k);
        let skew = xs.iter().map(|x| ((x - mean) / var.sqrt()).powi(3)).sum::<f64>() / n as f64;
        let kurt = xs.iter().map(|x| ((x - mean) / var.sqrt()).powi(4)).sum::<f64>() / n as f64;
        assert!(skew.abs() < 0.1 && (kurt - 3.0).abs() < 0.2, "skew {skew} kurt {kurt}");
    }

    #[test]
    fn oracle_mode_samples_standard_normal() {
        let f = FnObjective::new("nlp", 1, |x: &[f64]| 0.5 * x[0] * x[0]);
        let mut h = HmcParticle::at(vec![0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let c = cfg(0.2, 8, 1);
        for _ in 0..500 {
            hmc_move_with(&mut h, &f, harmonic, &c, &mut rng).unwrap();
        }
        let n = 10_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                hmc_move_with(&mut h, &f, harmonic, &c, &mut rng).unwrap();
                h.position[0]
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn divergent_move_is_rejected_and_counted() {
        let f = FnObjective::new("bowl", 1, |x: &[f64]| x[0] * x[0]);
        let mut h = HmcParticle::at(vec![1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // a stiff force with a huge step blows up
        let stiff = |q: &[f64], o: &mut [f64]| o[0] = 1e6 * q[0];
        let out = hmc_move_with(&mut h, &f, stiff, &cfg(1.0, 200, 1), &mut rng).unwrap();
        assert!(out.diverged && !out.accepted);
        assert_eq!(h.position, vec![1.0]);
        assert_eq!(h.stats.divergences, 1);
    }
}
