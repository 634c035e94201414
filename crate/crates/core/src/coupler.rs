//! The HMC-PSO outer loop.
//!
//! Every iteration evaluates all particles (the HMC particle included) and
//! folds the results into the personal and global bests, then moves the
//! swarm with EM-PSO against that global best, then moves the HMC particle.
//! All randomness comes from one ChaCha stream seeded by [`RunConfig::seed`].

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result, RunFailure};
use crate::hmc::{hmc_move, HmcConfig, HmcParticle, HmcStats};
use crate::objectives::FitnessFunction;
use crate::swarm::{check_dims, empso_step, uniform_point, update_best, GlobalBest, ParticleState, PsoParams, SampledCoeffs};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Swarm size, not counting the HMC particle.
    pub n_particles: usize,
    /// Run the single HMC particle alongside the swarm.
    pub hmc_enabled: bool,
    pub pso: PsoParams,
    pub hmc: HmcConfig,
    pub max_iters: usize,
    pub conv_window: usize,
    pub conv_tol: f64,
    pub seed: u64,
    pub init_lo: Vec<f64>,
    pub init_hi: Vec<f64>,
}

impl RunConfig {
    /// Defaults for a `dims`-dimensional search in `[lo, hi]^dims`.
    pub fn new(dims: usize, lo: f64, hi: f64) -> Self {
        Self {
            n_particles: 20,
            hmc_enabled: true,
            pso: PsoParams::new(dims),
            hmc: HmcConfig::new(dims),
            max_iters: 1000,
            conv_window: 50,
            conv_tol: 1e-8,
            seed: 0,
            init_lo: vec![lo; dims],
            init_hi: vec![hi; dims],
        }
    }

    pub fn dims(&self) -> usize {
        self.pso.dims
    }

    pub fn validate(&self) -> Result<()> {
        self.pso.validate()?;
        self.hmc.validate()?;
        let dims = self.dims();
        if self.hmc.dims() != dims {
            return Err(Error::InvalidConfig(format!(
                "mass matrix has {} entries for {dims} dimensions",
                self.hmc.dims()
            )));
        }
        if self.n_particles == 0 {
            return Err(Error::InvalidConfig("n_particles must be at least 1".into()));
        }
        if self.max_iters == 0 || self.conv_window == 0 {
            return Err(Error::InvalidConfig("max_iters and conv_window must be positive".into()));
        }
        if self.conv_window > self.max_iters {
            return Err(Error::InvalidConfig(format!(
                "conv_window {} exceeds max_iters {}",
                self.conv_window, self.max_iters
            )));
        }
        if !(self.conv_tol >= 0.0) {
            return Err(Error::InvalidConfig(format!("conv_tol {} must be non-negative", self.conv_tol)));
        }
        Ok(())
    }

    fn validate_box(&self) -> Result<()> {
        let dims = self.dims();
        if self.init_lo.len() != dims || self.init_hi.len() != dims {
            return Err(Error::InvalidConfig(format!("init box must have {dims} bounds per side")));
        }
        if let Some(i) = (0..dims).find(|&i| !(self.init_lo[i] < self.init_hi[i])) {
            return Err(Error::InvalidConfig(format!(
                "init box is empty on axis {i}: [{}, {}]",
                self.init_lo[i], self.init_hi[i]
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::MaxIters => "max_iters",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub gbest_value: f64,
    pub gbest_position: Vec<f64>,
    /// `None` when the run has no HMC particle.
    pub hmc_accepted: Option<bool>,
    /// Coefficients drawn for the HMC particle, or for the last swarm
    /// particle when HMC is off.
    pub coeffs: SampledCoeffs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterRecord>,
    pub best: GlobalBest,
    pub termination: Termination,
    pub hmc_stats: HmcStats,
}

impl RunTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn gbest_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gbest_value).collect()
    }

    /// Coefficients drawn in the final iteration.
    pub fn last_coeffs(&self) -> Option<SampledCoeffs> {
        self.records.last().map(|r| r.coeffs)
    }

    /// First iteration whose global best satisfies `pred`.
    pub fn first_iter_where(&self, pred: impl Fn(f64) -> bool) -> Option<usize> {
        self.records.iter().find(|r| pred(r.gbest_value)).map(|r| r.iter)
    }

    /// `iter,gbest_value,hmc_accepted,c1r1,c2r2`, one row per iteration.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,gbest_value,hmc_accepted,c1r1,c2r2")?;
        for r in &self.records {
            let acc = match r.hmc_accepted {
                Some(true) => "1",
                Some(false) => "0",
                None => "",
            };
            writeln!(w, "{},{},{},{},{}", r.iter, r.gbest_value, acc, r.coeffs.c1r1, r.coeffs.c2r2)?;
        }
        Ok(())
    }

    /// `iter,x0,x1,...`: the global best position after each iteration.
    pub fn write_positions_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let dims = self.records.first().map_or(0, |r| r.gbest_position.len());
        write!(w, "iter")?;
        for i in 0..dims {
            write!(w, ",x{i}")?;
        }
        writeln!(w)?;
        for r in &self.records {
            write!(w, "{}", r.iter)?;
            for x in &r.gbest_position {
                write!(w, ",{x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Writes `<stem>.csv` and `<stem>_positions.csv` under `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let trace = dir.join(format!("{stem}.csv"));
        let positions = dir.join(format!("{stem}_positions.csv"));
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        std::fs::write(&trace, &buf)?;
        buf.clear();
        self.write_positions_csv(&mut buf)?;
        std::fs::write(&positions, &buf)?;
        Ok((trace, positions))
    }
}

/// True when the global best improved by at most `tol` over the last
/// `window` iterations.
pub fn convergence_check(values: &[f64], window: usize, tol: f64) -> bool {
    let n = values.len();
    if n <= window {
        return false;
    }
    values[n - 1 - window] - values[n - 1] <= tol
}

/// Runs HMC-PSO with every particle drawn uniformly from the init box.
pub fn run_hmc_pso<F: FitnessFunction + ?Sized>(fitness: &F, cfg: &RunConfig) -> Result<RunTrace, RunFailure> {
    let early = |error| RunFailure { error, partial: Box::new(empty_trace()) };
    cfg.validate().map_err(early)?;
    cfg.validate_box().map_err(early)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let count = cfg.n_particles + usize::from(cfg.hmc_enabled);
    let positions = (0..count).map(|_| uniform_point(&cfg.init_lo, &cfg.init_hi, &mut rng)).collect();
    run_loop(fitness, cfg, positions, rng)
}

/// Runs HMC-PSO from explicit starting positions: `n_particles` swarm
/// positions followed by the HMC particle's, if enabled. The init box is
/// ignored.
pub fn run_hmc_pso_from<F: FitnessFunction + ?Sized>(
    fitness: &F,
    cfg: &RunConfig,
    positions: Vec<Vec<f64>>,
) -> Result<RunTrace, RunFailure> {
    let early = |error| RunFailure { error, partial: Box::new(empty_trace()) };
    cfg.validate().map_err(early)?;
    let count = cfg.n_particles + usize::from(cfg.hmc_enabled);
    if positions.len() != count {
        return Err(early(Error::InvalidConfig(format!(
            "expected {count} starting positions, got {}",
            positions.len()
        ))));
    }
    let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    run_loop(fitness, cfg, positions, rng)
}

fn empty_trace() -> RunTrace {
    RunTrace {
        records: Vec::new(),
        best: GlobalBest::new(),
        termination: Termination::MaxIters,
        hmc_stats: HmcStats::default(),
    }
}

fn run_loop<F: FitnessFunction + ?Sized>(
    fitness: &F,
    cfg: &RunConfig,
    mut positions: Vec<Vec<f64>>,
    mut rng: ChaCha8Rng,
) -> Result<RunTrace, RunFailure> {
    let dims = cfg.dims();
    let mut trace = empty_trace();
    let fail = |error, trace: RunTrace| RunFailure { error, partial: Box::new(trace) };
    for p in &positions {
        if let Err(e) = check_dims(dims, p.len()) {
            return Err(fail(e, trace));
        }
    }
    if fitness.dims() != dims {
        return Err(fail(Error::DimensionMismatch { expected: dims, got: fitness.dims() }, trace));
    }

    let mut hmc = if cfg.hmc_enabled { positions.pop().map(HmcParticle::at) } else { None };
    let mut swarm: Vec<ParticleState> = positions.into_iter().map(ParticleState::at).collect();
    let mut gbest = GlobalBest::new();
    let mut values = Vec::with_capacity(cfg.max_iters);

    for iter in 0..cfg.max_iters {
        match iteration(fitness, cfg, &mut swarm, hmc.as_mut(), &mut gbest, &mut rng) {
            Ok((hmc_accepted, coeffs)) => trace.records.push(IterRecord {
                iter,
                gbest_value: gbest.value,
                gbest_position: gbest.position.clone().unwrap_or_default(),
                hmc_accepted,
                coeffs,
            }),
            Err(e) => {
                trace.best = gbest;
                trace.hmc_stats = hmc.map(|h| h.stats).unwrap_or_default();
                return Err(fail(e, trace));
            }
        }
        values.push(gbest.value);
        if convergence_check(&values, cfg.conv_window, cfg.conv_tol) {
            trace.termination = Termination::Converged;
            break;
        }
    }
    trace.best = gbest;
    trace.hmc_stats = hmc.map(|h| h.stats).unwrap_or_default();
    Ok(trace)
}

fn iteration<F: FitnessFunction + ?Sized>(
    fitness: &F,
    cfg: &RunConfig,
    swarm: &mut [ParticleState],
    mut hmc: Option<&mut HmcParticle>,
    gbest: &mut GlobalBest,
    rng: &mut ChaCha8Rng,
) -> Result<(Option<bool>, SampledCoeffs)> {
    for p in swarm.iter_mut() {
        let f = fitness.evaluate(&p.position);
        p.update_best(gbest, f)?;
    }
    if let Some(h) = hmc.as_deref_mut() {
        let f = h.current_value(fitness);
        update_best(&h.position, &mut h.best, gbest, f)?;
    }
    if !gbest.is_defined() {
        return Err(Error::UndefinedGlobalBest);
    }

    let mut last = SampledCoeffs::default();
    for p in swarm.iter_mut() {
        last = p.sample_coeffs(&cfg.pso, rng);
        empso_step(p, gbest, &cfg.pso, last)?;
    }
    let mut accepted = None;
    if let Some(h) = hmc {
        last = crate::swarm::sample_coeffs(&cfg.pso, rng);
        let out = hmc_move(h, gbest, fitness, last, &cfg.hmc, rng)?;
        accepted = Some(out.accepted);
    }
    Ok((accepted, last))
}
