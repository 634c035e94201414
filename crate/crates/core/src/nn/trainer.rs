//! The swarm-driven training loop.
//!
//! For each mini-batch a short HMC-PSO run searches the space of output
//! matrices, starting from particles placed on the labels. Its global best
//! `g` turns into a gradient estimate at the logits `y`,
//! `-((c1r1 + c2r2) / lr_eps) * (g - y)`, which is backpropagated through
//! the network and applied with Adam.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{AdamState, Dataset, LossKind, Matrix, Mlp};
use crate::coupler::{run_hmc_pso_from, RunConfig};
use crate::error::{Error, Result};
use crate::hmc::HmcConfig;
use crate::objectives::FitnessFunction;
use crate::swarm::{PsoParams, SampledCoeffs};

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmLabelInit {
    pub batch_size: usize,
    pub num_classes: usize,
    /// Entry placed at each row's label.
    pub target_value: f64,
    /// Entry placed everywhere else.
    pub off_value: f64,
    /// Standard deviation of the per-particle perturbation; zero disables it.
    pub noise_std: f64,
    /// Perturbations are redrawn until they fall inside `+-noise_bound`.
    pub noise_bound: f64,
}

impl SwarmLabelInit {
    pub fn new(batch_size: usize, num_classes: usize) -> Self {
        Self { batch_size, num_classes, target_value: 1.0, off_value: -4.0, noise_std: 0.1, noise_bound: 0.1 }
    }

    pub fn label_matrix(&self, labels: &[usize]) -> Result<Matrix> {
        let mut m = Matrix::zeros(labels.len(), self.num_classes);
        for (row, &label) in labels.iter().enumerate() {
            if label >= self.num_classes {
                return Err(Error::LabelOutOfRange { row, label: label as i64, num_classes: self.num_classes });
            }
            let r = m.row_mut(row);
            r.fill(self.off_value);
            r[label] = self.target_value;
        }
        Ok(m)
    }
}

/// One particle position per entry: the label matrix plus independent
/// truncated Gaussian noise.
pub fn init_swarm_from_labels<R: Rng + ?Sized>(
    labels: &[usize],
    cfg: &SwarmLabelInit,
    n_particles: usize,
    rng: &mut R,
) -> Result<Vec<Matrix>> {
    let base = cfg.label_matrix(labels)?;
    let noise = if cfg.noise_std > 0.0 {
        Some(Normal::new(0.0, cfg.noise_std).map_err(|e| Error::InvalidConfig(e.to_string()))?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(n_particles);
    for _ in 0..n_particles {
        let mut m = base.clone();
        if let Some(noise) = &noise {
            for v in m.as_mut_slice() {
                let mut e: f64 = noise.sample(rng);
                while e.abs() > cfg.noise_bound {
                    e = noise.sample(rng);
                }
                *v += e;
            }
        }
        out.push(m);
    }
    Ok(out)
}

/// `-((c1r1 + c2r2) / lr_eps) * (gbest - y)`, elementwise.
pub fn estimate_output_gradient(gbest: &Matrix, y: &Matrix, coeffs: SampledCoeffs, lr_eps: f64) -> Result<Matrix> {
    if gbest.shape() != y.shape() {
        return Err(Error::DimensionMismatch { expected: y.rows() * y.cols(), got: gbest.rows() * gbest.cols() });
    }
    if !(lr_eps > 0.0) {
        return Err(Error::InvalidConfig(format!("lr_eps {lr_eps} must be positive")));
    }
    let k = coeffs.total() / lr_eps;
    let data = gbest.as_slice().iter().zip(y.as_slice()).map(|(g, yv)| -k * (g - yv)).collect();
    Matrix::new(y.rows(), y.cols(), data)
}

/// Budget and dynamics of the per-batch HMC-PSO run.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSwarm {
    pub n_particles: usize,
    pub iters: usize,
    pub c1: f64,
    pub c2: f64,
    pub inertia_w: f64,
    pub beta: f64,
    pub step_size: f64,
    pub num_steps: usize,
}

impl Default for InnerSwarm {
    fn default() -> Self {
        let pso = PsoParams::new(1);
        let hmc = HmcConfig::new(1);
        Self {
            n_particles: 4,
            iters: 5,
            c1: pso.c1,
            c2: pso.c2,
            inertia_w: pso.inertia_w,
            beta: pso.beta,
            step_size: hmc.step_size,
            num_steps: hmc.num_steps,
        }
    }
}

impl InnerSwarm {
    fn run_config(&self, dims: usize, seed: u64) -> RunConfig {
        let mut cfg = RunConfig::new(dims, -1.0, 1.0);
        cfg.n_particles = self.n_particles;
        cfg.hmc_enabled = true;
        cfg.pso = PsoParams { c1: self.c1, c2: self.c2, inertia_w: self.inertia_w, beta: self.beta, dims };
        cfg.hmc = HmcConfig { step_size: self.step_size, num_steps: self.num_steps, ..HmcConfig::new(dims) };
        cfg.max_iters = self.iters;
        cfg.conv_window = self.iters;
        cfg.conv_tol = 0.0;
        cfg.seed = seed;
        cfg
    }
}

/// Where the loss gradient at the logits comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientSource {
    /// The HMC-PSO estimate.
    Swarm,
    /// The analytic gradient of the loss; the plain Adam baseline.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub label_init: SwarmLabelInit,
    pub loss: LossKind,
    pub gradient: GradientSource,
    /// Adam step size.
    pub lr: f64,
    /// Scale in the denominator of the output-gradient estimate.
    pub lr_eps: f64,
    pub inner: InnerSwarm,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(batch_size: usize, num_classes: usize) -> Self {
        Self {
            hidden: vec![64],
            epochs: 10,
            label_init: SwarmLabelInit::new(batch_size, num_classes),
            loss: LossKind::CrossEntropy,
            gradient: GradientSource::Swarm,
            lr: 3e-3,
            lr_eps: 0.01,
            inner: InnerSwarm::default(),
            seed: 0,
        }
    }

    pub fn layer_sizes(&self, num_features: usize) -> Vec<usize> {
        let mut sizes = vec![num_features];
        sizes.extend(&self.hidden);
        sizes.push(self.label_init.num_classes);
        sizes
    }
}

/// Supervised loss of candidate logits, the fitness for the inner swarm.
struct OutputFitness<'a> {
    labels: &'a [usize],
    classes: usize,
    loss: LossKind,
}

impl FitnessFunction for OutputFitness<'_> {
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.loss.loss_flat(x, self.classes, self.labels)
    }
    fn dims(&self) -> usize {
        self.labels.len() * self.classes
    }
    fn name(&self) -> &str {
        "output-loss"
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub loss: f64,
    pub accuracy: f64,
}

/// One optimizer step on a batch. `step_seed` seeds the inner swarm.
pub fn train_step(
    model: &mut Mlp,
    features: &Matrix,
    labels: &[usize],
    cfg: &TrainConfig,
    adam: &mut AdamState,
    step_seed: u64,
) -> Result<StepMetrics> {
    if labels.is_empty() {
        return Err(Error::InvalidConfig("empty batch".into()));
    }
    let pass = model.forward_cached(features)?;
    let y = &pass.logits;
    let classes = y.cols();
    let seed_grad = match cfg.gradient {
        GradientSource::Exact => cfg.loss.grad(y, labels),
        GradientSource::Swarm => {
            let mut rng = ChaCha8Rng::seed_from_u64(step_seed);
            let count = cfg.inner.n_particles + 1;
            let starts = init_swarm_from_labels(labels, &cfg.label_init, count, &mut rng)?;
            let fitness = OutputFitness { labels, classes, loss: cfg.loss };
            let run_cfg = cfg.inner.run_config(labels.len() * classes, rng.random());
            let trace = run_hmc_pso_from(&fitness, &run_cfg, starts.into_iter().map(Matrix::into_vec).collect())
                .map_err(|f| f.error)?;
            let coeffs = trace.last_coeffs().unwrap_or_default();
            let gbest = Matrix::new(y.rows(), classes, trace.best.position()?.to_vec())?;
            estimate_output_gradient(&gbest, y, coeffs, cfg.lr_eps)?
        }
    };
    let grads = model.backward(&pass, &seed_grad)?;
    adam.step(model.params_mut(), &grads)?;
    Ok(StepMetrics { loss: cfg.loss.loss(y, labels), accuracy: accuracy_of(y, labels) })
}

fn accuracy_of(logits: &Matrix, labels: &[usize]) -> f64 {
    let hits = labels.iter().enumerate().filter(|&(r, &l)| logits.argmax_row(r) == l).count();
    hits as f64 / labels.len() as f64
}

/// Fraction of samples whose largest logit is at the label.
pub fn evaluate(model: &Mlp, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidConfig("empty dataset".into()));
    }
    Ok(accuracy_of(&model.forward(&data.features)?, &data.labels))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean pre-update batch loss over the epoch.
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

/// Trains `model` for `cfg.epochs` epochs with freshly shuffled batches.
pub fn train(model: &mut Mlp, train_set: &Dataset, test_set: &Dataset, cfg: &TrainConfig) -> Result<Vec<EpochMetrics>> {
    if train_set.is_empty() {
        return Err(Error::InvalidConfig("empty training set".into()));
    }
    let batch = cfg.label_init.batch_size.max(1);
    let mut adam = AdamState::new(model.params().len(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let order = train_set.shuffled_indices(&mut rng);
        let (mut loss_sum, mut acc_sum) = (0.0, 0.0);
        for chunk in order.chunks(batch) {
            let (x, labels) = train_set.subset(chunk);
            let m = train_step(model, &x, &labels, cfg, &mut adam, rng.random())
                .map_err(|e| Error::Batch { batch: step, source: Box::new(e) })?;
            loss_sum += m.loss * chunk.len() as f64;
            acc_sum += m.accuracy * chunk.len() as f64;
            step += 1;
        }
        let n = train_set.len() as f64;
        let test_acc = if test_set.is_empty() { f64::NAN } else { evaluate(model, test_set)? };
        history.push(EpochMetrics { epoch, train_loss: loss_sum / n, train_acc: acc_sum / n, test_acc });
    }
    Ok(history)
}

/// `epoch,train_loss,train_acc,test_acc`.
pub fn write_metrics_csv<W: Write>(metrics: &[EpochMetrics], mut w: W) -> std::io::Result<()> {
    writeln!(w, "epoch,train_loss,train_acc,test_acc")?;
    for m in metrics {
        writeln!(w, "{},{},{},{}", m.epoch, m.train_loss, m.train_acc, m.test_acc)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_matrix_single_row() {
        let cfg = SwarmLabelInit { noise_std: 0.0, ..SwarmLabelInit::new(1, 3) };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = init_swarm_from_labels(&[1], &cfg, 1, &mut rng).unwrap();
        assert_eq!(out[0].as_slice(), &[-4.0, 1.0, -4.0]);
    }

    #[test]
    fn label_matrix_per_row() {
        let cfg = SwarmLabelInit { noise_std: 0.0, ..SwarmLabelInit::new(2, 3) };
        let m = cfg.label_matrix(&[0, 2]).unwrap();
        assert_eq!(m.row(0), &[1.0, -4.0, -4.0]);
        assert_eq!(m.row(1), &[-4.0, -4.0, 1.0]);
        assert!(matches!(cfg.label_matrix(&[3]), Err(Error::LabelOutOfRange { label: 3, .. })));
    }

    #[test]
    fn noisy_particles_differ_within_bound() {
        let cfg = SwarmLabelInit::new(4, 5);
        let labels = [0, 4, 2, 2];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let out = init_swarm_from_labels(&labels, &cfg, 8, &mut rng).unwrap();
        let base = cfg.label_matrix(&labels).unwrap();
        for (i, a) in out.iter().enumerate() {
            let dev = a.as_slice().iter().zip(base.as_slice()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(dev <= 0.1);
            for b in &out[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn gradient_estimate_examples() {
        let c = SampledCoeffs { c1r1: 0.5, c2r2: 0.5 };
        let g = Matrix::new(1, 1, vec![1.0]).unwrap();
        let y = Matrix::new(1, 1, vec![0.0]).unwrap();
        assert_eq!(estimate_output_gradient(&g, &y, c, 1.0).unwrap().as_slice(), &[-1.0]);
        assert_eq!(estimate_output_gradient(&y, &y, c, 1.0).unwrap().as_slice(), &[0.0]);
        assert!(estimate_output_gradient(&g, &Matrix::zeros(1, 2), c, 1.0).is_err());
        assert!(estimate_output_gradient(&g, &y, c, 0.0).is_err());
    }

    #[test]
    fn gradient_estimate_sign_and_linearity() {
        let c = SampledCoeffs { c1r1: 0.3, c2r2: 1.1 };
        let g = Matrix::new(2, 2, vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let y = Matrix::new(2, 2, vec![0.0, 1.0, 0.5, -1.0]).unwrap();
        let e = estimate_output_gradient(&g, &y, c, 0.01).unwrap();
        for i in 0..4 {
            let diff = g.as_slice()[i] - y.as_slice()[i];
            assert_eq!((-e.as_slice()[i]).signum() * diff.abs(), diff.signum() * diff.abs());
        }
        let g3 = g.map(|v| 3.0 * v);
        let y3 = y.map(|v| 3.0 * v);
        let e3 = estimate_output_gradient(&g3, &y3, c, 0.01).unwrap();
        for i in 0..4 {
            assert!((e3.as_slice()[i] - 3.0 * e.as_slice()[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn label_matrix_beats_zero_logits() {
        let init = SwarmLabelInit::new(3, 4);
        let labels = [3, 0, 1];
        let m = init.label_matrix(&labels).unwrap();
        let zero = Matrix::zeros(3, 4);
        let ce = LossKind::CrossEntropy;
        assert!(ce.loss(&m, &labels) < ce.loss(&zero, &labels));
    }

    #[test]
    fn swarm_frozen_at_output_is_a_no_op() {
        // gbest = y gives a zero seed, so backprop yields zero gradients and
        // Adam leaves the parameters where they are
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = Mlp::new(&[2, 4, 2], &mut rng).unwrap();
        let before = model.clone();
        let x = Matrix::new(2, 2, vec![0.1, 0.2, -0.3, 0.4]).unwrap();
        let pass = model.forward_cached(&x).unwrap();
        let seed = estimate_output_gradient(&pass.logits, &pass.logits, SampledCoeffs { c1r1: 1.0, c2r2: 1.0 }, 0.01)
            .unwrap();
        let grads = model.backward(&pass, &seed).unwrap();
        let mut adam = AdamState::new(model.params().len(), 0.01);
        adam.step(model.params_mut(), &grads).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn evaluate_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = Mlp::new(&[2, 3], &mut rng).unwrap();
        model.params_mut().fill(0.0);
        // constant logits: argmax is always class 0
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let data = Dataset::new(Matrix::zeros(30, 2), labels, 3).unwrap();
        assert!((evaluate(&model, &data).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        // identity-like weights give perfect one-hot logits
        let p = model.params_mut();
        p[0] = 1.0; // class 0 reads feature 0
        p[3] = 1.0; // class 1 reads feature 1
        let feats = Matrix::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let data = Dataset::new(feats, vec![0, 1], 3).unwrap();
        assert_eq!(evaluate(&model, &data).unwrap(), 1.0);
    }

    #[test]
    fn blobs_train_to_high_accuracy() {
        let data = Dataset::blobs(100, 4);
        let (tr, te) = data.split(0.25, 1);
        let cfg = TrainConfig { epochs: 10, seed: 3, ..TrainConfig::new(16, 2) };
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut model = Mlp::new(&cfg.layer_sizes(2), &mut rng).unwrap();
        let hist = train(&mut model, &tr, &te, &cfg).unwrap();
        assert!(hist.last().unwrap().test_acc >= 0.95, "{hist:?}");
        assert!(hist.last().unwrap().train_loss < hist[0].train_loss);
    }
}
