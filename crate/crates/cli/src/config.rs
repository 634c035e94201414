//! Sectioned key-value config files.
//!
//! Every key is optional. Unset keys keep the defaults of whichever preset
//! the command starts from, and unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use hmc_pso::coupler::RunConfig;
use hmc_pso::nn::{GradientSource, LossKind, TrainConfig};

use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectiveSection {
    pub name: Option<String>,
    pub dims: Option<usize>,
    /// Mode file for `mixture`, relative to the config file.
    pub modes: Option<PathBuf>,
    pub order: Option<usize>,
    pub k: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwarmSection {
    pub n_particles: Option<usize>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub inertia_w: Option<f64>,
    pub beta: Option<f64>,
    /// Inner-run iterations per batch; only read by `train`.
    pub iters: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmcSection {
    pub enabled: Option<bool>,
    pub step_size: Option<f64>,
    pub num_steps: Option<usize>,
    /// Scalar mass, applied to every dimension.
    pub mass: Option<f64>,
    pub metropolis: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub max_iters: Option<usize>,
    pub conv_window: Option<usize>,
    pub conv_tol: Option<f64>,
    pub seed: Option<u64>,
    pub init_lo: Option<f64>,
    pub init_hi: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// CSV file relative to the config file. Unset means synthetic blobs.
    pub path: Option<PathBuf>,
    pub features: Option<usize>,
    pub classes: Option<usize>,
    pub header: Option<bool>,
    pub scale: Option<f64>,
    pub test_fraction: Option<f64>,
    pub blobs_per_class: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub lr_eps: Option<f64>,
    pub loss: Option<String>,
    pub gradient: Option<String>,
    pub seed: Option<u64>,
    pub target_value: Option<f64>,
    pub off_value: Option<f64>,
    pub noise_std: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub objective: ObjectiveSection,
    pub swarm: SwarmSection,
    pub hmc: HmcSection,
    pub run: RunSection,
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainSection,
    /// Directory that relative paths resolve against.
    #[serde(skip)]
    pub base: PathBuf,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::new("io", format!("cannot read config `{}`: {e}", path.display())))?;
        let mut cfg: ConfigFile = toml::from_str(&text).map_err(|e| {
            let msg = e.message().replace('\n', " ");
            CliError::new("config", format!("`{}`: {msg}", path.display()))
        })?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Layers the `[swarm]`, `[hmc]` and `[run]` sections over `cfg`.
    pub fn apply_run(&self, cfg: &mut RunConfig) {
        let s = &self.swarm;
        set(&mut cfg.n_particles, s.n_particles);
        set(&mut cfg.pso.c1, s.c1);
        set(&mut cfg.pso.c2, s.c2);
        set(&mut cfg.pso.inertia_w, s.inertia_w);
        set(&mut cfg.pso.beta, s.beta);
        let h = &self.hmc;
        set(&mut cfg.hmc_enabled, h.enabled);
        set(&mut cfg.hmc.step_size, h.step_size);
        set(&mut cfg.hmc.num_steps, h.num_steps);
        set(&mut cfg.hmc.metropolis, h.metropolis);
        if let Some(m) = h.mass {
            cfg.hmc.mass_diag.fill(m);
        }
        let r = &self.run;
        if let Some(n) = r.max_iters {
            // an explicit budget with no explicit window keeps the window
            // inside the budget
            cfg.max_iters = n;
            cfg.conv_window = cfg.conv_window.min(n);
        }
        set(&mut cfg.conv_window, r.conv_window);
        set(&mut cfg.conv_tol, r.conv_tol);
        set(&mut cfg.seed, r.seed);
        if let Some(lo) = r.init_lo {
            cfg.init_lo.fill(lo);
        }
        if let Some(hi) = r.init_hi {
            cfg.init_hi.fill(hi);
        }
    }

    /// Layers `[train]`, `[model]`, `[swarm]` and `[hmc]` over `cfg`.
    pub fn apply_train(&self, cfg: &mut TrainConfig) -> Result<(), CliError> {
        let t = &self.train;
        set(&mut cfg.epochs, t.epochs);
        set(&mut cfg.label_init.batch_size, t.batch_size);
        set(&mut cfg.lr, t.lr);
        set(&mut cfg.lr_eps, t.lr_eps);
        set(&mut cfg.seed, t.seed);
        set(&mut cfg.label_init.target_value, t.target_value);
        set(&mut cfg.label_init.off_value, t.off_value);
        if let Some(sd) = t.noise_std {
            cfg.label_init.noise_std = sd;
            cfg.label_init.noise_bound = sd;
        }
        if let Some(name) = &t.loss {
            cfg.loss = LossKind::parse(name)
                .ok_or_else(|| CliError::new("config", format!("unknown loss `{name}`")))?;
        }
        if let Some(name) = &t.gradient {
            cfg.gradient = match name.as_str() {
                "swarm" => GradientSource::Swarm,
                "exact" => GradientSource::Exact,
                _ => return Err(CliError::new("config", format!("unknown gradient source `{name}`"))),
            };
        }
        set(&mut cfg.hidden, self.model.hidden.clone());
        let s = &self.swarm;
        let inner = &mut cfg.inner;
        set(&mut inner.n_particles, s.n_particles);
        set(&mut inner.iters, s.iters);
        set(&mut inner.c1, s.c1);
        set(&mut inner.c2, s.c2);
        set(&mut inner.inertia_w, s.inertia_w);
        set(&mut inner.beta, s.beta);
        set(&mut inner.step_size, self.hmc.step_size);
        set(&mut inner.num_steps, self.hmc.num_steps);
        Ok(())
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_override_defaults() {
        let cfg: ConfigFile = toml::from_str(
            "[swarm]\nn_particles = 7\n[hmc]\nmass = 2.0\n[run]\nmax_iters = 30\nseed = 9\ninit_hi = 3.0\n",
        )
        .unwrap();
        let mut run = RunConfig::new(2, -1.0, 1.0);
        cfg.apply_run(&mut run);
        assert_eq!(run.n_particles, 7);
        assert_eq!(run.hmc.mass_diag, vec![2.0, 2.0]);
        assert_eq!((run.max_iters, run.conv_window, run.seed), (30, 30, 9));
        assert_eq!(run.init_hi, vec![3.0, 3.0]);
        assert_eq!(run.init_lo, vec![-1.0, -1.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ConfigFile>("[swarm]\nparticles = 3\n").is_err());
        assert!(toml::from_str::<ConfigFile>("[extra]\n").is_err());
    }
}
