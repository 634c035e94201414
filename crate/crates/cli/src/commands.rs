use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hmc_pso::coupler::{run_hmc_pso, RunConfig, RunTrace};
use hmc_pso::hmc::HmcConfig;
use hmc_pso::nn::{train, write_metrics_csv, Dataset, Mlp, TrainConfig};
use hmc_pso::objectives::{
    benchmark_suite, decode_ruler, total_violation, Benchmark, FitnessFunction, GaussianMixture, GolombObjective,
    GolombRuler,
};
use hmc_pso::presets;
use hmc_pso::swarm::PsoParams;

use crate::config::ConfigFile;
use crate::CliError;

const TRACE_STEM: &str = "trace";

enum Objective {
    Benchmark(Benchmark),
    Mixture(GaussianMixture),
    Golomb(GolombObjective),
}

impl Objective {
    fn fitness(&self) -> &dyn FitnessFunction {
        match self {
            Objective::Benchmark(b) => b,
            Objective::Mixture(m) => m,
            Objective::Golomb(g) => g,
        }
    }
}

fn build_objective(cfg: &ConfigFile) -> Result<(Objective, RunConfig), CliError> {
    let sec = &cfg.objective;
    let name = sec
        .name
        .as_deref()
        .ok_or_else(|| CliError::new("config", "`[objective] name` is required".to_string()))?;
    match name {
        "mixture" => {
            let gm = match &sec.modes {
                Some(p) => GaussianMixture::from_file(&cfg.resolve(p))?,
                None => presets::mixture_landscape()?,
            };
            // the preset's dynamics in a box one grid spacing beyond the
            // outermost centers
            let dims = gm.dims();
            let preset = presets::mixture_config();
            let mut lo = vec![f64::INFINITY; dims];
            let mut hi = vec![f64::NEG_INFINITY; dims];
            for m in gm.modes() {
                for i in 0..dims {
                    lo[i] = lo[i].min(m.center[i] - 4.0);
                    hi[i] = hi[i].max(m.center[i] + 4.0);
                }
            }
            let run = RunConfig {
                pso: PsoParams { dims, ..preset.pso },
                hmc: HmcConfig { mass_diag: vec![1.0; dims], ..preset.hmc.clone() },
                init_lo: lo,
                init_hi: hi,
                ..preset
            };
            Ok((Objective::Mixture(gm), run))
        }
        "golomb" => {
            let order = sec
                .order
                .ok_or_else(|| CliError::new("config", "golomb objective needs `order`".to_string()))?;
            check_order(order)?;
            let (mut obj, run) = presets::golomb(order);
            if let Some(k) = sec.k {
                obj = GolombObjective::new(order, k);
            }
            Ok((Objective::Golomb(obj), run))
        }
        other => {
            let dims = sec.dims.unwrap_or(if other == "double-well" { 1 } else { 2 });
            let b = Benchmark::by_name(other, dims)
                .ok_or_else(|| CliError::new("objective", format!("unknown objective `{other}` at {dims} dims")))?;
            let run = RunConfig::new(dims, b.lo, b.hi);
            Ok((Objective::Benchmark(b), run))
        }
    }
}

pub fn check_order(order: usize) -> Result<(), CliError> {
    if !(2..=50).contains(&order) {
        return Err(CliError::new("usage", format!("order {order} is outside 2..=50")));
    }
    Ok(())
}

fn run_and_save(fitness: &dyn FitnessFunction, run: &RunConfig, out: &Path) -> Result<RunTrace, CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::new("io", format!("cannot create `{}`: {e}", out.display())))?;
    match run_hmc_pso(fitness, run) {
        Ok(trace) => {
            trace.save(out, TRACE_STEM)?;
            Ok(trace)
        }
        Err(failure) => {
            if !failure.partial.records.is_empty() {
                failure.partial.save(out, TRACE_STEM)?;
            }
            Err(CliError::new(
                failure.error.kind(),
                format!("run aborted after {} iterations: {}", failure.partial.records.len(), failure.error),
            ))
        }
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", parts.join(","))
}

pub fn optimize(config: &Path, seed: Option<u64>, out: &Path) -> Result<String, CliError> {
    let file = ConfigFile::load(config)?;
    let (objective, mut run) = build_objective(&file)?;
    file.apply_run(&mut run);
    if let Some(s) = seed {
        run.seed = s;
    }
    let trace = run_and_save(objective.fitness(), &run, out)?;
    let best = trace.best.position()?;
    let mut line = format!(
        "objective={} best_value={:?} best_position={} iterations={} termination={}",
        objective.fitness().name(),
        trace.best.value,
        fmt_vec(best),
        trace.iterations(),
        trace.termination.as_str()
    );
    match &objective {
        Objective::Mixture(gm) => {
            let (center, dist) = gm
                .modes()
                .iter()
                .map(|m| (m.center.as_slice(), distance(&m.center, best)))
                .fold((&[][..], f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
            let _ = write!(line, " nearest_mode={} mode_distance={:?}", fmt_vec(center), dist);
        }
        Objective::Benchmark(b) => {
            let _ = write!(line, " optimum_value={:?}", b.optimum_value);
        }
        Objective::Golomb(_) => {
            let ruler = decode_ruler(best);
            let _ = write!(line, " ruler={} violations={}", ruler, total_violation(&ruler));
        }
    }
    line.push('\n');
    Ok(line)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn golomb(order: usize, config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<String, CliError> {
    check_order(order)?;
    let (mut objective, mut run) = presets::golomb(order);
    if let Some(path) = config {
        let file = ConfigFile::load(path)?;
        if let Some(k) = file.objective.k {
            objective = GolombObjective::new(order, k);
        }
        file.apply_run(&mut run);
    }
    if let Some(s) = seed {
        run.seed = s;
    }
    let trace = run_and_save(&objective, &run, out)?;
    let ruler = decode_ruler(trace.best.position()?);
    let scale = 10f64.powi(objective.k() as i32);
    let mut text = String::new();
    let _ = writeln!(text, "ruler {ruler}");
    let _ = writeln!(text, "order {order}");
    let _ = writeln!(text, "violations {}", total_violation(&ruler));
    let _ = writeln!(text, "length {}", ruler.length());
    let _ = writeln!(text, "loss {}", objective.loss_of(&ruler));
    let _ = writeln!(text, "k {}", objective.k());
    if let Some(opt) = GolombRuler::optimal_length(order) {
        let _ = writeln!(text, "optimal_length {opt}");
        let _ = writeln!(text, "optimal_loss {}", opt as f64 / scale);
    }
    let _ = writeln!(text, "iterations {}", trace.iterations());
    let _ = writeln!(text, "termination {}", trace.termination.as_str());
    Ok(text)
}

pub fn train_cmd(config: &Path, seed: Option<u64>, out: &Path) -> Result<String, CliError> {
    let file = ConfigFile::load(config)?;
    let d = &file.data;
    let mut data = match &d.path {
        Some(p) => {
            let (features, classes) = match (d.features, d.classes) {
                (Some(f), Some(c)) => (f, c),
                _ => return Err(CliError::new("config", "`[data]` needs `features` and `classes`".to_string())),
            };
            let path = file.resolve(p);
            Dataset::from_csv_path(&path, features, classes, d.header.unwrap_or(false)).map_err(|e| {
                CliError::new(e.kind(), format!("`{}`: {e}", path.display()))
            })?
        }
        None => Dataset::blobs(d.blobs_per_class.unwrap_or(100), file.train.seed.unwrap_or(0)),
    };
    if let Some(s) = d.scale {
        data.scale(s);
    }
    let mut cfg = TrainConfig::new(32, data.num_classes);
    file.apply_train(&mut cfg)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let (train_set, test_set) = data.split(d.test_fraction.unwrap_or(0.25), cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Mlp::new(&cfg.layer_sizes(data.num_features()), &mut rng)?;
    let history = train(&mut model, &train_set, &test_set, &cfg)?;

    std::fs::create_dir_all(out)
        .map_err(|e| CliError::new("io", format!("cannot create `{}`: {e}", out.display())))?;
    let mut buf = Vec::new();
    write_metrics_csv(&history, &mut buf).map_err(hmc_pso::Error::from)?;
    std::fs::write(out.join("metrics.csv"), &buf).map_err(hmc_pso::Error::from)?;

    let mut text = String::new();
    for m in &history {
        let _ = writeln!(
            text,
            "epoch {} train_loss {:.6} train_acc {:.4} test_acc {:.4}",
            m.epoch, m.train_loss, m.train_acc, m.test_acc
        );
    }
    let last = history.last().map_or(f64::NAN, |m| m.test_acc);
    let _ = writeln!(text, "final_test_acc {last}");
    Ok(text)
}

pub fn bench(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<String, CliError> {
    let file = match config {
        Some(p) => Some(ConfigFile::load(p)?),
        None => None,
    };
    let dims = file.as_ref().and_then(|f| f.objective.dims).unwrap_or(2);
    let mut csv = String::from("name,dims,best_value,optimum_value,abs_error,iterations,termination\n");
    let mut table = format!(
        "{:<12} {:>4} {:>14} {:>10} {:>12} {:>6}  {}\n",
        "name", "dims", "best", "optimum", "error", "iters", "termination"
    );
    for b in benchmark_suite(dims) {
        let mut run = RunConfig::new(b.dims(), b.lo, b.hi);
        if let Some(f) = &file {
            f.apply_run(&mut run);
        }
        if let Some(s) = seed {
            run.seed = s;
        }
        let trace = run_hmc_pso(&b, &run).map_err(|f| CliError::new(f.error.kind(), f.to_string()))?;
        let err = (trace.best.value - b.optimum_value).abs();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            b.name(),
            b.dims(),
            trace.best.value,
            b.optimum_value,
            err,
            trace.iterations(),
            trace.termination.as_str()
        );
        let _ = writeln!(
            table,
            "{:<12} {:>4} {:>14.6e} {:>10.4} {:>12.3e} {:>6}  {}",
            b.name(),
            b.dims(),
            trace.best.value,
            b.optimum_value,
            err,
            trace.iterations(),
            trace.termination.as_str()
        );
    }
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::new("io", format!("cannot create `{}`: {e}", out.display())))?;
    std::fs::write(out.join("bench.csv"), csv).map_err(hmc_pso::Error::from)?;
    Ok(table)
}
