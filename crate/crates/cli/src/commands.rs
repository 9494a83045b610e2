use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use jpa_core::affinity::{PairwiseModel, TrainConfig};
use jpa_core::eval::{evaluate, EvalConfig, Predictions, REPORT_HEADER};
use jpa_core::model::Scene;
use jpa_core::pipeline::{benchmark_local_vs_global, solve_scenes, Mode, RegionTiming, SolveConfig, BENCH_HEADER};
use jpa_core::synth::generate_scenes;
use serde::{Deserialize, Serialize};

use crate::config::FileConfig;
use crate::error::CliError;
use crate::store::{load_scene_dir, write_file, write_scene_dir};
use crate::{Cli, Command, GlobalArgs, SweepParam};

/// Solve-time statistics written next to a predictions file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingFile {
    pub median_solve_ms: Option<f64>,
    pub max_solve_ms: Option<f64>,
    pub skipped: usize,
    pub regions: Vec<RegionTiming>,
}

pub fn timing_path(pred: &Path) -> PathBuf {
    pred.with_extension("timing.json")
}

struct Settings {
    file: FileConfig,
    global: GlobalArgs,
}

impl Settings {
    fn new(global: &GlobalArgs) -> Result<Self, CliError> {
        let file = match &global.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Ok(Self {
            file,
            global: global.clone(),
        })
    }

    fn train(&self) -> TrainConfig {
        let mut t = self.file.train.clone();
        if let Some(s) = self.global.seed {
            t.seed = s;
        }
        t
    }

    fn solve(&self) -> Result<SolveConfig, CliError> {
        let mut s = self.file.solve.clone();
        if let Some(t) = self.global.tau {
            s.tau = t;
        }
        if let Some(n) = self.global.n_candidates {
            s.sampling.n_candidates = n;
        }
        if let Some(m) = self.global.mode {
            s.mode = m.into();
        }
        s.validate()?;
        Ok(s)
    }

    fn eval(&self) -> Result<EvalConfig, CliError> {
        self.file.eval.validate()?;
        Ok(self.file.eval)
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.global.workers {
        if n == 0 {
            return Err(CliError::usage("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot start worker pool: {e}")))?;
    }
    let settings = Settings::new(&cli.global)?;
    match &cli.command {
        Command::Synth { out, count, preset } => synth(&settings, out, *count, preset.as_deref()),
        Command::Train { scenes, out, report } => train(&settings, scenes, out, report.as_deref()),
        Command::Solve { scenes, model, out } => solve(&settings, scenes, model.as_deref(), out),
        Command::Eval {
            pred,
            scenes,
            out,
            setting,
        } => eval(&settings, pred, scenes, out.as_deref(), setting.as_deref()),
        Command::Sweep {
            scenes,
            model,
            param,
            grid,
            out,
        } => sweep(
            &settings,
            scenes,
            model.as_deref(),
            *param,
            grid.as_deref(),
            out.as_deref(),
        ),
        Command::Bench {
            scenes,
            model,
            sizes,
            trials,
            out,
        } => bench(&settings, scenes, model, sizes, *trials, out.as_deref()),
    }
}

fn synth(s: &Settings, out: &Path, count: usize, preset: Option<&str>) -> Result<(), CliError> {
    let mut cfg = s.file.synth_config(preset)?;
    if let Some(seed) = s.global.seed {
        cfg.seed = seed;
    }
    let scenes = generate_scenes(&cfg, count)?;
    let manifest = write_scene_dir(out, &cfg, &scenes)?;
    println!("wrote {} scenes to {}", manifest.count, out.display());
    println!("config_hash {}", manifest.config_hash);
    Ok(())
}

fn load_model(path: &Path) -> Result<PairwiseModel, CliError> {
    if !path.is_file() {
        return Err(CliError::usage(format!("model file {} does not exist", path.display())));
    }
    Ok(PairwiseModel::load(path)?)
}

fn train(s: &Settings, scenes_dir: &Path, out: &Path, report: Option<&Path>) -> Result<(), CliError> {
    let cfg = s.train();
    cfg.validate()?;
    let scenes: Vec<Scene> = load_scene_dir(scenes_dir)?.into_iter().map(|(_, s)| s).collect();
    let model = jpa_core::affinity::train_pairwise(&scenes, &cfg)?;
    model.save(out)?;
    let mut table = String::from("pair,heldout_accuracy,samples_per_class\n");
    for p in &model.pairs {
        let _ = writeln!(
            table,
            "{},{:.4},{}",
            jpa_core::affinity::pair_name(p.joints.0, p.joints.1),
            p.heldout_accuracy,
            p.samples_per_class
        );
    }
    print!("{table}");
    let mean = model.pairs.iter().map(|p| p.heldout_accuracy).sum::<f64>() / model.pairs.len() as f64;
    println!(
        "mean held-out accuracy {mean:.4} over {} pair models",
        model.pairs.len()
    );
    if let Some(r) = report {
        write_file(r, table.as_bytes())?;
    }
    Ok(())
}

fn model_for(cfg: &SolveConfig, model: Option<&Path>) -> Result<Option<PairwiseModel>, CliError> {
    match (cfg.mode, model) {
        (Mode::Argmax, _) => Ok(None),
        (_, Some(p)) => load_model(p).map(Some),
        (m, None) => Err(CliError::usage(format!("--model is required for mode {m}"))),
    }
}

fn solve(s: &Settings, scenes_dir: &Path, model: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let cfg = s.solve()?;
    let model = model_for(&cfg, model)?;
    let scenes = load_scene_dir(scenes_dir)?;
    let result = solve_scenes(&scenes, model.as_ref(), &cfg)?;
    result.predictions.save(out)?;
    let timing = TimingFile {
        median_solve_ms: result.median_solve_ms(),
        max_solve_ms: result.timings.iter().map(|t| t.solve_ms).reduce(f64::max),
        skipped: result.skipped,
        regions: result.timings.clone(),
    };
    let text = serde_json::to_string_pretty(&timing).map_err(|e| CliError::data(e.to_string()))?;
    write_file(&timing_path(out), text.as_bytes())?;
    let regions: usize = result.predictions.scenes.iter().map(|s| s.regions.len()).sum();
    println!(
        "mode {} tau {} N {}: {} regions, {} skipped",
        cfg.mode, cfg.tau, cfg.sampling.n_candidates, regions, result.skipped
    );
    if let (Some(med), Some(max)) = (timing.median_solve_ms, timing.max_solve_ms) {
        println!("solve time per person: median {med:.3} ms, max {max:.3} ms");
    }
    Ok(())
}

fn eval(
    s: &Settings,
    pred: &Path,
    scenes_dir: &Path,
    out: Option<&Path>,
    setting: Option<&str>,
) -> Result<(), CliError> {
    let cfg = s.eval()?;
    if !pred.is_file() {
        return Err(CliError::usage(format!(
            "predictions file {} does not exist",
            pred.display()
        )));
    }
    let preds = Predictions::load(pred)?;
    let scenes = load_scene_dir(scenes_dir)?;
    let report = evaluate(&preds, &scenes, &cfg)?;
    let median = std::fs::read_to_string(timing_path(pred))
        .ok()
        .and_then(|t| serde_json::from_str::<TimingFile>(&t).ok())
        .and_then(|t| t.median_solve_ms);
    let label = setting.map_or_else(
        || format!("{} N={} tau={}", preds.mode, preds.n_candidates, preds.tau),
        str::to_string,
    );
    print!("{}", report.pretty(&label));
    let csv = format!("{REPORT_HEADER}\n{}\n", report.csv_row(&label, median));
    match out {
        Some(p) => write_file(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, CliError> {
    let items: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::usage(format!("{what} is empty")));
    }
    items
        .into_iter()
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::usage(format!("invalid {what} value {s:?}")))
        })
        .collect()
}

fn sweep(
    s: &Settings,
    scenes_dir: &Path,
    model: Option<&Path>,
    param: SweepParam,
    grid: Option<&str>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let base = s.solve()?;
    let eval_cfg = s.eval()?;
    let values: Vec<f64> = match (param, grid) {
        (_, Some(g)) => parse_list(g, "grid")?,
        (SweepParam::Tau, None) => (0..10).map(|i| i as f64 / 10.0).collect(),
        (SweepParam::N, None) => vec![1.0, 3.0, 5.0],
    };
    let model = model_for(&base, model)?;
    let scenes = load_scene_dir(scenes_dir)?;
    let name = match param {
        SweepParam::Tau => "tau",
        SweepParam::N => "n",
    };
    let mut csv = format!("{name},map,median_ms\n");
    for v in values {
        let mut cfg = base.clone();
        match param {
            SweepParam::Tau => cfg.tau = v,
            SweepParam::N => {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(CliError::usage(format!(
                        "N grid values must be positive integers, got {v}"
                    )));
                }
                cfg.sampling.n_candidates = v as usize;
            }
        }
        cfg.validate()?;
        let result = solve_scenes(&scenes, model.as_ref(), &cfg)?;
        let report = evaluate(&result.predictions, &scenes, &eval_cfg)?;
        let map = report.total.map_or_else(|| "nan".to_string(), |t| format!("{t:.4}"));
        let med = result.median_solve_ms().map_or_else(String::new, |m| format!("{m:.3}"));
        let _ = writeln!(csv, "{v},{map},{med}");
        eprintln!("{name} = {v}: mAP {map}");
    }
    match out {
        Some(p) => write_file(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn bench(
    s: &Settings,
    scenes_dir: &Path,
    model: &Path,
    sizes: &str,
    trials: usize,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let sizes: Vec<usize> = parse_list(sizes, "sizes")?;
    if trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    let model = load_model(model)?;
    let scenes: Vec<Scene> = load_scene_dir(scenes_dir)?.into_iter().map(|(_, s)| s).collect();
    let sampling = s.solve()?.sampling;
    let rows = benchmark_local_vs_global(&scenes, &model, &sizes, trials, &sampling)?;
    let mut csv = format!("{BENCH_HEADER}\n");
    for r in &rows {
        let _ = writeln!(csv, "{}", r.csv());
    }
    match out {
        Some(p) => write_file(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    Ok(())
}
