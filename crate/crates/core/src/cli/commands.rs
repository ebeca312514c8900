use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::settings::{calibration_batch, eval_axes, probe_point, spatial_axes, Settings};
use super::{CliError, Simulation, Target};
use crate::analysis::{bound_check, conversion_metrics, fft_smooth, hessian_check as check_hessian, sweep_timesteps, SweepConfig};
use crate::calibration::calibrate;
use crate::network::{ann_output, grid_points, load_model, save_model, ModelFile, ModelMeta, NetworkKind, PointBatch};
use crate::pinn::{reference_solution, sample_collocation, train as train_pinn, CollocationSet, PdeProblem, PinnError, TrainLog};
use crate::snn::{
    convert as convert_ann, load_snn, propagate_rate, rate_raster_rate, raster_rate, save_snn, simulate_event, spiking_rate,
    SnnFile, SnnMeta,
};
use crate::table::{fmt_f, Table};
use crate::tensor::Tensor;

/// Layout of one run: `config/`, `model.json`, `snn/`, `csv/`.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(out: &Path, run: &str) -> Self {
        Self { root: out.join(run) }
    }

    pub fn config(&self, verb: &str) -> PathBuf {
        self.root.join("config").join(format!("{verb}.toml"))
    }

    pub fn model(&self) -> PathBuf {
        self.root.join("model.json")
    }

    pub fn snn(&self, tag: &str) -> PathBuf {
        self.root.join("snn").join(format!("{tag}.json"))
    }

    pub fn csv(&self, name: &str) -> PathBuf {
        self.root.join("csv").join(format!("{name}.csv"))
    }

    pub fn write_config(&self, verb: &str, s: &Settings) -> Result<(), CliError> {
        let path = self.config(verb);
        fs::create_dir_all(path.parent().expect("has parent"))?;
        fs::write(path, s.to_toml())?;
        Ok(())
    }

    /// Replaces the rows of `stage` in `csv/timing.csv`.
    fn record_timing(&self, stage: &str, seconds: f64) -> Result<(), CliError> {
        let path = self.csv("timing");
        let mut rows: BTreeMap<String, String> = BTreeMap::new();
        if path.exists() {
            let t = Table::read(&path)?;
            for r in t.rows {
                if r.len() == 2 {
                    rows.insert(r[0].clone(), r[1].clone());
                }
            }
        }
        rows.insert(stage.to_string(), fmt_f(seconds));
        let mut t = Table::new(&["stage", "seconds"]);
        for (k, v) in rows {
            t.push(vec![k, v]);
        }
        t.write(&path)?;
        Ok(())
    }
}

fn snn_tag(s: &Settings) -> String {
    format!("{}-t{}", s.calibration.mode, s.conversion.timesteps)
}

fn load_checked_model(s: &Settings, dir: &RunDir) -> Result<ModelFile, CliError> {
    let path = dir.model();
    if !path.exists() {
        return Err(CliError::Runtime(format!("no model at {}; run `train` first", path.display())));
    }
    let m = load_model(&path)?;
    let want = s.problem.problem.name();
    if m.meta.problem != want {
        return Err(CliError::Runtime(format!("model was trained on `{}`, not `{want}`", m.meta.problem)));
    }
    Ok(m)
}

fn load_checked_snn(s: &Settings, dir: &RunDir) -> Result<SnnFile, CliError> {
    let path = dir.snn(&snn_tag(s));
    if !path.exists() {
        return Err(CliError::Runtime(format!(
            "no SNN at {}; run `convert --mode {} -T {}` first",
            path.display(),
            s.calibration.mode,
            s.conversion.timesteps
        )));
    }
    Ok(load_snn(&path)?)
}

fn collocation(s: &Settings, problem: &PdeProblem) -> Result<CollocationSet, CliError> {
    Ok(sample_collocation(problem, s.problem.counts, s.problem.train.seed)?)
}

fn log_table(log: &TrainLog) -> Table {
    let mut t = Table::new(&["epoch", "loss", "pde", "bc", "ic", "lr"]);
    for r in &log.records {
        t.push(vec![
            r.epoch.to_string(),
            fmt_f(r.loss.total),
            fmt_f(r.loss.pde),
            fmt_f(r.loss.bc),
            fmt_f(r.loss.ic),
            fmt_f(r.lr),
        ]);
    }
    t
}

pub fn train(s: &Settings, dir: &RunDir) -> Result<(), CliError> {
    let problem = s.pde();
    let spec = s.spec();
    let colloc = collocation(s, &problem)?;
    log::info!("training {} ({} parameters) for {} epochs", problem.id, spec.parameter_count(), s.problem.train.epochs);
    let start = Instant::now();
    let (params, log) = match train_pinn(&problem, &spec, &colloc, &s.problem.train) {
        Ok(r) => r,
        Err(PinnError::Diverged { epoch, loss, log }) => {
            log_table(&log).write(&dir.csv("train_log"))?;
            return Err(CliError::Runtime(format!("training diverged at epoch {epoch} (loss {loss:e})")));
        }
        Err(e) => return Err(e.into()),
    };
    let seconds = start.elapsed().as_secs_f64();
    let model = ModelFile {
        spec,
        params,
        meta: ModelMeta {
            problem: problem.id.name().to_string(),
            epochs: s.problem.train.epochs,
            final_loss: log.final_loss.total,
            seed: s.problem.train.seed,
        },
    };
    save_model(&model, &dir.model())?;
    log_table(&log).write(&dir.csv("train_log"))?;
    dir.record_timing("train", seconds)?;
    if !log.records.is_empty() {
        dir.record_timing("train_per_epoch", seconds / log.records.len() as f64)?;
    }
    println!("final loss {:.6e} ({seconds:.1} s); model written to {}", log.final_loss.total, dir.model().display());
    Ok(())
}

pub fn convert(s: &Settings, dir: &RunDir) -> Result<(), CliError> {
    let problem = s.pde();
    let model = load_checked_model(s, dir)?;
    let colloc = collocation(s, &problem)?;
    let batch = calibration_batch(&model.spec, &colloc, s.calibration_points, s.problem.train.seed);
    let mut snn = convert_ann(&model.spec, &model.params, &batch, &s.conversion)?;
    let report = calibrate(&model.spec, &model.params, &mut snn, &batch, &s.calibration)?;
    let tag = snn_tag(s);
    let file = SnnFile {
        network: snn,
        meta: SnnMeta {
            problem: problem.id.name().to_string(),
            calibration: s.calibration.mode.to_string(),
            seed: s.problem.train.seed,
        },
    };
    let path = dir.snn(&tag);
    save_snn(&file, &path)?;
    report.table().write(&dir.csv(&format!("calibration_{tag}")))?;
    dir.record_timing(&format!("calibrate_{tag}"), report.seconds)?;
    for l in &report.layers {
        println!(
            "subnet {} layer {}: e_c {:.4e} -> {:.4e}{}",
            l.subnet,
            l.layer,
            l.pre_ec_norm,
            l.post_ec_norm,
            if l.reverted { " (reverted)" } else { "" }
        );
    }
    println!(
        "output error on calibration data {:.4e} -> {:.4e}; SNN written to {}",
        report.total_pre,
        report.total_post,
        path.display()
    );
    Ok(())
}

struct EvalGrid {
    axes: Vec<Vec<f64>>,
    batch: PointBatch,
    points: Tensor,
    reference: Tensor,
}

fn eval_grid(s: &Settings, problem: &PdeProblem) -> Result<EvalGrid, CliError> {
    let axes = eval_axes(problem, s.eval_points);
    let points = grid_points(&axes);
    let reference = reference_solution(problem, &points)?;
    Ok(EvalGrid {
        batch: PointBatch::Grid(axes.clone()),
        axes,
        points,
        reference,
    })
}

fn field_table(problem: &PdeProblem, points: &Tensor, columns: &[(&str, &Tensor)]) -> Table {
    let mut header: Vec<String> = problem.axis_names().iter().map(|s| s.to_string()).collect();
    for (prefix, _) in columns {
        for o in problem.output_names() {
            header.push(if prefix.is_empty() { o.to_string() } else { format!("{prefix}_{o}") });
        }
    }
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::new(&refs);
    for i in 0..points.rows() {
        let mut row: Vec<String> = points.row(i).iter().map(|v| fmt_f(*v)).collect();
        for (_, c) in columns {
            row.extend(c.row(i).iter().map(|v| fmt_f(*v)));
        }
        t.push(row);
    }
    t
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

pub fn eval(s: &Settings, dir: &RunDir, target: Target, sim: Simulation) -> Result<(), CliError> {
    let problem = s.pde();
    let model = load_checked_model(s, dir)?;
    let grid = eval_grid(s, &problem)?;
    let ann = ann_output(&model.spec, &model.params, &grid.batch)?;
    let mut spike_rate = None;
    let mut nonzero = None;
    let mut cross = None;
    let (tag, output, mode, timesteps) = match target {
        Target::Ann => ("ann".to_string(), ann.clone(), String::new(), String::new()),
        Target::Snn => {
            let file = load_checked_snn(s, dir)?;
            let snn = &file.network;
            let rate = propagate_rate(snn, &grid.batch)?;
            nonzero = Some(spiking_rate(&rate.hidden_outputs()).overall);
            let output = match sim {
                Simulation::Rate => {
                    spike_rate = Some(rate_raster_rate(snn, &rate).overall);
                    rate.output
                }
                Simulation::Event => {
                    let trace = simulate_event(snn, &grid.batch, false)?;
                    spike_rate = Some(raster_rate(&trace).overall);
                    let diff = trace.output.zip_map(&rate.output, |a, b| a - b).max_abs();
                    println!("event vs rate: largest difference {diff:.3e}");
                    cross = Some(diff);
                    trace.output
                }
            };
            let sim_name = match sim {
                Simulation::Rate => "rate",
                Simulation::Event => "event",
            };
            (format!("{}_{sim_name}", snn_tag(s)), output, s.calibration.mode.to_string(), snn.timesteps.to_string())
        }
    };
    let vs_ref = conversion_metrics(&output, &grid.reference)?;
    let vs_ann = conversion_metrics(&output, &ann)?;
    let mut t = Table::new(&[
        "target",
        "simulation",
        "mode",
        "timesteps",
        "l2_ref",
        "rel_l2_ref",
        "l2_ann",
        "rel_l2_ann",
        "spike_rate",
        "nonzero_fraction",
        "event_rate_max_diff",
    ]);
    t.push(vec![
        match target {
            Target::Ann => "ann".into(),
            Target::Snn => "snn".into(),
        },
        match (target, sim) {
            (Target::Ann, _) => String::new(),
            (_, Simulation::Rate) => "rate".into(),
            (_, Simulation::Event) => "event".into(),
        },
        mode,
        timesteps,
        fmt_f(vs_ref.l2),
        opt(vs_ref.rel_l2),
        fmt_f(vs_ann.l2),
        opt(vs_ann.rel_l2),
        opt(spike_rate),
        opt(nonzero),
        opt(cross),
    ]);
    t.write(&dir.csv(&format!("metrics_{tag}")))?;
    field_table(&problem, &grid.points, &[("", &output), ("ref", &grid.reference), ("ann", &ann)])
        .write(&dir.csv(&format!("field_{tag}")))?;
    println!(
        "{tag}: rel L2 vs reference {}, vs ANN {}{}",
        opt(vs_ref.rel_l2),
        opt(vs_ann.rel_l2),
        spike_rate.map(|r| format!(", spike rate {r:.4}")).unwrap_or_default()
    );
    Ok(())
}

pub fn sweep_t(s: &Settings, dir: &RunDir) -> Result<(), CliError> {
    let problem = s.pde();
    let model = load_checked_model(s, dir)?;
    let colloc = collocation(s, &problem)?;
    let calib = calibration_batch(&model.spec, &colloc, s.calibration_points, s.problem.train.seed);
    let grid = eval_grid(s, &problem)?;
    let cfg = SweepConfig {
        timesteps: s.sweep_t.clone(),
        conversion: s.conversion,
        calibration: s.calibration,
        slope_max_t: 64,
    };
    let r = sweep_timesteps(&model.spec, &model.params, &calib, &grid.batch, Some(&grid.reference), &cfg)?;
    let mut t = Table::new(&[
        "timesteps",
        "error",
        "rel_error",
        "rel_l2_ref",
        "spike_rate",
        "nonzero_fraction",
        "mode",
        "slope",
    ]);
    for row in &r.rows {
        t.push(vec![
            row.timesteps.to_string(),
            fmt_f(row.error),
            opt(row.rel_error),
            opt(row.reference_rel_l2),
            fmt_f(row.spike_rate),
            fmt_f(row.nonzero_fraction),
            s.calibration.mode.to_string(),
            opt(r.slope),
        ]);
        println!("T = {:4}: error {:.4e}", row.timesteps, row.error);
    }
    t.write(&dir.csv("sweep_t"))?;
    println!("log-log slope over T <= 64: {}", r.slope.map(|v| format!("{v:.3}")).unwrap_or("n/a".into()));
    Ok(())
}

pub fn validate_bound(s: &Settings, dir: &RunDir) -> Result<(), CliError> {
    let problem = s.pde();
    let model = load_checked_model(s, dir)?;
    if model.spec.kind != NetworkKind::Mlp {
        return Err(CliError::Runtime("validate-bound needs a dense network".into()));
    }
    let file = load_checked_snn(s, dir)?;
    let grid = eval_grid(s, &problem)?;
    let batch = PointBatch::Scattered(grid.points);
    let r = bound_check(&model.spec, &model.params, &file.network, &batch)?;
    let mut t = Table::new(&["sample", "lhs", "rhs", "satisfied"]);
    for (i, b) in r.samples.iter().enumerate() {
        t.push(vec![i.to_string(), fmt_f(b.lhs), fmt_f(b.rhs), (b.lhs <= b.rhs).to_string()]);
    }
    t.write(&dir.csv(&format!("bound_{}", snn_tag(s))))?;
    println!(
        "bound holds on {:.2}% of {} samples (mean lhs {:.4e}, mean rhs {:.4e})",
        100.0 * r.satisfied_fraction,
        r.samples.len(),
        r.lhs_mean,
        r.rhs_mean
    );
    Ok(())
}

pub fn smooth(s: &Settings, dir: &RunDir) -> Result<(), CliError> {
    let problem = s.pde();
    let file = load_checked_snn(s, dir)?;
    let grid = eval_grid(s, &problem)?;
    let raw = propagate_rate(&file.network, &grid.batch)?.output;
    let axes = spatial_axes(&problem);
    let smoothed = fft_smooth(&raw, &grid.axes, &axes, s.cutoff)?;
    let again = fft_smooth(&smoothed, &grid.axes, &axes, s.cutoff)?;
    let idem = again.zip_map(&smoothed, |a, b| a - b).max_abs();
    let m_raw = conversion_metrics(&raw, &grid.reference)?;
    let m_s = conversion_metrics(&smoothed, &grid.reference)?;
    let tag = snn_tag(s);
    let mut t = Table::new(&["field", "l2", "rel_l2", "cutoff", "idempotence_residual"]);
    t.push(vec!["raw".into(), fmt_f(m_raw.l2), opt(m_raw.rel_l2), fmt_f(s.cutoff), String::new()]);
    t.push(vec!["smoothed".into(), fmt_f(m_s.l2), opt(m_s.rel_l2), fmt_f(s.cutoff), fmt_f(idem)]);
    t.write(&dir.csv(&format!("smooth_metrics_{tag}")))?;
    field_table(&problem, &grid.points, &[("raw", &raw), ("smooth", &smoothed), ("ref", &grid.reference)])
        .write(&dir.csv(&format!("smooth_{tag}")))?;
    println!("L2 error vs reference: raw {:.4e}, smoothed {:.4e} (cutoff {})", m_raw.l2, m_s.l2, s.cutoff);
    Ok(())
}

pub fn hessian_check(s: &Settings, dir: &RunDir) -> Result<(), CliError> {
    let problem = s.pde();
    let model = load_checked_model(s, dir)?;
    let point = probe_point(&problem);
    let target = reference_solution(&problem, &Tensor::new(vec![1, point.len()], point.clone())?)?.into_data();
    let checks = check_hessian(&model.spec, &model.params, &point, &target, 1e-4)?;
    let mut t = Table::new(&["layer", "rel_error", "symmetry_residual", "passed"]);
    for c in &checks {
        let ok = c.rel_error < 1e-3 && c.symmetry < 1e-10;
        t.push(vec![c.layer.to_string(), fmt_f(c.rel_error), fmt_f(c.symmetry), ok.to_string()]);
        println!("H^({}) rel error {:.3e}, symmetry {:.1e}", c.layer, c.rel_error, c.symmetry);
    }
    t.write(&dir.csv("hessian_check"))?;
    Ok(())
}

/// Tables larger than this are summarized by their row count only.
const REPORT_MAX_ROWS: usize = 64;

pub fn report(dir: &RunDir) -> Result<(), CliError> {
    let csv_dir = dir.root.join("csv");
    let mut names: Vec<PathBuf> = match fs::read_dir(&csv_dir) {
        Ok(rd) => rd.filter_map(|e| e.ok().map(|e| e.path())).collect(),
        Err(_) => return Err(CliError::Runtime(format!("no CSV outputs under {}", csv_dir.display()))),
    };
    names.retain(|p| p.extension().is_some_and(|e| e == "csv") && p.file_stem().is_some_and(|s| s != "report"));
    names.sort();
    let mut out = Table::new(&["source", "row", "column", "value"]);
    let mut stdout = std::io::stdout().lock();
    for path in &names {
        let source = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let t = Table::read(path)?;
        if t.rows.len() > REPORT_MAX_ROWS {
            out.push(vec![source.clone(), String::new(), "rows".into(), t.rows.len().to_string()]);
            if let Some(sat) = t.column("satisfied") {
                let ok = sat.iter().filter(|v| **v == "true").count();
                out.push(vec![source.clone(), String::new(), "satisfied_fraction".into(), fmt_f(ok as f64 / sat.len() as f64)]);
            }
            let _ = writeln!(stdout, "{source}: {} rows", t.rows.len());
            continue;
        }
        let _ = writeln!(stdout, "{source}:");
        for (i, row) in t.rows.iter().enumerate() {
            let _ = writeln!(stdout, "  {}", row.join(", "));
            for (h, v) in t.header.iter().zip(row) {
                out.push(vec![source.clone(), i.to_string(), h.clone(), v.clone()]);
            }
        }
    }
    out.write(&dir.csv("report"))?;
    Ok(())
}
