//! Scenario execution and structured output files.

use rayon::prelude::*;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{OutputFormat, RunConfig, Scenario};
use crate::dynamics::{integrate, steady_state, steady_state_balanced, SolverConfig};
use crate::fit::fit_two_lorentzians;
use crate::generator::{build_generator, Frame, Generator, TermSet};
use crate::initial::initial_state;
use crate::model::{derive_collective_rates, CollectiveRates, SystemParams};
use crate::observables::{emission_spectrum, pulse_metrics, record, ObservableRecord};
use crate::oracle;
use crate::symindex::{dimension, Basis};
use crate::{C64, Error, Result};

/// Command-line switches that modify a run without being part of the config.
#[derive(Debug, Clone, Default)]
pub struct CliOptions {
    pub output_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub verify_oracle: bool,
    pub dump_generator: bool,
}

/// Documented exit-code table.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation(_)
        | Error::LabFrameDrive
        | Error::SingularElimination
        | Error::Unsupported(_) => 2,
        Error::Capacity(_) => 3,
        Error::Stiffness { .. } | Error::NonConvergence { .. } => 4,
        Error::SymmetryViolation { .. } | Error::Internal(_) | Error::Io(_) => 5,
    }
}

const CSV_SCHEMA: &str = "symrad-csv v1";
const JSONL_SCHEMA: &str = "symrad-jsonl v1";

/// Execute a validated config and return the path of the written output.
pub fn execute(cfg: &RunConfig, opts: &CliOptions) -> Result<PathBuf> {
    cfg.validate()?;
    if opts.verify_oracle {
        verify_against_oracle(cfg)?;
    }
    let out_path = resolve_path(&cfg.output.path, opts);
    if let Some(dir) = out_path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let table = match cfg.scenario {
        Scenario::Pulse => run_pulse(cfg)?,
        Scenario::Driven => run_driven(cfg)?,
        Scenario::PumpedSpectrum => run_pumped_spectrum(cfg)?,
        Scenario::Sweep => run_sweep(cfg)?,
        Scenario::Bench => run_bench(cfg)?,
    };
    write_table(&out_path, cfg, &table)?;
    if opts.dump_generator {
        dump_generator(cfg, &out_path)?;
    }
    Ok(out_path)
}

/// Column names, data rows, and extra header annotations of one run.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub extras: Vec<(String, String)>,
}

struct Prepared {
    params: SystemParams,
    rates: CollectiveRates,
    basis: Basis,
    generator: Generator,
    x0: Vec<C64>,
    solver: SolverConfig,
}

/// Steady state of a prepared run: the direct balanced-sector solve when the
/// model admits it (no drive, sector within dense capacity), marching
/// otherwise. Returns the state and its relative generator residual.
fn steady_of(pre: &Prepared) -> Result<(Vec<C64>, f64)> {
    match steady_state_balanced(&pre.generator, &pre.basis) {
        Ok(x) => {
            let lx = pre.generator.apply(&x);
            let num = lx.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let den = x.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
            let residual = num / (pre.generator.infinity_norm().max(1.0) * den);
            Ok((x, residual))
        }
        Err(Error::Unsupported(_)) | Err(Error::Capacity(_)) => {
            steady_state(&pre.generator, &pre.x0, &pre.solver)
        }
        Err(e) => Err(e),
    }
}

fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let params = cfg.system_params()?;
    let rates = derive_collective_rates(&params)?;
    let basis = Basis::new(params.atoms, params.levels)?;
    let generator =
        build_generator(&params, &rates, &basis, TermSet::all(), Frame::RotatingAtDrive)?;
    let x0 = initial_state(&cfg.initial_spec()?, &basis)?;
    Ok(Prepared { params, rates, basis, generator, x0, solver: cfg.solver.clone() })
}

fn observable_columns(levels: usize) -> Vec<String> {
    let mut c = vec!["t".to_string()];
    for l in (0..levels).rev() {
        c.push(format!("P{l}"));
    }
    for l in 0..levels {
        for lp in 0..l {
            c.push(format!("ReC{l}{lp}"));
            c.push(format!("ImC{l}{lp}"));
        }
    }
    c.extend(["I_ind", "I_col", "I_tot"].map(String::from));
    if levels == 2 {
        c.extend(["Jx", "Jy", "Jz", "dJx", "dJy", "dJz"].map(String::from));
    }
    c
}

fn observable_row(levels: usize, rec: &ObservableRecord) -> Vec<f64> {
    let mut row = vec![rec.time];
    for l in (0..levels).rev() {
        row.push(rec.populations[l]);
    }
    for (_, _, c) in &rec.polarizations {
        row.push(c.re);
        row.push(c.im);
    }
    row.push(rec.emission.individual);
    row.push(rec.emission.collective);
    row.push(rec.emission.total);
    if let Some(j) = &rec.angular {
        row.extend([j.jx, j.jy, j.jz, j.delta_jx, j.delta_jy, j.delta_jz]);
    }
    row
}

fn time_trace(pre: &Prepared, times: &[f64]) -> Result<Vec<ObservableRecord>> {
    let mut records = Vec::with_capacity(times.len());
    integrate(&pre.generator, &pre.x0, times, &pre.solver, |_, t, y| {
        records.push(record(&pre.basis, y, t, &pre.rates.gamma_collective));
    })?;
    Ok(records)
}

fn run_pulse(cfg: &RunConfig) -> Result<Table> {
    let pre = prepare(cfg)?;
    let times = cfg.grid.as_ref().expect("validated").times();
    let records = time_trace(&pre, &times)?;
    let s = pre.params.levels;
    let rows = records.iter().map(|r| observable_row(s, r)).collect();
    Ok(Table { columns: observable_columns(s), rows, extras: Vec::new() })
}

fn run_driven(cfg: &RunConfig) -> Result<Table> {
    let pre = prepare(cfg)?;
    let times = cfg.grid.as_ref().expect("validated").times();
    let records = time_trace(&pre, &times)?;
    let (x_ss, residual) = steady_of(&pre)?;
    let ss = record(&pre.basis, &x_ss, f64::NAN, &pre.rates.gamma_collective);
    let s = pre.params.levels;
    let rows = records.iter().map(|r| observable_row(s, r)).collect();
    let extras = vec![
        ("steady_residual".into(), format!("{residual:.6e}")),
        ("steady_I_ind".into(), format!("{:.12e}", ss.emission.individual)),
        ("steady_I_col".into(), format!("{:.12e}", ss.emission.collective)),
        ("steady_I_tot".into(), format!("{:.12e}", ss.emission.total)),
    ];
    Ok(Table { columns: observable_columns(s), rows, extras })
}

fn run_pumped_spectrum(cfg: &RunConfig) -> Result<Table> {
    let pre = prepare(cfg)?;
    let (x_ss, residual) = steady_of(&pre)?;
    let ss = record(&pre.basis, &x_ss, f64::NAN, &pre.rates.gamma_collective);
    let omegas = cfg.frequency_grid.as_ref().expect("validated").omegas();
    let spectrum = emission_spectrum(
        &pre.generator,
        &pre.basis,
        &x_ss,
        &pre.rates.gamma_collective,
        &omegas,
        &pre.solver,
    )?;
    let fit = fit_two_lorentzians(&spectrum.omegas, &spectrum.values)?;
    // report the narrower line first
    let (a, b) = if fit.width[0] <= fit.width[1] { (0, 1) } else { (1, 0) };
    let mut extras = vec![
        ("steady_residual".into(), format!("{residual:.6e}")),
        ("steady_I_ind".into(), format!("{:.12e}", ss.emission.individual)),
        ("steady_I_col".into(), format!("{:.12e}", ss.emission.collective)),
        ("steady_I_tot".into(), format!("{:.12e}", ss.emission.total)),
        ("correlation_horizon".into(), format!("{:.6e}", spectrum.t_horizon)),
        ("correlation_truncated".into(), format!("{}", spectrum.truncated)),
        ("fit_converged".into(), format!("{}", fit.converged)),
        ("fit_degenerate".into(), format!("{}", fit.degenerate)),
        ("fit_residual_norm".into(), format!("{:.6e}", fit.residual_norm)),
    ];
    for (tag, i) in [("peak", a), ("background", b)] {
        extras.push((format!("fit_{tag}_amplitude"), format!("{:.12e}", fit.amplitude[i])));
        extras.push((format!("fit_{tag}_center"), format!("{:.12e}", fit.center[i])));
        extras.push((format!("fit_{tag}_width"), format!("{:.12e}", fit.width[i])));
    }
    if let Some(j) = &ss.angular {
        extras.push(("steady_Jx".into(), format!("{:.12e}", j.jx)));
        extras.push(("steady_Jy".into(), format!("{:.12e}", j.jy)));
        extras.push(("steady_Jz".into(), format!("{:.12e}", j.jz)));
        extras.push(("steady_dJx".into(), format!("{:.12e}", j.delta_jx)));
        extras.push(("steady_dJy".into(), format!("{:.12e}", j.delta_jy)));
        extras.push(("steady_dJz".into(), format!("{:.12e}", j.delta_jz)));
    }
    let rows = spectrum
        .omegas
        .iter()
        .zip(&spectrum.values)
        .map(|(&w, &s)| vec![w, s])
        .collect();
    Ok(Table { columns: vec!["omega".into(), "S".into()], rows, extras })
}

fn sweep_point_config(cfg: &RunConfig, parameter: &str, value: f64) -> Result<RunConfig> {
    let mut point = cfg.clone();
    match parameter {
        "atoms" => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::Validation(format!(
                    "sweep.values: atom count {value} is not a positive integer"
                )));
            }
            point.params.atoms = value as usize;
        }
        "gamma_01" => {
            point.params.gamma.retain(|e| !(e.l == 0 && e.lp == 1));
            point.params.gamma.push(crate::config::PairRateEntry {
                l: 0,
                lp: 1,
                rate: value,
            });
        }
        "drive_10" => {
            point.params.drive.retain(|e| !(e.l == 1 && e.lp == 0));
            point.params.drive.push(crate::config::PairComplexEntry {
                l: 1,
                lp: 0,
                re: value,
                im: 0.0,
            });
        }
        other => {
            return Err(Error::Validation(format!("sweep.parameter: unknown {other:?}")));
        }
    }
    Ok(point)
}

fn run_sweep(cfg: &RunConfig) -> Result<Table> {
    let sweep = cfg.sweep.as_ref().expect("validated");
    match sweep.parameter.as_str() {
        "atoms" => {
            if cfg.grid.is_none() {
                return Err(Error::Validation(
                    "grid: required when sweeping the atom number".into(),
                ));
            }
            let rows: Result<Vec<Vec<f64>>> = sweep
                .values
                .par_iter()
                .map(|&v| {
                    let point = sweep_point_config(cfg, "atoms", v)?;
                    let pre = prepare(&point)?;
                    let times = point.grid.as_ref().unwrap().times();
                    let records = time_trace(&pre, &times)?;
                    let trace: Vec<f64> =
                        records.iter().map(|r| r.emission.total).collect();
                    let m = pulse_metrics(&times, &trace);
                    Ok(vec![
                        v,
                        m.peak_height,
                        m.peak_time,
                        m.equivalent_duration,
                        m.fwhm,
                        if m.is_pulse { 1.0 } else { 0.0 },
                    ])
                })
                .collect();
            Ok(Table {
                columns: ["value", "I_max", "t0", "tau", "fwhm", "is_pulse"]
                    .map(String::from)
                    .to_vec(),
                rows: rows?,
                extras: vec![("sweep_parameter".into(), sweep.parameter.clone())],
            })
        }
        "gamma_01" => {
            let rows: Result<Vec<Vec<f64>>> = sweep
                .values
                .par_iter()
                .map(|&v| {
                    let point = sweep_point_config(cfg, "gamma_01", v)?;
                    let pre = prepare(&point)?;
                    let (x_ss, _) = steady_of(&pre)?;
                    let ss = record(&pre.basis, &x_ss, f64::NAN, &pre.rates.gamma_collective);
                    let j = ss.angular.as_ref();
                    let mut row = vec![
                        v,
                        ss.emission.individual,
                        ss.emission.collective,
                        ss.emission.total,
                        j.map_or(f64::NAN, |j| j.jx),
                        j.map_or(f64::NAN, |j| j.jy),
                        j.map_or(f64::NAN, |j| j.jz),
                        j.map_or(f64::NAN, |j| j.delta_jx),
                        j.map_or(f64::NAN, |j| j.delta_jy),
                        j.map_or(f64::NAN, |j| j.delta_jz),
                    ];
                    if let Some(grid) = &point.frequency_grid {
                        let omegas = grid.omegas();
                        let spectrum = emission_spectrum(
                            &pre.generator,
                            &pre.basis,
                            &x_ss,
                            &pre.rates.gamma_collective,
                            &omegas,
                            &pre.solver,
                        )?;
                        let fit = fit_two_lorentzians(&spectrum.omegas, &spectrum.values)?;
                        row.push(fit.width[0].min(fit.width[1]));
                        row.push(fit.width[0].max(fit.width[1]));
                        row.push(if fit.degenerate { 1.0 } else { 0.0 });
                    } else {
                        row.extend([f64::NAN, f64::NAN, f64::NAN]);
                    }
                    Ok(row)
                })
                .collect();
            Ok(Table {
                columns: [
                    "value", "I_ind", "I_col", "I_tot", "Jx", "Jy", "Jz", "dJx", "dJy",
                    "dJz", "width_sharp", "width_broad", "fit_degenerate",
                ]
                .map(String::from)
                .to_vec(),
                rows: rows?,
                extras: vec![("sweep_parameter".into(), sweep.parameter.clone())],
            })
        }
        "drive_10" => {
            if cfg.grid.is_none() {
                return Err(Error::Validation(
                    "grid: required when sweeping the drive".into(),
                ));
            }
            let rows: Result<Vec<Vec<f64>>> = sweep
                .values
                .par_iter()
                .map(|&v| {
                    let point = sweep_point_config(cfg, "drive_10", v)?;
                    let pre = prepare(&point)?;
                    let times = point.grid.as_ref().unwrap().times();
                    let records = time_trace(&pre, &times)?;
                    let trace: Vec<f64> =
                        records.iter().map(|r| r.emission.total).collect();
                    let (x_ss, _) = steady_of(&pre)?;
                    let ss = record(&pre.basis, &x_ss, f64::NAN, &pre.rates.gamma_collective);
                    let maxima = trace
                        .windows(3)
                        .filter(|w| w[1] > w[0] && w[1] > w[2])
                        .count();
                    Ok(vec![v, ss.emission.total, maxima as f64])
                })
                .collect();
            Ok(Table {
                columns: ["value", "I_tot_steady", "n_maxima"].map(String::from).to_vec(),
                rows: rows?,
                extras: vec![("sweep_parameter".into(), sweep.parameter.clone())],
            })
        }
        other => Err(Error::Validation(format!("sweep.parameter: unknown {other:?}"))),
    }
}

fn run_bench(cfg: &RunConfig) -> Result<Table> {
    let values: Vec<usize> = match &cfg.sweep {
        Some(sw) => sw.values.iter().map(|&v| v as usize).collect(),
        None => vec![50, 100, 150, 200, 250],
    };
    let mut rows = Vec::new();
    for n in values {
        let mut point = cfg.clone();
        point.params.atoms = n;
        let params = point.system_params()?;
        let rates = derive_collective_rates(&params)?;
        let dim = dimension(n, params.levels)?;
        let t0 = Instant::now();
        let basis = Basis::new(n, params.levels)?;
        let generator =
            build_generator(&params, &rates, &basis, TermSet::all(), Frame::RotatingAtDrive)?;
        let assembly_ms = t0.elapsed().as_secs_f64() * 1e3;
        let x = vec![C64::new(0.0, 0.0); dim];
        let t1 = Instant::now();
        let _ = generator.apply(&x);
        let matvec_ms = t1.elapsed().as_secs_f64() * 1e3;
        rows.push(vec![
            n as f64,
            dim as f64,
            generator.nnz() as f64,
            assembly_ms,
            matvec_ms,
        ]);
    }
    Ok(Table {
        columns: ["atoms", "dim", "nnz", "assembly_ms", "matvec_ms"]
            .map(String::from)
            .to_vec(),
        rows,
        extras: Vec::new(),
    })
}

/// Small-system cross-check of the collective evolution against the dense
/// reference, run with the configured parameters but at most 3 atoms.
pub fn verify_against_oracle(cfg: &RunConfig) -> Result<()> {
    let mut small = cfg.clone();
    small.params.atoms = small.params.atoms.min(3);
    let params = small.system_params()?;
    let rates = derive_collective_rates(&params)?;
    let basis = Basis::new(params.atoms, params.levels)?;
    let generator =
        build_generator(&params, &rates, &basis, TermSet::all(), Frame::RotatingAtDrive)?;
    let spec = small.initial_spec()?;
    let x0 = initial_state(&spec, &basis)?;
    let reference = oracle::build_oracle(&params, &rates, TermSet::all(), Frame::RotatingAtDrive)?;
    let rho1 = oracle::Dense { d: params.levels, a: spec.single_atom_density()? };
    let mut rho = oracle::product_density(params.atoms, params.levels, &rho1)?;
    let times = [0.0, 0.4, 0.8, 1.2];
    let mut states: Vec<Vec<C64>> = Vec::new();
    integrate(&generator, &x0, &times, &cfg.solver, |_, _, y| states.push(y.to_vec()))?;
    for (i, w) in times.windows(2).enumerate() {
        rho = reference.evolve(&rho, w[1] - w[0])?;
        let projected = oracle::project_collective(&rho, &basis)?;
        let worst = projected
            .iter()
            .zip(&states[i + 1])
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        if worst > 1e-7 {
            return Err(Error::Internal(format!(
                "oracle cross-check failed at t = {}: max deviation {worst:.3e}",
                w[1]
            )));
        }
    }
    Ok(())
}

fn resolve_path(configured: &str, opts: &CliOptions) -> PathBuf {
    match &opts.output_dir {
        Some(dir) => dir.join(configured),
        None => PathBuf::from(configured),
    }
}

fn dump_generator(cfg: &RunConfig, out_path: &Path) -> Result<()> {
    let pre = prepare(cfg)?;
    let mut path = out_path.to_path_buf();
    path.set_extension("generator.txt");
    let mut w = BufWriter::new(File::create(path)?);
    pre.generator.dump_coordinates(&mut w)
}

fn write_table(path: &Path, cfg: &RunConfig, table: &Table) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match cfg.output.format {
        OutputFormat::Csv => {
            writeln!(w, "# {CSV_SCHEMA}")?;
            writeln!(w, "# begin-config")?;
            for line in cfg.to_toml().lines() {
                writeln!(w, "# {line}")?;
            }
            writeln!(w, "# end-config")?;
            for (k, v) in &table.extras {
                writeln!(w, "# {k} = {v}")?;
            }
            writeln!(w, "{}", table.columns.join(","))?;
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
                writeln!(w, "{}", cells.join(","))?;
            }
        }
        OutputFormat::JsonLines => {
            let meta = serde_json::json!({
                "type": "meta",
                "schema": JSONL_SCHEMA,
                "config": cfg,
                "extras": table.extras.iter().cloned().collect::<std::collections::BTreeMap<_, _>>(),
            });
            writeln!(w, "{meta}")?;
            for row in &table.rows {
                let obj: serde_json::Map<String, serde_json::Value> = table
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, &v)| (c.clone(), serde_json::json!(v)))
                    .collect();
                writeln!(w, "{}", serde_json::Value::Object(obj))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Recover the effective config embedded in an output file.
pub fn embedded_config(text: &str) -> Result<RunConfig> {
    if let Some(first) = text.lines().next() {
        if first.trim_start().starts_with('{') {
            let meta: serde_json::Value = serde_json::from_str(first)
                .map_err(|e| Error::Validation(format!("meta line: {e}")))?;
            let cfg = meta
                .get("config")
                .ok_or_else(|| Error::Validation("meta line has no config".into()))?;
            return serde_json::from_value(cfg.clone())
                .map_err(|e| Error::Validation(format!("embedded config: {e}")));
        }
    }
    let mut inside = false;
    let mut toml_text = String::new();
    for line in text.lines() {
        if line == "# begin-config" {
            inside = true;
        } else if line == "# end-config" {
            inside = false;
        } else if inside {
            toml_text.push_str(line.strip_prefix("# ").unwrap_or(line));
            toml_text.push('\n');
        }
    }
    if toml_text.is_empty() {
        return Err(Error::Validation("no embedded config found".into()));
    }
    RunConfig::from_toml(&toml_text)
}
