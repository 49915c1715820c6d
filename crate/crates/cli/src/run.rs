//! Mode runners. Each writes its artifacts plus `provenance.json` (config
//! echo, versions, term counts) and `run.log` (timing; the only file that
//! differs between identical runs).

use std::path::PathBuf;
use std::time::Instant;

use nlwpi_core::model::{DimerModel, DimerParams};
use nlwpi_core::oracle::{convergence_ladder, ConvergenceReport};
use nlwpi_core::pathways::{term_listing, Context, Signature, TermListing};
use nlwpi_core::propagation::EvalContext;
use nlwpi_core::signal::{assemble, component, pump_probe, signature_index, Evaluator, SignalComponent};
use nlwpi_core::SCHEMA_VERSION;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{gnuplot_blocks, pair, Artifacts};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Terms,
    Signal,
    PumpProbe,
    Verify,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub family: Option<String>,
}

#[derive(Serialize)]
struct Provenance<'a> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    mode: Mode,
    threads: usize,
    artifacts: Vec<String>,
    /// Terms per family id that entered the computation.
    term_counts: Vec<(String, usize)>,
    config: &'a RunConfig,
}

/// What a run produced, for the caller to report.
pub struct Outcome {
    pub dir: PathBuf,
    pub artifacts: Vec<String>,
    pub summary: String,
    /// Checked after the artifacts are written.
    pub failure: Option<CliError>,
}

pub fn run(mode: Mode, config: RunConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let (mut config, model) = config.resolve()?;
    if let Some(dir) = &opts.out {
        config.output.dir = dir.display().to_string();
    }
    if let Some(f) = &opts.family {
        config.terms.family = Some(f.clone());
    }
    let mut art = Artifacts::create(&PathBuf::from(&config.output.dir))?;
    let listing = term_listing(config.include_anomalous_term)?;
    let (summary, used, failure) = match mode {
        Mode::Terms => run_terms(&config, &listing, &mut art)?,
        Mode::Signal => run_signal(&config, &model, &listing, &mut art)?,
        Mode::PumpProbe => run_pump_probe(&config, &model, &listing, &mut art)?,
        Mode::Verify => run_verify(&config, &mut art)?,
    };
    art.text("effective_config.toml", &config.to_toml())?;
    let mut artifacts = art.written().to_vec();
    artifacts.push("provenance.json".into());
    let prov = Provenance {
        schema_version: SCHEMA_VERSION,
        tool: "nlwpi",
        version: env!("CARGO_PKG_VERSION"),
        mode,
        threads: rayon::current_num_threads(),
        artifacts: artifacts.clone(),
        term_counts: used,
        config: &config,
    };
    art.json("provenance.json", &prov)?;
    let log = format!(
        "mode {mode:?}\nthreads {}\nelapsed_s {:.3}\n{summary}\n",
        rayon::current_num_threads(),
        started.elapsed().as_secs_f64()
    );
    std::fs::write(art.dir().join("run.log"), log)?;
    Ok(Outcome { dir: art.dir().to_path_buf(), artifacts, summary, failure })
}

type ModeResult = Result<(String, Vec<(String, usize)>, Option<CliError>), CliError>;

fn counts(listing: &TermListing, keep: impl Fn(&str, Context) -> bool) -> Vec<(String, usize)> {
    listing.families.iter().filter(|f| keep(&f.id, f.context)).map(|f| (f.id.clone(), f.count)).collect()
}

fn run_terms(config: &RunConfig, listing: &TermListing, art: &mut Artifacts) -> ModeResult {
    let mut out = listing.clone();
    if let Some(id) = &config.terms.family {
        out.families.retain(|f| &f.id == id);
        if out.families.is_empty() {
            return Err(nlwpi_core::Error::UnknownFamily(id.clone()).into());
        }
        out.pump_probe_total = out.families.iter().filter(|f| f.context == Context::PumpProbe).map(|f| f.count).sum();
    }
    art.json("terms.json", &out)?;
    let total: usize = out.families.iter().map(|f| f.count).sum();
    let used = out.families.iter().map(|f| (f.id.clone(), f.count)).collect();
    Ok((format!("{} families, {total} terms", out.families.len()), used, None))
}

#[derive(Serialize)]
struct Series {
    id: String,
    values: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct SignalJson {
    schema_version: u32,
    t_ca: f64,
    t_ba: Vec<f64>,
    t_dc: Vec<f64>,
    phi_ba: f64,
    phi_dc: f64,
    /// ++, +−, −+, −−; rows in t_BA-major order.
    components: Vec<Series>,
    assembled: Vec<f64>,
    /// Enumerated families of ++ and +−; −− and −+ are their conjugates.
    per_family: Vec<Series>,
}

fn run_signal(config: &RunConfig, model: &DimerModel, listing: &TermListing, art: &mut Artifacts) -> ModeResult {
    let train = config.resolved_train();
    let grid = config.scan.grid();
    grid.validate()?;
    let ctx = EvalContext::new(model, &train, config.propagation.clone())?;
    let eval = Evaluator::new(&ctx, config.detection)?;
    let pp = component(&eval, Signature::PlusPlus, &train, &grid, config.include_anomalous_term)?;
    let pm = component(&eval, Signature::PlusMinus, &train, &grid, config.include_anomalous_term)?;
    let mut comps: Vec<SignalComponent> = vec![pp.clone(), pm.clone(), pm.conjugate(), pp.conjugate()];
    comps.sort_by_key(|c| signature_index(c.signature));
    let (phi_ba, phi_dc) = train.phase_differences();
    let points = grid.points();
    let mut rows = Vec::with_capacity(points.len());
    let mut assembled = Vec::with_capacity(points.len());
    for (k, &(t_ba, t_dc)) in points.iter().enumerate() {
        let c = [comps[0].values[k], comps[1].values[k], comps[2].values[k], comps[3].values[k]];
        let s = assemble(phi_ba, phi_dc, &c)?;
        assembled.push(s);
        let mut row = vec![t_ba, t_dc, grid.t_ca];
        for z in c {
            row.extend([z.re, z.im]);
        }
        row.push(s);
        rows.push(row);
    }
    art.csv(
        "signal.csv",
        "signal",
        &["t_ba", "t_dc", "t_ca", "pp_re", "pp_im", "pm_re", "pm_im", "mp_re", "mp_im", "mm_re", "mm_im", "s"],
        &rows,
    )?;
    art.text("interferogram.dat", &gnuplot_blocks(&grid.t_ba, &grid.t_dc, |i, j| assembled[i * grid.t_dc.len() + j]))?;
    let series = |id: String, v: &[num_complex::Complex64]| Series { id, values: v.iter().map(|&z| pair(z)).collect() };
    let json = SignalJson {
        schema_version: SCHEMA_VERSION,
        t_ca: grid.t_ca,
        t_ba: grid.t_ba.clone(),
        t_dc: grid.t_dc.clone(),
        phi_ba,
        phi_dc,
        components: comps.iter().map(|c| series(c.signature.symbol().to_string(), &c.values)).collect(),
        assembled: assembled.clone(),
        per_family: pp.per_family.iter().chain(&pm.per_family).map(|(id, v)| series(id.clone(), v)).collect(),
    };
    art.json("signal.json", &json)?;
    let used = counts(listing, |_, c| c == Context::Wpi);
    let peak = assembled.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((format!("{} grid points, max |S| = {peak:e}", points.len()), used, None))
}

fn run_pump_probe(config: &RunConfig, model: &DimerModel, listing: &TermListing, art: &mut Artifacts) -> ModeResult {
    let scan = &config.pump_probe.t_ca;
    let first = *scan.first().ok_or_else(|| CliError::Config("pump_probe.t_ca is empty".into()))?;
    let train = config.resolved_train().with_delays(0.0, first, 0.0)?;
    let ctx = EvalContext::new(model, &train, config.propagation.clone())?;
    let eval = Evaluator::new(&ctx, config.detection)?;
    let sig = pump_probe(&eval, &train, scan)?;
    let rows: Vec<Vec<f64>> =
        (0..scan.len()).map(|k| vec![sig.t_ca[k], sig.gsb[k], sig.esa[k], sig.se[k], sig.total[k]]).collect();
    art.csv("pump_probe.csv", "pump-probe", &["t_ca", "gsb", "esa", "se", "total"], &rows)?;
    #[derive(Serialize)]
    struct Json<'a> {
        schema_version: u32,
        #[serde(flatten)]
        signal: &'a nlwpi_core::signal::PumpProbeSignal,
    }
    art.json("pump_probe.json", &Json { schema_version: SCHEMA_VERSION, signal: &sig })?;
    let used = counts(listing, |_, c| c == Context::PumpProbe);
    Ok((format!("{} delays", scan.len()), used, None))
}

fn run_verify(config: &RunConfig, art: &mut Artifacts) -> ModeResult {
    let v = &config.verify;
    let params = DimerParams { n_vib_per_mode: v.n_vib_per_mode.unwrap_or(config.model.n_vib_per_mode), ..config.model.clone() };
    let model = DimerModel::new(params)?;
    let points: Vec<(f64, f64, f64)> = v.points.iter().map(|p| (p[0], p[1], p[2])).collect();
    let report: ConvergenceReport = convergence_ladder(&model, &points, &v.scales, &v.oracle)?;
    let rows: Vec<Vec<f64>> = report
        .rows
        .iter()
        .map(|r| vec![r.delays.0, r.delays.1, r.delays.2, r.scale, r.rel_error[0], r.rel_error[1]])
        .collect();
    art.csv("verify.csv", "verify", &["t_ba", "t_ca", "t_dc", "scale", "rel_error_pp", "rel_error_pm"], &rows)?;
    #[derive(Serialize)]
    struct Json<'a> {
        schema_version: u32,
        #[serde(flatten)]
        report: &'a ConvergenceReport,
    }
    art.json("verify.json", &Json { schema_version: SCHEMA_VERSION, report: &report })?;
    let mut table = String::from("t_ba     t_ca     t_dc     scale      err(++)    err(+-)\n");
    for r in &report.rows {
        table.push_str(&format!(
            "{:<8} {:<8} {:<8} {:<10.3e} {:<10.3e} {:.3e}\n",
            r.delays.0, r.delays.1, r.delays.2, r.scale, r.rel_error[0], r.rel_error[1]
        ));
    }
    table.push_str(&format!("min observed order {:.3}, max error at largest scale {:.3e}", report.min_order, report.max_error_top));
    let failure = if report.min_order < v.min_order {
        Some(CliError::Invariant {
            name: "convergence_order".into(),
            detail: format!("observed order {:.3} below {}", report.min_order, v.min_order),
        })
    } else if report.max_error_top > v.max_error {
        Some(CliError::Invariant {
            name: "oracle_error".into(),
            detail: format!("relative error {:.3e} above {:e}", report.max_error_top, v.max_error),
        })
    } else {
        None
    };
    Ok((table, Vec::new(), failure))
}
