use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;
use sha2::{Digest, Sha256};
use tte_estimand::data::{validate_dataset, TrialDataset, Violation};
use tte_estimand::discretize::discretize_with_ice;
use tte_estimand::estimand::{EstimandSpec, Summary};
use tte_estimand::estimate::{
    aalen_johansen_cif, bootstrap_se, contrast, fit_cumulative_weights, ipcw_survival, kaplan_meier, seq_gcomp,
    targeted_update, EstimateResult, GcompProblem, IpcwOptions, Resample, Scale,
};
use tte_estimand::io::{self, read_dataset, read_ices, read_times, write_competing, write_dataset, write_ices, write_oracle};
use tte_estimand::mi::{combined_mi, CombinedSpec, MiRun};
use tte_estimand::rng::stream_seed;
use tte_estimand::simulate::{sace_oracle, simulate_potential, simulate_trial};
use tte_estimand::strategy::{compose_plan, Composed, ComposedData, IceRecord, RegimeSpec, StrategyPlan};
use tte_estimand::{Competing, Dataset, Error as CoreError};

use crate::config::{Format, Method, MiConfig, PipelineConfig};
use crate::error::CliError;

/// Seed used when neither the config nor the command line sets one.
pub const DEFAULT_SEED: u64 = 1;

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Discretize,
    Transform,
    Estimate,
    Sensitivity,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Discretize => "discretize",
            Command::Transform => "transform",
            Command::Estimate => "estimate",
            Command::Sensitivity => "sensitivity",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Serialize)]
struct InputHash {
    path: PathBuf,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Report<'a, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a PipelineConfig,
    inputs: Vec<InputHash>,
    result: R,
}

fn sha256_file(path: &Path) -> CliResult<InputHash> {
    let bytes = std::fs::read(path)?;
    Ok(InputHash { path: path.to_path_buf(), sha256: format!("{:x}", Sha256::digest(&bytes)) })
}

/// Write through a temporary file in the target directory, then rename.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> CliResult<()>) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    body(&mut tmp)?;
    tmp.as_file_mut().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn required<'a>(p: &'a Option<PathBuf>, name: &str) -> CliResult<&'a PathBuf> {
    p.as_ref().ok_or_else(|| CliError::config(name, format!("--{name} is required for this command")))
}

fn emit_report<R: Serialize>(
    cfg: &PipelineConfig,
    command: Command,
    inputs: Vec<InputHash>,
    result: R,
    to: Option<&Path>,
) -> CliResult<()> {
    let report = Report { tool: "tte", version: env!("CARGO_PKG_VERSION"), command: command.name(), config: cfg, inputs, result };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    match to {
        Some(path) => write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?)),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load(cfg: &PipelineConfig) -> CliResult<(Dataset, Vec<InputHash>)> {
    let path = required(&cfg.input, "input")?;
    let ds = io::load_dataset(path, &cfg.csv)?;
    info!("loaded {} subjects, K = {}", ds.len(), ds.k());
    Ok((ds, vec![sha256_file(path)?]))
}

fn load_ices(cfg: &PipelineConfig, inputs: &mut Vec<InputHash>) -> CliResult<Vec<IceRecord>> {
    match &cfg.ices {
        Some(path) => {
            inputs.push(sha256_file(path)?);
            Ok(read_ices(BufReader::new(File::open(path)?))?)
        }
        None => Ok(Vec::new()),
    }
}

fn seed(cfg: &PipelineConfig) -> u64 {
    cfg.seed.unwrap_or(DEFAULT_SEED)
}

pub fn run(command: Command, cfg: &mut PipelineConfig) -> CliResult<()> {
    match command {
        Command::Simulate => simulate(cfg),
        Command::Discretize => discretize(cfg),
        Command::Transform => transform(cfg),
        Command::Estimate => estimate(cfg),
        Command::Sensitivity => sensitivity(cfg),
        Command::Validate => validate(cfg),
    }
}

#[derive(Serialize)]
struct SimulateSummary {
    subjects: usize,
    k: usize,
    censored: usize,
    ices: usize,
    output: PathBuf,
    oracle: Option<PathBuf>,
}

fn simulate(cfg: &mut PipelineConfig) -> CliResult<()> {
    let mut dgp = cfg.simulate.clone().unwrap_or_default();
    if let Some(s) = cfg.seed {
        dgp.seed = s;
    }
    cfg.simulate = Some(dgp.clone());
    dgp.validate().map_err(|e| CliError::config("simulate", e.to_string()))?;
    let out = required(&cfg.output, "output")?.clone();
    let sim = simulate_trial::<f64>(&dgp)?;
    write_atomic(&out, |w| Ok(write_dataset(&sim.dataset, w, &cfg.csv)?))?;
    if let Some(path) = &cfg.oracle {
        let records = simulate_potential::<f64>(&dgp)?;
        write_atomic(path, |w| Ok(write_oracle(&records, dgp.k, w)?))?;
    }
    if let Some(path) = &cfg.ices {
        write_atomic(path, |w| Ok(write_ices(&sim.ices, w)?))?;
    }
    let censored = sim.dataset.subjects().iter().filter(|s| s.censor_time().is_some()).count();
    let summary = SimulateSummary {
        subjects: sim.dataset.len(),
        k: dgp.k,
        censored,
        ices: sim.ices.len(),
        output: out,
        oracle: cfg.oracle.clone(),
    };
    emit_report(cfg, Command::Simulate, vec![], summary, None)
}

#[derive(Serialize)]
struct DiscretizeSummary {
    subjects: usize,
    k: usize,
    events: usize,
    censored: usize,
    ices: usize,
}

fn discretize(cfg: &mut PipelineConfig) -> CliResult<()> {
    let dc = cfg.discretize.clone().ok_or_else(|| CliError::config("discretize", "missing section"))?;
    let timeline = match &dc.unit {
        Some(u) => tte_estimand::data::Timeline::with_unit(dc.k, u.clone()),
        None => tte_estimand::data::Timeline::new(dc.k),
    }
    .map_err(|e| CliError::config("discretize.k", e.to_string()))?;
    let input = required(&cfg.input, "input")?;
    let (rows, w_names) = read_times::<f64, _>(BufReader::new(File::open(input)?)).map_err(CliError::from)?;
    let mut subjects = Vec::with_capacity(rows.len());
    let mut ices = Vec::new();
    let mut events = 0;
    for r in rows {
        let d = discretize_with_ice(&timeline, &r.times)?;
        events += usize::from(d.event);
        if let Some(m) = d.ice_month {
            ices.push(IceRecord::new(r.id.clone(), dc.ice_kind.clone(), m, dc.ice_terminal));
        }
        subjects.push(d.to_subject(r.id, r.arm, r.w));
    }
    let ds = TrialDataset::new(timeline, w_names, vec![], subjects).map_err(CliError::Data)?;
    let out = required(&cfg.output, "output")?;
    write_atomic(out, |w| Ok(write_dataset(&ds, w, &cfg.csv)?))?;
    if let Some(path) = &cfg.ices {
        write_atomic(path, |w| Ok(write_ices(&ices, w)?))?;
    }
    let censored = ds.subjects().iter().filter(|s| s.censor_time().is_some()).count();
    let summary = DiscretizeSummary { subjects: ds.len(), k: ds.k(), events, censored, ices: ices.len() };
    emit_report(cfg, Command::Discretize, vec![sha256_file(input)?], summary, None)
}

fn compose(ds: &Dataset, ices: &[IceRecord], plan: &StrategyPlan) -> CliResult<ComposedData<f64>> {
    compose_plan(ds, ices, plan).map_err(|e| match e {
        CoreError::PlanIncomplete(_) | CoreError::InvalidPlan(_) => CliError::config("plan", e.to_string()),
        e => e.into(),
    })
}

#[derive(Serialize)]
struct TransformSummary {
    subjects: usize,
    competing: bool,
    censored_by_plan: usize,
    notes: Vec<String>,
}

fn transform(cfg: &mut PipelineConfig) -> CliResult<()> {
    let plan = match (&cfg.plan, &cfg.estimand) {
        (Some(p), _) => p.clone(),
        (None, Some(e)) => e.plan.clone(),
        (None, None) => return Err(CliError::config("plan", "transform needs a plan")),
    };
    let (ds, mut inputs) = load(cfg)?;
    let ices = load_ices(cfg, &mut inputs)?;
    let composed = compose(&ds, &ices, &plan)?;
    let out = required(&cfg.output, "output")?;
    match &composed.data {
        Composed::Trial(d) => write_atomic(out, |w| Ok(write_dataset(d, w, &cfg.csv)?))?,
        Composed::Competing(d) => write_atomic(out, |w| Ok(write_competing(d, w, &cfg.csv)?))?,
    }
    let summary = TransformSummary {
        subjects: composed.data.len(),
        competing: composed.data.competing().is_some(),
        censored_by_plan: composed.censoring_tags.iter().flatten().count(),
        notes: composed.notes,
    };
    emit_report(cfg, Command::Transform, inputs, summary, None)
}

fn checked_estimand(cfg: &PipelineConfig, k: usize) -> CliResult<EstimandSpec> {
    let spec = cfg.estimand.clone().ok_or_else(|| CliError::config("estimand", "missing section"))?;
    spec.validate(k).map_err(|e| CliError::config("estimand", e.to_string()))?;
    Ok(spec)
}

fn constant_arm(regime: &RegimeSpec, what: &str) -> CliResult<u32> {
    regime
        .constant_code()
        .ok_or_else(|| CliError::config("estimand.regimes", format!("{what} needs regimes that never switch")))
}

fn with_bootstrap<D: Resample>(
    mut r: EstimateResult<f64>,
    data: &D,
    b: usize,
    seed: u64,
    f: impl Fn(&D) -> tte_estimand::Result<f64> + Sync,
) -> CliResult<EstimateResult<f64>> {
    if b == 0 {
        return Ok(r);
    }
    let boot = bootstrap_se(data, f, b, seed)?;
    r.diagnostics.bootstrap_failures = boot.failures;
    let mut r = r.with_se(boot.se);
    r.ci95 = Some(boot.ci95);
    Ok(r)
}

fn survival_estimate(cfg: &PipelineConfig, ds: &Dataset, regime: &RegimeSpec, horizon: usize, seed: u64) -> CliResult<EstimateResult<f64>> {
    let est = &cfg.estimator;
    let b = est.bootstrap;
    let label = format!("S({horizon}) under {:?}", regime.abar());
    match est.method {
        Method::Km => {
            let arm = constant_arm(regime, "kaplan-meier")?;
            Ok(kaplan_meier(ds, Some(arm))?.estimate(horizon, &label)?)
        }
        Method::Ipcw => {
            let opts = IpcwOptions { floor: est.floor };
            let run = |d: &Dataset| ipcw_survival(d, regime, &est.censor_model, horizon, &opts);
            let r = run(ds)?;
            with_bootstrap(r, ds, b, seed, |d| run(d).map(|r| r.point))
        }
        Method::Gcomp => {
            let run = |d: &Dataset| seq_gcomp(&GcompProblem::new(d, regime, horizon, est.covariates.clone()));
            let r = run(ds)?.result;
            with_bootstrap(r, ds, b, seed, |d| run(d).map(|f| f.result.point))
        }
        Method::Tmle => {
            let problem = GcompProblem::new(ds, regime, horizon, est.covariates.clone());
            let weights = fit_cumulative_weights(&problem, &est.g_covariates, est.floor)?;
            Ok(targeted_update(&problem, &weights)?.result)
        }
        Method::AalenJohansen => {
            Err(CliError::config("estimator.method", "aalen_johansen estimates CIF_AT_K only"))
        }
    }
}

fn cif_estimate(cfg: &PipelineConfig, cds: &Competing, regime: &RegimeSpec, horizon: usize, seed: u64) -> CliResult<EstimateResult<f64>> {
    if !matches!(cfg.estimator.method, Method::AalenJohansen | Method::Km) {
        return Err(CliError::config("estimator.method", "CIF_AT_K is estimated by aalen_johansen"));
    }
    let arm = constant_arm(regime, "aalen-johansen")?;
    let (pe, _) = aalen_johansen_cif(cds, Some(arm), horizon)?;
    with_bootstrap(pe, cds, cfg.estimator.bootstrap, seed, |d| aalen_johansen_cif(d, Some(arm), horizon).map(|r| r.0.point))
}

fn sace(cfg: &PipelineConfig, horizon: usize) -> CliResult<EstimateResult<f64>> {
    let dgp = cfg
        .simulate
        .clone()
        .ok_or_else(|| CliError::config("simulate", "SACE_ORACLE is computed from the simulator configuration"))?;
    let records = simulate_potential::<f64>(&dgp)?;
    let value = sace_oracle(&records, horizon)?
        .ok_or_else(|| CliError::Core(CoreError::Domain("the always-ICE-free stratum is empty".into())))?;
    Ok(EstimateResult::new(format!("SACE({horizon})"), "potential-outcome oracle", horizon, Scale::Difference, value, records.len()))
}

fn estimate(cfg: &mut PipelineConfig) -> CliResult<()> {
    let s = seed(cfg);
    cfg.seed = Some(s);
    if let Some(d) = cfg.simulate.as_mut() {
        d.seed = s;
    }
    let format = cfg.format.unwrap_or_default();
    let out = required(&cfg.output, "output")?.clone();

    let sace_only = cfg.estimand.as_ref().is_some_and(|e| e.summary == Summary::SaceOracle) && cfg.input.is_none();
    let (result, inputs) = if sace_only {
        let k = cfg.simulate.as_ref().map_or(10, |d| d.k);
        let spec = checked_estimand(cfg, k)?;
        (sace(cfg, spec.horizon)?, vec![])
    } else {
        let (ds, mut inputs) = load(cfg)?;
        let spec = checked_estimand(cfg, ds.k())?;
        let ices = load_ices(cfg, &mut inputs)?;
        let composed = compose(&ds, &ices, &spec.plan)?;
        let h = spec.horizon;
        let mut result = match (spec.summary, &composed.data) {
            (Summary::SaceOracle, _) => sace(cfg, h)?,
            (Summary::CifAtK, Composed::Competing(cds)) => cif_estimate(cfg, cds, &spec.regimes[0], h, s)?,
            (Summary::SurvivalAtK, Composed::Trial(d)) => survival_estimate(cfg, d, &spec.regimes[0], h, s)?,
            (Summary::SurvivalDifference, Composed::Trial(d)) => {
                let e1 = survival_estimate(cfg, d, &spec.regimes[0], h, stream_seed(s, 1))?;
                let e0 = survival_estimate(cfg, d, &spec.regimes[1], h, stream_seed(s, 0))?;
                let mut c = contrast(&e1, &e0)?;
                c.diagnostics.warnings.extend(e1.diagnostics.warnings.iter().chain(&e0.diagnostics.warnings).cloned());
                c
            }
            _ => return Err(CliError::config("estimand.summary", "summary does not match the plan's outcome shape")),
        };
        result.diagnostics.warnings.extend(composed.notes);
        (result, inputs)
    };
    match format {
        Format::Json => emit_report(cfg, Command::Estimate, inputs, &result, Some(&out)),
        Format::Csv => write_atomic(&out, |w| write_estimate_csv(&result, w)),
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| io::NA.to_string(), |v| v.to_string())
}

fn write_estimate_csv(r: &EstimateResult<f64>, w: &mut dyn Write) -> CliResult<()> {
    writeln!(w, "estimand,method,horizon,point,se,ci_low,ci_high,n_used")?;
    writeln!(
        w,
        "\"{}\",{},{},{},{},{},{},{}",
        r.estimand.replace('"', "\"\""),
        r.method,
        r.horizon,
        r.point,
        fmt_opt(r.se),
        fmt_opt(r.ci95.map(|c| c.0)),
        fmt_opt(r.ci95.map(|c| c.1)),
        r.n_used
    )?;
    Ok(())
}

#[derive(Serialize)]
struct SensitivityResult<'a> {
    estimand: String,
    run: &'a MiRun<f64>,
    notes: Vec<String>,
}

/// Per-imputation (point, variance): product-limit survival at the horizon
/// per arm and its Greenwood variance, or their difference.
fn mi_estimator(arms: Vec<u32>, horizon: usize) -> impl Fn(&Dataset) -> tte_estimand::Result<(f64, f64)> + Sync {
    move |d: &Dataset| {
        let mut parts = Vec::with_capacity(arms.len());
        for &a in &arms {
            let p = kaplan_meier(d, Some(a))?.points[horizon - 1];
            parts.push((p.survival, p.se * p.se));
        }
        Ok(match parts.as_slice() {
            [(s, v)] => (*s, *v),
            [(s1, v1), (s0, v0)] => (s1 - s0, v1 + v0),
            _ => unreachable!("one or two regimes"),
        })
    }
}

fn sensitivity(cfg: &mut PipelineConfig) -> CliResult<()> {
    let s = seed(cfg);
    cfg.seed = Some(s);
    let mi: MiConfig = cfg.mi.clone().ok_or_else(|| CliError::config("mi", "missing section"))?;
    let out = required(&cfg.output, "output")?.clone();
    let (ds, mut inputs) = load(cfg)?;
    let spec = checked_estimand(cfg, ds.k())?;
    if !matches!(spec.summary, Summary::SurvivalAtK | Summary::SurvivalDifference) {
        return Err(CliError::config("estimand.summary", "sensitivity analyses support SURVIVAL_AT_K and SURVIVAL_DIFFERENCE"));
    }
    let arms = spec.regimes.iter().map(|r| constant_arm(r, "sensitivity")).collect::<CliResult<Vec<_>>>()?;
    let ices = load_ices(cfg, &mut inputs)?;
    let composed = compose(&ds, &ices, &spec.plan)?;
    let Composed::Trial(data) = &composed.data else {
        return Err(CliError::config("estimand.plan", "multiple imputation needs a single-outcome plan"));
    };
    let tags: Vec<Option<String>> = composed.censoring_tags.iter().map(|t| t.as_ref().map(|(k, _)| k.clone())).collect();
    let combined = CombinedSpec {
        by_kind: mi.by_kind.clone(),
        untagged: mi.assumption,
        m: mi.m,
        seed: s,
        reference_arm: mi.reference_arm,
        covariates: mi.covariates.clone(),
        proper: mi.proper,
    };
    let run = combined_mi(data, &tags, &combined, mi_estimator(arms, spec.horizon)).map_err(|e| match e {
        CoreError::InvalidSpec(m) => CliError::config("mi", m),
        e => e.into(),
    })?;
    let label = match spec.summary {
        Summary::SurvivalAtK => format!("S({}) under {:?}", spec.horizon, spec.regimes[0].abar()),
        _ => format!("S({h}) difference {:?} - {:?}", spec.regimes[0].abar(), spec.regimes[1].abar(), h = spec.horizon),
    };
    match cfg.format.unwrap_or_default() {
        Format::Json => {
            let result = SensitivityResult { estimand: label, run: &run, notes: composed.notes };
            emit_report(cfg, Command::Sensitivity, inputs, result, Some(&out))
        }
        Format::Csv => write_atomic(&out, |w| {
            let p = &run.pooled;
            writeln!(w, "imputation,point,variance")?;
            for (j, (pt, v)) in run.estimates.iter().enumerate() {
                writeln!(w, "{j},{pt},{v}")?;
            }
            writeln!(w, "pooled,{},{}", p.point, p.total_var)?;
            Ok(())
        }),
    }
}

#[derive(Serialize)]
struct ValidateResult {
    subjects: usize,
    violations: Vec<Violation>,
}

fn validate(cfg: &mut PipelineConfig) -> CliResult<()> {
    let path = required(&cfg.input, "input")?.clone();
    let ds: Dataset = read_dataset(BufReader::new(File::open(&path)?), &cfg.csv)?;
    let violations = validate_dataset(&ds);
    let result = ValidateResult { subjects: ds.len(), violations: violations.clone() };
    emit_report(cfg, Command::Validate, vec![sha256_file(&path)?], result, cfg.output.as_deref())?;
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(violations))
    }
}
