//! wardplanner: batch front end wiring patient ingestion, CART fitting,
//! demand derivation and capacity optimization together through files.
//!
//! Every output embeds the sha-256 of the run configuration and the seed, so
//! any artifact can be traced back to the exact inputs that produced it.
//! Model infeasibility is a reported finding (exit 0 with a status field);
//! I/O and configuration errors exit nonzero.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use wardplanner_core::capacity::{
    heatmap, write_heatmap_csv, CapacityInstance, HeatmapMode, PlanSolution, StaffingRule,
};
use wardplanner_core::cart::{
    fit_tree, sweep, Criterion, DecisionTree, StoppingCriteria, SweepPoint,
};
use wardplanner_core::demand::{
    cart_demand, percentage_scenarios, yearly_scenarios, DemandMatrix, LeafPatient,
};
use wardplanner_core::evaluate::{evaluate, EvalError, EvaluationReport, EevOutcome};
use wardplanner_core::patient::{
    build_dataset, derive_features, hospital_regions, parse_patient_csv, train_test_split,
    AgeMode, ColumnMap, FeatureConfig, FeatureRow, PatientRecord, TargetKind,
};
use wardplanner_core::svg::render_heatmap;

#[derive(Parser)]
#[command(name = "wardplanner", version, about = "Hospital capacity planning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit CART trees over the configured parameter grid and keep the best.
    FitTree(Common),
    /// Derive the specialty-by-region demand matrix from patient episodes.
    DeriveDemand(Common),
    /// Solve EV, RP and EEV and write the evaluation report with heatmaps.
    Plan(Common),
    /// Re-render an existing report JSON as the text table.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration file (JSON).
    #[arg(long, env = "WARDPLANNER_CONFIG")]
    config: PathBuf,
    /// Output directory; overrides the config's out_dir.
    #[arg(long, env = "WARDPLANNER_OUT")]
    out: Option<PathBuf>,
    /// Seed; overrides the config's seed.
    #[arg(long, env = "WARDPLANNER_SEED")]
    seed: Option<u64>,
    /// Staffing rule; overrides the config and the instance file.
    #[arg(long, env = "WARDPLANNER_STAFFING_RULE", value_enum)]
    staffing_rule: Option<StaffingRuleArg>,
    /// Scenario scheme; overrides the config.
    #[arg(long, env = "WARDPLANNER_SCHEME", value_enum)]
    scheme: Option<Scheme>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum StaffingRuleArg {
    PerBand,
    Cumulative,
}

impl From<StaffingRuleArg> for StaffingRule {
    fn from(arg: StaffingRuleArg) -> Self {
        match arg {
            StaffingRuleArg::PerBand => StaffingRule::PerBand,
            StaffingRuleArg::Cumulative => StaffingRule::Cumulative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Scheme {
    /// Base demand scaled by per-scenario multipliers.
    Percentage,
    /// One scenario per fiscal year, weighted by admissions.
    Yearly,
    /// Pass through an explicit demand matrix file.
    Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum DemandMode {
    /// One all-inclusive leaf: plain ALOS x ADNA averages.
    Averages,
    /// Leaf-specific LOS from a fitted tree file.
    Tree,
}

/// The run configuration; all fields beyond the paths a command actually
/// needs are optional with working defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunConfig {
    #[serde(default)]
    out_dir: Option<PathBuf>,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    patients_csv: Option<PathBuf>,
    #[serde(default)]
    instance_json: Option<PathBuf>,
    #[serde(default)]
    tree_json: Option<PathBuf>,
    #[serde(default)]
    demand_csv: Option<PathBuf>,
    #[serde(default)]
    demand_sidecar: Option<PathBuf>,
    #[serde(default)]
    report_json: Option<PathBuf>,
    #[serde(default)]
    feature: FeatureConfig,
    #[serde(default)]
    stopping: StoppingCriteria,
    #[serde(default = "default_criterion")]
    criterion: Criterion,
    #[serde(default = "default_target")]
    target: TargetKind,
    #[serde(default = "default_age_mode")]
    age_mode: AgeMode,
    #[serde(default = "default_frailty_mode")]
    frailty_mode: AgeMode,
    #[serde(default)]
    include_month: bool,
    #[serde(default = "default_test_fraction")]
    test_fraction: f64,
    #[serde(default = "default_max_leaf_grid")]
    max_leaf_grid: Vec<usize>,
    #[serde(default = "default_min_leaf_grid")]
    min_leaf_grid: Vec<usize>,
    #[serde(default = "default_scheme")]
    scheme: Scheme,
    #[serde(default = "default_deltas")]
    deltas: Vec<f64>,
    #[serde(default = "default_probs")]
    probs: Vec<f64>,
    #[serde(default = "default_window_days")]
    window_days: f64,
    #[serde(default = "default_demand_mode")]
    demand_mode: DemandMode,
    #[serde(default)]
    rp_reference: Option<f64>,
    #[serde(default)]
    staffing_rule: Option<StaffingRuleArg>,
}

fn default_criterion() -> Criterion {
    Criterion::Mse
}
fn default_target() -> TargetKind {
    TargetKind::LosDays
}
fn default_age_mode() -> AgeMode {
    AgeMode::Continuous
}
fn default_frailty_mode() -> AgeMode {
    AgeMode::Grouped
}
fn default_test_fraction() -> f64 {
    0.3
}
fn default_max_leaf_grid() -> Vec<usize> {
    vec![2, 4, 8]
}
fn default_min_leaf_grid() -> Vec<usize> {
    vec![1, 2]
}
fn default_scheme() -> Scheme {
    Scheme::Percentage
}
fn default_deltas() -> Vec<f64> {
    vec![1.0, 1.2, 0.8]
}
fn default_probs() -> Vec<f64> {
    vec![0.4, 0.3, 0.3]
}
fn default_window_days() -> f64 {
    365.0
}
fn default_demand_mode() -> DemandMode {
    DemandMode::Averages
}

/// Everything a command needs: resolved config, provenance stamp, out dir.
struct Run {
    config: RunConfig,
    out_dir: PathBuf,
    seed: u64,
    config_hash: String,
}

impl Run {
    fn load(common: &Common) -> Result<Self> {
        let raw = fs::read(&common.config)
            .with_context(|| format!("reading config {}", common.config.display()))?;
        let config: RunConfig = serde_json::from_slice(&raw)
            .with_context(|| format!("parsing config {}", common.config.display()))?;
        let mut config = config;
        if let Some(scheme) = common.scheme {
            config.scheme = scheme;
        }
        if let Some(rule) = common.staffing_rule {
            config.staffing_rule = Some(rule);
        }
        let out_dir = common
            .out
            .clone()
            .or_else(|| config.out_dir.clone())
            .context("no output directory: set out_dir in the config or pass --out")?;
        let seed = common.seed.unwrap_or(config.seed);
        let config_hash = format!("{:x}", Sha256::digest(&raw));
        fs::create_dir_all(&out_dir)
            .with_context(|| format!("creating output directory {}", out_dir.display()))?;
        Ok(Run { config, out_dir, seed, config_hash })
    }

    /// JSON output with the provenance stamp merged into the top level.
    fn write_json<T: Serialize>(&self, name: &str, payload: &T) -> Result<PathBuf> {
        let value = serde_json::to_value(payload)?;
        let mut object = match value {
            serde_json::Value::Object(map) => map,
            other => {
                let mut map = serde_json::Map::new();
                map.insert("value".into(), other);
                map
            }
        };
        object.insert("config_hash".into(), self.config_hash.clone().into());
        object.insert("seed".into(), self.seed.into());
        let path = self.out_dir.join(name);
        fs::write(&path, serde_json::to_string_pretty(&object)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Text or CSV output with a `#` provenance comment line on top.
    fn write_commented(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        let stamp = format!("# config_hash={} seed={}\n", self.config_hash, self.seed);
        fs::write(&path, stamp + body).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// SVG output with the provenance stamp as a leading XML comment.
    fn write_svg(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        let stamp = format!("<!-- config_hash={} seed={} -->\n", self.config_hash, self.seed);
        fs::write(&path, stamp + body).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::FitTree(common) => cmd_fit_tree(&Run::load(common)?),
        Command::DeriveDemand(common) => cmd_derive_demand(&Run::load(common)?),
        Command::Plan(common) => cmd_plan(&Run::load(common)?),
        Command::Report(common) => cmd_report(&Run::load(common)?),
    }
}

// ---------------------------------------------------------------- fit-tree

/// Wrapper stored in tree.json so the tree carries its provenance.
#[derive(Serialize, Deserialize)]
struct TreeFile {
    tree: DecisionTree<f64>,
    criterion: Criterion,
    max_leaf_nodes: usize,
    min_samples_leaf: usize,
    score: f64,
}

fn load_patients(run: &Run) -> Result<(Vec<PatientRecord>, Vec<FeatureRow<f64>>)> {
    let path = run
        .config
        .patients_csv
        .as_ref()
        .context("config is missing patients_csv")?;
    let file = fs::File::open(path)
        .with_context(|| format!("opening patients file {}", path.display()))?;
    let outcome = parse_patient_csv(
        file,
        &ColumnMap::default(),
        &run.config.feature.date_format,
        &run.config.feature.time_format,
    )?;
    if !outcome.rejects.is_empty() {
        let mut buf = Vec::new();
        outcome.write_rejects(&mut buf)?;
        run.write_commented("rejects.csv", &String::from_utf8(buf)?)?;
    }
    let features = derive_features::<f64>(&outcome.records, &run.config.feature);
    if features.rows.is_empty() {
        bail!("no usable patient rows after validation and cohort filtering");
    }
    Ok((outcome.records, features.rows))
}

fn cmd_fit_tree(run: &Run) -> Result<()> {
    let (_, rows) = load_patients(run)?;
    let (train_rows, test_rows) =
        train_test_split(&rows, run.config.test_fraction, run.seed)?;
    let cfg = &run.config;
    let (train, train_target) =
        build_dataset(&train_rows, cfg.age_mode, cfg.frailty_mode, cfg.target, cfg.include_month)?;
    let (test, test_target) =
        build_dataset(&test_rows, cfg.age_mode, cfg.frailty_mode, cfg.target, cfg.include_month)?;
    let (points, best) = sweep(
        &train,
        &train_target,
        &test,
        &test_target,
        cfg.criterion,
        &cfg.stopping,
        &cfg.max_leaf_grid,
        &cfg.min_leaf_grid,
    )?;

    let mut metrics = String::from("max_leaf_nodes,min_samples_leaf,score,n_leaves,best\n");
    for (i, point) in points.iter().enumerate() {
        metrics.push_str(&format!(
            "{},{},{},{},{}\n",
            point.max_leaf_nodes,
            point.min_samples_leaf,
            point.score,
            point.n_leaves,
            i == best
        ));
    }
    run.write_commented("metrics.csv", &metrics)?;

    let chosen: &SweepPoint<f64> = &points[best];
    let stopping = StoppingCriteria {
        max_leaf_nodes: Some(chosen.max_leaf_nodes),
        min_samples_leaf: chosen.min_samples_leaf,
        ..cfg.stopping.clone()
    };
    let tree = fit_tree(&train, &train_target, cfg.criterion, &stopping)?;
    run.write_commented("tree.txt", &tree.render_text())?;
    run.write_json(
        "tree.json",
        &TreeFile {
            tree,
            criterion: cfg.criterion,
            max_leaf_nodes: chosen.max_leaf_nodes,
            min_samples_leaf: chosen.min_samples_leaf,
            score: chosen.score,
        },
    )?;
    Ok(())
}

// ------------------------------------------------------------ derive-demand

/// Sorted unique values plus the index of each row's value.
fn index_names<'a>(names: impl Iterator<Item = &'a str>) -> Vec<String> {
    let set: std::collections::BTreeSet<&str> = names.collect();
    set.into_iter().map(|s| s.to_string()).collect()
}

fn cmd_derive_demand(run: &Run) -> Result<()> {
    let cfg = &run.config;
    if cfg.scheme == Scheme::Matrix {
        // Pass-through: validate and restamp an explicit matrix.
        let matrix = read_demand(run)?;
        return write_demand(run, &matrix);
    }

    let (records, rows) = load_patients(run)?;
    let specialties = index_names(rows.iter().map(|r| r.specialty.as_str()));
    let hospitals = index_names(rows.iter().map(|r| r.hospital.as_str()));
    let regions = index_names(rows.iter().map(|r| r.region.as_str()));
    let region_of = hospital_regions(&records);
    let hospital_region: Vec<usize> = hospitals
        .iter()
        .map(|h| {
            let name = &region_of[h];
            regions.iter().position(|r| r == name).expect("region seen in data")
        })
        .collect();
    let spec_idx: BTreeMap<&str, usize> =
        specialties.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let hosp_idx: BTreeMap<&str, usize> =
        hospitals.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();

    let leaves: Vec<usize> = match cfg.demand_mode {
        DemandMode::Averages => vec![0; rows.len()],
        DemandMode::Tree => {
            let path = cfg.tree_json.as_ref().context("demand_mode tree needs tree_json")?;
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading tree {}", path.display()))?;
            let file: TreeFile = serde_json::from_str(&text)?;
            let (data, _) = build_dataset(
                &rows,
                cfg.age_mode,
                cfg.frailty_mode,
                cfg.target,
                cfg.include_month,
            )?;
            file.tree.leaf_assignments(&data)?
        }
    };
    let patients: Vec<LeafPatient<f64>> = rows
        .iter()
        .zip(&leaves)
        .map(|(row, &leaf)| LeafPatient {
            leaf,
            specialty: spec_idx[row.specialty.as_str()],
            hospital: hosp_idx[row.hospital.as_str()],
            los_days: row.los_days,
        })
        .collect();

    let matrix = match cfg.scheme {
        Scheme::Percentage => {
            let base = cart_demand(
                &specialties,
                &regions,
                &patients,
                &hospital_region,
                cfg.window_days,
            )?;
            percentage_scenarios(&base, &cfg.deltas, &cfg.probs)?
        }
        Scheme::Yearly => {
            // Fiscal years starting in April, matched back through record
            // order (rows mirror records minus excluded ones, so join by id).
            let year_of: BTreeMap<&str, i32> = records
                .iter()
                .map(|r| {
                    use chrono::Datelike;
                    let date = r.admission_date;
                    let fiscal = if date.month() >= 4 { date.year() } else { date.year() - 1 };
                    (r.patient_id.as_str(), fiscal)
                })
                .collect();
            let mut years: Vec<i32> =
                rows.iter().map(|r| year_of[r.patient_id.as_str()]).collect();
            let mut distinct = years.clone();
            distinct.sort_unstable();
            distinct.dedup();
            let mut per_year = Vec::new();
            let mut admissions = Vec::new();
            for &year in &distinct {
                let subset: Vec<LeafPatient<f64>> = patients
                    .iter()
                    .zip(&years)
                    .filter(|(_, &y)| y == year)
                    .map(|(p, _)| p.clone())
                    .collect();
                admissions.push(subset.len() as u64);
                per_year.push(cart_demand(
                    &specialties,
                    &regions,
                    &subset,
                    &hospital_region,
                    cfg.window_days,
                )?);
            }
            years.clear();
            yearly_scenarios(&per_year, &admissions)?
        }
        Scheme::Matrix => unreachable!("handled above"),
    };
    write_demand(run, &matrix)
}

fn write_demand(run: &Run, matrix: &DemandMatrix<f64>) -> Result<()> {
    let mut csv_bytes = Vec::new();
    matrix.write_csv(&mut csv_bytes)?;
    run.write_commented("demand.csv", &String::from_utf8(csv_bytes)?)?;
    #[derive(Serialize)]
    struct Sidecar<'a> {
        specialties: &'a [String],
        regions: &'a [String],
        probabilities: &'a [f64],
    }
    run.write_json(
        "demand_sidecar.json",
        &Sidecar {
            specialties: &matrix.specialties,
            regions: &matrix.regions,
            probabilities: &matrix.probabilities,
        },
    )?;
    Ok(())
}

/// Reads a demand CSV + sidecar pair, tolerating `#` provenance comments.
fn read_demand(run: &Run) -> Result<DemandMatrix<f64>> {
    let csv_path = run.config.demand_csv.as_ref().context("config is missing demand_csv")?;
    let sidecar_path =
        run.config.demand_sidecar.as_ref().context("config is missing demand_sidecar")?;
    let csv_text = fs::read_to_string(csv_path)
        .with_context(|| format!("reading demand {}", csv_path.display()))?;
    let stripped: String = csv_text
        .lines()
        .filter(|line| !line.starts_with('#'))
        .map(|line| format!("{line}\n"))
        .collect();
    let sidecar = fs::read_to_string(sidecar_path)
        .with_context(|| format!("reading sidecar {}", sidecar_path.display()))?;
    Ok(DemandMatrix::read_csv(stripped.as_bytes(), sidecar.as_bytes())?)
}

// ----------------------------------------------------------------- plan

/// report.json payload for both the solved and the infeasible outcome.
#[derive(Serialize, Deserialize)]
struct ReportFile {
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<EvaluationReport<f64>>,
}

fn load_instance(run: &Run) -> Result<CapacityInstance<f64>> {
    let path = run.config.instance_json.as_ref().context("config is missing instance_json")?;
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading instance {}", path.display()))?;
    let mut inst = CapacityInstance::<f64>::from_json(&text)
        .with_context(|| format!("parsing instance {}", path.display()))?;
    if let Some(rule) = run.config.staffing_rule {
        inst.staffing_rule = rule.into();
    }
    inst.validate()?;
    Ok(inst)
}

fn cmd_plan(run: &Run) -> Result<()> {
    let inst = load_instance(run)?;
    let demand = read_demand(run)?;
    match evaluate(&inst, &demand, run.config.rp_reference) {
        Ok(mut report) => {
            // Wall times vary run to run; zero them so reruns with the same
            // seed produce byte-identical files.
            report.ev.wall_time_secs = 0.0;
            report.rp.wall_time_secs = 0.0;
            if let EevOutcome::Optimal(outcome) = &mut report.eev {
                outcome.wall_time_secs = 0.0;
            }
            run.write_commented("table.txt", &report.render_table(&inst))?;
            write_heatmaps(run, &inst, "ev", &report.ev.plan)?;
            write_heatmaps(run, &inst, "rp", &report.rp.plan)?;
            if let EevOutcome::Optimal(outcome) = &report.eev {
                write_heatmaps(run, &inst, "eev", &outcome.plan)?;
            }
            run.write_json(
                "report.json",
                &ReportFile { status: "optimal".into(), detail: None, report: Some(report) },
            )?;
            Ok(())
        }
        Err(EvalError::NotSolvable(model, status)) => {
            // A finding, not a failure: record it and exit cleanly.
            run.write_json(
                "report.json",
                &ReportFile {
                    status: "infeasible".into(),
                    detail: Some(format!("{model} model is {status:?}")),
                    report: None,
                },
            )?;
            Ok(())
        }
        Err(other) => Err(other.into()),
    }
}

fn write_heatmaps(
    run: &Run,
    inst: &CapacityInstance<f64>,
    label: &str,
    plan: &PlanSolution<f64>,
) -> Result<()> {
    for (mode, mode_label) in [
        (HeatmapMode::FirstStage, "first_stage"),
        (HeatmapMode::CombinedMax, "combined_max"),
    ] {
        let matrix = heatmap(plan, mode);
        let mut csv_bytes = Vec::new();
        write_heatmap_csv(&matrix, &inst.specialties, &inst.hospitals, &mut csv_bytes)?;
        run.write_commented(
            &format!("heatmap_{label}_{mode_label}.csv"),
            &String::from_utf8(csv_bytes)?,
        )?;
        let float_matrix: Vec<Vec<f64>> =
            matrix.iter().map(|row| row.iter().map(|&v| v as f64).collect()).collect();
        let mut svg = Vec::new();
        render_heatmap(
            &float_matrix,
            &inst.specialties,
            &inst.hospitals,
            &format!("{label} beds ({})", mode_label.replace('_', " ")),
            &mut svg,
        )?;
        run.write_svg(
            &format!("heatmap_{label}_{mode_label}.svg"),
            &String::from_utf8(svg)?,
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------- report

fn cmd_report(run: &Run) -> Result<()> {
    let path = run
        .config
        .report_json
        .clone()
        .unwrap_or_else(|| run.out_dir.join("report.json"));
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading report {}", path.display()))?;
    let file: ReportFile = serde_json::from_str(&text)?;
    match file.report {
        Some(report) => {
            let inst = load_instance(run)?;
            print!("{}", report.render_table(&inst));
        }
        None => println!(
            "status: {}{}",
            file.status,
            file.detail.map(|d| format!(" ({d})")).unwrap_or_default()
        ),
    }
    Ok(())
}
