//! The deterministic and two-stage stochastic bed/staff planning models.
//!
//! Both builders translate a [`CapacityInstance`] plus demand into the
//! generic [`LinearProgram`] container: first-stage bed and staff variables
//! per (specialty, hospital) and (specialty, band, hospital), and for the
//! stochastic model scenario-indexed recourse copies weighted by p_k.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::demand::{DemandMatrix, RegionDemand};
use crate::milp::{LinearProgram, Relation, SolveResult, SolveStatus};
use crate::scalar::Scalar;
use crate::svg;

#[derive(Debug, Error)]
pub enum CapacityError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("negative parameter: {0}")]
    Negative(String),
    #[error("hospital {0} maps to unknown region {1}")]
    BadRegion(usize, usize),
    #[error("cannot extract a plan from a {0:?} result")]
    NotOptimal(SolveStatus),
    #[error("extracted plan violates {0}")]
    Violated(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// First- vs second-stage staffing interpretation of the ratio constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StaffingRule {
    /// Each band independently: staff_{s,b,h} ≥ R_{s,b} · beds_{s,h}.
    #[default]
    PerBand,
    /// Bands at or above b jointly: Σ_{b'≥b} staff_{s,b',h} ≥ R_{s,b} · beds_{s,h}.
    Cumulative,
}

/// All sets and parameters of one planning problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CapacityInstance<S> {
    pub specialties: Vec<String>,
    pub hospitals: Vec<String>,
    pub regions: Vec<String>,
    pub bands: Vec<String>,
    /// Region index per hospital.
    pub hospital_region: Vec<usize>,
    /// c^{bed,1st}_{s,h}.
    pub bed_cost_stage1: Vec<Vec<S>>,
    /// c^{bed,2nd}_{s,h}.
    pub bed_cost_stage2: Vec<Vec<S>>,
    /// c^{staff,1st}_b.
    pub staff_cost_stage1: Vec<S>,
    /// c^{staff,2nd}_b.
    pub staff_cost_stage2: Vec<S>,
    /// R_{s,b} staff-per-bed ratios.
    pub ratio: Vec<Vec<S>>,
    /// K_{s,h} specialty bed capacity.
    pub capacity: Vec<Vec<S>>,
    /// UB^{max,bed,1st}_h; absent entries default to Σ_s K_{s,h}.
    pub ub_bed_stage1: Option<Vec<S>>,
    /// UB^{max,bed,2nd}_h.
    pub ub_bed_stage2: Vec<S>,
    /// UB^{max,staff,1st}_b.
    pub ub_staff_stage1: Vec<S>,
    /// UB^{max,staff,2nd}_b.
    pub ub_staff_stage2: Vec<S>,
    #[serde(default)]
    pub staffing_rule: StaffingRule,
}

impl<S: Scalar> CapacityInstance<S> {
    pub fn n_specialties(&self) -> usize {
        self.specialties.len()
    }

    pub fn n_hospitals(&self) -> usize {
        self.hospitals.len()
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    /// Effective first-stage hospital bed bound.
    pub fn bed_bound_stage1(&self, h: usize) -> S {
        match &self.ub_bed_stage1 {
            Some(ub) => ub[h],
            None => (0..self.n_specialties())
                .fold(S::zero(), |a, s| a + self.capacity[s][h]),
        }
    }

    pub fn validate(&self) -> Result<(), CapacityError> {
        let (ns, nh, nb) = (self.n_specialties(), self.n_hospitals(), self.n_bands());
        let shape = |name: &str, rows: usize, expect: usize| {
            if rows != expect {
                Err(CapacityError::Dimension(format!("{name}: {rows} rows, expected {expect}")))
            } else {
                Ok(())
            }
        };
        shape("hospital_region", self.hospital_region.len(), nh)?;
        for (h, &r) in self.hospital_region.iter().enumerate() {
            if r >= self.regions.len() {
                return Err(CapacityError::BadRegion(h, r));
            }
        }
        for (name, m, cols) in [
            ("bed_cost_stage1", &self.bed_cost_stage1, nh),
            ("bed_cost_stage2", &self.bed_cost_stage2, nh),
            ("ratio", &self.ratio, nb),
            ("capacity", &self.capacity, nh),
        ] {
            shape(name, m.len(), ns)?;
            for row in m {
                shape(name, row.len(), cols)?;
                if let Some(bad) = row.iter().find(|v| **v < S::zero()) {
                    return Err(CapacityError::Negative(format!("{name}: {}", bad.as_f64())));
                }
            }
        }
        for (name, v, expect) in [
            ("staff_cost_stage1", &self.staff_cost_stage1, nb),
            ("staff_cost_stage2", &self.staff_cost_stage2, nb),
            ("ub_bed_stage2", &self.ub_bed_stage2, nh),
            ("ub_staff_stage1", &self.ub_staff_stage1, nb),
            ("ub_staff_stage2", &self.ub_staff_stage2, nb),
        ] {
            shape(name, v.len(), expect)?;
            if let Some(bad) = v.iter().find(|x| **x < S::zero()) {
                return Err(CapacityError::Negative(format!("{name}: {}", bad.as_f64())));
            }
        }
        if let Some(ub) = &self.ub_bed_stage1 {
            shape("ub_bed_stage1", ub.len(), nh)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Result<String>
    where
        S: Serialize,
    {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self>
    where
        S: serde::de::DeserializeOwned,
    {
        serde_json::from_str(text)
    }

    fn check_demand_shape(&self, ns: usize, nr: usize) -> Result<(), CapacityError> {
        if ns != self.n_specialties() || nr != self.regions.len() {
            return Err(CapacityError::Dimension(format!(
                "demand is {ns}×{nr}, instance is {}×{}",
                self.n_specialties(),
                self.regions.len()
            )));
        }
        Ok(())
    }
}

pub fn bed_var(s: usize, h: usize) -> String {
    format!("x_bed_{s}_{h}")
}

pub fn staff_var(s: usize, b: usize, h: usize) -> String {
    format!("x_staff_{s}_{b}_{h}")
}

pub fn recourse_bed_var(s: usize, h: usize, k: usize) -> String {
    format!("u_bed_{s}_{h}_{k}")
}

pub fn recourse_staff_var(s: usize, b: usize, h: usize, k: usize) -> String {
    format!("u_staff_{s}_{b}_{h}_{k}")
}

/// Adds the first-stage variables; returns nothing — indices are recomputed
/// via the fixed ordering (beds for all (s,h), then staff for all (s,b,h)).
fn add_first_stage<S: Scalar>(lp: &mut LinearProgram<S>, inst: &CapacityInstance<S>) {
    for s in 0..inst.n_specialties() {
        for h in 0..inst.n_hospitals() {
            lp.add_variable(
                bed_var(s, h),
                S::zero(),
                inst.capacity[s][h],
                true,
                inst.bed_cost_stage1[s][h],
            );
        }
    }
    for s in 0..inst.n_specialties() {
        for b in 0..inst.n_bands() {
            for h in 0..inst.n_hospitals() {
                lp.add_variable(
                    staff_var(s, b, h),
                    S::zero(),
                    inst.ub_staff_stage1[b],
                    true,
                    inst.staff_cost_stage1[b],
                );
            }
        }
    }
}

fn bed_index<S: Scalar>(inst: &CapacityInstance<S>, s: usize, h: usize) -> usize {
    s * inst.n_hospitals() + h
}

fn staff_index<S: Scalar>(inst: &CapacityInstance<S>, s: usize, b: usize, h: usize) -> usize {
    let nh = inst.n_hospitals();
    inst.n_specialties() * nh + (s * inst.n_bands() + b) * nh + h
}

/// Staffing rows linking `staff(s,b,h)` variables to `bed(s,h)`, shared by
/// both stages (`offset` shifts into the scenario's variable block).
fn add_staffing_rows<S: Scalar>(
    lp: &mut LinearProgram<S>,
    inst: &CapacityInstance<S>,
    bed_at: impl Fn(usize, usize) -> usize,
    staff_at: impl Fn(usize, usize, usize) -> usize,
    tag: &str,
) {
    for s in 0..inst.n_specialties() {
        for b in 0..inst.n_bands() {
            for h in 0..inst.n_hospitals() {
                let mut terms = match inst.staffing_rule {
                    StaffingRule::PerBand => vec![(staff_at(s, b, h), S::one())],
                    StaffingRule::Cumulative => (b..inst.n_bands())
                        .map(|b2| (staff_at(s, b2, h), S::one()))
                        .collect(),
                };
                terms.push((bed_at(s, h), -inst.ratio[s][b]));
                lp.add_constraint(format!("staffing{tag}_{s}_{b}_{h}"), terms, Relation::Ge, S::zero());
            }
        }
    }
}

/// Hospital bed-total and band staff-total rows for one stage.
fn add_total_rows<S: Scalar>(
    lp: &mut LinearProgram<S>,
    inst: &CapacityInstance<S>,
    bed_at: &impl Fn(usize, usize) -> usize,
    staff_at: &impl Fn(usize, usize, usize) -> usize,
    bed_ub: &impl Fn(usize) -> S,
    staff_ub: &[S],
    tag: &str,
) {
    for h in 0..inst.n_hospitals() {
        let terms = (0..inst.n_specialties()).map(|s| (bed_at(s, h), S::one())).collect();
        lp.add_constraint(format!("hospital_beds{tag}_{h}"), terms, Relation::Le, bed_ub(h));
    }
    for b in 0..inst.n_bands() {
        let mut terms = Vec::new();
        for s in 0..inst.n_specialties() {
            for h in 0..inst.n_hospitals() {
                terms.push((staff_at(s, b, h), S::one()));
            }
        }
        lp.add_constraint(format!("band_staff{tag}_{b}"), terms, Relation::Le, staff_ub[b]);
    }
}

/// Single-scenario model: coverage, staffing, capacity and stage-1 bounds.
pub fn build_deterministic<S: Scalar>(
    inst: &CapacityInstance<S>,
    demand: &RegionDemand<S>,
) -> Result<LinearProgram<S>, CapacityError> {
    inst.validate()?;
    inst.check_demand_shape(demand.values.len(), demand.regions.len())?;
    let mut lp = LinearProgram::new();
    add_first_stage(&mut lp, inst);
    let bed_at = |s, h| bed_index(inst, s, h);
    let staff_at = |s, b, h| staff_index(inst, s, b, h);

    for s in 0..inst.n_specialties() {
        for r in 0..inst.regions.len() {
            let terms: Vec<(usize, S)> = (0..inst.n_hospitals())
                .filter(|&h| inst.hospital_region[h] == r)
                .map(|h| (bed_at(s, h), S::one()))
                .collect();
            lp.add_constraint(
                format!("coverage_{s}_{r}"),
                terms,
                Relation::Ge,
                demand.values[s][r],
            );
        }
    }
    add_staffing_rows(&mut lp, inst, bed_at, staff_at, "");
    add_total_rows(
        &mut lp,
        inst,
        &bed_at,
        &staff_at,
        &|h| inst.bed_bound_stage1(h),
        &inst.ub_staff_stage1,
        "",
    );
    Ok(lp)
}

/// Deterministic equivalent of the two-stage model: first-stage x plus
/// scenario-indexed u, second-stage costs weighted by p_k.
pub fn build_stochastic<S: Scalar>(
    inst: &CapacityInstance<S>,
    demand: &DemandMatrix<S>,
) -> Result<LinearProgram<S>, CapacityError> {
    inst.validate()?;
    demand
        .validate()
        .map_err(|e| CapacityError::Dimension(e.to_string()))?;
    inst.check_demand_shape(demand.values.len(), demand.regions.len())?;
    let (ns, nh, nb) = (inst.n_specialties(), inst.n_hospitals(), inst.n_bands());
    let nk = demand.n_scenarios();
    let mut lp = LinearProgram::new();
    add_first_stage(&mut lp, inst);

    let first_stage = ns * nh + ns * nb * nh;
    let per_scenario = ns * nh + ns * nb * nh;
    let u_bed_at = |s: usize, h: usize, k: usize| first_stage + k * per_scenario + s * nh + h;
    let u_staff_at = |s: usize, b: usize, h: usize, k: usize| {
        first_stage + k * per_scenario + ns * nh + (s * nb + b) * nh + h
    };

    for k in 0..nk {
        let p = demand.probabilities[k];
        for s in 0..ns {
            for h in 0..nh {
                lp.add_variable(
                    recourse_bed_var(s, h, k),
                    S::zero(),
                    inst.capacity[s][h],
                    true,
                    p * inst.bed_cost_stage2[s][h],
                );
            }
        }
        for s in 0..ns {
            for b in 0..nb {
                for h in 0..nh {
                    lp.add_variable(
                        recourse_staff_var(s, b, h, k),
                        S::zero(),
                        inst.ub_staff_stage2[b],
                        true,
                        p * inst.staff_cost_stage2[b],
                    );
                }
            }
        }
    }
    debug_assert_eq!(lp.variables.len(), first_stage + nk * per_scenario);

    let bed_at = |s, h| bed_index(inst, s, h);
    let staff_at = |s, b, h| staff_index(inst, s, b, h);

    // Coverage per (s, r, k) across both stages.
    for s in 0..ns {
        for r in 0..inst.regions.len() {
            for k in 0..nk {
                let mut terms: Vec<(usize, S)> = Vec::new();
                for h in (0..nh).filter(|&h| inst.hospital_region[h] == r) {
                    terms.push((bed_at(s, h), S::one()));
                    terms.push((u_bed_at(s, h, k), S::one()));
                }
                lp.add_constraint(
                    format!("coverage_{s}_{r}_{k}"),
                    terms,
                    Relation::Ge,
                    demand.values[s][r][k],
                );
            }
        }
    }
    add_staffing_rows(&mut lp, inst, bed_at, staff_at, "");
    for k in 0..nk {
        add_staffing_rows(
            &mut lp,
            inst,
            |s, h| u_bed_at(s, h, k),
            |s, b, h| u_staff_at(s, b, h, k),
            &format!("_k{k}"),
        );
    }
    add_total_rows(
        &mut lp,
        inst,
        &bed_at,
        &staff_at,
        &|h| inst.bed_bound_stage1(h),
        &inst.ub_staff_stage1,
        "",
    );
    for k in 0..nk {
        add_total_rows(
            &mut lp,
            inst,
            &|s, h| u_bed_at(s, h, k),
            &|s, b, h| u_staff_at(s, b, h, k),
            &|h| inst.ub_bed_stage2[h],
            &inst.ub_staff_stage2,
            &format!("_k{k}"),
        );
    }
    Ok(lp)
}

/// Bed and staff decisions reshaped from a solved model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanSolution<S> {
    /// x_bed[s][h].
    pub x_bed: Vec<Vec<u64>>,
    /// x_staff[s][b][h].
    pub x_staff: Vec<Vec<Vec<u64>>>,
    /// u_bed[s][h][k] (empty inner vecs for deterministic solves).
    pub u_bed: Vec<Vec<Vec<u64>>>,
    /// u_staff[s][b][h][k].
    pub u_staff: Vec<Vec<Vec<Vec<u64>>>>,
    pub objective: S,
    pub stage1_cost: S,
    pub expected_stage2_cost: S,
}

impl<S: Scalar> PlanSolution<S> {
    pub fn total_beds(&self) -> u64 {
        self.x_bed.iter().flatten().sum()
    }

    pub fn total_staff(&self) -> u64 {
        self.x_staff.iter().flatten().flatten().sum()
    }

    pub fn n_scenarios(&self) -> usize {
        self.u_bed.first().and_then(|row| row.first()).map_or(0, |v| v.len())
    }

    /// Named first-stage assignment, the shape `fix_variables` expects.
    pub fn first_stage_assignment(&self) -> Vec<(String, S)> {
        let mut out = Vec::new();
        for (s, row) in self.x_bed.iter().enumerate() {
            for (h, &v) in row.iter().enumerate() {
                out.push((bed_var(s, h), S::from_f64(v as f64)));
            }
        }
        for (s, per_band) in self.x_staff.iter().enumerate() {
            for (b, row) in per_band.iter().enumerate() {
                for (h, &v) in row.iter().enumerate() {
                    out.push((staff_var(s, b, h), S::from_f64(v as f64)));
                }
            }
        }
        out
    }
}

/// Scenario demand view that works for both model kinds.
enum DemandView<'a, S> {
    One(&'a RegionDemand<S>),
    Many(&'a DemandMatrix<S>),
}

impl<S: Scalar> DemandView<'_, S> {
    fn n_scenarios(&self) -> usize {
        match self {
            DemandView::One(_) => 1,
            DemandView::Many(m) => m.n_scenarios(),
        }
    }

    fn value(&self, s: usize, r: usize, k: usize) -> S {
        match self {
            DemandView::One(d) => d.values[s][r],
            DemandView::Many(m) => m.values[s][r][k],
        }
    }

    fn probability(&self, k: usize) -> S {
        match self {
            DemandView::One(_) => S::one(),
            DemandView::Many(m) => m.probabilities[k],
        }
    }
}

/// Reshapes an optimal solve into a checked [`PlanSolution`].
pub fn extract_solution<S: Scalar>(
    result: &SolveResult<S>,
    lp: &LinearProgram<S>,
    inst: &CapacityInstance<S>,
    demand: &DemandMatrix<S>,
) -> Result<PlanSolution<S>, CapacityError> {
    extract_with_view(result, lp, inst, &DemandView::Many(demand))
}

/// As [`extract_solution`] for the single-scenario deterministic model.
pub fn extract_deterministic<S: Scalar>(
    result: &SolveResult<S>,
    lp: &LinearProgram<S>,
    inst: &CapacityInstance<S>,
    demand: &RegionDemand<S>,
) -> Result<PlanSolution<S>, CapacityError> {
    extract_with_view(result, lp, inst, &DemandView::One(demand))
}

fn extract_with_view<S: Scalar>(
    result: &SolveResult<S>,
    lp: &LinearProgram<S>,
    inst: &CapacityInstance<S>,
    demand: &DemandView<'_, S>,
) -> Result<PlanSolution<S>, CapacityError> {
    if result.status != SolveStatus::Optimal {
        return Err(CapacityError::NotOptimal(result.status));
    }
    let (ns, nh, nb) = (inst.n_specialties(), inst.n_hospitals(), inst.n_bands());
    let nk = demand.n_scenarios();
    let value = |name: &str| -> u64 {
        result
            .value_of(lp, name)
            .map(|v| v.as_f64().round().max(0.0) as u64)
            .unwrap_or(0)
    };
    let has_recourse = lp.variables.iter().any(|v| v.name.starts_with("u_bed_"));

    let x_bed: Vec<Vec<u64>> =
        (0..ns).map(|s| (0..nh).map(|h| value(&bed_var(s, h))).collect()).collect();
    let x_staff: Vec<Vec<Vec<u64>>> = (0..ns)
        .map(|s| (0..nb).map(|b| (0..nh).map(|h| value(&staff_var(s, b, h))).collect()).collect())
        .collect();
    let recourse_k = if has_recourse { nk } else { 0 };
    let u_bed: Vec<Vec<Vec<u64>>> = (0..ns)
        .map(|s| {
            (0..nh)
                .map(|h| (0..recourse_k).map(|k| value(&recourse_bed_var(s, h, k))).collect())
                .collect()
        })
        .collect();
    let u_staff: Vec<Vec<Vec<Vec<u64>>>> = (0..ns)
        .map(|s| {
            (0..nb)
                .map(|b| {
                    (0..nh)
                        .map(|h| {
                            (0..recourse_k)
                                .map(|k| value(&recourse_staff_var(s, b, h, k)))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    // Objective decomposition per the two stage-cost sums.
    let mut stage1 = S::zero();
    for s in 0..ns {
        for h in 0..nh {
            stage1 = stage1 + inst.bed_cost_stage1[s][h] * S::from_f64(x_bed[s][h] as f64);
            for b in 0..nb {
                stage1 =
                    stage1 + inst.staff_cost_stage1[b] * S::from_f64(x_staff[s][b][h] as f64);
            }
        }
    }
    let mut stage2 = S::zero();
    for k in 0..recourse_k {
        let p = demand.probability(k);
        for s in 0..ns {
            for h in 0..nh {
                stage2 =
                    stage2 + p * inst.bed_cost_stage2[s][h] * S::from_f64(u_bed[s][h][k] as f64);
                for b in 0..nb {
                    stage2 = stage2
                        + p * inst.staff_cost_stage2[b] * S::from_f64(u_staff[s][b][h][k] as f64);
                }
            }
        }
    }
    let plan = PlanSolution {
        x_bed,
        x_staff,
        u_bed,
        u_staff,
        objective: result.objective,
        stage1_cost: stage1,
        expected_stage2_cost: stage2,
    };

    // Post-hoc checks, never assumed from the solver.
    let total = plan.stage1_cost + plan.expected_stage2_cost;
    if (total - plan.objective).abs().as_f64() > 1e-6 {
        return Err(CapacityError::Violated(format!(
            "cost accounting: {} + {} != {}",
            plan.stage1_cost.as_f64(),
            plan.expected_stage2_cost.as_f64(),
            plan.objective.as_f64()
        )));
    }
    for s in 0..ns {
        for r in 0..inst.regions.len() {
            for k in 0..nk {
                let mut covered = S::zero();
                for h in (0..nh).filter(|&h| inst.hospital_region[h] == r) {
                    covered = covered + S::from_f64(plan.x_bed[s][h] as f64);
                    if recourse_k > 0 {
                        covered = covered + S::from_f64(plan.u_bed[s][h][k] as f64);
                    }
                }
                if covered.as_f64() + 1e-6 < demand.value(s, r, k).as_f64() {
                    return Err(CapacityError::Violated(format!(
                        "coverage at specialty {s}, region {r}, scenario {k}"
                    )));
                }
            }
        }
    }
    Ok(plan)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeatmapMode {
    /// First-stage beds only.
    FirstStage,
    /// x_bed + max over scenarios of u_bed — the display convention for
    /// recourse-heavy plans.
    CombinedMax,
}

/// Specialty × hospital bed matrix for display.
pub fn heatmap<S: Scalar>(plan: &PlanSolution<S>, mode: HeatmapMode) -> Vec<Vec<u64>> {
    plan.x_bed
        .iter()
        .enumerate()
        .map(|(s, row)| {
            row.iter()
                .enumerate()
                .map(|(h, &beds)| match mode {
                    HeatmapMode::FirstStage => beds,
                    HeatmapMode::CombinedMax => {
                        beds + plan.u_bed[s][h].iter().copied().max().unwrap_or(0)
                    }
                })
                .collect()
        })
        .collect()
}

/// Writes a heatmap as CSV with specialty rows and hospital columns.
pub fn write_heatmap_csv<W: Write>(
    matrix: &[Vec<u64>],
    specialties: &[String],
    hospitals: &[String],
    out: W,
) -> Result<(), CapacityError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["specialty".to_string()];
    header.extend(hospitals.iter().cloned());
    w.write_record(&header)
        .map_err(|e| CapacityError::Io(std::io::Error::other(e)))?;
    for (s, row) in matrix.iter().enumerate() {
        let mut record = vec![specialties[s].clone()];
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record)
            .map_err(|e| CapacityError::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

/// Renders a heatmap as a standalone SVG with embedded cell values.
pub fn write_heatmap_svg<W: Write>(
    matrix: &[Vec<u64>],
    specialties: &[String],
    hospitals: &[String],
    title: &str,
    out: &mut W,
) -> Result<(), CapacityError> {
    let values: Vec<Vec<f64>> =
        matrix.iter().map(|row| row.iter().map(|&v| v as f64).collect()).collect();
    svg::render_heatmap(&values, specialties, hospitals, title, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use crate::milp::solve_milp;

    use super::*;

    /// Two specialties, two hospitals in one region, two bands.
    pub(crate) fn small_instance() -> CapacityInstance<f64> {
        CapacityInstance {
            specialties: vec!["cote".into(), "t_and_o".into()],
            hospitals: vec!["h0".into(), "h1".into()],
            regions: vec!["r0".into()],
            bands: vec!["b5".into(), "b6".into()],
            hospital_region: vec![0, 0],
            bed_cost_stage1: vec![vec![20.0, 30.0], vec![30.0, 40.0]],
            bed_cost_stage2: vec![vec![22.0, 33.0], vec![33.0, 44.0]],
            staff_cost_stage1: vec![50.0, 60.0],
            staff_cost_stage2: vec![55.0, 66.0],
            ratio: vec![vec![0.29, 0.14], vec![0.14, 0.29]],
            capacity: vec![vec![20.0, 25.0], vec![20.0, 25.0]],
            ub_bed_stage1: Some(vec![20.0, 25.0]),
            ub_bed_stage2: vec![20.0, 25.0],
            ub_staff_stage1: vec![15.0, 25.0],
            ub_staff_stage2: vec![15.0, 25.0],
            staffing_rule: StaffingRule::PerBand,
        }
    }

    fn demand(values: Vec<Vec<f64>>) -> RegionDemand<f64> {
        RegionDemand {
            specialties: vec!["cote".into(), "t_and_o".into()],
            regions: vec!["r0".into()],
            values,
        }
    }

    #[test]
    fn model_size_formula_holds() {
        let inst = small_instance();
        let d = demand(vec![vec![16.67], vec![19.01]]);
        let det = build_deterministic(&inst, &d).unwrap();
        // S·H + S·B·H first-stage variables.
        assert_eq!(det.variables.len(), 2 * 2 + 2 * 2 * 2);
        let m = crate::demand::percentage_scenarios(&d, &[1.0, 1.2, 0.8], &[0.4, 0.3, 0.3])
            .unwrap();
        let sto = build_stochastic(&inst, &m).unwrap();
        assert_eq!(sto.variables.len(), (2 * 2 + 2 * 2 * 2) * (1 + 3));
    }

    #[test]
    fn zero_demand_solves_to_zero() {
        let inst = small_instance();
        let d = demand(vec![vec![0.0], vec![0.0]]);
        let lp = build_deterministic(&inst, &d).unwrap();
        let res = solve_milp(&lp).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert_eq!(res.objective, 0.0);
        let plan = extract_deterministic(&res, &lp, &inst, &d).unwrap();
        assert_eq!(plan.total_beds(), 0);
        assert_eq!(plan.total_staff(), 0);
    }

    #[test]
    fn excess_demand_is_infeasible() {
        let inst = small_instance();
        let d = demand(vec![vec![100.0], vec![0.0]]);
        let lp = build_deterministic(&inst, &d).unwrap();
        assert_eq!(solve_milp(&lp).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn per_band_staffing_rounds_up_each_band() {
        let inst = small_instance();
        let d = demand(vec![vec![17.0], vec![0.0]]);
        let lp = build_deterministic(&inst, &d).unwrap();
        let res = solve_milp(&lp).unwrap();
        let plan = extract_deterministic(&res, &lp, &inst, &d).unwrap();
        // 17 beds of specialty 0 need ⌈0.29·17⌉ = 5 band-0 and ⌈0.14·17⌉ = 3
        // band-1 staff wherever they are placed.
        let beds: u64 = plan.x_bed[0].iter().sum();
        assert_eq!(beds, 17);
        let staff_b0: u64 = plan.x_staff[0][0].iter().sum();
        let staff_b1: u64 = plan.x_staff[0][1].iter().sum();
        assert_eq!((staff_b0, staff_b1), (5, 3));
    }

    #[test]
    fn cumulative_rule_admits_senior_staff_substitution() {
        let mut inst = small_instance();
        inst.staffing_rule = StaffingRule::Cumulative;
        let d = demand(vec![vec![10.0], vec![0.0]]);
        let lp = build_deterministic(&inst, &d).unwrap();
        let res = solve_milp(&lp).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        // Under the cumulative reading band-1 staff also count towards the
        // band-0 requirement, so the optimum is no more expensive.
        let lp_pb = build_deterministic(&small_instance(), &d).unwrap();
        let res_pb = solve_milp(&lp_pb).unwrap();
        assert!(res.objective <= res_pb.objective + 1e-9);
    }

    #[test]
    fn heatmaps_render_both_modes() {
        let plan = PlanSolution::<f64> {
            x_bed: vec![vec![0, 17], vec![20, 0]],
            x_staff: vec![vec![vec![0, 5], vec![0, 3]], vec![vec![3, 0], vec![6, 0]]],
            u_bed: vec![vec![vec![0, 4], vec![0, 0]], vec![vec![3, 0], vec![0, 0]]],
            u_staff: vec![vec![vec![vec![]], vec![vec![]]]; 2],
            objective: 0.0,
            stage1_cost: 0.0,
            expected_stage2_cost: 0.0,
        };
        assert_eq!(heatmap(&plan, HeatmapMode::FirstStage), vec![vec![0, 17], vec![20, 0]]);
        assert_eq!(heatmap(&plan, HeatmapMode::CombinedMax), vec![vec![4, 17], vec![23, 0]]);
    }

    #[test]
    fn instance_json_round_trip() {
        let inst = small_instance();
        let json = inst.to_json().unwrap();
        let back = CapacityInstance::<f64>::from_json(&json).unwrap();
        assert_eq!(back.specialties, inst.specialties);
        assert_eq!(back.staffing_rule, StaffingRule::PerBand);
        back.validate().unwrap();
    }

    #[test]
    fn validation_catches_bad_shapes() {
        let mut inst = small_instance();
        inst.ratio.pop();
        assert!(matches!(inst.validate(), Err(CapacityError::Dimension(_))));
        let mut inst2 = small_instance();
        inst2.hospital_region = vec![0, 7];
        assert!(matches!(inst2.validate(), Err(CapacityError::BadRegion(1, 7))));
    }
}
