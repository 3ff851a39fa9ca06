//! The EV / RP / EEV quartet and the value of the stochastic solution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capacity::{
    build_deterministic, build_stochastic, extract_deterministic, extract_solution,
    CapacityError, CapacityInstance, PlanSolution,
};
use crate::demand::{mean_demand, DemandMatrix};
use crate::milp::{solve_milp, solve_milp_opts, MilpOptions, ModelError, SolveStatus};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Capacity(#[from] CapacityError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0} model is {1:?}")]
    NotSolvable(&'static str, SolveStatus),
}

/// One solved model: proven objective plus the reshaped plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOutcome<S> {
    pub objective: S,
    pub plan: PlanSolution<S>,
    pub node_count: u64,
    pub wall_time_secs: f64,
}

/// EEV can legitimately be infeasible: the mean-value plan may be unable to
/// recourse its way to covering every scenario. That is a finding (EEV = ∞),
/// not an error.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EevOutcome<S> {
    Optimal(SolveOutcome<S>),
    Infeasible,
}

impl<S: Scalar> EevOutcome<S> {
    pub fn objective(&self) -> S {
        match self {
            EevOutcome::Optimal(o) => o.objective,
            EevOutcome::Infeasible => S::infinity(),
        }
    }
}

/// Mean-value problem: deterministic model on probability-weighted demand.
pub fn solve_ev<S: Scalar>(
    inst: &CapacityInstance<S>,
    demand: &DemandMatrix<S>,
) -> Result<SolveOutcome<S>, EvalError> {
    let mean = mean_demand(demand);
    let lp = build_deterministic(inst, &mean)?;
    let result = solve_milp(&lp)?;
    if result.status != SolveStatus::Optimal {
        return Err(EvalError::NotSolvable("EV", result.status));
    }
    let plan = extract_deterministic(&result, &lp, inst, &mean)?;
    Ok(SolveOutcome {
        objective: result.objective,
        plan,
        node_count: result.node_count,
        wall_time_secs: result.wall_time_secs,
    })
}

/// Here-and-now optimum of the stochastic program.
pub fn solve_rp<S: Scalar>(
    inst: &CapacityInstance<S>,
    demand: &DemandMatrix<S>,
) -> Result<SolveOutcome<S>, EvalError> {
    let lp = build_stochastic(inst, demand)?;
    let result = solve_milp(&lp)?;
    if result.status != SolveStatus::Optimal {
        return Err(EvalError::NotSolvable("RP", result.status));
    }
    let plan = extract_solution(&result, &lp, inst, demand)?;
    Ok(SolveOutcome {
        objective: result.objective,
        plan,
        node_count: result.node_count,
        wall_time_secs: result.wall_time_secs,
    })
}

/// Stochastic model with the first stage pinned to the EV plan.
pub fn solve_eev<S: Scalar>(
    inst: &CapacityInstance<S>,
    demand: &DemandMatrix<S>,
    ev_plan: &PlanSolution<S>,
) -> Result<EevOutcome<S>, EvalError> {
    let lp = build_stochastic(inst, demand)?;
    let fixed = lp.fix_variables(&ev_plan.first_stage_assignment())?;
    let result = solve_milp(&fixed)?;
    match result.status {
        SolveStatus::Optimal => {
            let plan = extract_solution(&result, &fixed, inst, demand)?;
            Ok(EevOutcome::Optimal(SolveOutcome {
                objective: result.objective,
                plan,
                node_count: result.node_count,
                wall_time_secs: result.wall_time_secs,
            }))
        }
        SolveStatus::Infeasible => Ok(EevOutcome::Infeasible),
        status => Err(EvalError::NotSolvable("EEV", status)),
    }
}

/// VSS = EEV − RP; the fraction is undefined when EEV is 0 or infinite.
pub fn vss<S: Scalar>(eev: S, rp: S) -> (S, Option<S>) {
    let diff = eev - rp;
    if eev == S::zero() || !diff.is_finite() {
        (diff, None)
    } else {
        (diff, Some(diff / eev))
    }
}

/// The full evaluation quartet plus both VSS fractions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport<S> {
    pub ev: SolveOutcome<S>,
    pub rp: SolveOutcome<S>,
    pub eev: EevOutcome<S>,
    /// EEV − RP (infinite when EEV is infeasible).
    pub vss: f64,
    /// VSS relative to EEV, when defined.
    pub vss_over_eev: Option<f64>,
    /// VSS relative to RP, when defined.
    pub vss_over_rp: Option<f64>,
    /// Externally published RP value to compare against, if any.
    pub rp_reference: Option<f64>,
    pub notes: Vec<String>,
}

/// Runs all three solves and assembles the report.
pub fn evaluate<S: Scalar>(
    inst: &CapacityInstance<S>,
    demand: &DemandMatrix<S>,
    rp_reference: Option<f64>,
) -> Result<EvaluationReport<S>, EvalError> {
    let ev = solve_ev(inst, demand)?;
    // Solve EEV before RP: it shares the stochastic model with the first
    // stage pinned, so its solution doubles as a warm incumbent for RP.
    let lp = build_stochastic(inst, demand)?;
    let fixed = lp.fix_variables(&ev.plan.first_stage_assignment())?;
    let fixed_result = solve_milp(&fixed)?;
    let (eev, warm_start) = match fixed_result.status {
        SolveStatus::Optimal => {
            let plan = extract_solution(&fixed_result, &fixed, inst, demand)?;
            let warm = fixed_result.assignment.clone();
            let outcome = SolveOutcome {
                objective: fixed_result.objective,
                plan,
                node_count: fixed_result.node_count,
                wall_time_secs: fixed_result.wall_time_secs,
            };
            (EevOutcome::Optimal(outcome), Some(warm))
        }
        SolveStatus::Infeasible => (EevOutcome::Infeasible, None),
        status => return Err(EvalError::NotSolvable("EEV", status)),
    };
    let rp_result =
        solve_milp_opts(&lp, &MilpOptions { warm_start, ..Default::default() })?;
    if rp_result.status != SolveStatus::Optimal {
        return Err(EvalError::NotSolvable("RP", rp_result.status));
    }
    let rp = SolveOutcome {
        objective: rp_result.objective,
        plan: extract_solution(&rp_result, &lp, inst, demand)?,
        node_count: rp_result.node_count,
        wall_time_secs: rp_result.wall_time_secs,
    };
    let (vss_value, over_eev) = vss(eev.objective(), rp.objective);
    let over_rp = if rp.objective != S::zero() && vss_value.is_finite() {
        Some(vss_value.as_f64() / rp.objective.as_f64())
    } else {
        None
    };
    let mut notes = Vec::new();
    if matches!(eev, EevOutcome::Infeasible) {
        notes.push(
            "EEV model is infeasible: the mean-value plan cannot recourse to cover every \
             scenario, so EEV and VSS are reported as infinite"
                .into(),
        );
    }
    if ev.objective > rp.objective {
        notes.push(format!(
            "EV {} exceeds RP {}: integrality can break the mean-value lower bound",
            ev.objective.as_f64(),
            rp.objective.as_f64()
        ));
    }
    if let Some(reference) = rp_reference {
        if (reference - rp.objective.as_f64()).abs() > 1e-6 {
            notes.push(format!(
                "published reference RP {} differs from the proven optimum {}; the solver's \
                 value is exact for this model",
                reference,
                rp.objective.as_f64()
            ));
        }
    }
    Ok(EvaluationReport {
        ev,
        rp,
        eev,
        vss: vss_value.as_f64(),
        vss_over_eev: over_eev.map(|f| f.as_f64()),
        vss_over_rp: over_rp,
        rp_reference,
        notes,
    })
}

impl<S: Scalar> EvaluationReport<S> {
    /// Text table in the [(beds), (staff…)] layout, one row per measure.
    pub fn render_table(&self, inst: &CapacityInstance<S>) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let mut header = String::from("measure");
        for s in 0..inst.n_specialties() {
            for h in 0..inst.n_hospitals() {
                let _ = write!(header, " | s={s},h={h}");
            }
        }
        header.push_str(" | objective");
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "{}", "-".repeat(header.len()));

        let mut row = |name: &str, plan: Option<&PlanSolution<S>>, objective: f64| {
            let mut line = String::from(name);
            match plan {
                Some(p) => {
                    for s in 0..inst.n_specialties() {
                        for h in 0..inst.n_hospitals() {
                            let staff: Vec<String> = (0..inst.n_bands())
                                .map(|b| p.x_staff[s][b][h].to_string())
                                .collect();
                            let _ = write!(
                                line,
                                " | [({}), ({})]",
                                p.x_bed[s][h],
                                staff.join(", ")
                            );
                        }
                    }
                }
                None => line.push_str(" | infeasible"),
            }
            let _ = writeln!(out, "{line} | {objective}");
        };
        row("EV", Some(&self.ev.plan), self.ev.objective.as_f64());
        row("RP", Some(&self.rp.plan), self.rp.objective.as_f64());
        match &self.eev {
            EevOutcome::Optimal(o) => row("EEV", Some(&o.plan), o.objective.as_f64()),
            EevOutcome::Infeasible => row("EEV", None, f64::INFINITY),
        }
        let _ = writeln!(out, "VSS = {}", self.vss);
        if let Some(f) = self.vss_over_eev {
            let _ = writeln!(out, "VSS / EEV = {:.4}", f);
        }
        if let Some(f) = self.vss_over_rp {
            let _ = writeln!(out, "VSS / RP = {:.4}", f);
        }
        if let Some(reference) = self.rp_reference {
            let _ = writeln!(out, "reference RP = {reference}");
        }
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }
}
