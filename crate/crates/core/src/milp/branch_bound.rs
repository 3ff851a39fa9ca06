//! Best-first branch-and-bound with reliability branching.
//!
//! The search strengthens the model up front (row rounding, ratio hull cuts,
//! a few Gomory rounds), dives for an early incumbent, then explores nodes in
//! bound order. Branching variables are chosen by strong branching until
//! per-variable pseudocosts become reliable.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::scalar::Scalar;

use super::simplex::{solve_relaxation, solve_relaxation_gmi, Relaxation};
use super::{
    LinearProgram, ModelError, Relation, SolveResult, SolveStatus, FEASIBILITY_TOL,
    INTEGRALITY_TOL,
};

#[derive(Debug, Clone)]
pub struct MilpOptions<S> {
    /// Collect a line-oriented solve log in the result.
    pub log: bool,
    /// Rounds of root Gomory cuts before branching. Off by default: the cut
    /// rows raise the root bound but tax every node relaxation, which only
    /// pays off on unusually wide integrality gaps.
    pub cut_rounds: usize,
    /// A known feasible point (full assignment, model variable order) used as
    /// the starting incumbent, e.g. carried over from a related solve.
    pub warm_start: Option<Vec<S>>,
}

impl<S> Default for MilpOptions<S> {
    fn default() -> Self {
        MilpOptions { log: false, cut_rounds: 0, warm_start: None }
    }
}

/// How a node was created, for pseudocost updates when its LP gets solved.
struct BranchInfo<S> {
    var: usize,
    /// Fractional part of the branching variable at the parent optimum.
    frac: S,
    up: bool,
    parent_obj: S,
}

struct Node<S> {
    bound: S,
    id: u64,
    bounds: Vec<(S, S)>,
    /// LP optimum already computed during strong branching.
    cached: Option<(Vec<S>, S)>,
    parent: Option<BranchInfo<S>>,
}

impl<S: Scalar> PartialEq for Node<S> {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}
impl<S: Scalar> Eq for Node<S> {}
impl<S: Scalar> PartialOrd for Node<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S: Scalar> Ord for Node<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: invert so the smallest LP bound pops
        // first, FIFO on ties.
        other
            .bound
            .partial_cmp(&self.bound)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Observed objective gain per unit of fractionality, per direction.
#[derive(Clone)]
struct Pseudocost<S> {
    up_sum: S,
    up_n: u32,
    down_sum: S,
    down_n: u32,
}

impl<S: Scalar> Pseudocost<S> {
    fn new() -> Self {
        Self { up_sum: S::zero(), up_n: 0, down_sum: S::zero(), down_n: 0 }
    }
    fn record(&mut self, up: bool, per_unit: S) {
        let per_unit = per_unit.max(S::zero());
        if up {
            self.up_sum = self.up_sum + per_unit;
            self.up_n += 1;
        } else {
            self.down_sum = self.down_sum + per_unit;
            self.down_n += 1;
        }
    }
    fn avg(&self, up: bool, fallback: S) -> S {
        let (sum, n) = if up { (self.up_sum, self.up_n) } else { (self.down_sum, self.down_n) };
        if n == 0 {
            fallback
        } else {
            sum / S::from_usize(n as usize)
        }
    }
    fn reliable(&self) -> bool {
        const RELIABLE_AFTER: u32 = 4;
        self.up_n >= RELIABLE_AFTER && self.down_n >= RELIABLE_AFTER
    }
}

pub fn solve_milp<S: Scalar>(lp: &LinearProgram<S>) -> Result<SolveResult<S>, ModelError> {
    solve_milp_opts(lp, &MilpOptions::default())
}

/// Proven-optimal integer solve.
pub fn solve_milp_opts<S: Scalar>(
    lp: &LinearProgram<S>,
    opts: &MilpOptions<S>,
) -> Result<SolveResult<S>, ModelError> {
    lp.validate()?;
    for var in &lp.variables {
        if var.integer && !(var.lower.is_finite() && var.upper.is_finite()) {
            return Err(ModelError::UnboundedInteger(var.name.clone()));
        }
    }
    let start = std::time::Instant::now();
    let mut log = Vec::new();

    // Work on a strengthened copy: rounding all-integer rows and adding hull
    // cuts for ratio rows tighten the relaxation without cutting off any
    // integer point.
    let mut strengthened = round_integer_rows(lp);
    add_ratio_hull_cuts(&mut strengthened);

    let mut root: Vec<(S, S)> =
        strengthened.variables.iter().map(|v| (v.lower, v.upper)).collect();
    if !propagate(&strengthened, &mut root) {
        return Ok(finished(SolveStatus::Infeasible, S::zero(), Vec::new(), 1, start, log));
    }

    let itol = S::from_f64(INTEGRALITY_TOL);
    let gap = S::from_f64(1e-9);
    // When every variable is integer and all objective coefficients sit on a
    // lattice, distinct objective values differ by at least the lattice step;
    // pruning may then use most of that step instead of a pure float epsilon.
    let prune_gap = objective_granularity(lp)
        .map(|d| d * S::from_f64(0.995))
        .unwrap_or(gap);

    let mut node_count: u64 = 0;

    // Root cutting-plane loop: Gomory rounds while the bound moves.
    let max_cut_rounds = opts.cut_rounds.min(30);
    const MAX_CUTS: usize = 300;
    let mut cut_serial = 0usize;
    let mut rounds = 0usize;
    let mut last_bound: Option<S> = None;
    let root_relax = loop {
        node_count += 1;
        let mut gmi = Vec::new();
        let want_cuts = rounds < max_cut_rounds && cut_serial < MAX_CUTS;
        let relax = solve_relaxation_gmi(&strengthened, &root, want_cuts.then_some(&mut gmi));
        let Relaxation::Optimal { objective, .. } = &relax else { break relax };
        let stalled = last_bound
            .is_some_and(|prev| *objective - prev < S::from_f64(1e-6) * (S::one() + prev.abs()));
        if gmi.is_empty() || !want_cuts || stalled {
            break relax;
        }
        last_bound = Some(*objective);
        for cut in gmi {
            strengthened.add_constraint(
                format!("gmi_{cut_serial}"),
                cut.terms,
                Relation::Ge,
                cut.rhs,
            );
            cut_serial += 1;
        }
        rounds += 1;
    };
    if opts.log {
        log.push(format!("root cuts {cut_serial} rounds {rounds}"));
    }
    let lp = &strengthened;

    let mut heap: BinaryHeap<Node<S>> = BinaryHeap::new();
    let mut next_id: u64 = 0;
    let mut incumbent: Option<(S, Vec<S>)> = None;
    let mut pseudo: Vec<Pseudocost<S>> = vec![Pseudocost::new(); lp.variables.len()];

    match root_relax {
        Relaxation::Infeasible => {
            return Ok(finished(SolveStatus::Infeasible, S::zero(), Vec::new(), node_count, start, log))
        }
        Relaxation::Unbounded => {
            return Ok(finished(
                SolveStatus::Unbounded,
                S::neg_infinity(),
                Vec::new(),
                node_count,
                start,
                log,
            ))
        }
        Relaxation::Optimal { ref point, objective, ref reduced } => {
            if let Some(start_point) = &opts.warm_start {
                if lp.is_feasible(start_point, S::from_f64(FEASIBILITY_TOL)) {
                    let value = lp.objective_value(start_point);
                    if opts.log {
                        log.push(format!("warm start {}", value.as_f64()));
                    }
                    incumbent = Some((value, start_point.clone()));
                }
            }
            // Dive for an early incumbent so pruning starts immediately.
            if let Some((value, assignment)) = dive(lp, &root, point, &mut node_count) {
                if incumbent.as_ref().is_none_or(|(best, _)| value < *best) {
                    if opts.log {
                        log.push(format!("dive incumbent {}", value.as_f64()));
                    }
                    incumbent = Some((value, assignment));
                }
            }
            if let Some((best, _)) = &incumbent {
                // Shrink the root domains with the root reduced costs before
                // any branching happens; everything below inherits them.
                if !reduced_cost_fix(lp, &mut root, reduced, objective, *best - prune_gap)
                    || !propagate(lp, &mut root)
                {
                    let (value, assignment) = incumbent.unwrap();
                    return Ok(finished(
                        SolveStatus::Optimal,
                        value,
                        assignment,
                        node_count,
                        start,
                        log,
                    ));
                }
            }
            process_node(
                lp,
                &root,
                point,
                objective,
                &mut heap,
                &mut next_id,
                &mut incumbent,
                &mut pseudo,
                &mut node_count,
                itol,
                prune_gap,
            );
        }
    }

    while let Some(mut node) = heap.pop() {
        if let Some((best, _)) = &incumbent {
            // Best-first order: once the tightest bound cannot beat the
            // incumbent, nothing on the heap can.
            if node.bound >= *best - prune_gap {
                break;
            }
        }
        let (point, objective) = match node.cached {
            Some(cached) => cached,
            None => {
                node_count += 1;
                match solve_relaxation(lp, &node.bounds) {
                    Relaxation::Infeasible => continue,
                    Relaxation::Unbounded => {
                        return Ok(finished(
                            SolveStatus::Unbounded,
                            S::neg_infinity(),
                            Vec::new(),
                            node_count,
                            start,
                            log,
                        ))
                    }
                    Relaxation::Optimal { point, objective, reduced } => {
                        if let Some(info) = &node.parent {
                            let width = if info.up { S::one() - info.frac } else { info.frac };
                            if width > S::from_f64(1e-6) {
                                pseudo[info.var]
                                    .record(info.up, (objective - info.parent_obj) / width);
                            }
                        }
                        if let Some((best, _)) = &incumbent {
                            if !reduced_cost_fix(
                                lp,
                                &mut node.bounds,
                                &reduced,
                                objective,
                                *best - prune_gap,
                            ) {
                                continue;
                            }
                        }
                        (point, objective)
                    }
                }
            }
        };
        if let Some((best, _)) = &incumbent {
            if objective >= *best - prune_gap {
                continue;
            }
        }
        if opts.log && node_count % 10_000 == 0 {
            let inc = incumbent
                .as_ref()
                .map(|(b, _)| format!("{}", b.as_f64()))
                .unwrap_or_else(|| "none".into());
            log.push(format!("node {} bound {} incumbent {}", node.id, objective.as_f64(), inc));
        }
        process_node(
            lp,
            &node.bounds,
            &point,
            objective,
            &mut heap,
            &mut next_id,
            &mut incumbent,
            &mut pseudo,
            &mut node_count,
            itol,
            prune_gap,
        );
    }

    match incumbent {
        Some((objective, assignment)) => {
            let ftol = S::from_f64(FEASIBILITY_TOL);
            debug_assert!(lp.is_feasible(&assignment, ftol));
            if !lp.is_feasible(&assignment, ftol) {
                // Verification pass failed; surface as infeasible rather than
                // returning a wrong answer.
                return Ok(finished(SolveStatus::Infeasible, S::zero(), Vec::new(), node_count, start, log));
            }
            if opts.log {
                log.push(format!("optimal {} nodes {}", objective.as_f64(), node_count));
            }
            Ok(finished(SolveStatus::Optimal, objective, assignment, node_count, start, log))
        }
        None => Ok(finished(SolveStatus::Infeasible, S::zero(), Vec::new(), node_count, start, log)),
    }
}

/// Tries to turn `point` into an integer incumbent by repeatedly fixing the
/// most fractional variable (rounding up first, down on failure) and
/// re-solving. Cheap — at most two LP solves per integer variable.
fn dive<S: Scalar>(
    lp: &LinearProgram<S>,
    root: &[(S, S)],
    point: &[S],
    node_count: &mut u64,
) -> Option<(S, Vec<S>)> {
    let itol = S::from_f64(INTEGRALITY_TOL);
    let mut bounds = root.to_vec();
    let mut point = point.to_vec();
    // Ceiling every integer variable often lands feasible in covering-style
    // models; try that before the variable-by-variable dive.
    let ceiled: Vec<S> = lp
        .variables
        .iter()
        .enumerate()
        .zip(point.iter())
        .map(|((j, v), &x)| if v.integer { x.ceil().min(root[j].1) } else { x })
        .collect();
    let ceil_hit = snap(lp, &ceiled);
    let mut dived = None;
    for _ in 0..2 * lp.variables.len() {
        let frac = most_fractional(lp, &point, itol);
        let Some((j, _)) = frac else {
            dived = snap(lp, &point);
            break;
        };
        let floor = point[j].floor();
        let up_first = point[j] - floor >= S::from_f64(0.5);
        let mut fixed = None;
        for up in [up_first, !up_first] {
            let mut trial = bounds.clone();
            if up {
                trial[j].0 = trial[j].0.max(floor + S::one());
            } else {
                trial[j].1 = trial[j].1.min(floor);
            }
            if !propagate(lp, &mut trial) {
                continue;
            }
            *node_count += 1;
            if let Relaxation::Optimal { point: p, .. } = solve_relaxation(lp, &trial) {
                fixed = Some((trial, p));
                break;
            }
        }
        let Some((trial, p)) = fixed else { break };
        bounds = trial;
        point = p;
    }
    match (ceil_hit, dived) {
        (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
        (a, b) => a.or(b),
    }
}

/// Most fractional integer variable (ties: lowest index), if any exceeds the
/// integrality tolerance.
fn most_fractional<S: Scalar>(
    lp: &LinearProgram<S>,
    point: &[S],
    itol: S,
) -> Option<(usize, S)> {
    let mut most: Option<(usize, S)> = None;
    for (j, var) in lp.variables.iter().enumerate() {
        if !var.integer {
            continue;
        }
        let frac = point[j] - point[j].floor();
        let dist = frac.min(S::one() - frac);
        let more = match most {
            None => dist > itol,
            Some((_, best)) => dist > best,
        };
        if more {
            most = Some((j, dist));
        }
    }
    most
}

/// Rounds an LP point to integers and re-checks it exactly.
fn snap<S: Scalar>(lp: &LinearProgram<S>, point: &[S]) -> Option<(S, Vec<S>)> {
    let snapped: Vec<S> = lp
        .variables
        .iter()
        .zip(point)
        .map(|(v, &x)| if v.integer { x.round() } else { x })
        .collect();
    if lp.is_feasible(&snapped, S::from_f64(FEASIBILITY_TOL)) {
        let value = lp.objective_value(&snapped);
        Some((value, snapped))
    } else {
        None
    }
}

/// Either records an integral point as incumbent or branches. The branching
/// variable is chosen by strong branching while pseudocosts are unreliable
/// and by the pseudocost product score afterwards.
#[allow(clippy::too_many_arguments)]
fn process_node<S: Scalar>(
    lp: &LinearProgram<S>,
    bounds: &[(S, S)],
    point: &[S],
    objective: S,
    heap: &mut BinaryHeap<Node<S>>,
    next_id: &mut u64,
    incumbent: &mut Option<(S, Vec<S>)>,
    pseudo: &mut [Pseudocost<S>],
    node_count: &mut u64,
    itol: S,
    prune_gap: S,
) {
    let mut candidates: Vec<(usize, S)> = Vec::new();
    for (j, var) in lp.variables.iter().enumerate() {
        if !var.integer {
            continue;
        }
        let frac = point[j] - point[j].floor();
        let dist = frac.min(S::one() - frac);
        if dist > itol {
            candidates.push((j, frac));
        }
    }

    if candidates.is_empty() {
        // Integral within tolerance: snap and re-evaluate exactly.
        if let Some((value, snapped)) = snap(lp, point) {
            let better = match incumbent {
                None => true,
                Some((best, _)) => value < *best - S::from_f64(1e-9),
            };
            if better {
                *incumbent = Some((value, snapped));
            }
            return;
        }
        // Snapping broke feasibility; fall back to branching on the
        // least-integral variable so the search stays exact.
        if let Some((j, _)) = most_fractional(lp, point, S::zero()) {
            push_lazy_children(lp, bounds, point, objective, j, heap, next_id);
        }
        return;
    }

    // Strong-branch a few of the most fractional unreliable candidates; the
    // child bounds feed both the variable choice and the heap.
    const STRONG_BRANCH_MAX: usize = 8;
    struct ChildLp<S> {
        bounds: Vec<(S, S)>,
        relax: Option<(Vec<S>, S)>, // None: infeasible
    }
    let mut evaluated: Vec<(usize, [ChildLp<S>; 2])> = Vec::new();
    let mut unreliable: Vec<(usize, S)> = candidates
        .iter()
        .copied()
        .filter(|&(j, _)| !pseudo[j].reliable())
        .collect();
    unreliable.sort_by(|a, b| {
        let da = a.1.min(S::one() - a.1);
        let db = b.1.min(S::one() - b.1);
        db.partial_cmp(&da).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0))
    });
    for &(j, frac) in unreliable.iter().take(STRONG_BRANCH_MAX) {
        let floor = point[j].floor();
        let children = [false, true].map(|up| {
            let mut child = bounds.to_vec();
            if up {
                child[j].0 = child[j].0.max(floor + S::one());
            } else {
                child[j].1 = child[j].1.min(floor);
            }
            if !propagate(lp, &mut child) {
                return ChildLp { bounds: child, relax: None };
            }
            *node_count += 1;
            let relax = match solve_relaxation(lp, &child) {
                Relaxation::Optimal { point, objective: obj, reduced } => {
                    let width = if up { S::one() - frac } else { frac };
                    if width > S::from_f64(1e-6) {
                        pseudo[j].record(up, (obj - objective) / width);
                    }
                    let kept = match incumbent {
                        Some((best, _)) => {
                            reduced_cost_fix(lp, &mut child, &reduced, obj, *best - prune_gap)
                        }
                        None => true,
                    };
                    kept.then_some((point, obj))
                }
                _ => None,
            };
            ChildLp { bounds: child, relax }
        });
        evaluated.push((j, children));
    }

    // Score every candidate; strong-branched ones use observed child gains.
    let fallback = S::from_f64(1e-4);
    let eps = S::from_f64(1e-6);
    let mut best: Option<(S, usize)> = None;
    for &(j, frac) in &candidates {
        let score = match evaluated.iter().find(|(v, _)| *v == j) {
            Some((_, children)) => {
                let gain = |c: &ChildLp<S>| match &c.relax {
                    Some((_, obj)) => (*obj - objective).max(S::zero()),
                    // An infeasible side fathoms half the disjunction.
                    None => S::from_f64(1e6),
                };
                gain(&children[0]).max(eps) * gain(&children[1]).max(eps)
            }
            None => {
                let down = pseudo[j].avg(false, fallback) * frac;
                let up = pseudo[j].avg(true, fallback) * (S::one() - frac);
                down.max(eps) * up.max(eps)
            }
        };
        let better = match best {
            None => true,
            Some((s, _)) => score > s,
        };
        if better {
            best = Some((score, j));
        }
    }
    let Some((_, j)) = best else { return };

    match evaluated.into_iter().find(|(v, _)| *v == j) {
        Some((_, children)) => {
            for child in children {
                let Some((p, obj)) = child.relax else { continue };
                if let Some((best, _)) = incumbent {
                    if obj >= *best - prune_gap {
                        continue;
                    }
                }
                heap.push(Node {
                    bound: obj,
                    id: *next_id,
                    bounds: child.bounds,
                    cached: Some((p, obj)),
                    parent: None,
                });
                *next_id += 1;
            }
        }
        None => push_lazy_children(lp, bounds, point, objective, j, heap, next_id),
    }
}

/// Pushes both children of a branch with the parent objective as their bound;
/// their LPs are solved when popped.
fn push_lazy_children<S: Scalar>(
    lp: &LinearProgram<S>,
    bounds: &[(S, S)],
    point: &[S],
    objective: S,
    j: usize,
    heap: &mut BinaryHeap<Node<S>>,
    next_id: &mut u64,
) {
    let floor = point[j].floor();
    let frac = point[j] - floor;
    for up in [false, true] {
        let mut child = bounds.to_vec();
        if up {
            child[j].0 = child[j].0.max(floor + S::one());
        } else {
            child[j].1 = child[j].1.min(floor);
        }
        if child[j].0 <= child[j].1 && propagate(lp, &mut child) {
            heap.push(Node {
                bound: objective,
                id: *next_id,
                bounds: child,
                cached: None,
                parent: Some(BranchInfo { var: j, frac, up, parent_obj: objective }),
            });
            *next_id += 1;
        }
    }
}

/// Reduced-cost bound fixing. Any point in the subtree with objective below
/// `cutoff` must satisfy, for each variable resting at a bound with reduced
/// cost `d`: `x_j <= lb_j + gap/d` (at lower, `d > 0`) or
/// `x_j >= ub_j + gap/d` (at upper, `d < 0`), where `gap = cutoff - lp_value`.
/// Tightens `bounds` in place; returns false if a domain becomes empty.
fn reduced_cost_fix<S: Scalar>(
    lp: &LinearProgram<S>,
    bounds: &mut [(S, S)],
    reduced: &[S],
    lp_value: S,
    cutoff: S,
) -> bool {
    let gap = cutoff - lp_value;
    if !gap.is_finite() || gap < S::zero() {
        return true;
    }
    let eps = S::from_f64(1e-7);
    let itol = S::from_f64(INTEGRALITY_TOL);
    for (j, &d) in reduced.iter().enumerate() {
        let (lo, hi) = bounds[j];
        if d > eps {
            let mut new_hi = lo + gap / d;
            if lp.variables[j].integer {
                new_hi = (new_hi + itol).floor();
            }
            if new_hi < hi {
                bounds[j].1 = new_hi;
            }
        } else if d < -eps {
            let mut new_lo = hi + gap / d;
            if lp.variables[j].integer {
                new_lo = (new_lo - itol).ceil();
            }
            if new_lo > lo {
                bounds[j].0 = new_lo;
            }
        }
        if bounds[j].0 > bounds[j].1 {
            return false;
        }
    }
    true
}

/// Largest lattice step dividing every objective coefficient, when all
/// variables are integer; `None` otherwise. Distinct feasible objective
/// values then differ by at least this step.
fn objective_granularity<S: Scalar>(lp: &LinearProgram<S>) -> Option<S> {
    if lp.variables.iter().any(|v| !v.integer) {
        return None;
    }
    const STEPS: [f64; 13] =
        [5.0, 2.0, 1.0, 0.5, 0.25, 0.2, 0.1, 0.05, 0.025, 0.02, 0.01, 0.005, 0.001];
    'step: for &d in &STEPS {
        let d = S::from_f64(d);
        for &c in &lp.objective {
            let q = c / d;
            if (q - q.round()).abs() > S::from_f64(1e-6) * (S::one() + q.abs()) {
                continue 'step;
            }
        }
        return Some(d);
    }
    None
}

/// Rounds the right-hand side of rows whose live variables are all integer
/// with integer coefficients: the left-hand side can only take integer
/// values, so a `>=` rhs may be ceiled and a `<=` rhs floored. This is the
/// classic Chvátal–Gomory strengthening and is what makes covering rows with
/// fractional demand tractable.
fn round_integer_rows<S: Scalar>(lp: &LinearProgram<S>) -> LinearProgram<S> {
    let tol = S::from_f64(FEASIBILITY_TOL);
    let mut out = lp.clone();
    for con in &mut out.constraints {
        let all_integer = con.terms.iter().all(|&(j, a)| {
            a == S::zero()
                || (lp.variables[j].integer && (a - a.round()).abs() <= tol)
        });
        if !all_integer {
            continue;
        }
        let nearest = con.rhs.round();
        if (con.rhs - nearest).abs() <= tol {
            con.rhs = nearest;
            continue;
        }
        match con.relation {
            Relation::Ge => con.rhs = con.rhs.ceil(),
            Relation::Le => con.rhs = con.rhs.floor(),
            // A fractional equality over integers is infeasible; leave it for
            // the LP to report rather than special-casing here.
            Relation::Eq => {}
        }
    }
    out
}

/// Strengthens ratio rows of the form `Σy - α·Σz >= 0` over integer
/// variables (unit coefficients on the `y` side, a common fractional `α` on
/// the `z` side, zero right-hand side). Over integers the row is equivalent
/// to `Σy >= ceil(α·z)` for every achievable `z`; the lower convex hull of
/// the points `(z, ceil(α·z))` yields a handful of supporting lines, each a
/// valid inequality that dominates the original relaxation.
fn add_ratio_hull_cuts<S: Scalar>(lp: &mut LinearProgram<S>) {
    let tol = S::from_f64(FEASIBILITY_TOL);
    let mut cuts: Vec<(String, Vec<(usize, S)>, S)> = Vec::new();
    for con in &lp.constraints {
        if con.relation != Relation::Ge || con.rhs.abs() > tol {
            continue;
        }
        let mut ys: Vec<usize> = Vec::new();
        let mut zs: Vec<usize> = Vec::new();
        let mut alpha: Option<S> = None;
        let mut ok = !con.terms.is_empty();
        for &(j, a) in &con.terms {
            if !lp.variables[j].integer {
                ok = false;
                break;
            }
            if (a - S::one()).abs() <= tol {
                ys.push(j);
            } else if a < -tol {
                match alpha {
                    None => alpha = Some(-a),
                    Some(seen) if (seen + a).abs() <= tol => {}
                    Some(_) => {
                        ok = false;
                        break;
                    }
                }
                zs.push(j);
            } else {
                ok = false;
                break;
            }
        }
        let Some(alpha) = alpha else { continue };
        // An integer ratio is already handled by row rounding; a huge z
        // range makes enumeration pointless.
        let frac = alpha - alpha.floor();
        if !ok || ys.is_empty() || frac <= tol || S::one() - frac <= tol {
            continue;
        }
        let z_max: S = zs.iter().map(|&j| lp.variables[j].upper).fold(S::zero(), |a, b| a + b);
        if !z_max.is_finite() || z_max > S::from_f64(10_000.0) {
            continue;
        }
        let z_max = z_max.floor().as_f64() as u64;

        // Lower convex hull of (z, ceil(alpha * z)), z = 0..=z_max.
        let mut hull: Vec<(S, S)> = Vec::new();
        for z in 0..=z_max {
            let z = S::from_f64(z as f64);
            let y = (alpha * z - tol).ceil().max(S::zero());
            while hull.len() >= 2 {
                let (z1, y1) = hull[hull.len() - 2];
                let (z2, y2) = hull[hull.len() - 1];
                // Pop while the middle point is on or above the new chord.
                if (y2 - y1) * (z - z1) >= (y - y1) * (z2 - z1) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push((z, y));
        }
        for pair in hull.windows(2) {
            let (z1, y1) = pair[0];
            let (z2, y2) = pair[1];
            let slope = (y2 - y1) / (z2 - z1);
            let intercept = y1 - slope * z1;
            // Skip facets no stronger than the original row.
            if (slope - alpha).abs() <= tol && intercept.abs() <= tol {
                continue;
            }
            let mut terms: Vec<(usize, S)> = ys.iter().map(|&j| (j, S::one())).collect();
            terms.extend(zs.iter().map(|&j| (j, -slope)));
            cuts.push((format!("{}_hull{}", con.name, cuts.len()), terms, intercept));
        }
    }
    for (name, terms, rhs) in cuts {
        lp.add_constraint(name, terms, Relation::Ge, rhs);
    }
}

/// Activity-based domain propagation to a fixpoint (bounded pass count).
///
/// Every row is read as one or two `Σ a_j x_j >= b` forms. The residual
/// support of the other variables implies a bound on each variable in turn;
/// integer bounds are rounded inward. Returns false when some row cannot be
/// satisfied or a variable's bounds cross — the node is infeasible without
/// an LP solve. This is what turns a branch on a bed count into an immediate
/// lift of the matching staff lower bounds.
fn propagate<S: Scalar>(lp: &LinearProgram<S>, bounds: &mut [(S, S)]) -> bool {
    let ftol = S::from_f64(FEASIBILITY_TOL);
    const MAX_PASSES: usize = 10;
    for _ in 0..MAX_PASSES {
        let mut changed = false;
        for con in &lp.constraints {
            let forms: &[bool] = match con.relation {
                Relation::Ge => &[false],
                Relation::Le => &[true],
                Relation::Eq => &[false, true],
            };
            for &negate in forms {
                let sign = if negate { -S::one() } else { S::one() };
                let rhs = sign * con.rhs;
                // Largest possible activity, tracking infinite contributors.
                let mut support = S::zero();
                let mut infinite = 0usize;
                let mut infinite_at = usize::MAX;
                for &(j, raw) in &con.terms {
                    let a = sign * raw;
                    if a == S::zero() {
                        continue;
                    }
                    let s = if a > S::zero() { a * bounds[j].1 } else { a * bounds[j].0 };
                    if s.is_finite() {
                        support = support + s;
                    } else {
                        infinite += 1;
                        infinite_at = j;
                    }
                }
                if infinite == 0 && support < rhs - ftol {
                    return false;
                }
                if infinite >= 2 {
                    continue;
                }
                for &(j, raw) in &con.terms {
                    let a = sign * raw;
                    if a == S::zero() {
                        continue;
                    }
                    let own = if a > S::zero() { a * bounds[j].1 } else { a * bounds[j].0 };
                    let rest = if infinite == 0 {
                        support - own
                    } else if infinite_at == j && !own.is_finite() {
                        support
                    } else {
                        continue;
                    };
                    let implied = (rhs - rest) / a;
                    let integer = lp.variables[j].integer;
                    if a > S::zero() {
                        let mut lo = implied;
                        if integer {
                            lo = (lo - ftol).ceil();
                        }
                        if lo > bounds[j].0 + S::from_f64(1e-9) {
                            bounds[j].0 = lo;
                            changed = true;
                        }
                    } else {
                        let mut hi = implied;
                        if integer {
                            hi = (hi + ftol).floor();
                        }
                        if hi < bounds[j].1 - S::from_f64(1e-9) {
                            bounds[j].1 = hi;
                            changed = true;
                        }
                    }
                    if bounds[j].0 > bounds[j].1 + ftol {
                        return false;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    true
}

fn finished<S: Scalar>(
    status: SolveStatus,
    objective: S,
    assignment: Vec<S>,
    node_count: u64,
    start: std::time::Instant,
    log: Vec<String>,
) -> SolveResult<S> {
    SolveResult {
        status,
        objective,
        assignment,
        node_count,
        wall_time_secs: start.elapsed().as_secs_f64(),
        log,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Relation, SolveStatus};
    use super::*;

    #[test]
    fn ceiling_behaviour_on_fractional_demand() {
        let mut lp = LinearProgram::<f64>::new();
        lp.add_variable("x", 0.0, 100.0, true, 1.0);
        lp.add_constraint("cover", vec![(0, 1.0)], Relation::Ge, 2.3);
        let res = solve_milp(&lp).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn fixing_a_variable_pins_the_objective() {
        let mut lp = LinearProgram::<f64>::new();
        lp.add_variable("x", 0.0, 10.0, true, 1.0);
        let fixed = lp.fix_variables(&[("x".into(), 3.0)]).unwrap();
        let res = solve_milp(&fixed).unwrap();
        assert!((res.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn fixing_nothing_is_identity() {
        let mut lp = LinearProgram::<f64>::new();
        lp.add_variable("x", 0.0, 10.0, true, 1.0);
        lp.add_constraint("cover", vec![(0, 1.0)], Relation::Ge, 4.0);
        let fixed = lp.fix_variables(&[]).unwrap();
        assert_eq!(
            solve_milp(&fixed).unwrap().objective,
            solve_milp(&lp).unwrap().objective
        );
    }

    #[test]
    fn fixing_outside_bounds_is_an_error() {
        let mut lp = LinearProgram::<f64>::new();
        lp.add_variable("x", 0.0, 10.0, true, 1.0);
        assert!(matches!(
            lp.fix_variables(&[("x".into(), 12.0)]),
            Err(ModelError::FixOutOfBounds { .. })
        ));
        assert!(matches!(
            lp.fix_variables(&[("y".into(), 1.0)]),
            Err(ModelError::UnknownVariable(_))
        ));
    }

    #[test]
    fn unbounded_integer_variable_is_a_model_error() {
        let mut lp = LinearProgram::<f64>::new();
        lp.add_variable("x", 0.0, f64::INFINITY, true, 1.0);
        assert!(matches!(
            solve_milp(&lp),
            Err(ModelError::UnboundedInteger(_))
        ));
    }

    #[test]
    fn two_variable_knapsack_cover() {
        // min 3x + 5y  s.t.  2x + 3y >= 12, integer, x <= 4
        let mut lp = LinearProgram::<f64>::new();
        lp.add_variable("x", 0.0, 4.0, true, 3.0);
        lp.add_variable("y", 0.0, 10.0, true, 5.0);
        lp.add_constraint("cover", vec![(0, 2.0), (1, 3.0)], Relation::Ge, 12.0);
        let res = solve_milp(&lp).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        // x=3,y=2 -> 19 or x=4,y=2 -> 22; enumeration gives 19 via x=3,y=2.
        assert!((res.objective - 19.0).abs() < 1e-9);
    }
}
