//! Dense two-phase primal simplex.
//!
//! Variables are shifted so every structural variable is nonnegative; finite
//! upper bounds become extra `<=` rows. Pivoting uses Dantzig's rule and falls
//! back to Bland's rule after a stall to guard against cycling.

use crate::scalar::Scalar;

use super::{LinearProgram, ModelError, Relation, SolveResult, SolveStatus};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-9;

pub(crate) enum Relaxation<S> {
    Optimal {
        point: Vec<S>,
        objective: S,
        /// Reduced cost per structural variable: the rate of objective
        /// increase when the variable moves off the bound it rests at
        /// (positive from a lower bound, negative from an upper bound;
        /// zero for basic variables). Used for reduced-cost bound fixing.
        reduced: Vec<S>,
    },
    Infeasible,
    Unbounded,
}

/// A valid inequality `terms >= rhs` in the original variable space.
pub(crate) struct GmiCut<S> {
    pub terms: Vec<(usize, S)>,
    pub rhs: S,
}

/// Solves the LP relaxation of `lp` (integrality flags are ignored).
pub fn solve_lp<S: Scalar>(lp: &LinearProgram<S>) -> Result<SolveResult<S>, ModelError> {
    solve_lp_inner(lp, false)
}

/// As [`solve_lp`] via the bound-rows formulation; kept as a cross-check.
#[doc(hidden)]
pub fn solve_lp_reference<S: Scalar>(lp: &LinearProgram<S>) -> Result<SolveResult<S>, ModelError> {
    solve_lp_inner(lp, true)
}

fn solve_lp_inner<S: Scalar>(lp: &LinearProgram<S>, reference: bool) -> Result<SolveResult<S>, ModelError> {
    lp.validate()?;
    let start = std::time::Instant::now();
    let bounds: Vec<(S, S)> = lp.variables.iter().map(|v| (v.lower, v.upper)).collect();
    let outcome = if reference {
        solve_relaxation_gmi(lp, &bounds, None)
    } else {
        solve_relaxation(lp, &bounds)
    };
    let wall = start.elapsed().as_secs_f64();
    Ok(match outcome {
        Relaxation::Optimal { point, objective, .. } => SolveResult {
            status: SolveStatus::Optimal,
            objective,
            assignment: point,
            node_count: 0,
            wall_time_secs: wall,
            log: Vec::new(),
        },
        Relaxation::Infeasible => SolveResult {
            status: SolveStatus::Infeasible,
            objective: S::zero(),
            assignment: Vec::new(),
            node_count: 0,
            wall_time_secs: wall,
            log: Vec::new(),
        },
        Relaxation::Unbounded => SolveResult {
            status: SolveStatus::Unbounded,
            objective: S::neg_infinity(),
            assignment: Vec::new(),
            node_count: 0,
            wall_time_secs: wall,
            log: Vec::new(),
        },
    })
}

/// Core routine shared with branch-and-bound: solve with per-node bounds.
pub(crate) fn solve_relaxation<S: Scalar>(
    lp: &LinearProgram<S>,
    bounds: &[(S, S)],
) -> Relaxation<S> {
    solve_bounded(lp, bounds)
}

/// Two-phase simplex with variable upper bounds handled implicitly.
///
/// Nonbasic variables rest at either bound; a variable at its upper bound is
/// represented by complementing its column (`y' = u - y`), so the working
/// dictionary always has nonbasics at zero. This keeps the tableau at one row
/// per constraint instead of adding a row per finite bound, which is what
/// makes branch-and-bound node solves affordable.
fn solve_bounded<S: Scalar>(lp: &LinearProgram<S>, bounds: &[(S, S)]) -> Relaxation<S> {
    let n = lp.variables.len();
    let ftol = S::from_f64(super::FEASIBILITY_TOL);
    for &(lo, hi) in bounds {
        if lo > hi + ftol {
            return Relaxation::Infeasible;
        }
    }
    if n == 0 {
        return Relaxation::Optimal {
            point: Vec::new(),
            objective: S::zero(),
            reduced: Vec::new(),
        };
    }

    // Shifted rows: structural y_j = x_j - lb_j in [0, u_j].
    let upper: Vec<S> = bounds.iter().map(|&(lo, hi)| (hi - lo).max(S::zero())).collect();
    let mut rows: Vec<Row<S>> = Vec::with_capacity(lp.constraints.len());
    for con in &lp.constraints {
        let mut shift = S::zero();
        for &(j, a) in &con.terms {
            shift = shift + a * bounds[j].0;
        }
        rows.push(Row { coeffs: con.terms.clone(), relation: con.relation, rhs: con.rhs - shift });
    }
    for row in &mut rows {
        if row.rhs < S::zero() {
            for term in &mut row.coeffs {
                term.1 = -term.1;
            }
            row.rhs = -row.rhs;
            row.relation = match row.relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows
        .iter()
        .filter(|r| matches!(r.relation, Relation::Le | Relation::Ge))
        .count();
    let n_art = rows
        .iter()
        .filter(|r| matches!(r.relation, Relation::Ge | Relation::Eq))
        .count();
    let width = n + n_slack + n_art + 1; // last column is the rhs
    let rhs_col = width - 1;
    let art_start = n + n_slack;

    // Column upper bounds: structurals from the variable bounds, slacks and
    // artificials unbounded.
    let mut col_upper: Vec<S> = vec![S::infinity(); width - 1];
    col_upper[..n].copy_from_slice(&upper);
    let mut flipped = vec![false; width - 1];

    let mut tableau: Vec<Vec<S>> = vec![vec![S::zero(); width]; m];
    let mut basis: Vec<usize> = vec![0; m];
    let mut slack_idx = n;
    let mut art_idx = art_start;
    for (i, row) in rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            tableau[i][j] = tableau[i][j] + a;
        }
        tableau[i][rhs_col] = row.rhs;
        match row.relation {
            Relation::Le => {
                tableau[i][slack_idx] = S::one();
                basis[i] = slack_idx;
                slack_idx += 1;
            }
            Relation::Ge => {
                tableau[i][slack_idx] = -S::one();
                slack_idx += 1;
                tableau[i][art_idx] = S::one();
                basis[i] = art_idx;
                art_idx += 1;
            }
            Relation::Eq => {
                tableau[i][art_idx] = S::one();
                basis[i] = art_idx;
                art_idx += 1;
            }
        }
    }

    // Phase 1: minimise the sum of artificials.
    let mut cost_row: Vec<S> = vec![S::zero(); width];
    for (i, &b) in basis.iter().enumerate() {
        if b >= art_start {
            for j in 0..width {
                cost_row[j] = cost_row[j] - tableau[i][j];
            }
        }
    }
    for j in art_start..width - 1 {
        cost_row[j] = cost_row[j] + S::one();
    }

    if !run_bounded_simplex(
        &mut tableau,
        &mut cost_row,
        &mut basis,
        &col_upper,
        &mut flipped,
        width,
        None,
    ) {
        // Phase 1 is bounded below by zero, so this cannot trigger.
        return Relaxation::Infeasible;
    }
    let phase1 = -cost_row[rhs_col];
    if phase1 > ftol {
        return Relaxation::Infeasible;
    }

    // Pivot leftover artificials out of the basis (or drop redundant rows).
    let tol = S::from_f64(PIVOT_TOL);
    let mut i = 0;
    while i < tableau.len() {
        if basis[i] >= art_start {
            let mut pivot_col = None;
            for j in 0..art_start {
                if tableau[i][j].abs() > tol {
                    pivot_col = Some(j);
                    break;
                }
            }
            match pivot_col {
                Some(j) => {
                    pivot(&mut tableau, &mut cost_row, i, j, width);
                    basis[i] = j;
                }
                None => {
                    tableau.swap_remove(i);
                    basis.swap_remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    // Phase 2: reduced costs for the true objective, with flipped columns
    // carrying the complemented (negated) coefficient.
    for j in 0..width {
        cost_row[j] = S::zero();
    }
    for j in 0..n {
        cost_row[j] = if flipped[j] { -lp.objective[j] } else { lp.objective[j] };
    }
    for (i, &b) in basis.iter().enumerate() {
        let cb = cost_row[b];
        if cb != S::zero() {
            for j in 0..width {
                cost_row[j] = cost_row[j] - cb * tableau[i][j];
            }
        }
    }

    if !run_bounded_simplex(
        &mut tableau,
        &mut cost_row,
        &mut basis,
        &col_upper,
        &mut flipped,
        width,
        Some(art_start),
    ) {
        return Relaxation::Unbounded;
    }

    let mut point = vec![S::zero(); n];
    let mut is_basic = vec![false; width - 1];
    for (i, &b) in basis.iter().enumerate() {
        is_basic[b] = true;
        if b < n {
            point[b] = tableau[i][rhs_col];
        }
    }
    let mut reduced = vec![S::zero(); n];
    for j in 0..n {
        if !is_basic[j] {
            reduced[j] = if flipped[j] { -cost_row[j] } else { cost_row[j] };
        }
    }
    for (j, value) in point.iter_mut().enumerate() {
        if flipped[j] {
            *value = upper[j] - *value;
        }
        *value = *value + bounds[j].0;
        // Snap tiny excursions produced by elimination back onto the bound.
        if *value < bounds[j].0 {
            *value = bounds[j].0;
        }
        if *value > bounds[j].1 {
            *value = bounds[j].1;
        }
    }
    let objective = lp.objective_value(&point);
    Relaxation::Optimal { point, objective, reduced }
}

/// Pivots until optimal (true) or unbounded (false), honouring column upper
/// bounds via bound flips and leave-at-upper pivots.
fn run_bounded_simplex<S: Scalar>(
    tableau: &mut Vec<Vec<S>>,
    cost_row: &mut [S],
    basis: &mut [usize],
    col_upper: &[S],
    flipped: &mut [bool],
    width: usize,
    blocked_from: Option<usize>,
) -> bool {
    let rhs_col = width - 1;
    let limit = blocked_from.unwrap_or(rhs_col).min(rhs_col);
    let ctol = S::from_f64(COST_TOL);
    let ptol = S::from_f64(PIVOT_TOL);
    let stall_limit = 2 * (tableau.len() + width) as u64 + 100;
    let mut iters_since_progress: u64 = 0;
    let mut last_objective = cost_row[rhs_col];

    loop {
        let m = tableau.len();
        let bland = iters_since_progress > stall_limit;
        let mut entering = None;
        if bland {
            for j in 0..limit {
                if cost_row[j] < -ctol {
                    entering = Some(j);
                    break;
                }
            }
        } else {
            let mut best = -ctol;
            for j in 0..limit {
                if cost_row[j] < best {
                    best = cost_row[j];
                    entering = Some(j);
                }
            }
        }
        let Some(col) = entering else { return true };

        // Ratio test over three limits: a basic variable reaching zero, a
        // basic variable reaching its own upper bound, or the entering
        // variable reaching its bound (a pure flip, no pivot).
        #[derive(Clone, Copy)]
        enum Step {
            Flip,
            AtZero(usize),
            AtUpper(usize),
        }
        let mut theta = col_upper[col];
        let mut step = if theta.is_finite() { Some(Step::Flip) } else { None };
        for i in 0..m {
            let a = tableau[i][col];
            if a > ptol {
                let ratio = tableau[i][rhs_col] / a;
                let replace = match step {
                    None => true,
                    Some(_) => {
                        ratio < theta - ptol
                            || (ratio < theta + ptol
                                && match step {
                                    Some(Step::AtZero(li)) | Some(Step::AtUpper(li)) => {
                                        if bland {
                                            basis[i] < basis[li]
                                        } else {
                                            a > tableau[li][col].abs()
                                        }
                                    }
                                    _ => true,
                                })
                    }
                };
                if replace {
                    theta = ratio;
                    step = Some(Step::AtZero(i));
                }
            } else if a < -ptol {
                let cap = col_upper[basis[i]];
                if cap.is_finite() {
                    let ratio = (cap - tableau[i][rhs_col]) / -a;
                    let replace = match step {
                        None => true,
                        Some(_) => {
                            ratio < theta - ptol
                                || (ratio < theta + ptol
                                    && match step {
                                        Some(Step::AtZero(li)) | Some(Step::AtUpper(li)) => {
                                            if bland {
                                                basis[i] < basis[li]
                                            } else {
                                                -a > tableau[li][col].abs()
                                            }
                                        }
                                        _ => true,
                                    })
                        }
                    };
                    if replace {
                        theta = ratio;
                        step = Some(Step::AtUpper(i));
                    }
                }
            }
        }

        match step {
            None => return false,
            Some(Step::Flip) => {
                flip_column(tableau, cost_row, col, col_upper[col], width);
                flipped[col] = !flipped[col];
            }
            Some(Step::AtZero(row)) => {
                pivot(tableau, cost_row, row, col, width);
                basis[row] = col;
            }
            Some(Step::AtUpper(row)) => {
                let leaving = basis[row];
                pivot(tableau, cost_row, row, col, width);
                basis[row] = col;
                // The leaving variable rests at its upper bound: complement
                // it so the dictionary keeps nonbasics at zero.
                flip_column(tableau, cost_row, leaving, col_upper[leaving], width);
                flipped[leaving] = !flipped[leaving];
            }
        }

        let objective = cost_row[rhs_col];
        if (objective - last_objective).abs() > ctol {
            last_objective = objective;
            iters_since_progress = 0;
        } else {
            iters_since_progress += 1;
        }
    }
}

/// Complements column `col` at bound `upper`: `y' = upper - y`.
fn flip_column<S: Scalar>(
    tableau: &mut [Vec<S>],
    cost_row: &mut [S],
    col: usize,
    upper: S,
    width: usize,
) {
    let rhs_col = width - 1;
    for row in tableau.iter_mut() {
        let a = row[col];
        if a != S::zero() {
            row[rhs_col] = row[rhs_col] - upper * a;
            row[col] = -a;
        }
    }
    let a = cost_row[col];
    if a != S::zero() {
        cost_row[rhs_col] = cost_row[rhs_col] - upper * a;
        cost_row[col] = -a;
    }
}

/// As [`solve_relaxation`], optionally collecting Gomory mixed-integer cuts
/// read off the optimal tableau. Each returned cut is valid for every
/// integer-feasible point of `lp` (given globally valid `bounds`) and is
/// violated by the relaxation optimum, so re-solving after adding them
/// tightens the bound.
pub(crate) fn solve_relaxation_gmi<S: Scalar>(
    lp: &LinearProgram<S>,
    bounds: &[(S, S)],
    cuts: Option<&mut Vec<GmiCut<S>>>,
) -> Relaxation<S> {
    let n = lp.variables.len();
    let tol = S::from_f64(PIVOT_TOL);
    for &(lo, hi) in bounds {
        if lo > hi + S::from_f64(super::FEASIBILITY_TOL) {
            return Relaxation::Infeasible;
        }
    }
    if n == 0 {
        return Relaxation::Optimal {
            point: Vec::new(),
            objective: S::zero(),
            reduced: Vec::new(),
        };
    }

    // Shifted rows: structural y_j = x_j - lb_j >= 0.
    let mut rows: Vec<Row<S>> = Vec::with_capacity(lp.constraints.len() + n);
    for con in &lp.constraints {
        let mut shift = S::zero();
        for &(j, a) in &con.terms {
            shift = shift + a * bounds[j].0;
        }
        rows.push(Row { coeffs: con.terms.clone(), relation: con.relation, rhs: con.rhs - shift });
    }
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        if hi.is_finite() {
            rows.push(Row {
                coeffs: vec![(j, S::one())],
                relation: Relation::Le,
                rhs: hi - lo,
            });
        }
    }

    // Normalise to nonnegative right-hand sides.
    for row in &mut rows {
        if row.rhs < S::zero() {
            for term in &mut row.coeffs {
                term.1 = -term.1;
            }
            row.rhs = -row.rhs;
            row.relation = match row.relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows
        .iter()
        .filter(|r| matches!(r.relation, Relation::Le | Relation::Ge))
        .count();
    let n_art = rows
        .iter()
        .filter(|r| matches!(r.relation, Relation::Ge | Relation::Eq))
        .count();
    let width = n + n_slack + n_art + 1; // last column is the rhs
    let rhs_col = width - 1;
    let art_start = n + n_slack;

    let mut tableau: Vec<Vec<S>> = vec![vec![S::zero(); width]; m];
    let mut basis: Vec<usize> = vec![0; m];
    // Which normalised row each slack column belongs to, and whether it is a
    // surplus (`>=`) column; used to express Gomory cuts over structurals.
    let mut slack_rows: Vec<(usize, bool)> = Vec::with_capacity(n_slack);
    let mut slack_idx = n;
    let mut art_idx = art_start;
    for (i, row) in rows.iter().enumerate() {
        for &(j, a) in &row.coeffs {
            tableau[i][j] = tableau[i][j] + a;
        }
        tableau[i][rhs_col] = row.rhs;
        match row.relation {
            Relation::Le => {
                tableau[i][slack_idx] = S::one();
                basis[i] = slack_idx;
                slack_rows.push((i, false));
                slack_idx += 1;
            }
            Relation::Ge => {
                tableau[i][slack_idx] = -S::one();
                slack_rows.push((i, true));
                slack_idx += 1;
                tableau[i][art_idx] = S::one();
                basis[i] = art_idx;
                art_idx += 1;
            }
            Relation::Eq => {
                tableau[i][art_idx] = S::one();
                basis[i] = art_idx;
                art_idx += 1;
            }
        }
    }

    // Phase 1: minimise the sum of artificials. The cost row holds the
    // negated reduced costs of that auxiliary objective.
    let mut cost_row: Vec<S> = vec![S::zero(); width];
    for (i, &b) in basis.iter().enumerate() {
        if b >= art_start {
            for j in 0..width {
                cost_row[j] = cost_row[j] - tableau[i][j];
            }
        }
    }
    for j in art_start..width - 1 {
        cost_row[j] = cost_row[j] + S::one();
    }

    if !run_simplex(&mut tableau, &mut cost_row, &mut basis, width, None) {
        // Phase 1 is bounded below by zero, so this cannot trigger.
        return Relaxation::Infeasible;
    }
    let phase1 = -cost_row[rhs_col];
    if phase1 > S::from_f64(super::FEASIBILITY_TOL) {
        return Relaxation::Infeasible;
    }

    // Pivot leftover artificials out of the basis (or drop redundant rows).
    let mut i = 0;
    let mut mrows = m;
    while i < mrows {
        if basis[i] >= art_start {
            let mut pivot_col = None;
            for j in 0..art_start {
                if tableau[i][j].abs() > tol {
                    pivot_col = Some(j);
                    break;
                }
            }
            match pivot_col {
                Some(j) => {
                    pivot(&mut tableau, &mut cost_row, i, j, width);
                    basis[i] = j;
                }
                None => {
                    tableau.swap_remove(i);
                    basis.swap_remove(i);
                    mrows -= 1;
                    continue;
                }
            }
        }
        i += 1;
    }

    // Phase 2: reduced costs for the true objective.
    for j in 0..width {
        cost_row[j] = S::zero();
    }
    for j in 0..n {
        cost_row[j] = lp.objective[j];
    }
    for (i, &b) in basis.iter().enumerate() {
        let cb = if b < n { lp.objective[b] } else { S::zero() };
        if cb != S::zero() {
            for j in 0..width {
                cost_row[j] = cost_row[j] - cb * tableau[i][j];
            }
        }
    }

    if !run_simplex(&mut tableau, &mut cost_row, &mut basis, width, Some(art_start)) {
        return Relaxation::Unbounded;
    }

    if let Some(out) = cuts {
        collect_gmi_cuts(lp, bounds, &tableau, &basis, &rows, &slack_rows, art_start, out);
    }

    let mut point = vec![S::zero(); n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            point[b] = tableau[i][rhs_col];
        }
    }
    for (j, value) in point.iter_mut().enumerate() {
        *value = *value + bounds[j].0;
        // Snap tiny negatives produced by elimination back onto the bound.
        if *value < bounds[j].0 {
            *value = bounds[j].0;
        }
        if *value > bounds[j].1 {
            *value = bounds[j].1;
        }
    }
    let objective = lp.objective_value(&point);
    Relaxation::Optimal { point, objective, reduced: vec![S::zero(); n] }
}

/// One normalised row of the shifted system (`y_j = x_j - lb_j`).
struct Row<S> {
    coeffs: Vec<(usize, S)>,
    relation: Relation,
    rhs: S,
}

/// Reads Gomory mixed-integer cuts off the optimal tableau.
///
/// For every basic integer structural with fractional value `f0`, the GMI
/// inequality over the nonbasic columns is `Σ γ_j v_j >= 1` with the usual
/// coefficients (`f/f0` or `(1-f)/(1-f0)` for integer columns, `a/f0` or
/// `-a/(1-f0)` for continuous ones). Slack columns are substituted via their
/// defining rows so the cut lands back in the structural space, then shifted
/// from `y` to `x`. A small relaxation of the right-hand side guards the
/// exactness of the search against float noise in the tableau.
#[allow(clippy::too_many_arguments)]
fn collect_gmi_cuts<S: Scalar>(
    lp: &LinearProgram<S>,
    bounds: &[(S, S)],
    tableau: &[Vec<S>],
    basis: &[usize],
    rows: &[Row<S>],
    slack_rows: &[(usize, bool)],
    art_start: usize,
    out: &mut Vec<GmiCut<S>>,
) {
    let n = lp.variables.len();
    let width = tableau.first().map_or(0, |r| r.len());
    if width == 0 {
        return;
    }
    let rhs_col = width - 1;
    let tol = S::from_f64(1e-9);
    // Stay away from near-integral basics: the cut would be all noise.
    let f_lo = S::from_f64(1e-4);

    // A shifted structural is integer-valued iff the variable is integer and
    // the shift (its lower bound) is integral.
    let y_int: Vec<bool> = (0..n)
        .map(|j| {
            lp.variables[j].integer && (bounds[j].0 - bounds[j].0.round()).abs() <= tol
        })
        .collect();
    // A slack is integer-valued iff its row has integer data over integer
    // structurals only.
    let row_int: Vec<bool> = rows
        .iter()
        .map(|row| {
            (row.rhs - row.rhs.round()).abs() <= tol
                && row.coeffs.iter().all(|&(j, a)| {
                    a == S::zero() || (y_int[j] && (a - a.round()).abs() <= tol)
                })
        })
        .collect();
    let mut is_basic = vec![false; width];
    for &b in basis {
        is_basic[b] = true;
    }

    'rows: for (r, &b) in basis.iter().enumerate() {
        if b >= n || !y_int[b] {
            continue;
        }
        let value = tableau[r][rhs_col];
        let f0 = value - value.floor();
        if f0 < f_lo || f0 > S::one() - f_lo {
            continue;
        }
        let one_minus = S::one() - f0;

        let mut coeff = vec![S::zero(); n];
        let mut rhs = S::one();
        for col in 0..art_start {
            if is_basic[col] {
                continue;
            }
            let a = tableau[r][col];
            if a.abs() <= tol {
                continue;
            }
            let integral = if col < n {
                y_int[col]
            } else {
                row_int[slack_rows[col - n].0]
            };
            let gamma = if integral {
                let f = a - a.floor();
                if f <= f0 {
                    f / f0
                } else {
                    (S::one() - f) / one_minus
                }
            } else if a > S::zero() {
                a / f0
            } else {
                -a / one_minus
            };
            if gamma.abs() <= tol {
                continue;
            }
            if !gamma.is_finite() || gamma.abs() > S::from_f64(1e7) {
                continue 'rows;
            }
            if col < n {
                coeff[col] = coeff[col] + gamma;
            } else {
                // Substitute the slack: s = rhs - a·y for `<=` rows and
                // s = a·y - rhs for surplus columns.
                let (i, surplus) = slack_rows[col - n];
                let sign = if surplus { S::one() } else { -S::one() };
                for &(j, aij) in &rows[i].coeffs {
                    coeff[j] = coeff[j] + sign * gamma * aij;
                }
                rhs = rhs + sign * gamma * rows[i].rhs;
            }
        }

        // Shift y back to x and drop noise-level coefficients, relaxing the
        // right-hand side so the cut stays valid.
        let mut terms = Vec::new();
        for (j, &c) in coeff.iter().enumerate() {
            if c == S::zero() {
                continue;
            }
            let range = bounds[j].1 - bounds[j].0;
            if c.abs() <= S::from_f64(1e-9) && range.is_finite() {
                rhs = rhs - (c * range).max(S::zero());
                continue;
            }
            rhs = rhs + c * bounds[j].0;
            terms.push((j, c));
        }
        if terms.is_empty() || !rhs.is_finite() {
            continue;
        }
        let slack_off = S::from_f64(1e-7) * (S::one() + rhs.abs());
        out.push(GmiCut { terms, rhs: rhs - slack_off });
    }
}

/// Runs pivots until optimal (true) or unbounded (false).
///
/// `blocked_from` excludes artificial columns from entering during phase 2.
fn run_simplex<S: Scalar>(
    tableau: &mut Vec<Vec<S>>,
    cost_row: &mut [S],
    basis: &mut [usize],
    width: usize,
    blocked_from: Option<usize>,
) -> bool {
    let rhs_col = width - 1;
    let m = tableau.len();
    let limit = blocked_from.unwrap_or(rhs_col).min(rhs_col);
    let ctol = S::from_f64(COST_TOL);
    let ptol = S::from_f64(PIVOT_TOL);
    let stall_limit = 2 * (m + width) as u64 + 100;
    let mut iters_since_progress: u64 = 0;
    let mut last_objective = cost_row[rhs_col];

    loop {
        let bland = iters_since_progress > stall_limit;
        let mut entering = None;
        if bland {
            for j in 0..limit {
                if cost_row[j] < -ctol {
                    entering = Some(j);
                    break;
                }
            }
        } else {
            let mut best = -ctol;
            for j in 0..limit {
                if cost_row[j] < best {
                    best = cost_row[j];
                    entering = Some(j);
                }
            }
        }
        let Some(col) = entering else { return true };

        let mut leaving: Option<(usize, S)> = None;
        for i in 0..m {
            let a = tableau[i][col];
            if a > ptol {
                let ratio = tableau[i][rhs_col] / a;
                let better = match leaving {
                    None => true,
                    Some((li, lr)) => {
                        if bland {
                            // Bland needs a deterministic index rule to
                            // guarantee termination.
                            ratio < lr - ptol || (ratio < lr + ptol && basis[i] < basis[li])
                        } else {
                            // Prefer the larger pivot element among ties:
                            // fewer degenerate steps and better conditioning.
                            ratio < lr - ptol
                                || (ratio < lr + ptol && a > tableau[li][col])
                        }
                    }
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
        }
        let Some((row, _)) = leaving else { return false };

        pivot(tableau, cost_row, row, col, width);
        basis[row] = col;

        let objective = cost_row[rhs_col];
        if (objective - last_objective).abs() > ctol {
            last_objective = objective;
            iters_since_progress = 0;
        } else {
            iters_since_progress += 1;
        }
    }
}

fn pivot<S: Scalar>(
    tableau: &mut Vec<Vec<S>>,
    cost_row: &mut [S],
    row: usize,
    col: usize,
    width: usize,
) {
    let inv = S::one() / tableau[row][col];
    for j in 0..width {
        tableau[row][j] = tableau[row][j] * inv;
    }
    tableau[row][col] = S::one();
    for i in 0..tableau.len() {
        if i == row {
            continue;
        }
        let factor = tableau[i][col];
        if factor != S::zero() {
            for j in 0..width {
                let delta = factor * tableau[row][j];
                tableau[i][j] = tableau[i][j] - delta;
            }
            tableau[i][col] = S::zero();
        }
    }
    let factor = cost_row[col];
    if factor != S::zero() {
        for j in 0..width {
            let delta = factor * tableau[row][j];
            cost_row[j] = cost_row[j] - delta;
        }
        cost_row[col] = S::zero();
    }
}
