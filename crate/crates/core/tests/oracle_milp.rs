//! Solver-vs-oracle checks: `solve_milp` against exhaustive enumeration of
//! the bounded integer box, and `solve_lp` as a lower bound.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use wardplanner_core::milp::{
    solve_lp, solve_milp, LinearProgram, Relation, SolveStatus, FEASIBILITY_TOL,
};

/// A random all-integer program with at most `max_vars` variables, bounds in
/// [0, 10] and a handful of random constraints. Every right-hand side is
/// anchored at a random integer point inside the box, so the instance is
/// feasible by construction (the solver must still find the optimum).
fn random_milp(seed: u64, max_vars: usize) -> LinearProgram<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(1..=6);
    let mut lp = LinearProgram::new();
    let mut anchor = Vec::with_capacity(n);
    for j in 0..n {
        let lo = rng.gen_range(0..=3);
        let hi = (lo + rng.gen_range(0..=7)).min(10);
        lp.add_variable(format!("x{j}"), lo as f64, hi as f64, true, rng.gen_range(-6..=9) as f64);
        anchor.push(rng.gen_range(lo..=hi) as f64);
    }
    for i in 0..m {
        let mut terms = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.75) {
                let a = rng.gen_range(-4..=4);
                if a != 0 {
                    terms.push((j, a as f64));
                }
            }
        }
        if terms.is_empty() {
            continue;
        }
        let at_anchor: f64 = terms.iter().map(|&(j, a)| a * anchor[j]).sum();
        let (relation, rhs) = match rng.gen_range(0..6) {
            0 => (Relation::Ge, at_anchor - rng.gen_range(0..=5) as f64),
            1 => (Relation::Eq, at_anchor),
            _ => (Relation::Le, at_anchor + rng.gen_range(0..=5) as f64),
        };
        lp.add_constraint(format!("c{i}"), terms, relation, rhs);
    }
    lp
}

/// Exhaustively enumerates the integer box and returns the best objective.
fn enumerate_best(lp: &LinearProgram<f64>) -> Option<f64> {
    let n = lp.variables.len();
    let mut point: Vec<f64> = lp.variables.iter().map(|v| v.lower).collect();
    let mut best: Option<f64> = None;
    loop {
        if lp.is_feasible(&point, FEASIBILITY_TOL) {
            let value = lp.objective_value(&point);
            if best.is_none_or(|b| value < b) {
                best = Some(value);
            }
        }
        // Odometer increment over the box.
        let mut j = 0;
        loop {
            if j == n {
                return best;
            }
            point[j] += 1.0;
            if point[j] <= lp.variables[j].upper {
                break;
            }
            point[j] = lp.variables[j].lower;
            j += 1;
        }
    }
}

#[test]
fn milp_matches_exhaustive_enumeration_on_small_boxes() {
    let mut optimal = 0;
    for seed in 0..60 {
        let lp = random_milp(seed, 6);
        let oracle = enumerate_best(&lp);
        let result = solve_milp(&lp).unwrap();
        match oracle {
            Some(best) => {
                assert_eq!(
                    result.status,
                    SolveStatus::Optimal,
                    "seed {seed}: oracle found {best}, solver says {:?}",
                    result.status
                );
                assert!(
                    (result.objective - best).abs() <= 1e-6,
                    "seed {seed}: solver {} vs oracle {best}",
                    result.objective
                );
                assert!(
                    lp.is_feasible(&result.assignment, FEASIBILITY_TOL),
                    "seed {seed}: returned point violates a constraint"
                );
                for (var, &x) in lp.variables.iter().zip(&result.assignment) {
                    assert!(
                        (x - x.round()).abs() <= 1e-6,
                        "seed {seed}: {} = {x} is not integral",
                        var.name
                    );
                }
                optimal += 1;
            }
            None => {
                assert_eq!(
                    result.status,
                    SolveStatus::Infeasible,
                    "seed {seed}: box holds no feasible point but solver says {:?}",
                    result.status
                );
            }
        }
    }
    // The generator anchors every rhs at a feasible point, so all instances
    // must take the optimal path.
    assert!(optimal >= 50, "only {optimal} feasible instances generated");
}

#[test]
fn contradictory_rows_are_reported_infeasible() {
    for seed in 0..20 {
        let mut lp = random_milp(seed + 500, 4);
        // x0 >= upper + 1 contradicts the variable's own bound.
        let ub = lp.variables[0].upper;
        lp.add_constraint("clash".to_string(), vec![(0, 1.0)], Relation::Ge, ub + 1.0);
        assert!(enumerate_best(&lp).is_none(), "seed {seed}: oracle disagrees");
        let result = solve_milp(&lp).unwrap();
        assert_eq!(result.status, SolveStatus::Infeasible, "seed {seed}");
    }
}

#[test]
fn lp_relaxation_never_exceeds_the_integer_optimum() {
    for seed in 0..60 {
        let lp = random_milp(seed, 6);
        let milp = solve_milp(&lp).unwrap();
        if milp.status != SolveStatus::Optimal {
            continue;
        }
        let relax = solve_lp(&lp).unwrap();
        assert_eq!(relax.status, SolveStatus::Optimal, "seed {seed}");
        assert!(
            relax.objective <= milp.objective + 1e-6,
            "seed {seed}: LP bound {} above MILP optimum {}",
            relax.objective,
            milp.objective
        );
    }
}

#[test]
fn fixing_a_feasible_point_never_improves_the_optimum() {
    for seed in 0..30 {
        let lp = random_milp(seed, 4);
        let milp = solve_milp(&lp).unwrap();
        if milp.status != SolveStatus::Optimal {
            continue;
        }
        // Fix the first variable to its optimal value: optimum is preserved;
        // fixing it elsewhere may only degrade (or break) the model.
        let name = lp.variables[0].name.clone();
        let fixed = lp.fix_variables(&[(name, milp.assignment[0])]).unwrap();
        let refixed = solve_milp(&fixed).unwrap();
        assert_eq!(refixed.status, SolveStatus::Optimal, "seed {seed}");
        assert!(
            refixed.objective >= milp.objective - 1e-6,
            "seed {seed}: restriction improved the optimum"
        );
        assert!((refixed.objective - milp.objective).abs() <= 1e-6, "seed {seed}");
    }
}
