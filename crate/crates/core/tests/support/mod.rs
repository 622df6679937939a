//! Test-only oracles, independent of the solver and pipeline code paths.
#![allow(dead_code)]

use rand::{Rng, RngExt};
use vfmga::lp::{Constraint, LinearProgram, Objective, Relation, VarId};

/// Minimum of the objective over all vertices of a box-bounded polytope, by brute
/// force: every choice of `n` active constraints (rows held at equality or variables
/// at a bound) is solved by Gaussian elimination and kept when feasible. `None` means
/// no vertex exists, i.e. the program is infeasible.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_variables();
    // candidate hyperplanes; equality rows are always active, so the
    // feasibility check enforces them even when they are redundant
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in lp.constraints() {
        let mut a = vec![0.0; n];
        for &(v, x) in &c.terms {
            a[v.0] += x;
        }
        planes.push((a, c.rhs));
    }
    for (j, v) in lp.variables().iter().enumerate() {
        assert!(v.lower.is_finite() && v.upper.is_finite(), "oracle needs finite bounds");
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), v.lower));
        planes.push((e, v.upper));
    }
    let mut best: Option<f64> = None;
    let mut chosen = Vec::new();
    combos(planes.len(), n, 0, &mut chosen, &mut |set| {
        let mut mat: Vec<Vec<f64>> = set
            .iter()
            .map(|&k| {
                let mut row = planes[k].0.clone();
                row.push(planes[k].1);
                row
            })
            .collect();
        let Some(x) = gauss(&mut mat, n) else { return };
        if !feasible(lp, &x) {
            return;
        }
        let obj = lp.evaluate_objective(&x);
        if best.is_none_or(|b| obj < b) {
            best = Some(obj);
        }
    });
    best
}

fn combos(total: usize, k: usize, start: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if cur.len() == k {
        f(cur);
        return;
    }
    for i in start..total {
        if total - i < k - cur.len() {
            break;
        }
        cur.push(i);
        combos(total, k, i + 1, cur, f);
        cur.pop();
    }
}

fn gauss(m: &mut [Vec<f64>], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

fn feasible(lp: &LinearProgram, x: &[f64]) -> bool {
    let tol = 1e-9;
    lp.variables()
        .iter()
        .zip(x)
        .all(|(v, &xi)| xi >= v.lower - tol && xi <= v.upper + tol)
        && lp.max_relative_violation(x) <= tol
}

/// Random program with `n ≤ 5` variables and `m ≤ 4` rows, all bounds finite.
pub fn random_bounded_lp<R: Rng>(rng: &mut R) -> LinearProgram {
    let n = rng.random_range(1..=5);
    let m = rng.random_range(1..=4);
    let mut lp = LinearProgram::new();
    let vars: Vec<VarId> = (0..n)
        .map(|j| {
            let l = rng.random_range(-3..=1) as f64;
            let u = l + rng.random_range(1..=6) as f64 * 0.5;
            lp.add_variable(format!("x{j}"), l, u).unwrap()
        })
        .collect();
    for i in 0..m {
        let terms: Vec<(VarId, f64)> = vars
            .iter()
            .filter_map(|&v| {
                let coef = rng.random_range(-4..=4) as f64 * 0.5;
                rng.random_bool(0.8).then_some((v, coef))
            })
            .collect();
        let relation = match rng.random_range(0..5) {
            0 => Relation::Eq,
            1 | 2 => Relation::Ge,
            _ => Relation::Le,
        };
        let rhs = rng.random_range(-6..=6) as f64 * 0.5;
        lp.push_constraint(Constraint::new(format!("r{i}"), terms, relation, rhs))
            .unwrap();
    }
    let terms = vars
        .iter()
        .map(|&v| (v, rng.random_range(-10..=10) as f64 * 0.3))
        .collect();
    lp.set_objective(Objective { terms, offset: 0.0 }).unwrap();
    lp
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn desk_system() -> vfmga::esm::SystemModel {
    vfmga::esm::SystemModel::load(&fixture("system.json")).expect("fixture system loads")
}

/// Independent optimum of `lp` from the `microlp` simplex implementation.
pub fn microlp_objective(lp: &LinearProgram) -> Option<f64> {
    use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let mut obj = vec![0.0; lp.num_variables()];
    for &(v, c) in &lp.objective().terms {
        obj[v.0] += c;
    }
    let vars: Vec<_> = lp
        .variables()
        .iter()
        .zip(&obj)
        .map(|(v, &c)| p.add_var(c, (v.lower, v.upper)))
        .collect();
    for c in lp.constraints() {
        let expr: Vec<_> = c.terms.iter().map(|&(v, a)| (vars[v.0], a)).collect();
        let op = match c.relation {
            Relation::Le => ComparisonOp::Le,
            Relation::Ge => ComparisonOp::Ge,
            Relation::Eq => ComparisonOp::Eq,
        };
        p.add_constraint(expr, op, c.rhs);
    }
    match p.solve() {
        Ok(SolveOutcome::Solution(s)) => Some(s.objective() + lp.objective().offset),
        _ => None,
    }
}

/// Fixture inputs with a reduced sweep: extreme vectors at a single slack.
pub fn small_inputs() -> vfmga::orchestrator::Inputs {
    let mut inputs = vfmga::orchestrator::Inputs::load(&fixture("run.json")).expect("fixture inputs");
    inputs.mga.slacks = vec![0.1];
    inputs.mga.schemes = vec![vfmga::mga::Scheme::Extreme];
    inputs
}
