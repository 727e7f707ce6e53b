//! Test-only oracles, independent of the library's linear algebra.
#![allow(dead_code, clippy::needless_range_loop)]

use nalgebra::DMatrix;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(sym: &DMatrix<f64>) -> Vec<f64> {
    let n = sym.nrows();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| sym[(i, j)]).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// All size-`k` subsets of `1..=m`, lexicographic, built by recursion.
pub fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..=m {
            cur.push(i);
            go(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(1, m, k, &mut Vec::new(), &mut out);
    out
}

/// Brute-force block-RIP constant with the Jacobi oracle.
pub fn brute_block_rip(a: &DMatrix<f64>, d: usize, order: usize) -> f64 {
    let m_blocks = a.ncols() / d;
    let mut delta: f64 = 0.0;
    for s in subsets(m_blocks, order) {
        let mut sub = DMatrix::zeros(a.nrows(), s.len() * d);
        for (slot, &b) in s.iter().enumerate() {
            for c in 0..d {
                sub.set_column(slot * d + c, &a.column((b - 1) * d + c));
            }
        }
        let ev = jacobi_eigenvalues(&(sub.transpose() * &sub));
        delta = delta.max(ev[ev.len() - 1] - 1.0).max(1.0 - ev[0]);
    }
    delta
}

/// Checks the per-iteration guarantees of a finished BOMP run: distinct picks,
/// non-increasing residuals, residual orthogonal to every chosen block, and an
/// estimate supported on the chosen blocks.
pub fn solver_invariants(
    problem: &bomp_core::SensingProblem,
    trace: &bomp_core::RecoveryTrace,
) -> Result<(), String> {
    use bomp_core::solver::{project_least_squares, ORTHO_TOL};

    let a = problem.matrix();
    let y = problem.observation();
    let scale = y.norm();
    let mut distinct = trace.chosen_indices.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != trace.chosen_indices.len() {
        return Err(format!("repeated block in {:?}", trace.chosen_indices));
    }
    if trace.residual_norms.len() != trace.iterations_run + 1 || trace.residual_norms[0] != scale {
        return Err("residual history does not start at ‖y‖".to_string());
    }
    for (k, w) in trace.residual_norms.windows(2).enumerate() {
        if w[1] > w[0] + 1e-12 * scale {
            return Err(format!(
                "residual grew at iteration {}: {} > {}",
                k + 1,
                w[1],
                w[0]
            ));
        }
    }
    for k in 1..=trace.iterations_run {
        let prefix = &trace.chosen_indices[..k];
        let (_, r) = project_least_squares(a, prefix, y).map_err(|e| e.to_string())?;
        for &i in prefix {
            let corr = a.block(i).map_err(|e| e.to_string())?.tr_mul(&r).norm();
            if corr > ORTHO_TOL * scale {
                return Err(format!("iteration {k}: block {i} correlation {corr:e}"));
            }
        }
        if (r.norm() - trace.residual_norms[k]).abs() > 1e-10 * scale {
            return Err(format!(
                "iteration {k}: recorded residual disagrees with projection"
            ));
        }
    }
    for i in 1..=a.layout().num_blocks() {
        if !trace.chosen_indices.contains(&i)
            && trace.final_estimate.block(i).unwrap().norm() != 0.0
        {
            return Err(format!("estimate is nonzero on unchosen block {i}"));
        }
    }
    Ok(())
}
