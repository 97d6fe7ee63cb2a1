//! Phase-one simplex for feasibility of `A x = b, x ≥ 0`.

const PIVOT_EPS: f64 = 1e-12;
const MAX_PIVOTS: usize = 50_000;

/// Returns a nonnegative `x` with `‖A x − b‖₁ ≤ tol`, or `None` when the
/// smallest achievable residual exceeds `tol`.
///
/// `a` is row-major with one row per equality constraint.
pub fn feasible_point(a: &[Vec<f64>], b: &[f64], tol: f64) -> Option<Vec<f64>> {
    let m = a.len();
    assert_eq!(m, b.len());
    let n = a.first().map_or(0, Vec::len);
    let width = n + m + 1;
    let rhs = n + m;

    let mut t = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][rhs] = sign * b[i];
    }
    for j in (0..n).chain(std::iter::once(rhs)) {
        t[m][j] = -(0..m).map(|i| t[i][j]).sum::<f64>();
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    for _ in 0..MAX_PIVOTS {
        // Bland's rule: lowest-index improving column
        let Some(col) = (0..n + m).find(|&j| t[m][j] < -PIVOT_EPS) else { break };
        let mut pivot: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][col] > PIVOT_EPS {
                let ratio = t[i][rhs] / t[i][col];
                let better = match pivot {
                    None => true,
                    Some((p, r)) => ratio < r - PIVOT_EPS || (ratio <= r + PIVOT_EPS && basis[i] < basis[p]),
                };
                if better {
                    pivot = Some((i, ratio));
                }
            }
        }
        let Some((row, _)) = pivot else { break };
        let p = t[row][col];
        t[row].iter_mut().for_each(|v| *v /= p);
        let pivot_row = t[row].clone();
        for (i, r) in t.iter_mut().enumerate() {
            if i != row {
                let f = r[col];
                if f != 0.0 {
                    r.iter_mut().zip(&pivot_row).for_each(|(v, pv)| *v -= f * pv);
                }
            }
        }
        basis[row] = col;
    }

    let residual = -t[m][rhs];
    if residual > tol {
        return None;
    }
    let mut x = vec![0.0; n];
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = t[i][rhs].max(0.0);
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_unique_solution() {
        // x + y = 1, x - y = 0.5
        let x = feasible_point(&[vec![1.0, 1.0], vec![1.0, -1.0]], &[1.0, 0.5], 1e-9).unwrap();
        assert!((x[0] - 0.75).abs() < 1e-12 && (x[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasibility() {
        // x + y = 1, x + y = 2
        assert!(feasible_point(&[vec![1.0, 1.0], vec![1.0, 1.0]], &[1.0, 2.0], 1e-9).is_none());
        // x = -1 with x >= 0
        assert!(feasible_point(&[vec![1.0]], &[-1.0], 1e-9).is_none());
    }

    #[test]
    fn tolerates_redundant_rows() {
        let a = vec![vec![0.2, 0.6], vec![0.8, 0.4], vec![1.0, 1.0]];
        let x = feasible_point(&a, &[0.4, 0.6, 1.0], 1e-9).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
    }
}
