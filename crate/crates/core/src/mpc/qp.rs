//! Dense box-constrained convex QP by a primal active-set method.

use nalgebra::{DMatrix, DVector};

/// Minimizes `0.5 x^T H x + g^T x` subject to `lo <= x <= hi`, with `H`
/// symmetric positive definite and `lo <= 0 <= hi`. Returns the minimizer and
/// the number of working-set changes.
pub fn solve_box_qp(h: &DMatrix<f64>, g: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> (DVector<f64>, usize) {
    let n = g.len();
    let mut x = DVector::zeros(n);
    // 0: free, -1: at lower bound, 1: at upper bound
    let mut state = vec![0i8; n];
    for i in 0..n {
        if lo[i] >= 0.0 && g[i] > 0.0 {
            state[i] = -1;
        } else if hi[i] <= 0.0 && g[i] < 0.0 {
            state[i] = 1;
        }
    }
    let max_changes = 10 * n + 50;
    for changes in 0..max_changes {
        let free: Vec<usize> = (0..n).filter(|&i| state[i] == 0).collect();
        let mut target = x.clone();
        if !free.is_empty() {
            let nf = free.len();
            let hff = DMatrix::from_fn(nf, nf, |a, b| h[(free[a], free[b])]);
            // right-hand side: -(g_f + H_fb x_b)
            let rhs = DVector::from_fn(nf, |a, _| {
                let i = free[a];
                let mut v = g[i];
                for j in 0..n {
                    if state[j] != 0 {
                        v += h[(i, j)] * x[j];
                    }
                }
                -v
            });
            let sol = match hff.clone().cholesky() {
                Some(c) => c.solve(&rhs),
                None => {
                    let shift = 1e-10 * hff.diagonal().amax().max(1.0);
                    let reg = hff + DMatrix::identity(nf, nf) * shift;
                    match reg.cholesky() {
                        Some(c) => c.solve(&rhs),
                        None => return (x, changes),
                    }
                }
            };
            for (a, &i) in free.iter().enumerate() {
                target[i] = sol[a];
            }
        }
        // longest feasible step towards the subspace minimizer
        let mut alpha = 1.0;
        let mut blocking = None;
        for &i in &free {
            let d = target[i] - x[i];
            if d < 0.0 && target[i] < lo[i] {
                let a = (lo[i] - x[i]) / d;
                if a < alpha {
                    alpha = a;
                    blocking = Some((i, -1));
                }
            } else if d > 0.0 && target[i] > hi[i] {
                let a = (hi[i] - x[i]) / d;
                if a < alpha {
                    alpha = a;
                    blocking = Some((i, 1));
                }
            }
        }
        for &i in &free {
            x[i] += alpha.max(0.0) * (target[i] - x[i]);
        }
        if let Some((i, side)) = blocking {
            x[i] = if side < 0 { lo[i] } else { hi[i] };
            state[i] = side;
            continue;
        }
        // subspace optimum reached: release the bound with the worst multiplier
        let grad = h * &x + g;
        let mut worst = None;
        let mut worst_val = 1e-12 * (1.0 + g.amax());
        for i in 0..n {
            let v = match state[i] {
                -1 => -grad[i],
                1 => grad[i],
                _ => continue,
            };
            if v > worst_val {
                worst_val = v;
                worst = Some(i);
            }
        }
        match worst {
            Some(i) => state[i] = 0,
            None => return (x, changes),
        }
    }
    (x, max_changes)
}
