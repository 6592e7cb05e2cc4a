//! Gauss-Newton SQP with a box-constrained QP subproblem and Armijo
//! backtracking on the merit `J + penalty`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::problem::{Evaluation, MpcProblem};
use super::qp::solve_box_qp;
use super::{MpcError, PlannedTrajectory, SolveDiagnostics};

/// Projected-gradient stationarity measure `max |U - P(U - grad)|`.
pub fn kkt_residual(u: &DVector<f64>, grad: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> f64 {
    (0..u.len()).map(|i| (u[i] - (u[i] - grad[i]).clamp(lo[i], hi[i])).abs()).fold(0.0, f64::max)
}

/// Solves the problem from its warm start; `t0` stamps the first state.
pub fn solve(problem: &MpcProblem<'_>, t0: f64) -> Result<PlannedTrajectory, MpcError> {
    let start = Instant::now();
    let (lo, hi) = (problem.lower_bounds(), problem.upper_bounds());
    let mut u = problem.warm_vector();
    let mut ev = problem.evaluate(&u, true);
    let mut damping = 0.0;
    let mut iterations = 0;
    let mut converged = false;
    let mut kkt = f64::INFINITY;

    while iterations <= problem.cfg.max_iterations {
        let jac = ev.jacobian.as_ref().expect("jacobian requested");
        let grad = 2.0 * jac.tr_mul(&ev.residuals);
        if !grad.iter().all(|g| g.is_finite()) {
            return Err(MpcError::NonFinite(iterations));
        }
        kkt = kkt_residual(&u, &grad, &lo, &hi);
        if kkt < problem.cfg.kkt_tol {
            converged = true;
            break;
        }
        if iterations == problem.cfg.max_iterations {
            break;
        }
        iterations += 1;

        let jtj = 2.0 * jac.tr_mul(jac);
        let scale = jtj.diagonal().amax().max(1.0);
        let merit = ev.merit();
        let mut accepted = None;
        while damping < 1e8 * scale {
            let h = &jtj + DMatrix::identity(u.len(), u.len()) * (damping + 1e-12 * scale);
            let (d, _) = solve_box_qp(&h, &grad, &(&lo - &u), &(&hi - &u));
            let slope = grad.dot(&d);
            if !(slope < 0.0) {
                break;
            }
            let mut alpha = 1.0;
            for _ in 0..30 {
                let trial = (&u + alpha * &d).zip_zip_map(&lo, &hi, |v, l, h| v.clamp(l, h));
                let te = problem.evaluate(&trial, false);
                if !te.residuals.iter().all(|r| r.is_finite()) {
                    return Err(MpcError::NonFinite(iterations));
                }
                if te.merit() <= merit + 1e-4 * alpha * slope {
                    accepted = Some(trial);
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() {
                damping *= 0.1;
                if damping < 1e-9 * scale {
                    damping = 0.0;
                }
                break;
            }
            damping = if damping == 0.0 { 1e-6 * scale } else { damping * 10.0 };
        }
        match accepted {
            Some(next) => {
                u = next;
                ev = problem.evaluate(&u, true);
            }
            None => break,
        }
    }
    Ok(trajectory(problem, &u, &ev, t0, SolveDiagnostics {
        iterations,
        converged,
        kkt_residual: kkt,
        cost: ev.cost(),
        penalty: ev.penalty(),
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    }))
}

fn trajectory(problem: &MpcProblem<'_>, u: &DVector<f64>, ev: &Evaluation, t0: f64, diagnostics: SolveDiagnostics) -> PlannedTrajectory {
    let controls = (0..problem.stages())
        .map(|k| problem.slacks(u[2 * k], u[2 * k + 1], &ev.states[k + 1]))
        .collect();
    PlannedTrajectory {
        t0,
        dt: problem.cfg.dt,
        states: ev.states.clone(),
        controls,
        v_heur: problem.v_heur.clone(),
        diagnostics,
    }
}
