//! Fixed-step classical Runge-Kutta integration over fixed-size state arrays.
//!
//! Both the planning model and the plant are stepped with the same
//! zero-order-hold scheme: the input is frozen for the whole step and the
//! four stage evaluations only see the state.

/// One classical RK4 step of `x' = f(x)` with step `dt`.
pub fn rk4_step<const N: usize, F>(x: &[f64; N], dt: f64, mut f: F) -> [f64; N]
where
    F: FnMut(&[f64; N]) -> [f64; N],
{
    let k1 = f(x);
    let k2 = f(&axpy(x, 0.5 * dt, &k1));
    let k3 = f(&axpy(x, 0.5 * dt, &k2));
    let k4 = f(&axpy(x, dt, &k3));
    let mut out = *x;
    for i in 0..N {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// `x + a * y`
#[inline]
pub fn axpy<const N: usize>(x: &[f64; N], a: f64, y: &[f64; N]) -> [f64; N] {
    let mut out = *x;
    for i in 0..N {
        out[i] += a * y[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_cubic_polynomial() {
        // x' = 3t^2 with t carried as a state: RK4 integrates cubics exactly.
        let f = |x: &[f64; 2]| [3.0 * x[1] * x[1], 1.0];
        let mut x = [0.0, 0.0];
        for _ in 0..10 {
            x = rk4_step(&x, 0.1, f);
        }
        assert!((x[0] - 1.0).abs() < 1e-13);
    }

    #[test]
    fn global_order_is_four_on_exponential_decay() {
        let run = |dt: f64| {
            let n = (1.0 / dt).round() as usize;
            let mut x = [1.0];
            for _ in 0..n {
                x = rk4_step(&x, dt, |x| [-2.0 * x[0]]);
            }
            (x[0] - (-2.0f64).exp()).abs()
        };
        let ratio = run(0.02) / run(0.01);
        assert!((ratio.log2() - 4.0).abs() < 0.1, "ratio {ratio}");
    }
}
