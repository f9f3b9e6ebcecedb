//! Gauss-Legendre quadrature, used where an integrand has no closed-form
//! antiderivative (time-dependent count modulation).

use std::sync::OnceLock;

pub const ORDER: usize = 20;

fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| legendre_rule(ORDER))
}

/// Integral of `f` over `[a, b]` with a single 20-point Gauss-Legendre panel.
pub fn integrate<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    let (nodes, weights) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    half * nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
}

/// Composite rule over `panels` equal panels.
pub fn integrate_composite<F: FnMut(f64) -> f64>(a: f64, b: f64, panels: usize, mut f: F) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| integrate(a + k as f64 * h, a + (k + 1) as f64 * h, &mut f))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_high_degree_polynomials() {
        let v = integrate(0.0, 2.0, |x| x.powi(30));
        assert!((v - 2f64.powi(31) / 31.0).abs() < 1e-12 * v);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        assert!((integrate(-1.0, 3.0, |_| 1.0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_non_polynomial() {
        let v = integrate_composite(0.0, 1.0, 4, f64::exp);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-14);
    }
}
