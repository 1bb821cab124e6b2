//! Composite Gauss–Legendre quadrature.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point rule on `[-1, 1]`.
pub fn gauss_legendre_rule(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        out.push((x, 2.0 / ((1.0 - x * x) * d * d)));
    }
    out.reverse();
    out
}

/// `P_n(x)` and `P_n'(x)`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates `f` over `[a, b]` with `panels` equal panels of a 20-point
/// rule between each pair of consecutive breakpoints.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, breakpoints: &[f64], panels: usize) -> f64 {
    let rule = gauss_legendre_rule(20);
    let mut pts: Vec<f64> = std::iter::once(a)
        .chain(breakpoints.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut total = 0.0;
    for w in pts.windows(2) {
        let h = (w[1] - w[0]) / panels as f64;
        for p in 0..panels {
            let lo = w[0] + p as f64 * h;
            let mid = lo + 0.5 * h;
            total += 0.5 * h * rule.iter().map(|&(x, wt)| wt * f(mid + 0.5 * h * x)).sum::<f64>();
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 20, 32] {
            let s: f64 = gauss_legendre_rule(n).iter().map(|p| p.1).sum();
            assert!((s - 2.0).abs() < 1e-13, "{n}: {s}");
        }
    }

    #[test]
    fn exact_for_polynomials() {
        let v = integrate(|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0, &[], 1);
        assert!((v - (32.0 - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn handles_breakpoints() {
        let step = |x: f64| if x < 0.3 { 1.0 } else { 2.0 };
        let v = integrate(step, 0.0, 1.0, &[0.3], 1);
        assert!((v - (0.3 + 1.4)).abs() < 1e-14);
    }
}
