//! Gauss–Legendre and periodic-trapezoid rules used by the trace
//! functionals and the witness Fourier integrals.

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
///
/// Newton iteration on P_n from the Chebyshev initial guess; accurate
/// to machine precision for the orders used here (up to a few hundred).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            // evaluate P_n(x) and its derivative by upward recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            // n == 1 never enters the loop above; p1 = x, p0 = 1
            pp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|wi| wi * half).collect(),
    )
}

/// Uniform nodes for the periodic trapezoid rule on [0, 2π); the
/// common weight is 2π / n.  Spectrally accurate for smooth periodic
/// integrands.
pub fn periodic_angles(n: usize) -> (Vec<f64>, f64) {
    let step = 2.0 * std::f64::consts::PI / n as f64;
    ((0..n).map(|i| i as f64 * step).collect(), step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // ∫_{-1}^{1} t^10 dt = 2/11 needs n >= 6; n = 8 is exact up to t^15
        let s: f64 = x.iter().zip(&w).map(|(t, wi)| wi * t.powi(10)).sum();
        assert_abs_diff_eq!(s, 2.0 / 11.0, epsilon = 1e-14);
        let s: f64 = x.iter().zip(&w).map(|(t, wi)| wi * t.powi(15)).sum();
        assert_abs_diff_eq!(s, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn high_order_oscillatory() {
        // ∫_{-1}^{1} cos(40 t) dt = 2 sin(40)/40
        let (x, w) = gauss_legendre(120);
        let s: f64 = x.iter().zip(&w).map(|(t, wi)| wi * (40.0 * t).cos()).sum();
        assert_abs_diff_eq!(s, 2.0 * (40.0_f64).sin() / 40.0, epsilon = 1e-12);
    }

    #[test]
    fn mapped_interval() {
        let (x, w) = gauss_legendre_on(32, 0.5, 1.0);
        let s: f64 = x.iter().zip(&w).map(|(t, wi)| wi / t).sum();
        assert_abs_diff_eq!(s, (2.0_f64).ln(), epsilon = 1e-14);
    }

    #[test]
    fn trapezoid_on_circle() {
        let (angles, w) = periodic_angles(64);
        let s: f64 = angles.iter().map(|t| w * t.cos().powi(2)).sum();
        assert_abs_diff_eq!(s, std::f64::consts::PI, epsilon = 1e-13);
    }
}
