//! Trace functionals on symbols: the lattice trace Σ_k τ[ρ(k)], the
//! noncommutative residue, the canonical trace as a finite-part
//! integral, and its holomorphic gauging as explicit Laurent data.
//!
//! The split radius of the finite-part integral is fixed at the
//! cutoff's outer radius r1 = 1.  The tail ∫_{|ξ|≥1} of a term
//! coef·ξ^α·|ξ|^s integrates in closed form to
//! τ(coef) · M(α) · (-1/(deg+n)) with M(α) the sphere monomial moment
//! and deg = s + |α|; the transition shell r0 ≤ |ξ| ≤ 1 is handled by
//! a product quadrature, and smoothing remainders enter through their
//! lattice sums.  Gauging a term by |ξ|^z shifts the closed form to
//! -1/(z + deg + n), so the Laurent data at z = 0 is exact rational
//! arithmetic: only degree -n terms produce the simple pole.

use num_complex::Complex64;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre_on, periodic_angles};
use crate::quantize::lattice_box;
use crate::report::MeromorphicValue;
use crate::symbol::ClassicalSymbol;

const INT_TOL: f64 = 1e-9;

/// Monomial moments over the unit sphere: ∫_{S^{n-1}} ξ^α dσ.
///
/// Zero whenever some α_i is odd; otherwise
/// 2 Π_i Γ((α_i+1)/2) / Γ((|α|+n)/2).
#[derive(Debug, Clone)]
pub struct SphereMoments {
    n: usize,
}

impl SphereMoments {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn closed_form(&self, alpha: &[u32]) -> f64 {
        assert_eq!(alpha.len(), self.n);
        if alpha.iter().any(|a| a % 2 == 1) {
            return 0.0;
        }
        let mut num = 2.0;
        for a in alpha {
            num *= gamma((*a as f64 + 1.0) / 2.0);
        }
        let total: u32 = alpha.iter().sum();
        num / gamma((total as f64 + self.n as f64) / 2.0)
    }

    /// Independent quadrature of the same moment; n = 2 uses the
    /// periodic trapezoid rule on the circle, n = 3 a product
    /// Gauss–Legendre × trapezoid rule on the sphere.
    pub fn quadrature(&self, alpha: &[u32]) -> f64 {
        assert_eq!(alpha.len(), self.n);
        match self.n {
            2 => {
                let m = 4096;
                let (angles, w) = periodic_angles(m);
                angles
                    .iter()
                    .map(|t| w * t.cos().powi(alpha[0] as i32) * t.sin().powi(alpha[1] as i32))
                    .sum()
            }
            3 => {
                // ξ = (√(1-x²) cos φ, √(1-x²) sin φ, x)
                let (xs, wx) = gauss_legendre_on(64, -1.0, 1.0);
                let (angles, wphi) = periodic_angles(512);
                let mut total = 0.0;
                for (x, wxi) in xs.iter().zip(&wx) {
                    let s = (1.0 - x * x).max(0.0).sqrt();
                    let ring: f64 = angles
                        .iter()
                        .map(|phi| {
                            wphi * (s * phi.cos()).powi(alpha[0] as i32)
                                * (s * phi.sin()).powi(alpha[1] as i32)
                                * x.powi(alpha[2] as i32)
                        })
                        .sum();
                    total += wxi * ring;
                }
                total
            }
            _ => unimplemented!("sphere quadrature implemented for n = 2, 3"),
        }
    }
}

/// Value plus error estimate of a numerically evaluated functional.
#[derive(Debug, Clone)]
pub struct TraceValue {
    pub value: Complex64,
    pub error_estimate: f64,
    /// (box radius, partial value) pairs feeding the extrapolation.
    pub levels: Vec<(i64, Complex64)>,
}

/// Quadrature and summation parameters of the trace functionals.
#[derive(Debug, Clone)]
pub struct TraceParams {
    /// Expanding box radii for the lattice sums.
    pub lattice_levels: Vec<i64>,
    /// Radial Gauss–Legendre order of the shell integral.
    pub radial_order: usize,
    /// Angular points of the shell integral.
    pub angular_order: usize,
}

impl Default for TraceParams {
    fn default() -> Self {
        Self { lattice_levels: vec![64, 128, 256], radial_order: 64, angular_order: 256 }
    }
}

/// Tr(P_ρ) = Σ_k τ[ρ(k)] for symbols of order < -n (or pure smoothing
/// remainders), evaluated over expanding boxes with Richardson
/// extrapolation in the known tail exponent Re(q) + n.
pub fn lattice_trace(rho: &ClassicalSymbol, params: &TraceParams) -> Result<TraceValue> {
    let n = rho.dim();
    let smoothing = rho.is_smoothing();
    if !smoothing && rho.order().re >= -(n as f64) {
        return Err(Error::DivergentTrace { order: rho.order().re, n });
    }

    let levels = &params.lattice_levels;
    let kmax = *levels.iter().max().expect("at least one lattice level");
    let mut partial = Complex64::default();
    let mut at_levels: Vec<(i64, Complex64)> = Vec::with_capacity(levels.len());
    let mut outer_ring = 0.0_f64;

    // remainder contributes its full (compact) lattice sum
    if let Some(rem) = &rho.remainder {
        for v in rem.samples.values() {
            partial += v.tau();
        }
    }

    // expanding shells of the homogeneous tau-profile
    if !smoothing || levels.is_empty() {
        for radius in 0..=kmax {
            let mut ring = Complex64::default();
            for k in shell(n, radius) {
                let xi: Vec<f64> = k.iter().map(|x| *x as f64).collect();
                ring += tau_homogeneous(rho, &xi);
            }
            partial += ring;
            if radius == kmax {
                outer_ring = ring.norm();
            }
            if let Some(_) = levels.iter().find(|l| **l == radius) {
                at_levels.push((radius, partial));
            }
        }
    } else {
        at_levels.push((0, partial));
    }

    if smoothing {
        return Ok(TraceValue { value: partial, error_estimate: outer_ring, levels: at_levels });
    }

    // Richardson in the tail exponent p = Re q + n, then once more in
    // p - 1 to clear the subleading boundary term of box sums.
    let p = rho.order().re + n as f64;
    let value = richardson(&at_levels, p);
    Ok(TraceValue { value: value.0, error_estimate: value.1, levels: at_levels })
}

fn tau_homogeneous(rho: &ClassicalSymbol, xi: &[f64]) -> Complex64 {
    let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
    let weight = match &rho.cutoff {
        Some(c) => c.one_minus_psi(r),
        None => 1.0,
    };
    if weight <= 0.0 || r == 0.0 {
        return Complex64::default();
    }
    let mut out = Complex64::default();
    for c in rho.components() {
        out += c.tau_profile(xi, r);
    }
    out * weight
}

fn shell(n: usize, radius: i64) -> Vec<Vec<i64>> {
    if radius == 0 {
        return vec![vec![0; n]];
    }
    lattice_box(n, radius)
        .into_iter()
        .filter(|k| k.iter().map(|x| x.abs()).max().unwrap() == radius)
        .collect()
}

fn richardson(levels: &[(i64, Complex64)], p: f64) -> (Complex64, f64) {
    if levels.len() < 2 || p >= 0.0 {
        let last = levels.last().map(|l| l.1).unwrap_or_default();
        return (last, f64::INFINITY);
    }
    // first stage: remove the K^p tail between consecutive levels
    let mut first = Vec::with_capacity(levels.len() - 1);
    for w in levels.windows(2) {
        let (k1, s1) = w[0];
        let (k2, s2) = w[1];
        let r1 = (k1 as f64).powf(p);
        let r2 = (k2 as f64).powf(p);
        let c = (s2 - s1) / (r1 - r2);
        first.push((k2, s2 + c * r2));
    }
    if first.len() < 2 {
        return (first[0].1, f64::INFINITY);
    }
    // second stage at exponent p - 1
    let q = p - 1.0;
    let mut second = Vec::with_capacity(first.len() - 1);
    for w in first.windows(2) {
        let (k1, s1) = w[0];
        let (k2, s2) = w[1];
        let r1 = (k1 as f64).powf(q);
        let r2 = (k2 as f64).powf(q);
        let c = (s2 - s1) / (r1 - r2);
        second.push((k2, s2 + c * r2));
    }
    let value = second.last().unwrap().1;
    let err = (value - first.last().unwrap().1).norm();
    (value, err)
}

/// The noncommutative residue: ∫_{S^{n-1}} τ[ρ_{-n}(ξ)] dσ, evaluated
/// in closed form through the sphere moments.  Returns 0 for
/// non-integer orders and for symbols without a degree -n component
/// (in particular for differential-operator symbols and smoothing
/// remainders).
pub fn nc_residue(rho: &ClassicalSymbol) -> Complex64 {
    let n = rho.dim();
    if !rho.has_integer_order() {
        return Complex64::default();
    }
    let target = Complex64::new(-(n as f64), 0.0);
    let moments = SphereMoments::new(n);
    match rho.component_of_degree(target) {
        None => Complex64::default(),
        Some(c) => {
            let mut total = Complex64::default();
            for t in &c.terms {
                // |ξ| = 1 on the sphere, so the radial factor drops out
                total += t.coef.tau() * moments.closed_form(&t.monomial);
            }
            total
        }
    }
}

/// The canonical trace of a non-integer-order symbol, realized as
/// closed-form tails over |ξ| ≥ 1, a shell quadrature of the
/// cutoff-weighted trace over |ξ| ≤ 1, and the lattice sum of the
/// smoothing remainder.  Agrees with [`lattice_trace`] when
/// Re(order) < -n.
pub fn canonical_trace(rho: &ClassicalSymbol, params: &TraceParams) -> Result<TraceValue> {
    if !rho.is_smoothing() && rho.has_integer_order() {
        return Err(Error::IntegerOrder { order: rho.order().re });
    }
    let gauged = gauged_core(rho, params, false)?;
    Ok(TraceValue { value: gauged.0.finite(), error_estimate: gauged.1, levels: Vec::new() })
}

/// The gauged trace: the Laurent data at z = 0 of the canonical trace
/// along the holomorphic gauging that multiplies the tail of each
/// homogeneous term by |ξ|^z and leaves the shell and the smoothing
/// remainder untouched.  The pole coefficient collects exactly the
/// degree -n terms and satisfies pole = -residue.
pub fn gauged_trace(rho: &ClassicalSymbol, params: &TraceParams) -> Result<MeromorphicValue> {
    Ok(gauged_core(rho, params, true)?.0)
}

fn gauged_core(
    rho: &ClassicalSymbol,
    params: &TraceParams,
    allow_pole: bool,
) -> Result<(MeromorphicValue, f64)> {
    let n = rho.dim();
    let nn = Complex64::new(n as f64, 0.0);
    let moments = SphereMoments::new(n);

    let mut pole = Complex64::default();
    let mut finite = Complex64::default();

    // (a) closed-form tails: each term contributes
    //     τ(coef)·M(α)·(-1/(z + deg + n)) over |ξ| ≥ 1
    for c in rho.components() {
        for t in &c.terms {
            let weight = t.coef.tau() * moments.closed_form(&t.monomial);
            if weight == Complex64::default() {
                continue;
            }
            let d = c.degree + nn;
            if d.norm() < INT_TOL {
                if !allow_pole {
                    return Err(Error::IntegerOrder { order: rho.order().re });
                }
                pole -= weight;
            } else {
                finite -= weight / d;
            }
        }
    }

    // (b) shell quadrature of the cutoff-weighted trace over |ξ| ≤ 1;
    //     supported in [r0, r1] when a cutoff is present.
    let (shell_value, shell_err) = shell_integral(rho, params.radial_order, params.angular_order)?;
    finite += shell_value;

    // (c) the smoothing remainder enters through its lattice sum
    if let Some(rem) = &rho.remainder {
        for v in rem.samples.values() {
            finite += v.tau();
        }
    }

    Ok((MeromorphicValue::new(pole, finite), shell_err))
}

fn shell_integral(
    rho: &ClassicalSymbol,
    radial_order: usize,
    angular_order: usize,
) -> Result<(Complex64, f64)> {
    if rho.components().iter().all(|c| c.is_zero()) {
        return Ok((Complex64::default(), 0.0));
    }
    let (lo, hi) = match &rho.cutoff {
        Some(c) => (c.r0, c.r1.min(1.0)),
        None => (0.0, 1.0),
    };
    if hi <= lo {
        return Ok((Complex64::default(), 0.0));
    }
    let coarse = shell_integral_at(rho, lo, hi, radial_order, angular_order)?;
    let fine = shell_integral_at(rho, lo, hi, radial_order * 2, angular_order * 2)?;
    Ok((fine, (fine - coarse).norm()))
}

fn shell_integral_at(
    rho: &ClassicalSymbol,
    lo: f64,
    hi: f64,
    radial_order: usize,
    angular_order: usize,
) -> Result<Complex64> {
    let n = rho.dim();
    let (rs, wr) = gauss_legendre_on(radial_order, lo, hi);
    let mut total = Complex64::default();
    match n {
        2 => {
            let (angles, wphi) = periodic_angles(angular_order);
            for (r, wri) in rs.iter().zip(&wr) {
                let mut ring = Complex64::default();
                for phi in &angles {
                    let xi = [r * phi.cos(), r * phi.sin()];
                    ring += tau_homogeneous(rho, &xi);
                }
                total += ring * (wphi * wri * r);
            }
        }
        3 => {
            let (xs, wx) = gauss_legendre_on(radial_order.min(48), -1.0, 1.0);
            let (angles, wphi) = periodic_angles(angular_order.min(128));
            for (r, wri) in rs.iter().zip(&wr) {
                let mut sphere = Complex64::default();
                for (x, wxi) in xs.iter().zip(&wx) {
                    let s = (1.0 - x * x).max(0.0).sqrt();
                    for phi in &angles {
                        let xi = [r * s * phi.cos(), r * s * phi.sin(), r * x];
                        sphere += tau_homogeneous(rho, &xi) * (wxi * wphi);
                    }
                }
                total += sphere * (wri * r * r);
            }
        }
        _ => {
            return Err(Error::UnsupportedDecomposition(
                "shell quadrature implemented for n = 2, 3".into(),
            ))
        }
    }
    Ok(total)
}
