//! Exact arithmetic in the smooth noncommutative torus.
//!
//! An element is a finitely supported map Z^n → C read as u = Σ u_k U^k,
//! with U^k = U_1^{k_1} ⋯ U_n^{k_n}.  The generator relation
//! U_l U_j = e^{2πiθ_{jl}} U_j U_l fixes, for the ordered products U^k,
//! the bilinear phase cocycle
//!
//!   U^k · U^l = e^{2πi c(k,l)} U^{k+l},   c(k,l) = Σ_{j<i} θ_{ji} k_i l_j,
//!
//! obtained by commuting U^k U^l into normal order one generator at a
//! time.  All operations below are pure; coefficients with modulus
//! below [`PRUNE_THRESHOLD`] are dropped after arithmetic so supports
//! stay finite.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Coefficients smaller than this in modulus are removed after every
/// arithmetic operation.  Small enough not to disturb 1e-13 level
/// identities, large enough to keep supports from accreting noise.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// Lattice index k ∈ Z^n.
pub type Index = Vec<i64>;

/// The real antisymmetric deformation matrix θ.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaMatrix {
    n: usize,
    entries: Vec<f64>, // row-major n×n
}

impl ThetaMatrix {
    /// Builds a matrix from row-major entries, enforcing antisymmetry.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config {
                field: "dimension".into(),
                msg: format!("dimension must be >= 2, got {n}"),
            });
        }
        if entries.len() != n * n {
            return Err(Error::Config {
                field: "theta".into(),
                msg: format!("expected {} entries, got {}", n * n, entries.len()),
            });
        }
        for j in 0..n {
            for l in 0..n {
                if (entries[j * n + l] + entries[l * n + j]).abs() > 1e-12 {
                    return Err(Error::Config {
                        field: "theta".into(),
                        msg: format!("entry ({j},{l}) breaks antisymmetry"),
                    });
                }
            }
        }
        Ok(Self { n, entries })
    }

    /// The zero matrix: the ordinary torus.
    pub fn zero(n: usize) -> Self {
        Self { n, entries: vec![0.0; n * n] }
    }

    /// n = 2 torus with the single angle θ_{12}.
    pub fn two_dim(theta12: f64) -> Self {
        Self { n: 2, entries: vec![0.0, theta12, -theta12, 0.0] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, j: usize, l: usize) -> f64 {
        self.entries[j * self.n + l]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| *e == 0.0)
    }
}

/// The bilinear phase c(k,l) with U^k U^l = e^{2πi c(k,l)} U^{k+l}.
///
/// Bilinearity makes the cocycle identity
/// c(k,l) + c(k+l,m) = c(l,m) + c(k,l+m) hold exactly, and
/// c(e_l, e_j) - c(e_j, e_l) = θ_{jl} for j < l recovers the generator
/// relation.
#[derive(Debug, Clone)]
pub struct PhaseCocycle {
    theta: Arc<ThetaMatrix>,
}

impl PhaseCocycle {
    pub fn new(theta: Arc<ThetaMatrix>) -> Self {
        Self { theta }
    }

    /// c(k,l) = Σ_{j<i} θ_{ji} k_i l_j.
    pub fn bilinear(&self, k: &[i64], l: &[i64]) -> f64 {
        let n = self.theta.dim();
        let mut c = 0.0;
        for j in 0..n {
            if l[j] == 0 {
                continue;
            }
            for i in (j + 1)..n {
                if k[i] == 0 {
                    continue;
                }
                c += self.theta.entry(j, i) * (k[i] as f64) * (l[j] as f64);
            }
        }
        c
    }

    /// e^{2πi c(k,l)}, with the argument reduced mod 1 before
    /// exponentiation to avoid precision loss for large indices.
    pub fn phase(&self, k: &[i64], l: &[i64]) -> Complex64 {
        let c = self.bilinear(k, l);
        let reduced = c - c.round();
        Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * reduced)
    }
}

/// A finitely supported Fourier series u = Σ u_k U^k in Aθ.
#[derive(Debug, Clone)]
pub struct TorusElement {
    theta: Arc<ThetaMatrix>,
    coeffs: BTreeMap<Index, Complex64>,
}

impl TorusElement {
    pub fn zero(theta: Arc<ThetaMatrix>) -> Self {
        Self { theta, coeffs: BTreeMap::new() }
    }

    /// The unit 1 = U^0.
    pub fn unit(theta: Arc<ThetaMatrix>) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(vec![0; theta.dim()], Complex64::new(1.0, 0.0));
        Self { theta, coeffs }
    }

    /// The basis unitary U^k.
    pub fn generator(theta: Arc<ThetaMatrix>, k: &[i64]) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(k.to_vec(), Complex64::new(1.0, 0.0));
        Self { theta, coeffs }
    }

    /// λ·1 for a complex scalar λ.
    pub fn scalar(theta: Arc<ThetaMatrix>, lambda: Complex64) -> Self {
        let mut e = Self::zero(theta);
        if lambda.norm() >= PRUNE_THRESHOLD {
            let n = e.theta.dim();
            e.coeffs.insert(vec![0; n], lambda);
        }
        e
    }

    pub fn from_coeffs(theta: Arc<ThetaMatrix>, coeffs: BTreeMap<Index, Complex64>) -> Result<Self> {
        let n = theta.dim();
        for k in coeffs.keys() {
            if k.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: k.len() });
            }
        }
        let mut e = Self { theta, coeffs };
        e.prune();
        Ok(e)
    }

    pub fn theta(&self) -> &Arc<ThetaMatrix> {
        &self.theta
    }

    pub fn coeffs(&self) -> &BTreeMap<Index, Complex64> {
        &self.coeffs
    }

    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// True when supported on k = 0 only, i.e. a scalar multiple of 1.
    pub fn is_scalar(&self) -> bool {
        self.coeffs.keys().all(|k| k.iter().all(|c| *c == 0))
    }

    pub fn support_size(&self) -> usize {
        self.coeffs.len()
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, c| c.norm() >= PRUNE_THRESHOLD);
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.theta, &other.theta) || self.theta == other.theta {
            Ok(())
        } else if self.theta.dim() != other.theta.dim() {
            Err(Error::DimensionMismatch { expected: self.theta.dim(), got: other.theta.dim() })
        } else {
            Err(Error::ThetaMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let mut coeffs = self.coeffs.clone();
        for (k, c) in &other.coeffs {
            *coeffs.entry(k.clone()).or_default() += c;
        }
        let mut e = Self { theta: self.theta.clone(), coeffs };
        e.prune();
        Ok(e)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, lambda: Complex64) -> Self {
        let mut e = self.clone();
        for c in e.coeffs.values_mut() {
            *c *= lambda;
        }
        e.prune();
        e
    }

    /// Twisted product: Σ_{k,l} u_k v_l e^{2πi c(k,l)} U^{k+l}.
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let cocycle = PhaseCocycle::new(self.theta.clone());
        let mut coeffs: BTreeMap<Index, Complex64> = BTreeMap::new();
        for (k, a) in &self.coeffs {
            for (l, b) in &other.coeffs {
                let phase = cocycle.phase(k, l);
                let sum: Index = k.iter().zip(l).map(|(x, y)| x + y).collect();
                *coeffs.entry(sum).or_default() += a * b * phase;
            }
        }
        let mut e = Self { theta: self.theta.clone(), coeffs };
        e.prune();
        Ok(e)
    }

    /// The involution: (U^k)* = e^{-2πi c(k,-k)} U^{-k}, antilinear on
    /// coefficients.
    pub fn adjoint(&self) -> Self {
        let cocycle = PhaseCocycle::new(self.theta.clone());
        let mut coeffs: BTreeMap<Index, Complex64> = BTreeMap::new();
        for (k, a) in &self.coeffs {
            let neg: Index = k.iter().map(|x| -x).collect();
            let c = cocycle.bilinear(k, &neg);
            let reduced = c - c.round();
            let phase = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * reduced);
            *coeffs.entry(neg).or_default() += a.conj() * phase;
        }
        let mut e = Self { theta: self.theta.clone(), coeffs };
        e.prune();
        e
    }

    /// The canonical trace state: τ(Σ u_k U^k) = u_0.
    pub fn tau(&self) -> Complex64 {
        self.coeff(&vec![0; self.theta.dim()])
    }

    /// Iterated derivations δ^β: multiplies u_k by k^β.
    pub fn delta(&self, beta: &[u32]) -> Self {
        let mut coeffs = BTreeMap::new();
        for (k, a) in &self.coeffs {
            let mut factor = 1.0_f64;
            for (kj, bj) in k.iter().zip(beta) {
                factor *= (*kj as f64).powi(*bj as i32);
            }
            if factor != 0.0 {
                coeffs.insert(k.clone(), a * factor);
            }
        }
        let mut e = Self { theta: self.theta.clone(), coeffs };
        e.prune();
        e
    }

    /// The torus action α_s: multiplies u_k by e^{i s·k}.
    pub fn act(&self, s: &[f64]) -> Self {
        let mut coeffs = BTreeMap::new();
        for (k, a) in &self.coeffs {
            let arg: f64 = s.iter().zip(k).map(|(sj, kj)| sj * (*kj as f64)).sum();
            coeffs.insert(k.clone(), a * Complex64::from_polar(1.0, arg));
        }
        Self { theta: self.theta.clone(), coeffs }
    }

    /// Partial inverse of the flat Laplacian: divides u_k by |k|² and
    /// annihilates the k = 0 mode, so Δ Δ^{-1} u = u - τ(u)·1 exactly.
    pub fn laplacian_inverse(&self) -> Self {
        let mut coeffs = BTreeMap::new();
        for (k, a) in &self.coeffs {
            let norm2: i64 = k.iter().map(|x| x * x).sum();
            if norm2 != 0 {
                coeffs.insert(k.clone(), a / (norm2 as f64));
            }
        }
        let mut e = Self { theta: self.theta.clone(), coeffs };
        e.prune();
        e
    }

    /// GNS inner product ⟨u|v⟩ = τ(u v*); {U^k} is orthonormal for it.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        Ok(self.multiply(&other.adjoint())?.tau())
    }

    /// ℓ² norm of the coefficient vector; equals the Hilbert norm since
    /// the basis {U^k} is orthonormal.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest coefficient deviation between two elements.
    pub fn sup_diff(&self, other: &Self) -> f64 {
        let mut m = 0.0_f64;
        for (k, a) in &self.coeffs {
            m = m.max((a - other.coeff(k)).norm());
        }
        for (k, b) in &other.coeffs {
            if !self.coeffs.contains_key(k) {
                m = m.max(b.norm());
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn theta_golden() -> Arc<ThetaMatrix> {
        Arc::new(ThetaMatrix::two_dim((5.0_f64.sqrt() - 1.0) / 2.0))
    }

    fn random_element(theta: &Arc<ThetaMatrix>, rng: &mut ChaCha8Rng, terms: usize) -> TorusElement {
        let n = theta.dim();
        let mut coeffs = BTreeMap::new();
        for _ in 0..terms {
            let k: Index = (0..n).map(|_| rng.gen_range(-3..=3)).collect();
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            coeffs.insert(k, c);
        }
        TorusElement::from_coeffs(theta.clone(), coeffs).unwrap()
    }

    /// Brute-force product over all coefficient pairs, kept separate
    /// from `multiply` so it can serve as an oracle.
    fn expansion_oracle(u: &TorusElement, v: &TorusElement) -> TorusElement {
        let theta = u.theta().clone();
        let n = theta.dim();
        let mut out = TorusElement::zero(theta.clone());
        for (k, a) in u.coeffs() {
            for (l, b) in v.coeffs() {
                let mut c = 0.0;
                for j in 0..n {
                    for i in (j + 1)..n {
                        c += theta.entry(j, i) * (k[i] as f64) * (l[j] as f64);
                    }
                }
                let phase = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (c - c.round()));
                let sum: Index = k.iter().zip(l).map(|(x, y)| x + y).collect();
                let term = TorusElement::from_coeffs(
                    theta.clone(),
                    [(sum, a * b * phase)].into_iter().collect(),
                )
                .unwrap();
                out = out.add(&term).unwrap();
            }
        }
        out
    }

    #[test]
    fn unit_is_neutral() {
        let theta = theta_golden();
        let one = TorusElement::unit(theta.clone());
        let uk = TorusElement::generator(theta, &[2, -1]);
        assert_eq!(one.multiply(&uk).unwrap().sup_diff(&uk), 0.0);
        assert_eq!(uk.multiply(&one).unwrap().sup_diff(&uk), 0.0);
    }

    #[test]
    fn generator_relation() {
        // U^{(0,1)} U^{(1,0)} = e^{2πiθ} U^{(1,1)}
        let t = (5.0_f64.sqrt() - 1.0) / 2.0;
        let theta = Arc::new(ThetaMatrix::two_dim(t));
        let u2 = TorusElement::generator(theta.clone(), &[0, 1]);
        let u1 = TorusElement::generator(theta.clone(), &[1, 0]);
        let prod = u2.multiply(&u1).unwrap();
        let expected = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * (t - t.round()));
        assert_abs_diff_eq!((prod.coeff(&[1, 1]) - expected).norm(), 0.0, epsilon = 1e-15);
        // reversed order: U^{(1,0)} U^{(0,1)} carries no phase in this
        // normal ordering, so the ratio of the two products is e^{2πiθ}
        let prod2 = u1.multiply(&u2).unwrap();
        let ratio = prod.coeff(&[1, 1]) / prod2.coeff(&[1, 1]);
        assert_abs_diff_eq!((ratio - expected).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn associativity_against_oracle() {
        let theta = theta_golden();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let u = random_element(&theta, &mut rng, 5);
            let v = random_element(&theta, &mut rng, 5);
            let w = random_element(&theta, &mut rng, 5);
            let lhs = u.multiply(&v.multiply(&w).unwrap()).unwrap();
            let rhs = u.multiply(&v).unwrap().multiply(&w).unwrap();
            assert!(lhs.sup_diff(&rhs) < 1e-13);
            // cross-check multiply itself against the expansion oracle
            let o = expansion_oracle(&u, &v);
            assert!(u.multiply(&v).unwrap().sup_diff(&o) < 1e-14);
        }
    }

    #[test]
    fn adjoint_and_inner_product() {
        let theta = theta_golden();
        let one = TorusElement::unit(theta.clone());
        assert_eq!(one.adjoint().sup_diff(&one), 0.0);

        let lambda = Complex64::new(0.3, -0.8);
        let u = TorusElement::generator(theta.clone(), &[2, 1]).scale(lambda);
        // u u* has |λ|² at index 0
        let prod = u.multiply(&u.adjoint()).unwrap();
        assert_abs_diff_eq!(prod.tau().re, lambda.norm_sqr(), epsilon = 1e-15);
        assert_abs_diff_eq!(prod.tau().im, 0.0, epsilon = 1e-15);
        // adjoint is an involution
        assert!(u.adjoint().adjoint().sup_diff(&u) < 1e-15);
        // ⟨U^k|U^k⟩ = 1, ⟨U^k|U^l⟩ = 0
        let uk = TorusElement::generator(theta.clone(), &[3, -2]);
        let ul = TorusElement::generator(theta, &[1, 0]);
        assert_abs_diff_eq!(uk.inner(&uk).unwrap().re, 1.0, epsilon = 1e-15);
        assert_eq!(uk.inner(&ul).unwrap(), Complex64::default());
    }

    #[test]
    fn tau_is_tracial() {
        let theta = theta_golden();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let u = random_element(&theta, &mut rng, 8);
            let v = random_element(&theta, &mut rng, 8);
            let uv = u.multiply(&v).unwrap().tau();
            let vu = v.multiply(&u).unwrap().tau();
            assert!((uv - vu).norm() < 1e-13);
        }
        assert_eq!(TorusElement::unit(theta.clone()).tau(), Complex64::new(1.0, 0.0));
        assert_eq!(TorusElement::generator(theta, &[1, 2]).tau(), Complex64::default());
    }

    #[test]
    fn delta_leibniz_and_action() {
        let theta = theta_golden();
        // δ_1(U_1) = U_1, δ_j(1) = 0
        let u1 = TorusElement::generator(theta.clone(), &[1, 0]);
        assert_eq!(u1.delta(&[1, 0]).sup_diff(&u1), 0.0);
        assert!(TorusElement::unit(theta.clone()).delta(&[1, 0]).is_zero());

        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let u = random_element(&theta, &mut rng, 6);
            let v = random_element(&theta, &mut rng, 6);
            for j in 0..2 {
                let mut beta = [0u32; 2];
                beta[j] = 1;
                let lhs = u.multiply(&v).unwrap().delta(&beta);
                let rhs = u
                    .delta(&beta)
                    .multiply(&v)
                    .unwrap()
                    .add(&u.multiply(&v.delta(&beta)).unwrap())
                    .unwrap();
                assert!(lhs.sup_diff(&rhs) < 1e-13);
            }
        }

        // act(0, u) = u and act(s, U^k) = e^{is·k} U^k
        let u = random_element(&theta, &mut rng, 5);
        assert!(u.act(&[0.0, 0.0]).sup_diff(&u) < 1e-16);
        let s = [0.37, -1.2];
        let uk = TorusElement::generator(theta.clone(), &[2, -3]);
        let expected = Complex64::from_polar(1.0, s[0] * 2.0 + s[1] * (-3.0));
        assert!((uk.act(&s).coeff(&[2, -3]) - expected).norm() < 1e-15);

        // δ_j(u) = (1/i) ∂_{s_j} α_s(u)|_0 via central differences, O(h²)
        let h = 1e-4;
        for j in 0..2 {
            let mut beta = [0u32; 2];
            beta[j] = 1;
            let exact = u.delta(&beta);
            let mut sp = [0.0, 0.0];
            sp[j] = h;
            let mut sm = [0.0, 0.0];
            sm[j] = -h;
            let fd = u
                .act(&sp)
                .sub(&u.act(&sm))
                .unwrap()
                .scale(Complex64::new(0.0, -1.0 / (2.0 * h)));
            assert!(fd.sup_diff(&exact) < 1e-6);
        }
    }

    #[test]
    fn laplacian_inverse_identities() {
        let theta = theta_golden();
        assert!(TorusElement::unit(theta.clone()).laplacian_inverse().is_zero());
        let uk = TorusElement::generator(theta.clone(), &[3, 4]);
        let inv = uk.laplacian_inverse();
        assert_abs_diff_eq!(inv.coeff(&[3, 4]).re, 1.0 / 25.0, epsilon = 1e-18);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let u = random_element(&theta, &mut rng, 10);
        // Σ_j δ_j δ_j Δ^{-1} u = u - τ(u)·1 exactly
        let inv = u.laplacian_inverse();
        let mut lap = TorusElement::zero(theta.clone());
        for j in 0..2 {
            let mut beta = [0u32; 2];
            beta[j] = 2;
            lap = lap.add(&inv.delta(&beta)).unwrap();
        }
        let expected = u
            .sub(&TorusElement::scalar(theta, u.tau()))
            .unwrap();
        assert!(lap.sup_diff(&expected) < 1e-15);
    }

    #[test]
    fn theta_zero_is_convolution() {
        let theta = Arc::new(ThetaMatrix::zero(2));
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let u = random_element(&theta, &mut rng, 6);
        let v = random_element(&theta, &mut rng, 6);
        let prod = u.multiply(&v).unwrap();
        // plain coefficient convolution
        let mut conv: BTreeMap<Index, Complex64> = BTreeMap::new();
        for (k, a) in u.coeffs() {
            for (l, b) in v.coeffs() {
                let s: Index = k.iter().zip(l).map(|(x, y)| x + y).collect();
                *conv.entry(s).or_default() += a * b;
            }
        }
        let conv = TorusElement::from_coeffs(theta, conv).unwrap();
        assert!(prod.sup_diff(&conv) < 1e-15);
    }

    proptest! {
        #[test]
        fn star_antimultiplicative(seed in 0u64..500) {
            let theta = theta_golden();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_element(&theta, &mut rng, 4);
            let v = random_element(&theta, &mut rng, 4);
            let lhs = u.multiply(&v).unwrap().adjoint();
            let rhs = v.adjoint().multiply(&u.adjoint()).unwrap();
            prop_assert!(lhs.sup_diff(&rhs) < 1e-13);
        }

        #[test]
        fn cocycle_identity(k1 in -4i64..4, k2 in -4i64..4, l1 in -4i64..4, l2 in -4i64..4, m1 in -4i64..4, m2 in -4i64..4) {
            let theta = theta_golden();
            let c = PhaseCocycle::new(theta);
            let k = vec![k1, k2];
            let l = vec![l1, l2];
            let m = vec![m1, m2];
            let kl: Index = k.iter().zip(&l).map(|(a, b)| a + b).collect();
            let lm: Index = l.iter().zip(&m).map(|(a, b)| a + b).collect();
            let lhs = c.bilinear(&k, &l) + c.bilinear(&kl, &m);
            let rhs = c.bilinear(&l, &m) + c.bilinear(&k, &lm);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
