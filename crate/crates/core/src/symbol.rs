//! Closed term algebra for Aθ-valued classical symbols.
//!
//! A symbol of order q is a finite list of homogeneous components of
//! degrees q, q-1, q-2, …, each a sum of terms coef · ξ^α · |ξ|^s with
//! coef ∈ Aθ and s + |α| equal to the component degree, together with
//! an optional lattice-sampled smoothing remainder and an excision
//! cutoff.  Evaluation weighs every homogeneous component by
//! (1 - ψ(|ξ|)) so values are defined on all of R^n.
//!
//! ∂_ξ derivatives, coefficient derivations δ^α, products, the ♯
//! composition expansion, Taylor-series forward differences and Euler
//! primitives all stay inside this representation with exact degree
//! bookkeeping.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::algebra::{Index, ThetaMatrix, TorusElement};
use crate::error::{Error, Result};

const DEGREE_TOL: f64 = 1e-9;

/// Smooth step equal to 0 for t ≤ 0 and 1 for t ≥ 1, built from
/// exp(-1/t).
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// Radial excision profile ψ with ψ = 1 for r ≤ r0 and ψ = 0 for
/// r ≥ r1, monotone in between.  Symbol evaluation multiplies every
/// homogeneous component by 1 - ψ(|ξ|).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cutoff {
    pub r0: f64,
    pub r1: f64,
}

impl Cutoff {
    pub fn new(r0: f64, r1: f64) -> Result<Self> {
        if !(0.0 < r0 && r0 < r1) {
            return Err(Error::Config {
                field: "cutoff".into(),
                msg: format!("need 0 < r0 < r1, got r0 = {r0}, r1 = {r1}"),
            });
        }
        Ok(Self { r0, r1 })
    }

    /// r0 = 1/2, r1 = 1: every nonzero lattice point sits outside the
    /// transition zone, so lattice evaluations never see interior
    /// values of ψ.
    pub fn standard() -> Self {
        Self { r0: 0.5, r1: 1.0 }
    }

    pub fn psi(&self, r: f64) -> f64 {
        1.0 - smooth_step((r - self.r0) / (self.r1 - self.r0))
    }

    pub fn one_minus_psi(&self, r: f64) -> f64 {
        smooth_step((r - self.r0) / (self.r1 - self.r0))
    }
}

/// One term coef · ξ^α · |ξ|^s of a homogeneous component.
#[derive(Debug, Clone)]
pub struct HomogeneousTerm {
    pub coef: TorusElement,
    pub monomial: Vec<u32>,
    pub radial_power: Complex64,
}

impl HomogeneousTerm {
    pub fn degree(&self) -> Complex64 {
        self.radial_power + Complex64::new(self.monomial.iter().map(|a| *a as f64).sum(), 0.0)
    }

    /// The scalar factor ξ^α |ξ|^s at a point with |ξ| = r > 0.
    pub fn scalar_factor(&self, xi: &[f64], r: f64) -> Complex64 {
        let mut mono = 1.0_f64;
        for (x, a) in xi.iter().zip(&self.monomial) {
            mono *= x.powi(*a as i32);
        }
        let radial = if self.radial_power == Complex64::default() {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(r, 0.0).powc(self.radial_power)
        };
        mono * radial
    }

    fn sort_key(&self) -> (Vec<u32>, u64, u64) {
        (
            self.monomial.clone(),
            canonical_bits(self.radial_power.re),
            canonical_bits(self.radial_power.im),
        )
    }
}

fn canonical_bits(x: f64) -> u64 {
    // normalize -0.0 so term merging treats it as 0.0
    if x == 0.0 { 0.0f64.to_bits() } else { x.to_bits() }
}

/// A finite sum of terms sharing one homogeneity degree.
#[derive(Debug, Clone)]
pub struct HomogeneousComponent {
    pub degree: Complex64,
    pub terms: Vec<HomogeneousTerm>,
}

impl HomogeneousComponent {
    pub fn empty(degree: Complex64) -> Self {
        Self { degree, terms: Vec::new() }
    }

    pub fn new(degree: Complex64, terms: Vec<HomogeneousTerm>) -> Result<Self> {
        for t in &terms {
            if (t.degree() - degree).norm() > DEGREE_TOL {
                return Err(Error::Config {
                    field: "component".into(),
                    msg: format!(
                        "term of degree {} placed in component of degree {}",
                        t.degree(),
                        degree
                    ),
                });
            }
        }
        let mut c = Self { degree, terms };
        c.canonicalize();
        Ok(c)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sorts terms by (α lexicographic, then s) and merges duplicates,
    /// so serialization and iteration order are deterministic.
    pub fn canonicalize(&mut self) {
        self.terms.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let mut merged: Vec<HomogeneousTerm> = Vec::with_capacity(self.terms.len());
        for term in self.terms.drain(..) {
            if let Some(last) = merged.last_mut() {
                if last.sort_key() == term.sort_key() {
                    last.coef = last.coef.add(&term.coef).expect("same theta within a symbol");
                    continue;
                }
            }
            merged.push(term);
        }
        merged.retain(|t| !t.coef.is_zero());
        self.terms = merged;
    }

    pub fn scale(&self, lambda: Complex64) -> Self {
        let mut c = self.clone();
        for t in &mut c.terms {
            t.coef = t.coef.scale(lambda);
        }
        c.canonicalize();
        c
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        let mut c = Self { degree: self.degree, terms };
        c.canonicalize();
        c
    }

    /// Pointwise product; coefficient order is left · right.
    pub fn product(&self, other: &Self) -> Result<Self> {
        let mut terms = Vec::new();
        for a in &self.terms {
            for b in &other.terms {
                let coef = a.coef.multiply(&b.coef)?;
                if coef.is_zero() {
                    continue;
                }
                let monomial: Vec<u32> =
                    a.monomial.iter().zip(&b.monomial).map(|(x, y)| x + y).collect();
                terms.push(HomogeneousTerm {
                    coef,
                    monomial,
                    radial_power: a.radial_power + b.radial_power,
                });
            }
        }
        let mut c = Self { degree: self.degree + other.degree, terms };
        c.canonicalize();
        Ok(c)
    }

    /// ∂_{ξ_j}: each term splits into α_j ξ^{α-e_j} |ξ|^s and
    /// s ξ^{α+e_j} |ξ|^{s-2}; degree drops by one.
    pub fn xi_derivative(&self, axis: usize) -> Self {
        let mut terms = Vec::new();
        for t in &self.terms {
            if t.monomial[axis] > 0 {
                let mut m = t.monomial.clone();
                m[axis] -= 1;
                terms.push(HomogeneousTerm {
                    coef: t.coef.scale(Complex64::new(t.monomial[axis] as f64, 0.0)),
                    monomial: m,
                    radial_power: t.radial_power,
                });
            }
            if t.radial_power != Complex64::default() {
                let mut m = t.monomial.clone();
                m[axis] += 1;
                terms.push(HomogeneousTerm {
                    coef: t.coef.scale(t.radial_power),
                    monomial: m,
                    radial_power: t.radial_power - Complex64::new(2.0, 0.0),
                });
            }
        }
        let mut c = Self { degree: self.degree - Complex64::new(1.0, 0.0), terms };
        c.canonicalize();
        c
    }

    /// δ^α applied to every coefficient; degree unchanged.
    pub fn coeff_derivation(&self, alpha: &[u32]) -> Self {
        let mut c = self.clone();
        for t in &mut c.terms {
            t.coef = t.coef.delta(alpha);
        }
        c.canonicalize();
        c
    }

    /// Evaluates the bare component at ξ ≠ 0 (no cutoff weight).
    pub fn eval(&self, theta: &Arc<ThetaMatrix>, xi: &[f64], r: f64) -> TorusElement {
        let mut out = TorusElement::zero(theta.clone());
        for t in &self.terms {
            let f = t.scalar_factor(xi, r);
            if f != Complex64::default() {
                out = out.add(&t.coef.scale(f)).expect("same theta within a symbol");
            }
        }
        out
    }

    /// τ applied termwise: Σ τ(coef) ξ^α |ξ|^s as a scalar.
    pub fn tau_profile(&self, xi: &[f64], r: f64) -> Complex64 {
        let mut out = Complex64::default();
        for t in &self.terms {
            let tc = t.coef.tau();
            if tc != Complex64::default() {
                out += tc * t.scalar_factor(xi, r);
            }
        }
        out
    }
}

/// Lattice-sampled smoothing remainder: samples on |k|_∞ ≤ box_radius
/// with a declared decay exponent for |samples(k)| = O((1+|k|)^{-decay}).
#[derive(Debug, Clone)]
pub struct LatticeRemainder {
    pub box_radius: i64,
    pub decay: f64,
    pub samples: BTreeMap<Index, TorusElement>,
}

impl LatticeRemainder {
    pub fn new(box_radius: i64, decay: f64) -> Self {
        Self { box_radius, decay, samples: BTreeMap::new() }
    }

    pub fn insert(&mut self, k: Index, value: TorusElement) {
        if !value.is_zero() {
            self.samples.insert(k, value);
        }
    }

    pub fn sample(&self, k: &[i64]) -> Option<&TorusElement> {
        self.samples.get(k)
    }

    /// Spot check of the declared decay: max over stored samples of
    /// ‖sample‖ (1+|k|)^{decay}, which should stay bounded by `scale`.
    pub fn decay_margin(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (k, v) in &self.samples {
            let r = (k.iter().map(|x| (*x * *x) as f64).sum::<f64>()).sqrt();
            worst = worst.max(v.l2_norm() * (1.0 + r).powf(self.decay));
        }
        worst
    }

    fn map_values(&self, f: impl Fn(&TorusElement) -> TorusElement) -> Self {
        let mut out = Self::new(self.box_radius, self.decay);
        for (k, v) in &self.samples {
            out.insert(k.clone(), f(v));
        }
        out
    }
}

/// A classical symbol: order q, homogeneous components of degrees
/// q - j for j = 0..components.len(), optional smoothing remainder,
/// optional cutoff.  When `cutoff` is `None` evaluation uses the bare
/// components (appropriate for polynomial symbols).
#[derive(Debug, Clone)]
pub struct ClassicalSymbol {
    theta: Arc<ThetaMatrix>,
    order: Complex64,
    components: Vec<HomogeneousComponent>,
    pub remainder: Option<LatticeRemainder>,
    pub cutoff: Option<Cutoff>,
}

impl ClassicalSymbol {
    pub fn new(
        theta: Arc<ThetaMatrix>,
        order: Complex64,
        components: Vec<HomogeneousComponent>,
        remainder: Option<LatticeRemainder>,
        cutoff: Option<Cutoff>,
    ) -> Result<Self> {
        for (j, c) in components.iter().enumerate() {
            let expected = order - Complex64::new(j as f64, 0.0);
            if (c.degree - expected).norm() > DEGREE_TOL {
                return Err(Error::Config {
                    field: "symbol".into(),
                    msg: format!(
                        "component {j} has degree {}, expected {} (degrees descend by integer steps)",
                        c.degree, expected
                    ),
                });
            }
        }
        Ok(Self { theta, order, components, remainder, cutoff })
    }

    /// Smoothing symbol: remainder only, no homogeneous part.
    pub fn smoothing(theta: Arc<ThetaMatrix>, remainder: LatticeRemainder) -> Self {
        Self {
            theta,
            order: Complex64::default(),
            components: Vec::new(),
            remainder: Some(remainder),
            cutoff: None,
        }
    }

    /// The unit symbol ρ ≡ 1 (order 0, no cutoff).
    pub fn one(theta: Arc<ThetaMatrix>) -> Self {
        let unit = TorusElement::unit(theta.clone());
        let term =
            HomogeneousTerm { coef: unit, monomial: vec![0; theta.dim()], radial_power: Complex64::default() };
        Self {
            theta: theta.clone(),
            order: Complex64::default(),
            components: vec![HomogeneousComponent { degree: Complex64::default(), terms: vec![term] }],
            remainder: None,
            cutoff: None,
        }
    }

    /// Single-term symbol coef · ξ^α · |ξ|^s with the standard cutoff.
    pub fn single_term(
        coef: TorusElement,
        monomial: Vec<u32>,
        radial_power: Complex64,
        cutoff: Option<Cutoff>,
    ) -> Self {
        let theta = coef.theta().clone();
        let term = HomogeneousTerm { coef, monomial, radial_power };
        let degree = term.degree();
        Self {
            theta,
            order: degree,
            components: vec![HomogeneousComponent { degree, terms: vec![term] }],
            remainder: None,
            cutoff,
        }
    }

    /// Scalar radial symbol c · |ξ|^q with the standard cutoff.
    pub fn radial_power(theta: Arc<ThetaMatrix>, q: Complex64, c: Complex64) -> Self {
        let coef = TorusElement::scalar(theta.clone(), c);
        Self::single_term(coef, vec![0; theta.dim()], q, Some(Cutoff::standard()))
    }

    pub fn theta(&self) -> &Arc<ThetaMatrix> {
        &self.theta
    }

    pub fn order(&self) -> Complex64 {
        self.order
    }

    pub fn components(&self) -> &[HomogeneousComponent] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    pub fn is_smoothing(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }

    /// All term coefficients are scalar multiples of 1 (and so are all
    /// remainder samples).
    pub fn is_scalar_valued(&self) -> bool {
        self.components.iter().all(|c| c.terms.iter().all(|t| t.coef.is_scalar()))
            && self
                .remainder
                .as_ref()
                .map(|r| r.samples.values().all(|v| v.is_scalar()))
                .unwrap_or(true)
    }

    /// The component of the given degree, if present.
    pub fn component_of_degree(&self, degree: Complex64) -> Option<&HomogeneousComponent> {
        self.components.iter().find(|c| (c.degree - degree).norm() < DEGREE_TOL)
    }

    /// True when the order is a real integer (within tolerance).
    pub fn has_integer_order(&self) -> bool {
        self.order.im.abs() < DEGREE_TOL && (self.order.re - self.order.re.round()).abs() < DEGREE_TOL
    }

    /// Evaluates the represented symbol at ξ: cutoff-weighted
    /// homogeneous components plus, at lattice points, the stored
    /// remainder sample.
    pub fn eval(&self, xi: &[f64]) -> TorusElement {
        let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let weight = match &self.cutoff {
            Some(c) => c.one_minus_psi(r),
            None => 1.0,
        };
        let mut out = TorusElement::zero(self.theta.clone());
        if weight > 0.0 && r > 0.0 {
            for c in &self.components {
                out = out.add(&c.eval(&self.theta, xi, r)).expect("same theta");
            }
            out = out.scale(Complex64::new(weight, 0.0));
        } else if weight > 0.0 {
            // ξ = 0 with no cutoff: only genuinely constant terms make
            // sense here; negative radial powers are outside the
            // domain and contribute nothing.
            for c in &self.components {
                for t in &c.terms {
                    if t.monomial.iter().all(|a| *a == 0) && t.radial_power == Complex64::default() {
                        out = out.add(&t.coef).expect("same theta");
                    }
                }
            }
        }
        if let Some(rem) = &self.remainder {
            if let Some(k) = lattice_point(xi) {
                if let Some(v) = rem.sample(&k) {
                    out = out.add(v).expect("same theta");
                }
            }
        }
        out
    }

    /// τ[eval(ξ)] without building the full algebra element.
    pub fn tau_eval(&self, xi: &[f64]) -> Complex64 {
        let r = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let weight = match &self.cutoff {
            Some(c) => c.one_minus_psi(r),
            None => 1.0,
        };
        let mut out = Complex64::default();
        if weight > 0.0 && r > 0.0 {
            for c in &self.components {
                out += c.tau_profile(xi, r);
            }
            out *= weight;
        } else if weight > 0.0 {
            for c in &self.components {
                for t in &c.terms {
                    if t.monomial.iter().all(|a| *a == 0) && t.radial_power == Complex64::default() {
                        out += t.coef.tau();
                    }
                }
            }
        }
        if let Some(rem) = &self.remainder {
            if let Some(k) = lattice_point(xi) {
                if let Some(v) = rem.sample(&k) {
                    out += v.tau();
                }
            }
        }
        out
    }

    pub fn scale(&self, lambda: Complex64) -> Self {
        let mut s = self.clone();
        s.components = s.components.iter().map(|c| c.scale(lambda)).collect();
        if let Some(rem) = &self.remainder {
            s.remainder = Some(rem.map_values(|v| v.scale(lambda)));
        }
        s
    }

    /// Sum of two symbols whose orders differ by an integer; the
    /// result's order is the higher of the two and components are
    /// aligned by absolute degree.  Remainders merge sample-wise.
    pub fn add(&self, other: &Self) -> Result<Self> {
        let diff = self.order - other.order;
        if diff.im.abs() > DEGREE_TOL || (diff.re - diff.re.round()).abs() > DEGREE_TOL {
            return Err(Error::UnsupportedDecomposition(
                "cannot add symbols whose orders do not differ by an integer".into(),
            ));
        }
        let (hi, lo) = if diff.re >= 0.0 { (self, other) } else { (other, self) };
        let shift = (hi.order - lo.order).re.round() as usize;
        let len = hi.components.len().max(lo.components.len() + shift);
        let mut components = Vec::with_capacity(len);
        for j in 0..len {
            let degree = hi.order - Complex64::new(j as f64, 0.0);
            let mut c = HomogeneousComponent::empty(degree);
            if let Some(a) = hi.components.get(j) {
                c = c.add(a);
            }
            if j >= shift {
                if let Some(b) = lo.components.get(j - shift) {
                    c = c.add(b);
                }
            }
            components.push(c);
        }
        let remainder = match (&self.remainder, &other.remainder) {
            (None, None) => None,
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.clone()),
            (Some(a), Some(b)) => {
                let mut m = a.clone();
                m.box_radius = m.box_radius.max(b.box_radius);
                m.decay = m.decay.min(b.decay);
                for (k, v) in &b.samples {
                    let merged = match m.samples.get(k) {
                        Some(u) => u.add(v)?,
                        None => v.clone(),
                    };
                    if merged.is_zero() {
                        m.samples.remove(k);
                    } else {
                        m.samples.insert(k.clone(), merged);
                    }
                }
                Some(m)
            }
        };
        Ok(Self {
            theta: self.theta.clone(),
            order: hi.order,
            components,
            remainder,
            cutoff: self.cutoff.or(other.cutoff),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Term-exact ∂_ξ^β; the order drops by |β|.  The cutoff is not
    /// differentiated: the result represents the derivative away from
    /// the transition shell.
    pub fn xi_derivative(&self, beta: &[u32]) -> Self {
        let mut s = self.clone();
        for (axis, b) in beta.iter().enumerate() {
            for _ in 0..*b {
                s.components = s.components.iter().map(|c| c.xi_derivative(axis)).collect();
                s.order -= Complex64::new(1.0, 0.0);
            }
        }
        s.remainder = None;
        s
    }

    /// δ^α on every term coefficient and every remainder sample.
    pub fn coeff_derivation(&self, alpha: &[u32]) -> Self {
        let mut s = self.clone();
        s.components = s.components.iter().map(|c| c.coeff_derivation(alpha)).collect();
        if let Some(rem) = &self.remainder {
            s.remainder = Some(rem.map_values(|v| v.delta(alpha)));
        }
        s
    }

    /// Pointwise product truncated at `depth` components (the α = 0
    /// part of the ♯ expansion).
    pub fn product(&self, other: &Self, depth: usize) -> Result<Self> {
        sharp_with_alpha_filter(self, other, depth, |alpha| alpha.iter().all(|a| *a == 0))
    }

    /// The ♯ composition expansion truncated at `depth`: component j of
    /// the result is Σ_{k+l+|α|=j} (1/α!) ∂_ξ^α ρ1_{q1-k} · δ^α ρ2_{q2-l}.
    /// Input remainders are dropped; the truncation depth is recorded
    /// by the component count.
    pub fn sharp(&self, other: &Self, depth: usize) -> Result<Self> {
        sharp_with_alpha_filter(self, other, depth, |_| true)
    }

    /// Taylor-series forward difference along `axis`, truncated at
    /// `depth` result components: Σ_{m≥1} (1/m!) ∂_{ξ_j}^m ρ, of order
    /// q - 1.  Exact (pointwise) differences are available through
    /// [`ClassicalSymbol::eval_forward_difference`].
    pub fn forward_difference_series(&self, axis: usize, depth: usize) -> Self {
        assert!(depth >= 1, "difference series needs depth >= 1");
        let out_order = self.order - Complex64::new(1.0, 0.0);
        let mut components: Vec<HomogeneousComponent> = (0..depth)
            .map(|j| HomogeneousComponent::empty(out_order - Complex64::new(j as f64, 0.0)))
            .collect();
        let mut derivative = self.clone();
        let mut factorial = 1.0_f64;
        for m in 1..=depth {
            // m-th derivative contributes its component k at result
            // slot m - 1 + k
            derivative = derivative.xi_derivative(&unit_multi(self.dim(), axis));
            factorial *= m as f64;
            let w = Complex64::new(1.0 / factorial, 0.0);
            for (k, c) in derivative.components.iter().enumerate() {
                let slot = m - 1 + k;
                if slot < depth {
                    components[slot] = components[slot].add(&c.scale(w));
                }
            }
        }
        Self {
            theta: self.theta.clone(),
            order: out_order,
            components,
            remainder: None,
            cutoff: self.cutoff,
        }
    }

    /// Exact forward difference by evaluation: ρ(ξ + e_j) - ρ(ξ).
    pub fn eval_forward_difference(&self, axis: usize, xi: &[f64]) -> TorusElement {
        let mut shifted = xi.to_vec();
        shifted[axis] += 1.0;
        self.eval(&shifted).sub(&self.eval(xi)).expect("same theta")
    }

    /// Spot check of the remainder decay declaration.
    pub fn remainder_decay_margin(&self) -> Option<f64> {
        self.remainder.as_ref().map(|r| r.decay_margin())
    }
}

/// Euler primitive of a homogeneous component h of degree q ≠ -n:
/// σ_j = (q+n)^{-1} ξ_j · h satisfies Σ_j ∂_{ξ_j} σ_j = h on ξ ≠ 0.
pub fn euler_primitive(h: &HomogeneousComponent, n: usize) -> Result<Vec<HomogeneousComponent>> {
    let shift = h.degree + Complex64::new(n as f64, 0.0);
    if shift.norm() < DEGREE_TOL {
        return Err(Error::NonDecomposable { degree: h.degree.re });
    }
    let inv = Complex64::new(1.0, 0.0) / shift;
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        let mut terms = Vec::with_capacity(h.terms.len());
        for t in &h.terms {
            let mut m = t.monomial.clone();
            m[j] += 1;
            terms.push(HomogeneousTerm {
                coef: t.coef.scale(inv),
                monomial: m,
                radial_power: t.radial_power,
            });
        }
        let mut c = HomogeneousComponent { degree: h.degree + Complex64::new(1.0, 0.0), terms };
        c.canonicalize();
        out.push(c);
    }
    Ok(out)
}

pub(crate) fn unit_multi(n: usize, axis: usize) -> Vec<u32> {
    let mut m = vec![0u32; n];
    m[axis] = 1;
    m
}

fn lattice_point(xi: &[f64]) -> Option<Index> {
    let mut k = Vec::with_capacity(xi.len());
    for x in xi {
        let r = x.round();
        if (x - r).abs() > 1e-9 {
            return None;
        }
        k.push(r as i64);
    }
    Some(k)
}

fn sharp_with_alpha_filter(
    lhs: &ClassicalSymbol,
    rhs: &ClassicalSymbol,
    depth: usize,
    keep: impl Fn(&[u32]) -> bool,
) -> Result<ClassicalSymbol> {
    if lhs.dim() != rhs.dim() {
        return Err(Error::DimensionMismatch { expected: lhs.dim(), got: rhs.dim() });
    }
    let n = lhs.dim();
    let order = lhs.order + rhs.order;
    let mut components: Vec<HomogeneousComponent> = (0..=depth)
        .map(|j| HomogeneousComponent::empty(order - Complex64::new(j as f64, 0.0)))
        .collect();
    // cache ∂^α of lhs components and δ^α of rhs components per α
    for alpha in multi_indices_up_to(n, depth) {
        if !keep(&alpha) {
            continue;
        }
        let a: usize = alpha.iter().map(|x| *x as usize).sum();
        let inv_fact = Complex64::new(1.0 / multi_factorial(&alpha), 0.0);
        let dl = lhs.xi_derivative(&alpha);
        let dr = rhs.coeff_derivation(&alpha);
        for (k, ck) in dl.components.iter().enumerate() {
            if ck.is_zero() {
                continue;
            }
            for (l, cl) in dr.components.iter().enumerate() {
                if cl.is_zero() {
                    continue;
                }
                let j = k + l + a;
                if j > depth {
                    continue;
                }
                let prod = ck.product(cl)?;
                components[j] = components[j].add(&prod.scale(inv_fact));
            }
        }
    }
    ClassicalSymbol::new(
        lhs.theta.clone(),
        order,
        components,
        None,
        lhs.cutoff.or(rhs.cutoff),
    )
}

/// All α ∈ N₀^n with |α| ≤ max, in a fixed deterministic order.
pub(crate) fn multi_indices_up_to(n: usize, max: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    loop {
        if cur.iter().map(|x| *x as usize).sum::<usize>() <= max {
            out.push(cur.clone());
        }
        // odometer over [0, max]^n, then filter by |α| ≤ max above
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            if (cur[i] as usize) < max {
                cur[i] += 1;
                for c in cur.iter_mut().take(i) {
                    *c = 0;
                }
                break;
            }
            i += 1;
        }
    }
}

pub(crate) fn multi_factorial(alpha: &[u32]) -> f64 {
    alpha
        .iter()
        .map(|a| (1..=*a).map(|x| x as f64).product::<f64>())
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn theta2() -> Arc<ThetaMatrix> {
        Arc::new(ThetaMatrix::two_dim(0.3))
    }

    fn norm_sq(xi: &[f64]) -> f64 {
        xi.iter().map(|x| x * x).sum()
    }

    #[test]
    fn constant_symbol_eval() {
        let theta = theta2();
        let a = TorusElement::generator(theta.clone(), &[1, -1]).scale(Complex64::new(0.5, 0.2));
        let rho = ClassicalSymbol::single_term(a.clone(), vec![0, 0], Complex64::default(), None);
        for xi in [[2.0, 0.0], [0.3, 0.1], [5.0, -7.0]] {
            assert!(rho.eval(&xi).sup_diff(&a) < 1e-15);
        }
    }

    #[test]
    fn inverse_square_eval() {
        let theta = theta2();
        let rho = ClassicalSymbol::radial_power(theta, Complex64::new(-2.0, 0.0), Complex64::new(1.0, 0.0));
        let v = rho.eval(&[3.0, 4.0]);
        assert_abs_diff_eq!(v.tau().re, 1.0 / 25.0, epsilon = 1e-16);
        // inside the excision zone the value vanishes
        assert!(rho.eval(&[0.2, 0.1]).is_zero());
        assert!(rho.eval(&[0.0, 0.0]).is_zero());
    }

    #[test]
    fn homogeneity_scaling() {
        let theta = theta2();
        let coef = TorusElement::generator(theta.clone(), &[0, 1]);
        let rho = ClassicalSymbol::single_term(
            coef,
            vec![2, 1],
            Complex64::new(-4.5, 0.0),
            Some(Cutoff::standard()),
        );
        let q = rho.order();
        for xi in [[1.3, -0.4], [2.0, 5.0]] {
            let s = 2.0_f64;
            let scaled: Vec<f64> = xi.iter().map(|x| x * s).collect();
            let lhs = rho.eval(&scaled);
            let rhs = rho.eval(&xi).scale(Complex64::new(s, 0.0).powc(q));
            assert!(lhs.sup_diff(&rhs) < 1e-13);
        }
    }

    #[test]
    fn derivative_closed_forms() {
        let theta = theta2();
        // ∂_1 (ξ_1) = 1
        let one = TorusElement::unit(theta.clone());
        let rho = ClassicalSymbol::single_term(one.clone(), vec![1, 0], Complex64::default(), None);
        let d = rho.xi_derivative(&[1, 0]);
        assert_eq!(d.components()[0].terms.len(), 1);
        assert!(d.components()[0].terms[0].monomial.iter().all(|a| *a == 0));
        assert!(d.components()[0].terms[0].coef.sup_diff(&one) < 1e-16);

        // ∂_1 |ξ|^{-2} = -2 ξ_1 |ξ|^{-4}
        let rho = ClassicalSymbol::radial_power(theta, Complex64::new(-2.0, 0.0), Complex64::new(1.0, 0.0));
        let d = rho.xi_derivative(&[1, 0]);
        let t = &d.components()[0].terms[0];
        assert_eq!(t.monomial, vec![1, 0]);
        assert_abs_diff_eq!(t.radial_power.re, -4.0, epsilon = 0.0);
        assert_abs_diff_eq!(t.coef.tau().re, -2.0, epsilon = 1e-16);
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let theta = theta2();
        let coef = TorusElement::generator(theta.clone(), &[1, 0]);
        let rho = ClassicalSymbol::single_term(
            coef,
            vec![1, 2],
            Complex64::new(-3.5, 0.0),
            Some(Cutoff::standard()),
        );
        let h = 1e-5;
        let mut rng_state = 123456789u64;
        let mut next = || {
            // small deterministic LCG; keeps this oracle self-contained
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng_state >> 33) as f64 / (1u64 << 31) as f64) * 4.0 - 2.0
        };
        for axis in 0..2 {
            let beta = unit_multi(2, axis);
            let deriv = rho.xi_derivative(&beta);
            let mut checked = 0;
            while checked < 20 {
                let xi = [next() * 3.0, next() * 3.0];
                if norm_sq(&xi).sqrt() < 1.5 {
                    continue;
                }
                checked += 1;
                let mut xp = xi;
                xp[axis] += h;
                let mut xm = xi;
                xm[axis] -= h;
                let fd = rho
                    .eval(&xp)
                    .sub(&rho.eval(&xm))
                    .unwrap()
                    .scale(Complex64::new(1.0 / (2.0 * h), 0.0));
                let exact = deriv.eval(&xi);
                let denom = exact.l2_norm().max(1e-6);
                assert!(fd.sup_diff(&exact) / denom < 1e-6);
            }
        }
    }

    #[test]
    fn coeff_derivation_leibniz_pointwise() {
        let theta = theta2();
        let a = TorusElement::generator(theta.clone(), &[1, 1]).scale(Complex64::new(0.7, -0.1));
        let b = TorusElement::generator(theta.clone(), &[-1, 2]);
        let rho1 = ClassicalSymbol::single_term(a, vec![1, 0], Complex64::new(-2.0, 0.0), Some(Cutoff::standard()));
        let rho2 = ClassicalSymbol::single_term(b, vec![0, 0], Complex64::new(-1.0, 0.0), Some(Cutoff::standard()));
        let prod = rho1.product(&rho2, 0).unwrap();
        for axis in 0..2 {
            let alpha = unit_multi(2, axis);
            let lhs = prod.coeff_derivation(&alpha);
            let rhs = rho1
                .coeff_derivation(&alpha)
                .product(&rho2, 0)
                .unwrap()
                .add(&rho1.product(&rho2.coeff_derivation(&alpha), 0).unwrap())
                .unwrap();
            for xi in [[2.0, 1.0], [-3.0, 0.5], [1.5, -1.5]] {
                assert!(lhs.eval(&xi).sup_diff(&rhs.eval(&xi)) < 1e-12);
            }
        }
        // δ of a scalar-coefficient symbol vanishes
        let scalar = ClassicalSymbol::radial_power(theta, Complex64::new(-1.0, 0.0), Complex64::new(2.0, 0.0));
        assert!(scalar.coeff_derivation(&[1, 0]).components().iter().all(|c| c.is_zero()));
    }

    #[test]
    fn sharp_unit_and_scalar_cases() {
        let theta = theta2();
        let one = ClassicalSymbol::one(theta.clone());
        let coef = TorusElement::generator(theta.clone(), &[1, 0]);
        let rho = ClassicalSymbol::single_term(coef, vec![1, 1], Complex64::new(-3.0, 0.0), Some(Cutoff::standard()));
        let s = rho.sharp(&one, 4).unwrap();
        for xi in [[2.0, 2.0], [4.0, -1.0]] {
            assert!(s.eval(&xi).sup_diff(&rho.eval(&xi)) < 1e-13);
        }
        // scalar polynomial × scalar polynomial: ♯ is the plain product
        let unit = TorusElement::unit(theta.clone());
        let p1 = ClassicalSymbol::single_term(unit.clone(), vec![2, 0], Complex64::default(), None);
        let p2 = ClassicalSymbol::single_term(unit, vec![0, 1], Complex64::default(), None);
        let s = p1.sharp(&p2, 4).unwrap();
        let prod = p1.product(&p2, 4).unwrap();
        for xi in [[1.0, 2.0], [-2.0, 3.0]] {
            assert!(s.eval(&xi).sup_diff(&prod.eval(&xi)) < 1e-13);
        }
    }

    #[test]
    fn forward_difference_modes() {
        let theta = theta2();
        // Δ of a constant vanishes in both modes
        let c = ClassicalSymbol::one(theta.clone());
        assert!(c.eval_forward_difference(0, &[3.0, 1.0]).is_zero());
        let series = c.forward_difference_series(0, 3);
        assert!(series.components().iter().all(|x| x.is_zero()));

        // Δ_1(ξ_1) = 1 exactly; the series terminates
        let unit = TorusElement::unit(theta.clone());
        let xi1 = ClassicalSymbol::single_term(unit.clone(), vec![1, 0], Complex64::default(), None);
        let d = xi1.eval_forward_difference(0, &[5.0, 2.0]);
        assert!(d.sup_diff(&unit) < 1e-15);
        let series = xi1.forward_difference_series(0, 3);
        assert!(series.eval(&[5.0, 2.0]).sup_diff(&unit) < 1e-15);

        // series vs exact: the gap decays like |ξ|^{q-L-1}
        let rho = ClassicalSymbol::radial_power(theta, Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0));
        let depth = 4;
        let series = rho.forward_difference_series(0, depth);
        let mut prev_err = f64::INFINITY;
        for r in [20.0, 40.0, 80.0] {
            let xi = [r, 0.0];
            let exact = rho.eval_forward_difference(0, &xi);
            let err = series.eval(&xi).sup_diff(&exact);
            // expected order q - depth - 1 = -6
            assert!(err < 5.0 * r.powi(-6));
            assert!(err < prev_err);
            prev_err = err;
        }
    }

    #[test]
    fn euler_primitive_cases() {
        let theta = theta2();
        // degree -1 in n = 2: σ_j = ξ_j |ξ|^{-1}
        let rho = ClassicalSymbol::radial_power(theta.clone(), Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0));
        let h = &rho.components()[0];
        let sigma = euler_primitive(h, 2).unwrap();
        for xi in [[2.0, 1.0], [-1.5, 3.0], [4.0, -4.0]] {
            let mut div = TorusElement::zero(theta.clone());
            for (j, s) in sigma.iter().enumerate() {
                let ds = s.xi_derivative(j);
                div = div.add(&ds.eval(&theta, &xi, norm_sq(&xi).sqrt())).unwrap();
            }
            let expect = h.eval(&theta, &xi, norm_sq(&xi).sqrt());
            assert!(div.sup_diff(&expect) < 1e-12);
        }

        // degree 0 constant: σ_j = ξ_j / n
        let one = ClassicalSymbol::one(theta.clone());
        let sigma = euler_primitive(&one.components()[0], 2).unwrap();
        let mut div = TorusElement::zero(theta.clone());
        for (j, s) in sigma.iter().enumerate() {
            div = div.add(&s.xi_derivative(j).eval(&theta, &[1.0, 1.0], 2f64.sqrt())).unwrap();
        }
        assert!(div.sup_diff(&TorusElement::unit(theta.clone())) < 1e-15);

        // degree -3 term ξ_1 |ξ|^{-4}
        let coef = TorusElement::unit(theta.clone());
        let rho = ClassicalSymbol::single_term(coef, vec![1, 0], Complex64::new(-4.0, 0.0), Some(Cutoff::standard()));
        let sigma = euler_primitive(&rho.components()[0], 2).unwrap();
        for xi in [[2.0, 1.0], [-1.0, 2.5], [3.0, 3.0]] {
            let r = norm_sq(&xi).sqrt();
            let mut div = TorusElement::zero(theta.clone());
            for (j, s) in sigma.iter().enumerate() {
                div = div.add(&s.xi_derivative(j).eval(&theta, &xi, r)).unwrap();
            }
            let expect = rho.components()[0].eval(&theta, &xi, r);
            assert!(div.sup_diff(&expect) < 1e-12);
        }

        // degree -n is rejected
        let bad = ClassicalSymbol::radial_power(theta, Complex64::new(-2.0, 0.0), Complex64::new(1.0, 0.0));
        assert!(matches!(euler_primitive(&bad.components()[0], 2), Err(Error::NonDecomposable { .. })));
    }

    #[test]
    fn multi_index_enumeration() {
        let idx = multi_indices_up_to(2, 2);
        assert!(idx.contains(&vec![0, 0]));
        assert!(idx.contains(&vec![1, 1]));
        assert!(idx.contains(&vec![2, 0]));
        assert_eq!(idx.len(), 6);
        assert_eq!(multi_factorial(&[3, 2]), 12.0);
    }
}
