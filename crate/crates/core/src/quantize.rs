//! Quantization of symbols and lazy operator trees.
//!
//! A symbol acts diagonally in the Fourier basis: P_ρ u = Σ u_k ρ(k) U^k,
//! so P_ρ(U^k) = ρ(k) U^k.  Composite operators (sums, products,
//! commutators, multiplications, derivations) are kept as lazy trees;
//! no symbol is ever synthesized for a tree except through the ♯
//! expansion.  That keeps identity checks between a tree and a
//! symbol-backed operator honest: the two sides are computed along
//! independent paths.

use std::sync::Arc;

use num_complex::Complex64;

use crate::algebra::{ThetaMatrix, TorusElement};
use crate::error::{Error, Result};
use crate::symbol::{unit_multi, ClassicalSymbol};

/// A linear operator on finitely supported Fourier series.
#[derive(Debug, Clone)]
pub enum PsiDO {
    /// P_ρ for a classical symbol ρ.
    Symbol(ClassicalSymbol),
    /// Exact-mode forward difference of a symbol along one axis:
    /// u_k U^k ↦ u_k (ρ(k+e_j) - ρ(k)) U^k.
    FiniteDifference { symbol: ClassicalSymbol, axis: usize },
    /// Left multiplication u ↦ a·u.
    Mul(TorusElement),
    /// The derivation δ_j.
    Derivation { theta: Arc<ThetaMatrix>, axis: usize },
    /// Σ of operators.
    Sum(Vec<PsiDO>),
    /// Composition A ∘ B.
    Product(Box<PsiDO>, Box<PsiDO>),
    /// [A, B] = AB - BA.
    Commutator(Box<PsiDO>, Box<PsiDO>),
    /// λ·A.
    Scaled(Complex64, Box<PsiDO>),
}

impl PsiDO {
    pub fn theta(&self) -> Option<Arc<ThetaMatrix>> {
        match self {
            PsiDO::Symbol(s) | PsiDO::FiniteDifference { symbol: s, .. } => Some(s.theta().clone()),
            PsiDO::Mul(a) => Some(a.theta().clone()),
            PsiDO::Derivation { theta, .. } => Some(theta.clone()),
            PsiDO::Sum(ops) => ops.iter().find_map(|o| o.theta()),
            PsiDO::Product(a, b) | PsiDO::Commutator(a, b) => a.theta().or_else(|| b.theta()),
            PsiDO::Scaled(_, a) => a.theta(),
        }
    }

    pub fn commutator(a: PsiDO, b: PsiDO) -> PsiDO {
        PsiDO::Commutator(Box::new(a), Box::new(b))
    }

    pub fn scaled(lambda: Complex64, a: PsiDO) -> PsiDO {
        PsiDO::Scaled(lambda, Box::new(a))
    }

    /// Applies the operator to an element.
    pub fn apply(&self, u: &TorusElement) -> Result<TorusElement> {
        match self {
            PsiDO::Symbol(rho) => {
                check_theta(rho.theta(), u)?;
                let mut out = TorusElement::zero(u.theta().clone());
                for (k, a) in u.coeffs() {
                    let xi: Vec<f64> = k.iter().map(|x| *x as f64).collect();
                    let value = rho.eval(&xi);
                    if value.is_zero() {
                        continue;
                    }
                    let basis = TorusElement::generator(u.theta().clone(), k);
                    out = out.add(&value.multiply(&basis)?.scale(*a))?;
                }
                Ok(out)
            }
            PsiDO::FiniteDifference { symbol, axis } => {
                check_theta(symbol.theta(), u)?;
                let mut out = TorusElement::zero(u.theta().clone());
                for (k, a) in u.coeffs() {
                    let xi: Vec<f64> = k.iter().map(|x| *x as f64).collect();
                    let value = symbol.eval_forward_difference(*axis, &xi);
                    if value.is_zero() {
                        continue;
                    }
                    let basis = TorusElement::generator(u.theta().clone(), k);
                    out = out.add(&value.multiply(&basis)?.scale(*a))?;
                }
                Ok(out)
            }
            PsiDO::Mul(a) => a.multiply(u),
            PsiDO::Derivation { theta, axis } => {
                check_theta(theta, u)?;
                Ok(u.delta(&unit_multi(theta.dim(), *axis)))
            }
            PsiDO::Sum(ops) => {
                let mut out = TorusElement::zero(u.theta().clone());
                for op in ops {
                    out = out.add(&op.apply(u)?)?;
                }
                Ok(out)
            }
            PsiDO::Product(a, b) => a.apply(&b.apply(u)?),
            PsiDO::Commutator(a, b) => {
                let ab = a.apply(&b.apply(u)?)?;
                let ba = b.apply(&a.apply(u)?)?;
                ab.sub(&ba)
            }
            PsiDO::Scaled(lambda, a) => Ok(a.apply(u)?.scale(*lambda)),
        }
    }

    /// ρ(k) recovered from the action: P(U^k)·(U^k)^{-1}.
    pub fn lattice_symbol(&self, k: &[i64]) -> Result<TorusElement> {
        let theta = self.theta().ok_or(Error::ThetaMismatch)?;
        let basis = TorusElement::generator(theta.clone(), k);
        let image = self.apply(&basis)?;
        // (U^k)^{-1} = (U^k)* since U^k is unitary
        image.multiply(&basis.adjoint())
    }

    /// Max-norm distance to another operator over a basis box.
    pub fn distance_on_box(&self, other: &PsiDO, box_radius: i64) -> Result<f64> {
        let theta = self.theta().ok_or(Error::ThetaMismatch)?;
        let n = theta.dim();
        let mut worst = 0.0_f64;
        for k in lattice_box(n, box_radius) {
            let basis = TorusElement::generator(theta.clone(), &k);
            let d = self.apply(&basis)?.sub(&other.apply(&basis)?)?.l2_norm();
            worst = worst.max(d);
        }
        Ok(worst)
    }
}

fn check_theta(theta: &Arc<ThetaMatrix>, u: &TorusElement) -> Result<()> {
    if Arc::ptr_eq(theta, u.theta()) || **theta == **u.theta() {
        Ok(())
    } else if theta.dim() != u.theta().dim() {
        Err(Error::DimensionMismatch { expected: theta.dim(), got: u.theta().dim() })
    } else {
        Err(Error::ThetaMismatch)
    }
}

/// All lattice points with |k|_∞ ≤ radius, in deterministic order.
pub fn lattice_box(n: usize, radius: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = vec![-radius; n];
    loop {
        out.push(cur.clone());
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            if cur[i] < radius {
                cur[i] += 1;
                for c in cur.iter_mut().take(i) {
                    *c = -radius;
                }
                break;
            }
            i += 1;
        }
    }
}

/// Least-squares slope of (x, y) pairs; used on (ln |k|, ln residual)
/// data to certify decay exponents.
pub fn fit_log_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Residual of the composition identity at one lattice point:
/// ‖P_{ρ1}(P_{ρ2} U^k) - P_{ρ1 ♯_J ρ2} U^k‖ in the coefficient ℓ²
/// norm.  Decays like |k|^{Re(q1+q2) - J - 1} as |k| grows.
pub fn compose_check(
    rho1: &ClassicalSymbol,
    rho2: &ClassicalSymbol,
    depth: usize,
    k: &[i64],
) -> Result<f64> {
    let theta = rho1.theta().clone();
    let basis = TorusElement::generator(theta, k);
    let lhs = PsiDO::Symbol(rho1.clone()).apply(&PsiDO::Symbol(rho2.clone()).apply(&basis)?)?;
    let sharp = rho1.sharp(rho2, depth)?;
    let rhs = PsiDO::Symbol(sharp).apply(&basis)?;
    Ok(lhs.sub(&rhs)?.l2_norm())
}

/// The two sides of the derivation-commutator identity
/// [δ_j, P_ρ] = P_{δ_j ρ}: a lazy commutator tree and the
/// symbol-backed right-hand side.  The two operators must act
/// identically.
pub fn delta_commutator(rho: &ClassicalSymbol, axis: usize) -> (PsiDO, PsiDO) {
    let theta = rho.theta().clone();
    let tree = PsiDO::commutator(
        PsiDO::Derivation { theta, axis },
        PsiDO::Symbol(rho.clone()),
    );
    let backed = PsiDO::Symbol(rho.coeff_derivation(&unit_multi(rho.dim(), axis)));
    (tree, backed)
}

/// The two sides of the generator-commutator identity
/// P_{Δ_j ρ} = [P_{U_j^{-1} ρ}, U_j] for scalar-valued ρ: a commutator
/// tree with multiplication operators, and the exact-mode forward
/// difference on the right.
pub fn unitary_commutator(rho: &ClassicalSymbol, axis: usize) -> Result<(PsiDO, PsiDO)> {
    if !rho.is_scalar_valued() {
        return Err(Error::NonScalarSymbol);
    }
    let theta = rho.theta().clone();
    let n = theta.dim();
    let mut e = vec![0i64; n];
    e[axis] = 1;
    let uj = TorusElement::generator(theta.clone(), &e);
    // U_j^{-1} = U^{-e_j}: the ordered-product phase c(e_j, -e_j)
    // vanishes, so the inverse is the bare generator at -e_j.
    let mut em = vec![0i64; n];
    em[axis] = -1;
    let uj_inv = TorusElement::generator(theta, &em);
    let shifted = scale_coefficients(rho, &uj_inv)?;
    let tree = PsiDO::commutator(PsiDO::Symbol(shifted), PsiDO::Mul(uj));
    let backed = PsiDO::FiniteDifference { symbol: rho.clone(), axis };
    Ok((tree, backed))
}

/// Left-multiplies every term coefficient and remainder sample by `a`.
pub fn scale_coefficients(rho: &ClassicalSymbol, a: &TorusElement) -> Result<ClassicalSymbol> {
    let mut components = Vec::with_capacity(rho.components().len());
    for c in rho.components() {
        let mut terms = Vec::with_capacity(c.terms.len());
        for t in &c.terms {
            terms.push(crate::symbol::HomogeneousTerm {
                coef: a.multiply(&t.coef)?,
                monomial: t.monomial.clone(),
                radial_power: t.radial_power,
            });
        }
        components.push(crate::symbol::HomogeneousComponent::new(c.degree, terms)?);
    }
    let remainder = match &rho.remainder {
        None => None,
        Some(rem) => {
            let mut out = crate::symbol::LatticeRemainder::new(rem.box_radius, rem.decay);
            for (k, v) in &rem.samples {
                out.insert(k.clone(), a.multiply(v)?);
            }
            Some(out)
        }
    };
    ClassicalSymbol::new(rho.theta().clone(), rho.order(), components, remainder, rho.cutoff)
}
