//! Function algebra on flat tori: truncated multivariate Fourier series with
//! complex coefficients under enforced Hermitian symmetry, plus a t-polynomial
//! extension for objects living over a line factor.
//!
//! The algebra is closed under sums, products (with a truncation cap) and
//! coordinate derivatives, which keeps identities like d² = 0 exact up to
//! float rounding.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64;

use crate::error::Error;

/// Frequency multi-index k ∈ ℤ^d.
pub type Mode = Vec<i32>;

static TRUNC_CAP: AtomicUsize = AtomicUsize::new(8);

/// Global truncation cap applied to products. Set once at startup
/// (`ALGEBROID_LAB_TRUNC_CAP` in the CLI); library default is 8.
pub fn trunc_cap() -> usize {
    TRUNC_CAP.load(Ordering::Relaxed)
}

pub fn set_trunc_cap(cap: usize) {
    TRUNC_CAP.store(cap.max(1), Ordering::Relaxed);
}

/// Real-valued function on T^d stored as Fourier coefficients on
/// max|k_i| ≤ trunc. Hermitian symmetry coeff(−k) = conj(coeff(k)) is
/// re-enforced after every operation; absent modes are zero.
#[derive(Clone, Debug)]
pub struct ScalarField {
    dim: usize,
    trunc: usize,
    coeffs: BTreeMap<Mode, Complex64>,
    trunc_loss: f64,
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.coeffs == other.coeffs
    }
}

fn neg_mode(k: &[i32]) -> Mode {
    k.iter().map(|x| -x).collect()
}

fn mode_max_abs(k: &[i32]) -> usize {
    k.iter().map(|x| x.unsigned_abs() as usize).max().unwrap_or(0)
}

impl ScalarField {
    pub fn zero(dim: usize) -> Self {
        ScalarField { dim, trunc: 0, coeffs: BTreeMap::new(), trunc_loss: 0.0 }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut coeffs = BTreeMap::new();
        if c != 0.0 {
            coeffs.insert(vec![0; dim], Complex64::new(c, 0.0));
        }
        ScalarField { dim, trunc: 0, coeffs, trunc_loss: 0.0 }
    }

    /// Field c·e^{i k·x} + conj(c)·e^{−i k·x}. For k = 0 the imaginary part
    /// of `c` is discarded (a real constant 2·re is stored as given once).
    pub fn mode(dim: usize, k: &[i32], c: Complex64) -> Result<Self, Error> {
        if k.len() != dim {
            return Err(Error::input("mode index length does not match dimension"));
        }
        let mut f = ScalarField::zero(dim);
        f.trunc = mode_max_abs(k);
        if k.iter().all(|&x| x == 0) {
            if c.re != 0.0 {
                f.coeffs.insert(k.to_vec(), Complex64::new(c.re, 0.0));
            }
        } else if c != Complex64::new(0.0, 0.0) {
            f.coeffs.insert(k.to_vec(), c);
            f.coeffs.insert(neg_mode(k), c.conj());
        }
        Ok(f)
    }

    /// sin(x_axis): coefficients ∓i/2 at k = ±e_axis.
    pub fn sin_axis(dim: usize, axis: usize) -> Self {
        let mut k = vec![0; dim];
        k[axis] = 1;
        Self::mode(dim, &k, Complex64::new(0.0, -0.5)).expect("axis in range")
    }

    /// cos(x_axis): coefficients 1/2 at k = ±e_axis.
    pub fn cos_axis(dim: usize, axis: usize) -> Self {
        let mut k = vec![0; dim];
        k[axis] = 1;
        Self::mode(dim, &k, Complex64::new(0.5, 0.0)).expect("axis in range")
    }

    /// Builds a field from literal records; for each index only one of the
    /// ±k pair needs to be given, the mirror coefficient is implied.
    pub fn from_literals(dim: usize, lits: &[(Mode, f64, f64)]) -> Result<Self, Error> {
        let mut f = ScalarField::zero(dim);
        for (k, re, im) in lits {
            if k.len() != dim {
                return Err(Error::input("field literal index length mismatch"));
            }
            let c = Complex64::new(*re, *im);
            if k.iter().all(|&x| x == 0) && im.abs() > 0.0 {
                return Err(Error::input("zero mode must have zero imaginary part"));
            }
            *f.coeffs.entry(k.clone()).or_insert(Complex64::new(0.0, 0.0)) += c;
            if !k.iter().all(|&x| x == 0) {
                *f.coeffs.entry(neg_mode(k)).or_insert(Complex64::new(0.0, 0.0)) += c.conj();
            }
            f.trunc = f.trunc.max(mode_max_abs(k));
        }
        f.normalize();
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trunc(&self) -> usize {
        self.trunc
    }

    /// Worst single l1 mass discarded by a truncated product anywhere in the
    /// history of this value.
    pub fn trunc_loss(&self) -> f64 {
        self.trunc_loss
    }

    pub fn coeff(&self, k: &[i32]) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn modes(&self) -> impl Iterator<Item = (&Mode, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Re-enforce Hermitian symmetry and drop exact zeros.
    fn normalize(&mut self) {
        let keys: Vec<Mode> = self.coeffs.keys().cloned().collect();
        let mut out: BTreeMap<Mode, Complex64> = BTreeMap::new();
        for k in keys {
            if out.contains_key(&k) {
                continue;
            }
            let nk = neg_mode(&k);
            let c = self.coeff(&k);
            let cm = self.coeff(&nk);
            let avg = 0.5 * (c + cm.conj());
            if k == nk {
                let re = Complex64::new(avg.re, 0.0);
                if re.re != 0.0 {
                    out.insert(k, re);
                }
            } else if avg != Complex64::new(0.0, 0.0) {
                out.insert(k.clone(), avg);
                out.insert(nk, avg.conj());
            }
        }
        self.coeffs = out;
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "field dimension mismatch");
        let mut out = self.clone();
        out.trunc = self.trunc.max(other.trunc);
        out.trunc_loss = self.trunc_loss.max(other.trunc_loss);
        for (k, c) in &other.coeffs {
            *out.coeffs.entry(k.clone()).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        out.normalize();
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        if s == 0.0 {
            out.coeffs.clear();
            return out;
        }
        for c in out.coeffs.values_mut() {
            *c *= s;
        }
        out
    }

    /// Coefficient convolution truncated to max|k_i| ≤ min(cap, N_a + N_b).
    pub fn mul_capped(&self, other: &Self, cap: usize) -> Self {
        assert_eq!(self.dim, other.dim, "field dimension mismatch");
        let n_out = cap.min(self.trunc + other.trunc);
        let mut out = ScalarField::zero(self.dim);
        out.trunc = n_out;
        let mut dropped = 0.0f64;
        for (ka, ca) in &self.coeffs {
            for (kb, cb) in &other.coeffs {
                let k: Mode = ka.iter().zip(kb.iter()).map(|(a, b)| a + b).collect();
                let c = ca * cb;
                if mode_max_abs(&k) > n_out {
                    dropped += c.norm();
                } else {
                    *out.coeffs.entry(k).or_insert(Complex64::new(0.0, 0.0)) += c;
                }
            }
        }
        out.trunc_loss = self.trunc_loss.max(other.trunc_loss).max(dropped);
        out.normalize();
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.mul_capped(other, trunc_cap())
    }

    /// Mode-wise multiplication by i·k_axis; exact.
    pub fn diff(&self, axis: usize) -> Result<Self, Error> {
        if axis >= self.dim {
            return Err(Error::input(format!(
                "derivative axis {axis} out of range for dimension {}",
                self.dim
            )));
        }
        let mut out = ScalarField::zero(self.dim);
        out.trunc = self.trunc;
        out.trunc_loss = self.trunc_loss;
        for (k, c) in &self.coeffs {
            let factor = Complex64::new(0.0, k[axis] as f64);
            let v = factor * c;
            if v != Complex64::new(0.0, 0.0) {
                out.coeffs.insert(k.clone(), v);
            }
        }
        out.normalize();
        Ok(out)
    }

    /// Σ|coeff|; also a rigorous upper bound for the sup norm.
    pub fn norm_l1(&self) -> f64 {
        // .abs() canonicalizes the empty sum's −0.0
        self.coeffs.values().map(|c| c.norm()).sum::<f64>().abs()
    }

    pub fn sup_estimate(&self) -> f64 {
        self.norm_l1()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in &self.coeffs {
            let phase: f64 = k.iter().zip(x.iter()).map(|(ki, xi)| *ki as f64 * xi).sum();
            acc += c * Complex64::new(phase.cos(), phase.sin());
        }
        acc.re
    }
}

impl std::ops::Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        ScalarField::add(self, rhs)
    }
}

impl std::ops::Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        ScalarField::sub(self, rhs)
    }
}

impl std::ops::Mul for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        ScalarField::mul(self, rhs)
    }
}

/// Polynomial in t with ScalarField coefficients; index = power of t.
/// Houses t-dependent connection and curvature data over Tℝ × L.
#[derive(Clone, Debug, PartialEq)]
pub struct TPolyField {
    dim: usize,
    coeffs: Vec<ScalarField>,
}

impl TPolyField {
    pub fn zero(dim: usize) -> Self {
        TPolyField { dim, coeffs: vec![ScalarField::zero(dim)] }
    }

    pub fn from_field(f: ScalarField) -> Self {
        TPolyField { dim: f.dim(), coeffs: vec![f] }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::from_field(ScalarField::constant(dim, c))
    }

    /// The monomial t.
    pub fn t(dim: usize) -> Self {
        TPolyField { dim, coeffs: vec![ScalarField::zero(dim), ScalarField::constant(dim, 1.0)] }
    }

    /// `Σ poly[j]·t^j` with constant coefficients.
    pub fn poly(dim: usize, poly: &[f64]) -> Self {
        let coeffs = poly.iter().map(|&c| ScalarField::constant(dim, c)).collect();
        let mut out = TPolyField { dim, coeffs };
        out.trim();
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, j: usize) -> ScalarField {
        self.coeffs.get(j).cloned().unwrap_or_else(|| ScalarField::zero(self.dim))
    }

    pub fn coeffs(&self) -> &[ScalarField] {
        &self.coeffs
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 && self.coeffs.last().map(|c| c.is_zero()).unwrap_or(false) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(ScalarField::zero(self.dim));
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "field dimension mismatch");
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = Vec::with_capacity(n);
        for j in 0..n {
            coeffs.push(self.coeff(j).add(&other.coeff(j)));
        }
        let mut out = TPolyField { dim: self.dim, coeffs };
        out.trim();
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c.scale(s)).collect();
        let mut out = TPolyField { dim: self.dim, coeffs };
        out.trim();
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "field dimension mismatch");
        let n = self.coeffs.len() + other.coeffs.len() - 1;
        let mut coeffs = vec![ScalarField::zero(self.dim); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                coeffs[i + j] = coeffs[i + j].add(&a.mul(b));
            }
        }
        let mut out = TPolyField { dim: self.dim, coeffs };
        out.trim();
        out
    }

    /// Axis 0 is t (power rule); axis a ≥ 1 maps to x_{a−1}.
    pub fn diff(&self, axis: usize) -> Result<Self, Error> {
        let coeffs = if axis == 0 {
            let mut v: Vec<ScalarField> = Vec::new();
            for j in 1..self.coeffs.len() {
                v.push(self.coeffs[j].scale(j as f64));
            }
            if v.is_empty() {
                v.push(ScalarField::zero(self.dim));
            }
            v
        } else {
            let mut v = Vec::with_capacity(self.coeffs.len());
            for c in &self.coeffs {
                v.push(c.diff(axis - 1)?);
            }
            v
        };
        let mut out = TPolyField { dim: self.dim, coeffs };
        out.trim();
        Ok(out)
    }

    /// Exact `∫₀¹ p(t) dt = Σ_j coeffs[j]/(j+1)`.
    pub fn integrate_unit(&self) -> ScalarField {
        let mut acc = ScalarField::zero(self.dim);
        for (j, c) in self.coeffs.iter().enumerate() {
            acc = acc.add(&c.scale(1.0 / (j as f64 + 1.0)));
        }
        acc
    }

    /// Evaluates the polynomial at a fixed t, returning a ScalarField.
    pub fn eval_t(&self, t: f64) -> ScalarField {
        let mut acc = ScalarField::zero(self.dim);
        let mut p = 1.0;
        for c in &self.coeffs {
            acc = acc.add(&c.scale(p));
            p *= t;
        }
        acc
    }

    pub fn norm_l1(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_l1()).sum::<f64>().abs()
    }

    pub fn trunc_loss(&self) -> f64 {
        self.coeffs.iter().map(|c| c.trunc_loss()).fold(0.0, f64::max)
    }
}

/// Coefficient algebra shared by ScalarField (axes = torus coordinates) and
/// TPolyField (axis 0 = t, then torus coordinates). Lets the algebroid,
/// form and connection machinery run unchanged over both.
pub trait Coeff: Clone + std::fmt::Debug + PartialEq + Send + Sync {
    fn n_axes(&self) -> usize;
    fn zero_like(&self) -> Self;
    fn constant_like(&self, c: f64) -> Self;
    fn add_c(&self, other: &Self) -> Self;
    fn sub_c(&self, other: &Self) -> Self;
    fn neg_c(&self) -> Self;
    fn scale_c(&self, s: f64) -> Self;
    fn mul_c(&self, other: &Self) -> Self;
    fn diff_c(&self, axis: usize) -> Self;
    fn norm_l1(&self) -> f64;
    fn is_zero(&self) -> bool;
    fn trunc_loss(&self) -> f64;
    /// Coefficient of the constant term (zero mode, t⁰).
    fn constant_part(&self) -> f64;
}

impl Coeff for ScalarField {
    fn n_axes(&self) -> usize {
        self.dim
    }
    fn zero_like(&self) -> Self {
        ScalarField::zero(self.dim)
    }
    fn constant_like(&self, c: f64) -> Self {
        ScalarField::constant(self.dim, c)
    }
    fn add_c(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn sub_c(&self, other: &Self) -> Self {
        self.sub(other)
    }
    fn neg_c(&self) -> Self {
        self.neg()
    }
    fn scale_c(&self, s: f64) -> Self {
        self.scale(s)
    }
    fn mul_c(&self, other: &Self) -> Self {
        self.mul(other)
    }
    fn diff_c(&self, axis: usize) -> Self {
        self.diff(axis).expect("axis checked by caller")
    }
    fn norm_l1(&self) -> f64 {
        ScalarField::norm_l1(self)
    }
    fn is_zero(&self) -> bool {
        ScalarField::is_zero(self)
    }
    fn trunc_loss(&self) -> f64 {
        ScalarField::trunc_loss(self)
    }
    fn constant_part(&self) -> f64 {
        self.coeff(&vec![0; self.dim]).re
    }
}

impl Coeff for TPolyField {
    fn n_axes(&self) -> usize {
        self.dim + 1
    }
    fn zero_like(&self) -> Self {
        TPolyField::zero(self.dim)
    }
    fn constant_like(&self, c: f64) -> Self {
        TPolyField::constant(self.dim, c)
    }
    fn add_c(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn sub_c(&self, other: &Self) -> Self {
        self.sub(other)
    }
    fn neg_c(&self) -> Self {
        self.neg()
    }
    fn scale_c(&self, s: f64) -> Self {
        self.scale(s)
    }
    fn mul_c(&self, other: &Self) -> Self {
        self.mul(other)
    }
    fn diff_c(&self, axis: usize) -> Self {
        self.diff(axis).expect("axis checked by caller")
    }
    fn norm_l1(&self) -> f64 {
        TPolyField::norm_l1(self)
    }
    fn is_zero(&self) -> bool {
        TPolyField::is_zero(self)
    }
    fn trunc_loss(&self) -> f64 {
        TPolyField::trunc_loss(self)
    }
    fn constant_part(&self) -> f64 {
        Coeff::constant_part(&self.coeffs[0])
    }
}

/// Gauss–Legendre nodes and weights on the unit interval, n ≤ 5. Exact for
/// polynomial integrands of degree ≤ 2n−1; the independent cross-check for
/// the exact antiderivative route.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let std: Vec<(f64, f64)> = match n {
        1 => vec![(0.0, 2.0)],
        2 => {
            let a = 1.0 / 3.0f64.sqrt();
            vec![(-a, 1.0), (a, 1.0)]
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            vec![(-a, 5.0 / 9.0), (0.0, 8.0 / 9.0), (a, 5.0 / 9.0)]
        }
        4 => vec![
            (-0.8611363115940526, 0.3478548451374538),
            (-0.3399810435848563, 0.6521451548625461),
            (0.3399810435848563, 0.6521451548625461),
            (0.8611363115940526, 0.3478548451374538),
        ],
        5 => vec![
            (-0.9061798459386640, 0.2369268850561891),
            (-0.5384693101056831, 0.4786286704993665),
            (0.0, 0.5688888888888889),
            (0.5384693101056831, 0.4786286704993665),
            (0.9061798459386640, 0.2369268850561891),
        ],
        _ => panic!("gauss_legendre_unit supports n ≤ 5"),
    };
    std.into_iter().map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constants_multiply() {
        let two = ScalarField::constant(1, 2.0);
        let three = ScalarField::constant(1, 3.0);
        let six = two.mul(&three);
        assert_eq!(six.coeff(&[0]), c(6.0, 0.0));
        assert_eq!(six.norm_l1(), 6.0);
    }

    #[test]
    fn sine_doubles_linearly() {
        let s = ScalarField::sin_axis(1, 0);
        let d = s.add(&s);
        assert_eq!(d.coeff(&[1]), c(0.0, -1.0));
        assert_eq!(d.coeff(&[-1]), c(0.0, 1.0));
    }

    #[test]
    fn sin_times_cos_is_half_sin_double() {
        // By hand: sin·cos = ½ sin(2x), coefficients ∓i/4 at k = ±2.
        let s = ScalarField::sin_axis(1, 0);
        let co = ScalarField::cos_axis(1, 0);
        let p = s.mul(&co);
        assert!((p.coeff(&[2]) - c(0.0, -0.25)).norm() < 1e-15);
        assert!((p.coeff(&[-2]) - c(0.0, 0.25)).norm() < 1e-15);
        assert!(p.coeff(&[0]).norm() < 1e-15);
    }

    #[test]
    fn derivative_of_sin_is_cos() {
        let s = ScalarField::sin_axis(1, 0);
        let d = s.diff(0).unwrap();
        let co = ScalarField::cos_axis(1, 0);
        assert!(d.sub(&co).norm_l1() < 1e-15);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let k = ScalarField::constant(2, 4.5);
        assert!(k.diff(0).unwrap().is_zero());
        assert!(ScalarField::sin_axis(2, 0).diff(1).unwrap().is_zero());
    }

    #[test]
    fn derivative_axis_out_of_range() {
        let s = ScalarField::sin_axis(1, 0);
        assert!(s.diff(1).is_err());
    }

    #[test]
    fn norms() {
        assert_eq!(ScalarField::zero(1).norm_l1(), 0.0);
        assert!((ScalarField::sin_axis(1, 0).norm_l1() - 1.0).abs() < 1e-15);
        assert_eq!(ScalarField::constant(1, -3.0).norm_l1(), 3.0);
    }

    #[test]
    fn product_rule_without_truncation() {
        let f = ScalarField::sin_axis(2, 0);
        let g = ScalarField::cos_axis(2, 1);
        let lhs = f.mul(&g).diff(0).unwrap().add(&f.mul(&g).diff(1).unwrap());
        let rhs = f
            .diff(0)
            .unwrap()
            .mul(&g)
            .add(&f.mul(&g.diff(0).unwrap()))
            .add(&f.diff(1).unwrap().mul(&g))
            .add(&f.mul(&g.diff(1).unwrap()));
        assert!(lhs.sub(&rhs).norm_l1() < 1e-14);
    }

    #[test]
    fn derivatives_commute() {
        let f = ScalarField::from_literals(
            2,
            &[(vec![1, 2], 0.3, -0.7), (vec![2, -1], 1.1, 0.2), (vec![0, 1], -0.4, 0.9)],
        )
        .unwrap();
        let a = f.diff(0).unwrap().diff(1).unwrap();
        let b = f.diff(1).unwrap().diff(0).unwrap();
        assert!(a.sub(&b).norm_l1() < 1e-15);
    }

    #[test]
    fn l1_norm_sub_additive_and_sub_multiplicative() {
        let f = ScalarField::from_literals(1, &[(vec![1], 0.4, 0.1), (vec![3], -0.2, 0.8)]).unwrap();
        let g = ScalarField::from_literals(1, &[(vec![2], 1.4, -0.3), (vec![0], 0.5, 0.0)]).unwrap();
        assert!(f.add(&g).norm_l1() <= f.norm_l1() + g.norm_l1() + 1e-12);
        assert!(f.mul(&g).norm_l1() <= f.norm_l1() * g.norm_l1() + 1e-12);
    }

    #[test]
    fn truncated_product_rule_defect_sits_above_the_cap() {
        // with truncation, both product-rule routes agree exactly on every
        // kept mode; the defect lives only on modes above the cap
        let f = ScalarField::from_literals(1, &[(vec![1], 0.4, -0.2), (vec![2], 0.3, 0.1)]).unwrap();
        let g = ScalarField::from_literals(1, &[(vec![1], -0.7, 0.5), (vec![3], 0.2, -0.6)]).unwrap();
        let cap = 3usize;
        let lhs = f.mul_capped(&g, cap).diff(0).unwrap();
        let rhs = f
            .diff(0)
            .unwrap()
            .mul_capped(&g, cap)
            .add(&f.mul_capped(&g.diff(0).unwrap(), cap));
        let defect = lhs.sub(&rhs);
        for (k, c) in defect.modes() {
            assert!(
                mode_max_abs(k) <= cap && c.norm() < 1e-15 || mode_max_abs(k) > cap,
                "defect on kept mode {k:?}: {c}"
            );
        }
        // the exact (uncapped) routes agree everywhere
        let exact =
            f.mul_capped(&g, 8).diff(0).unwrap().sub(
                &f.diff(0).unwrap().mul_capped(&g, 8).add(&f.mul_capped(&g.diff(0).unwrap(), 8)),
            );
        assert!(exact.norm_l1() < 1e-14);
    }

    #[test]
    fn truncation_records_discarded_mass() {
        let f = ScalarField::mode(1, &[1], c(0.0, -0.5)).unwrap();
        let exact = f.mul_capped(&f, 8);
        assert_eq!(exact.trunc_loss(), 0.0);
        let capped = f.mul_capped(&f, 1);
        assert!(capped.trunc_loss() > 0.0);
        // Only modes with max|k| > cap were discarded.
        assert_eq!(capped.coeff(&[2]), c(0.0, 0.0));
        assert!(capped.coeff(&[0]).norm() > 0.0);
    }

    #[test]
    fn tpoly_integrate_matches_hand_values() {
        // ∫₀¹ t(t−1) dt = −1/6.
        let one = TPolyField::constant(1, 1.0);
        let t = TPolyField::t(1);
        let p = t.mul(&t.sub(&one));
        let v = p.integrate_unit();
        assert!((v.coeff(&[0]).re + 1.0 / 6.0).abs() < 1e-15);

        // Constant integrand.
        let k = TPolyField::constant(1, 2.5);
        assert!((k.integrate_unit().coeff(&[0]).re - 2.5).abs() < 1e-15);

        // Linear integrand t·f → f/2.
        let f = ScalarField::sin_axis(1, 0);
        let tf = TPolyField::t(1).mul(&TPolyField::from_field(f.clone()));
        assert!(tf.integrate_unit().sub(&f.scale(0.5)).norm_l1() < 1e-15);
    }

    #[test]
    fn tpoly_integral_agrees_with_gauss_legendre() {
        let f = ScalarField::from_literals(1, &[(vec![1], 0.3, -0.2)]).unwrap();
        let g = ScalarField::from_literals(1, &[(vec![2], -0.8, 0.05)]).unwrap();
        let t = TPolyField::t(1);
        // degree-4 polynomial in t with field coefficients
        let p = TPolyField::from_field(f)
            .add(&t.mul(&t).mul(&TPolyField::from_field(g.clone())))
            .add(&t.mul(&t).mul(&t).mul(&t).scale(0.7));
        let exact = p.integrate_unit();
        let nodes = gauss_legendre_unit((p.degree() + 1).div_ceil(2));
        let mut quad = ScalarField::zero(1);
        for (x, w) in nodes {
            quad = quad.add(&p.eval_t(x).scale(w));
        }
        assert!(exact.sub(&quad).norm_l1() < 1e-12);
    }

    #[test]
    fn tpoly_t_derivative() {
        // d/dt (t·f) = f
        let f = ScalarField::sin_axis(1, 0);
        let tf = TPolyField::t(1).mul(&TPolyField::from_field(f.clone()));
        let d = tf.diff(0).unwrap();
        assert!(d.sub(&TPolyField::from_field(f)).norm_l1() < 1e-15);
    }

    #[test]
    fn hermitian_symmetry_is_maintained() {
        let f = ScalarField::from_literals(2, &[(vec![1, -2], 0.3, 0.9)]).unwrap();
        let g = f.mul(&f).add(&f.diff(1).unwrap());
        for (k, c) in g.modes() {
            let mirror = g.coeff(&neg_mode(k));
            assert!((mirror - c.conj()).norm() < 1e-15);
        }
        // Real-valuedness at sample points.
        let x = [0.37, 1.21];
        assert!(g.eval(&x).is_finite());
    }
}
