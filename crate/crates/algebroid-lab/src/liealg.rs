//! Finite-dimensional kernel: structure constants, metric symmetrization,
//! the Pfaffian, the bivector map α, the z-cochain, multilinear trace forms
//! and the constant-coefficient Chevalley–Eilenberg differential.

use nalgebra::{DMatrix, DVector};

use crate::combi::{combination_rank, combinations, permutations_signed, sort_with_sign};
use crate::error::Error;
use crate::fields::Coeff;

pub type Mat = DMatrix<f64>;

pub fn commutator(a: &Mat, b: &Mat) -> Result<Mat, Error> {
    if a.nrows() != a.ncols() || a.shape() != b.shape() {
        return Err(Error::input("commutator needs square matrices of equal size"));
    }
    Ok(a * b - b * a)
}

/// Row-major flattening of an n×n matrix; the kernel frame order of the
/// End-model algebroids uses the same layout.
pub fn mat_to_vec(a: &Mat) -> DVector<f64> {
    let n = a.nrows();
    DVector::from_fn(n * n, |i, _| a[(i / n, i % n)])
}

pub fn vec_to_mat(v: &DVector<f64>, n: usize) -> Mat {
    Mat::from_fn(n, n, |p, q| v[p * n + q])
}

/// Constant fibre metric h (symmetric positive definite) with cached inverse.
#[derive(Clone, Debug)]
pub struct FibreMetric {
    n: usize,
    h: Mat,
    h_inv: Mat,
}

impl FibreMetric {
    pub fn new(h: Mat) -> Result<Self, Error> {
        let n = h.nrows();
        if h.ncols() != n {
            return Err(Error::input("metric must be square"));
        }
        let sym_defect = (&h - h.transpose()).abs().max();
        if sym_defect > 1e-12 {
            return Err(Error::input("metric must be symmetric"));
        }
        if nalgebra::linalg::Cholesky::new(h.clone()).is_none() {
            return Err(Error::input("metric must be positive definite"));
        }
        let h_inv = h
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::input("metric is numerically singular"))?;
        Ok(FibreMetric { n, h, h_inv })
    }

    pub fn identity(n: usize) -> Self {
        FibreMetric { n, h: Mat::identity(n, n), h_inv: Mat::identity(n, n) }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> &Mat {
        &self.h
    }

    pub fn h_inv(&self) -> &Mat {
        &self.h_inv
    }

    /// h-adjoint A* = h⁻¹ Aᵀ h.
    pub fn adjoint(&self, a: &Mat) -> Mat {
        &self.h_inv * a.transpose() * &self.h
    }

    /// h-symmetric part ½(A + A*).
    pub fn symmetrize(&self, a: &Mat) -> Mat {
        0.5 * (a + self.adjoint(a))
    }

    /// h-skew part ½(A − A*).
    pub fn skew_part(&self, a: &Mat) -> Mat {
        0.5 * (a - self.adjoint(a))
    }

    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        (u.transpose() * &self.h * v)[(0, 0)]
    }
}

pub fn symmetrize(a: &Mat, h: &FibreMetric) -> Result<Mat, Error> {
    if a.nrows() != h.n() || a.ncols() != h.n() {
        return Err(Error::input("matrix size does not match metric"));
    }
    Ok(h.symmetrize(a))
}

/// Nonzero element of ⋀^{2m}ℝ^{2m}, stored as a scalar multiple of the
/// standard top form e_1∧…∧e_{2m}.
#[derive(Clone, Debug)]
pub struct VolumeElement {
    n: usize,
    scale: f64,
}

impl VolumeElement {
    pub fn new(n: usize, scale: f64) -> Result<Self, Error> {
        if n == 0 || n % 2 != 0 {
            return Err(Error::input("volume element needs even positive dimension"));
        }
        if scale == 0.0 {
            return Err(Error::input("volume element must be nonzero"));
        }
        Ok(VolumeElement { n, scale })
    }

    pub fn standard(n: usize) -> Result<Self, Error> {
        Self::new(n, 1.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Pfaffian of a skew-symmetric matrix via the perfect-matching sum, scaled
/// by the volume scalar. Convention: `Pf([[0,1],[−1,0]]) = +1` under the
/// standard volume.
pub fn pfaffian(s: &Mat, e: &VolumeElement) -> Result<f64, Error> {
    let n = s.nrows();
    if s.ncols() != n || n != e.n() {
        return Err(Error::input("pfaffian: size mismatch with volume element"));
    }
    if n % 2 != 0 {
        return Err(Error::input("pfaffian needs even dimension"));
    }
    let skew_defect = (s + s.transpose()).abs().max();
    if skew_defect > 1e-12 {
        return Err(Error::precondition(format!(
            "pfaffian input is not skew-symmetric (defect {skew_defect:.3e})"
        )));
    }
    Ok(e.scale() * pfaffian_matching_sum(&|i, j| s[(i, j)], n))
}

/// Σ over perfect matchings {(p_i,q_i)} of sgn(p₁q₁…p_mq_m)·Π entry(p_i,q_i).
fn pfaffian_matching_sum(entry: &dyn Fn(usize, usize) -> f64, n: usize) -> f64 {
    fn recurse(
        entry: &dyn Fn(usize, usize) -> f64,
        used: &mut Vec<bool>,
        seq: &mut Vec<usize>,
        acc: f64,
        total: &mut f64,
    ) {
        let n = used.len();
        let first = match used.iter().position(|u| !u) {
            Some(i) => i,
            None => {
                let mut inv = 0usize;
                for i in 0..seq.len() {
                    for j in i + 1..seq.len() {
                        if seq[i] > seq[j] {
                            inv += 1;
                        }
                    }
                }
                *total += if inv % 2 == 0 { acc } else { -acc };
                return;
            }
        };
        used[first] = true;
        seq.push(first);
        for j in first + 1..n {
            if used[j] {
                continue;
            }
            let v = entry(first, j);
            if v != 0.0 {
                used[j] = true;
                seq.push(j);
                recurse(entry, used, seq, acc * v, total);
                seq.pop();
                used[j] = false;
            }
        }
        seq.pop();
        used[first] = false;
    }
    let mut total = 0.0;
    recurse(entry, &mut vec![false; n], &mut Vec::new(), 1.0, &mut total);
    total
}

/// Fully antisymmetric k-linear real form on ℝ^dim, stored densely on sorted
/// index combinations.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstAltForm {
    degree: usize,
    dim: usize,
    vals: Vec<f64>,
    combos: Vec<Vec<usize>>,
}

impl ConstAltForm {
    pub fn zero(dim: usize, degree: usize) -> Self {
        let combos = combinations(dim, degree);
        ConstAltForm { degree, dim, vals: vec![0.0; combos.len()], combos }
    }

    pub fn from_fn(dim: usize, degree: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let combos = combinations(dim, degree);
        let vals = combos.iter().map(|c| f(c)).collect();
        ConstAltForm { degree, dim, vals, combos }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn combos(&self) -> &[Vec<usize>] {
        &self.combos
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    pub fn set(&mut self, combo: &[usize], v: f64) {
        let r = combination_rank(&self.combos, combo);
        self.vals[r] = v;
    }

    /// Value on basis vectors with arbitrary index order (0 on repeats).
    pub fn eval_basis(&self, indices: &[usize]) -> f64 {
        assert_eq!(indices.len(), self.degree);
        match sort_with_sign(indices) {
            None => 0.0,
            Some((sorted, sign)) => {
                let r = combination_rank(&self.combos, &sorted);
                sign * self.vals[r]
            }
        }
    }

    /// Multilinear evaluation on real vectors: Σ_J ψ_J · det(rows J of the
    /// component matrix).
    pub fn eval_vectors(&self, vecs: &[DVector<f64>]) -> f64 {
        assert_eq!(vecs.len(), self.degree);
        if self.degree == 0 {
            return self.vals[0];
        }
        let perms = permutations_signed(self.degree);
        let mut acc = 0.0;
        for (j, combo) in self.combos.iter().enumerate() {
            if self.vals[j] == 0.0 {
                continue;
            }
            let mut minor = 0.0;
            for (perm, sign) in &perms {
                let mut prod = *sign;
                for (slot, p) in perm.iter().enumerate() {
                    prod *= vecs[slot][combo[*p]];
                }
                minor += prod;
            }
            acc += self.vals[j] * minor;
        }
        acc
    }

    /// Same evaluation with coefficient-algebra vector components.
    pub fn eval_fields<C: Coeff>(&self, vecs: &[Vec<C>], proto: &C) -> C {
        assert_eq!(vecs.len(), self.degree);
        if self.degree == 0 {
            return proto.constant_like(self.vals[0]);
        }
        let perms = permutations_signed(self.degree);
        let mut acc = proto.zero_like();
        for (j, combo) in self.combos.iter().enumerate() {
            if self.vals[j] == 0.0 {
                continue;
            }
            for (perm, sign) in &perms {
                let mut prod = proto.constant_like(self.vals[j] * sign);
                for (slot, p) in perm.iter().enumerate() {
                    let comp = &vecs[slot][combo[*p]];
                    if comp.is_zero() {
                        prod = proto.zero_like();
                        break;
                    }
                    prod = prod.mul_c(comp);
                }
                acc = acc.add_c(&prod);
            }
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.dim, self.degree), (other.dim, other.degree));
        let vals = self.vals.iter().zip(&other.vals).map(|(a, b)| a + b).collect();
        ConstAltForm { degree: self.degree, dim: self.dim, vals, combos: self.combos.clone() }
    }

    pub fn scale(&self, s: f64) -> Self {
        let vals = self.vals.iter().map(|a| a * s).collect();
        ConstAltForm { degree: self.degree, dim: self.dim, vals, combos: self.combos.clone() }
    }

    /// Shuffle-convention wedge: (α∧β)(v_1..v_{p+q}) = Σ_shuffles sgn·α·β.
    pub fn wedge(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let deg = self.degree + other.degree;
        let mut out = ConstAltForm::zero(self.dim, deg);
        if deg > self.dim {
            return ConstAltForm::zero(self.dim, self.dim.min(deg));
        }
        let shuffles = crate::combi::shuffles(self.degree, other.degree);
        for (r, combo) in out.combos.clone().iter().enumerate() {
            let mut acc = 0.0;
            for (first, second, sign) in &shuffles {
                let a_idx: Vec<usize> = first.iter().map(|&i| combo[i]).collect();
                let b_idx: Vec<usize> = second.iter().map(|&i| combo[i]).collect();
                acc += sign * self.eval_basis(&a_idx) * other.eval_basis(&b_idx);
            }
            out.vals[r] = acc;
        }
        out
    }

    pub fn norm_max(&self) -> f64 {
        self.vals.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

/// Structure constants c\[k\]\[i\]\[j\] of a finite-dimensional real Lie algebra;
/// construction validates antisymmetry and the Jacobi identity.
#[derive(Clone, Debug)]
pub struct LieStructure {
    dim: usize,
    c: Vec<f64>,
}

impl LieStructure {
    pub fn new(dim: usize, c: Vec<f64>) -> Result<Self, Error> {
        if c.len() != dim * dim * dim {
            return Err(Error::input("structure constant array has wrong length"));
        }
        let ls = LieStructure { dim, c };
        let anti = ls.antisymmetry_defect();
        if anti > 1e-12 {
            return Err(Error::input(format!(
                "structure constants are not antisymmetric (defect {anti:.3e})"
            )));
        }
        let jac = ls.jacobi_defect();
        if jac > 1e-10 {
            return Err(Error::input(format!(
                "structure constants violate the Jacobi identity (defect {jac:.3e})"
            )));
        }
        Ok(ls)
    }

    pub fn abelian(dim: usize) -> Self {
        LieStructure { dim, c: vec![0.0; dim * dim * dim] }
    }

    pub fn so3() -> Self {
        let mut c = vec![0.0; 27];
        let eps = [(0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)];
        for (i, j, k, v) in eps {
            c[(k * 3 + i) * 3 + j] = v;
            c[(k * 3 + j) * 3 + i] = -v;
        }
        LieStructure { dim: 3, c }
    }

    /// Structure constants of a matrix Lie algebra in a given basis: the
    /// commutators are re-expanded in the basis by least squares.
    pub fn from_matrix_basis(basis: &[Mat]) -> Result<Self, Error> {
        let r = basis.len();
        if r == 0 {
            return Err(Error::input("empty basis"));
        }
        let n = basis[0].nrows();
        let mut cols = Mat::zeros(n * n, r);
        for (j, b) in basis.iter().enumerate() {
            if b.shape() != (n, n) {
                return Err(Error::input("basis matrices must share shape"));
            }
            cols.set_column(j, &mat_to_vec(b));
        }
        let svd = cols.clone().svd(true, true);
        let mut c = vec![0.0; r * r * r];
        for i in 0..r {
            for j in 0..r {
                let br = commutator(&basis[i], &basis[j])?;
                let coords = svd
                    .solve(&mat_to_vec(&br), 1e-12)
                    .map_err(|_| Error::input("basis is numerically degenerate"))?;
                let residual = (&cols * &coords - mat_to_vec(&br)).abs().max();
                if residual > 1e-9 {
                    return Err(Error::input("basis does not close under commutators"));
                }
                for k in 0..r {
                    c[(k * r + i) * r + j] = coords[k];
                }
            }
        }
        LieStructure::new(r, c)
    }

    /// gl(n, ℝ) in the matrix-unit basis E_{pq}, row-major order.
    pub fn gl(n: usize) -> Self {
        let basis: Vec<Mat> = (0..n * n)
            .map(|i| Mat::from_fn(n, n, |p, q| if p * n + q == i { 1.0 } else { 0.0 }))
            .collect();
        Self::from_matrix_basis(&basis).expect("matrix units close under commutators")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn c(&self, k: usize, i: usize, j: usize) -> f64 {
        self.c[(k * self.dim + i) * self.dim + j]
    }

    pub fn bracket_vec(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let r = self.dim;
        DVector::from_fn(r, |k, _| {
            let mut acc = 0.0;
            for i in 0..r {
                if u[i] == 0.0 {
                    continue;
                }
                for j in 0..r {
                    acc += u[i] * v[j] * self.c(k, i, j);
                }
            }
            acc
        })
    }

    pub fn antisymmetry_defect(&self) -> f64 {
        let r = self.dim;
        let mut worst = 0.0f64;
        for k in 0..r {
            for i in 0..r {
                for j in 0..r {
                    worst = worst.max((self.c(k, i, j) + self.c(k, j, i)).abs());
                }
            }
        }
        worst
    }

    pub fn jacobi_defect(&self) -> f64 {
        let r = self.dim;
        let mut worst = 0.0f64;
        for i in 0..r {
            for j in 0..r {
                for k in 0..r {
                    for l in 0..r {
                        let mut acc = 0.0;
                        for m in 0..r {
                            acc += self.c(m, i, j) * self.c(l, m, k)
                                + self.c(m, j, k) * self.c(l, m, i)
                                + self.c(m, k, i) * self.c(l, m, j);
                        }
                        worst = worst.max(acc.abs());
                    }
                }
            }
        }
        worst
    }
}

/// Bivector of the h-skew part of A: the unique B ∈ ⋀²ℝ^n with
/// ⟨B, ν∧μ⟩_h = ½(h(Aν,μ) − h(ν,Aμ)). As a coefficient matrix
/// B = −skew_h(A)·h⁻¹ (antisymmetric).
pub fn alpha_matrix(a: &Mat, h: &FibreMetric) -> Mat {
    -(h.skew_part(a) * h.h_inv())
}

pub fn alpha_map(a: &Mat, h: &FibreMetric) -> Result<ConstAltForm, Error> {
    if a.nrows() != h.n() || a.ncols() != h.n() {
        return Err(Error::input("alpha map: matrix size does not match metric"));
    }
    let b = alpha_matrix(a, h);
    let n = h.n();
    Ok(ConstAltForm::from_fn(n, 2, |combo| b[(combo[0], combo[1])]))
}

/// Pairs the volume element with a wedge of m bivectors under the h-induced
/// inner product on top multivectors: scale · top-coefficient · det(h).
fn top_pairing(e: &VolumeElement, bivectors: &[Mat], h: &FibreMetric) -> f64 {
    let n = e.n();
    debug_assert_eq!(bivectors.len() * 2, n);
    fn recurse(bv: &[Mat], used: &mut Vec<bool>, seq: &mut Vec<usize>, acc: f64, total: &mut f64) {
        let n = used.len();
        if bv.is_empty() {
            let mut inv = 0usize;
            for i in 0..seq.len() {
                for j in i + 1..seq.len() {
                    if seq[i] > seq[j] {
                        inv += 1;
                    }
                }
            }
            *total += if inv % 2 == 0 { acc } else { -acc };
            return;
        }
        for p in 0..n {
            if used[p] {
                continue;
            }
            for q in p + 1..n {
                if used[q] {
                    continue;
                }
                let v = bv[0][(p, q)];
                if v != 0.0 {
                    used[p] = true;
                    used[q] = true;
                    seq.push(p);
                    seq.push(q);
                    recurse(&bv[1..], used, seq, acc * v, total);
                    seq.pop();
                    seq.pop();
                    used[p] = false;
                    used[q] = false;
                }
            }
        }
    }
    let mut total = 0.0;
    recurse(bivectors, &mut vec![false; n], &mut Vec::new(), 1.0, &mut total);
    e.scale() * total * h.h().determinant()
}

/// c(m) = (−1)^{m−1}(m−1)!/(2^{m−1}(2m−1)!).
pub fn z_constant(m: usize) -> f64 {
    let sign = if (m - 1) % 2 == 0 { 1.0 } else { -1.0 };
    let fact = |k: usize| (1..=k).map(|x| x as f64).product::<f64>();
    sign * fact(m - 1) / (2f64.powi(m as i32 - 1) * fact(2 * m - 1))
}

/// `z_{2m−1}(A_1,…,A_{2m−1}) = c(m) Σ_σ sgn σ (e, αA_{σ1} ∧ α[A_{σ2},A_{σ3}]
/// ∧ … ∧ α[A_{σ(2m−2)},A_{σ(2m−1)}])`.
pub fn z_form(args: &[Mat], h: &FibreMetric, e: &VolumeElement) -> Result<f64, Error> {
    let n = e.n();
    let m = n / 2;
    if args.len() != 2 * m - 1 {
        return Err(Error::input(format!(
            "z form on ⋀^{}ℝ^{} takes {} arguments, got {}",
            n,
            n,
            2 * m - 1,
            args.len()
        )));
    }
    for a in args {
        if a.nrows() != n || a.ncols() != n {
            return Err(Error::input("z form: matrix size mismatch"));
        }
    }
    let mut total = 0.0;
    for (perm, sign) in permutations_signed(2 * m - 1) {
        let mut bivectors = Vec::with_capacity(m);
        bivectors.push(alpha_matrix(&args[perm[0]], h));
        let mut idx = 1;
        while idx < 2 * m - 1 {
            let br = commutator(&args[perm[idx]], &args[perm[idx + 1]])?;
            bivectors.push(alpha_matrix(&br, h));
            idx += 2;
        }
        total += sign * top_pairing(e, &bivectors, h);
    }
    Ok(z_constant(m) * total)
}

/// Constant-coefficient Chevalley–Eilenberg-type differential with the sign
/// layout `(dψ)(v_1,…,v_{k+1}) = Σ_{i<j} (−1)^{i+j+1} ψ([v_i,v_j], …î…ĵ…)`.
pub fn ce_differential(psi: &ConstAltForm, g: &LieStructure) -> Result<ConstAltForm, Error> {
    if psi.dim() != g.dim() {
        return Err(Error::input("form dimension does not match Lie algebra"));
    }
    if psi.degree() >= g.dim() {
        return Err(Error::input("differential of a top-degree form"));
    }
    let k = psi.degree();
    let out = ConstAltForm::from_fn(g.dim(), k + 1, |combo| {
        let mut acc = 0.0;
        for i in 0..k + 1 {
            for j in i + 1..k + 1 {
                let sign = if (i + j + 1) % 2 == 0 { 1.0 } else { -1.0 };
                let rest: Vec<usize> = combo
                    .iter()
                    .enumerate()
                    .filter(|(t, _)| *t != i && *t != j)
                    .map(|(_, v)| *v)
                    .collect();
                for l in 0..g.dim() {
                    let cc = g.c(l, combo[i], combo[j]);
                    if cc == 0.0 {
                        continue;
                    }
                    let mut idx = Vec::with_capacity(k);
                    idx.push(l);
                    idx.extend_from_slice(&rest);
                    acc += sign * cc * psi.eval_basis(&idx);
                }
            }
        }
        acc
    });
    Ok(out)
}

/// Antisymmetrized trace form of odd arity p:
/// (1/p!) Σ_σ sgn σ tr(Ã_{σ1} ⋯ Ã_{σp}), Ã the h-symmetrization.
pub fn trace_form(args: &[Mat], h: &FibreMetric) -> Result<f64, Error> {
    let p = args.len();
    if p % 2 == 0 {
        return Err(Error::input("trace form takes an odd number of arguments"));
    }
    let tilde: Vec<Mat> = args.iter().map(|a| h.symmetrize(a)).collect();
    let mut acc = 0.0;
    for (perm, sign) in permutations_signed(p) {
        let mut prod = tilde[perm[0]].clone();
        for t in perm.iter().skip(1) {
            prod *= &tilde[*t];
        }
        acc += sign * prod.trace();
    }
    let fact: f64 = (1..=p).map(|x| x as f64).product();
    Ok(acc / fact)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn e_basis() -> [Mat; 4] {
        // §-example endomorphism basis: E1 = e*1⊗e1, E2 = e*2⊗e2,
        // E3 = e*1⊗e2 + e*2⊗e1, E4 = e*1⊗e2 − e*2⊗e1.
        [
            Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
            Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]),
        ]
    }

    fn rand_mat(rng: &mut ChaCha8Rng, n: usize) -> Mat {
        Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn commutator_examples() {
        let [e1, _, e3, _] = e_basis();
        let br = commutator(&e1, &e3).unwrap();
        assert_eq!(br, Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        assert_eq!(commutator(&e1, &e1).unwrap().abs().max(), 0.0);
        let id = Mat::identity(2, 2);
        assert_eq!(commutator(&id, &e3).unwrap().abs().max(), 0.0);
    }

    #[test]
    fn symmetrize_examples() {
        let h = FibreMetric::identity(2);
        let skew = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(symmetrize(&skew, &h).unwrap().abs().max() < 1e-15);
        let sym = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        assert!((symmetrize(&sym, &h).unwrap() - &sym).abs().max() < 1e-15);

        // Non-identity metric, by hand: h = diag(1,2), A = [[0,1],[0,0]]
        // gives ½(A + h⁻¹Aᵀh) = [[0, 1/2],[1/4, 0]].
        let h2 = FibreMetric::new(Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0])).unwrap();
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let s = symmetrize(&a, &h2).unwrap();
        let expect = Mat::from_row_slice(2, 2, &[0.0, 0.5, 0.25, 0.0]);
        assert!((s - expect).abs().max() < 1e-15);
    }

    #[test]
    fn symmetrize_is_idempotent_and_self_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = FibreMetric::new(Mat::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])).unwrap();
        for _ in 0..20 {
            let a = rand_mat(&mut rng, 2);
            let s = h.symmetrize(&a);
            assert!((h.symmetrize(&s) - &s).abs().max() < 1e-12);
            assert!((h.adjoint(&s) - &s).abs().max() < 1e-12);
        }
    }

    #[test]
    fn pfaffian_examples() {
        let vol = VolumeElement::standard(2).unwrap();
        let s = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert_eq!(pfaffian(&s, &vol).unwrap(), 1.0);
        assert_eq!(pfaffian(&Mat::zeros(2, 2), &vol).unwrap(), 0.0);

        let vol4 = VolumeElement::standard(4).unwrap();
        let (a, b) = (1.7, -0.6);
        let mut blk = Mat::zeros(4, 4);
        blk[(0, 1)] = a;
        blk[(1, 0)] = -a;
        blk[(2, 3)] = b;
        blk[(3, 2)] = -b;
        assert!((pfaffian(&blk, &vol4).unwrap() - a * b).abs() < 1e-15);
    }

    #[test]
    fn pfaffian_squared_is_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [2usize, 4] {
            let vol = VolumeElement::standard(n).unwrap();
            for _ in 0..10 {
                let a = rand_mat(&mut rng, n);
                let s = &a - a.transpose();
                let pf = pfaffian(&s, &vol).unwrap();
                let det = s.determinant();
                assert!((pf * pf - det).abs() <= 1e-9 * det.abs().max(1.0));
            }
        }
    }

    #[test]
    fn pfaffian_rejects_bad_input() {
        let vol = VolumeElement::standard(2).unwrap();
        let not_skew = Mat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(pfaffian(&not_skew, &vol), Err(Error::Precondition(_))));
        assert!(VolumeElement::standard(3).is_err());
    }

    #[test]
    fn alpha_examples() {
        let h = FibreMetric::identity(2);
        let sym = Mat::from_row_slice(2, 2, &[1.0, 2.0, 2.0, -1.0]);
        assert!(alpha_map(&sym, &h).unwrap().norm_max() < 1e-15);

        // α(E4) pairs with e1∧e2 to ½((E4e1,e2) − (e1,E4e2)) = 1.
        let e4 = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let b = alpha_map(&e4, &h).unwrap();
        assert!((b.eval_basis(&[0, 1]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = FibreMetric::new(Mat::from_row_slice(
            3,
            3,
            &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 1.5],
        ))
        .unwrap();
        for _ in 0..10 {
            let a = rand_mat(&mut rng, 3);
            let b = rand_mat(&mut rng, 3);
            let lhs = alpha_map(&(&a + &b), &h).unwrap();
            let rhs = alpha_map(&a, &h).unwrap().add(&alpha_map(&b, &h).unwrap());
            assert!(lhs.add(&rhs.scale(-1.0)).norm_max() < 1e-12);
        }
    }

    #[test]
    fn z_form_examples() {
        let h = FibreMetric::identity(2);
        let vol = VolumeElement::standard(2).unwrap();
        assert_eq!(z_constant(1), 1.0);
        let e4 = Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!((z_form(&[e4.clone()], &h, &vol).unwrap() - 1.0).abs() < 1e-15);

        // h-symmetric argument gives zero for m = 1.
        let sym = Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 0.0]);
        assert!(z_form(&[sym], &h, &vol).unwrap().abs() < 1e-15);

        // arity check
        assert!(z_form(&[e4.clone(), e4], &h, &vol).is_err());
    }

    #[test]
    fn z_form_is_antisymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = FibreMetric::identity(4);
        let vol = VolumeElement::standard(4).unwrap();
        let a = rand_mat(&mut rng, 4);
        let b = rand_mat(&mut rng, 4);
        let c = rand_mat(&mut rng, 4);
        let v1 = z_form(&[a.clone(), b.clone(), c.clone()], &h, &vol).unwrap();
        let v2 = z_form(&[b.clone(), a.clone(), c.clone()], &h, &vol).unwrap();
        assert!((v1 + v2).abs() < 1e-9 * v1.abs().max(1.0));
        // repeated arguments kill the form
        let v3 = z_form(&[a.clone(), a.clone(), b.clone()], &h, &vol).unwrap();
        assert!(v3.abs() < 1e-10);
    }

    #[test]
    fn ce_differential_so3() {
        let so3 = LieStructure::so3();
        let eps1 = ConstAltForm::from_fn(3, 1, |c| if c[0] == 0 { 1.0 } else { 0.0 });
        let d = ce_differential(&eps1, &so3).unwrap();
        // (dψ)(v2,v3) = +ψ([v2,v3]) = ψ(v1) = 1 in this sign layout.
        assert!((d.eval_basis(&[1, 2]) - 1.0).abs() < 1e-15);
        assert!(d.eval_basis(&[0, 1]).abs() < 1e-15);
        assert!(d.eval_basis(&[0, 2]).abs() < 1e-15);
    }

    #[test]
    fn ce_differential_abelian_is_zero() {
        let g = LieStructure::abelian(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for deg in 1..3 {
            let psi = ConstAltForm::from_fn(3, deg, |_| rng.gen_range(-1.0..1.0));
            assert!(ce_differential(&psi, &g).unwrap().norm_max() == 0.0);
        }
    }

    #[test]
    fn ce_differential_squares_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for g in [LieStructure::so3(), LieStructure::gl(2)] {
            for deg in 1..g.dim() - 1 {
                let psi = ConstAltForm::from_fn(g.dim(), deg, |_| rng.gen_range(-1.0..1.0));
                let dd = ce_differential(&ce_differential(&psi, &g).unwrap(), &g).unwrap();
                assert!(dd.norm_max() < 1e-12, "d² defect {}", dd.norm_max());
            }
        }
    }

    #[test]
    fn trace_form_examples() {
        let h = FibreMetric::identity(2);
        let d = Mat::from_row_slice(2, 2, &[1.5, 0.0, 0.0, -0.25]);
        assert!((trace_form(&[d.clone()], &h).unwrap() - 1.25).abs() < 1e-15);
        let skew = Mat::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        assert!(trace_form(&[skew], &h).unwrap().abs() < 1e-15);
        assert!(trace_form(&[d.clone(), d], &h).is_err());
    }

    #[test]
    fn trace_form_vanishes_on_repeats() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let h = FibreMetric::identity(3);
        let a = rand_mat(&mut rng, 3);
        let b = rand_mat(&mut rng, 3);
        let c = rand_mat(&mut rng, 3);
        let v =
            trace_form(&[a.clone(), a.clone(), b.clone(), c.clone(), b.clone()], &h).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    #[allow(clippy::identity_op)]
    fn jacobi_validation_rejects_garbage() {
        let mut c = vec![0.0; 27];
        // antisymmetric but Jacobi-violating constants
        c[(0 * 3 + 0) * 3 + 1] = 1.0;
        c[(0 * 3 + 1) * 3 + 0] = -1.0;
        c[(1 * 3 + 1) * 3 + 2] = 1.0;
        c[(1 * 3 + 2) * 3 + 1] = -1.0;
        c[(0 * 3 + 1) * 3 + 2] = 1.0;
        c[(0 * 3 + 2) * 3 + 1] = -1.0;
        c[(2 * 3 + 0) * 3 + 2] = 1.0;
        c[(2 * 3 + 2) * 3 + 0] = -1.0;
        assert!(LieStructure::new(3, c).is_err());
        assert!(LieStructure::so3().jacobi_defect() < 1e-15);
        assert!(LieStructure::gl(3).jacobi_defect() < 1e-12);
    }

    #[test]
    fn wedge_of_dual_basis_forms() {
        let e1 = ConstAltForm::from_fn(3, 1, |c| if c[0] == 0 { 1.0 } else { 0.0 });
        let e2 = ConstAltForm::from_fn(3, 1, |c| if c[0] == 1 { 1.0 } else { 0.0 });
        let w = e1.wedge(&e2);
        assert!((w.eval_basis(&[0, 1]) - 1.0).abs() < 1e-15);
        assert!((w.eval_basis(&[1, 0]) + 1.0).abs() < 1e-15);
        assert!(w.eval_basis(&[1, 2]).abs() < 1e-15);
    }
}
