//! Trivialized Lie algebroids over flat tori: frame-coordinate brackets and
//! anchors, validation, scalar and vector-valued forms with the differential
//! d_L, transitive models TM ⊕ (M×𝔤), the Tℝ×L extension, and reductions.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DVector;

use crate::combi::{combination_rank, combinations, sort_with_sign};
use crate::error::Error;
use crate::fields::{Coeff, ScalarField, TPolyField};
use crate::liealg::{FibreMetric, LieStructure, Mat};

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Rank-r trivialized Lie algebroid over T^d (or Tℝ×T^d for t-polynomial
/// coefficients): an anchor matrix and structure functions on global frames.
#[derive(Debug)]
pub struct TrivLieAlgebroid<C: Coeff> {
    id: u64,
    base_dim: usize,
    rank: usize,
    /// anchor[i][a]: a-th coordinate component of the anchor of frame e_i.
    anchor: Vec<C>,
    /// c\[k\]\[i\]\[j\] with `[[e_i, e_j]] = Σ_k c[k][i][j] e_k` (antisymmetric in i,j).
    structure: Vec<C>,
    proto: C,
    /// Set when the algebroid is transitive trivialized with frames
    /// [tangent | kernel]: number of kernel frames.
    g_dim: Option<usize>,
    /// Set when the kernel is End(ℝ^n) in matrix-unit order, row-major.
    end_dim: Option<usize>,
}

impl<C: Coeff> TrivLieAlgebroid<C> {
    pub fn new_unchecked(
        base_dim: usize,
        rank: usize,
        anchor: Vec<C>,
        structure: Vec<C>,
        proto: C,
        g_dim: Option<usize>,
        end_dim: Option<usize>,
    ) -> Result<Arc<Self>, Error> {
        if anchor.len() != rank * base_dim {
            return Err(Error::input("anchor matrix has wrong shape"));
        }
        if structure.len() != rank * rank * rank {
            return Err(Error::input("structure array has wrong shape"));
        }
        if proto.n_axes() != base_dim {
            return Err(Error::input("prototype coefficient has wrong axis count"));
        }
        Ok(Arc::new(TrivLieAlgebroid {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            base_dim,
            rank,
            anchor,
            structure,
            proto,
            g_dim,
            end_dim,
        }))
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Same algebroid: identical instance or structurally equal data.
    pub fn same_as(&self, other: &Self) -> bool {
        self.id == other.id
            || (self.base_dim == other.base_dim
                && self.rank == other.rank
                && self.anchor == other.anchor
                && self.structure == other.structure)
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn proto(&self) -> &C {
        &self.proto
    }

    pub fn g_dim(&self) -> Option<usize> {
        self.g_dim
    }

    pub fn end_dim(&self) -> Option<usize> {
        self.end_dim
    }

    /// Number of tangent frames in a transitive trivialized model.
    pub fn tangent_dim(&self) -> Option<usize> {
        self.g_dim.map(|g| self.rank - g)
    }

    pub fn anchor_entry(&self, frame: usize, axis: usize) -> &C {
        &self.anchor[frame * self.base_dim + axis]
    }

    pub fn structure_entry(&self, k: usize, i: usize, j: usize) -> &C {
        &self.structure[(k * self.rank + i) * self.rank + j]
    }

    /// Derivation along the anchor of frame e_i.
    pub fn anchor_frame_apply(&self, frame: usize, f: &C) -> C {
        let mut acc = self.proto.zero_like();
        for a in 0..self.base_dim {
            let coef = self.anchor_entry(frame, a);
            if coef.is_zero() {
                continue;
            }
            acc = acc.add_c(&coef.mul_c(&f.diff_c(a)));
        }
        acc
    }

    /// ρ(ξ)(f) for a section with the given components.
    pub fn anchor_apply(&self, comps: &[C], f: &C) -> C {
        let mut acc = self.proto.zero_like();
        for (i, comp) in comps.iter().enumerate() {
            if comp.is_zero() {
                continue;
            }
            acc = acc.add_c(&comp.mul_c(&self.anchor_frame_apply(i, f)));
        }
        acc
    }

    /// Kernel structure constants of a transitive model, required constant.
    pub fn kernel_structure(&self) -> Result<LieStructure, Error> {
        let g = self.g_dim.ok_or_else(|| Error::input("not a transitive trivialized model"))?;
        let t = self.rank - g;
        let mut c = vec![0.0; g * g * g];
        for k in 0..g {
            for i in 0..g {
                for j in 0..g {
                    let entry = self.structure_entry(t + k, t + i, t + j);
                    let val = entry.constant_part();
                    if entry.sub_c(&entry.constant_like(val)).norm_l1() > 1e-12 {
                        return Err(Error::input("kernel structure function is not constant"));
                    }
                    c[(k * g + i) * g + j] = val;
                }
            }
        }
        LieStructure::new(g, c)
    }
}

pub type ScalarAlgebroid = TrivLieAlgebroid<ScalarField>;

/// Tangent algebroid T(T^d): identity anchor, zero structure functions.
pub fn tangent_algebroid(d: usize) -> Arc<ScalarAlgebroid> {
    let proto = ScalarField::zero(d);
    let mut anchor = vec![proto.clone(); d * d];
    for i in 0..d {
        anchor[i * d + i] = ScalarField::constant(d, 1.0);
    }
    let structure = vec![proto.clone(); d * d * d];
    TrivLieAlgebroid::new_unchecked(d, d, anchor, structure, proto, Some(0), None)
        .expect("tangent shapes are consistent")
}

/// Transitive model A = T(T^d) ⊕ (T^d × 𝔤): anchor projects onto the first
/// d frames, kernel bracket from 𝔤, mixed structure functions zero.
pub fn build_transitive(d: usize, g: &LieStructure) -> Arc<ScalarAlgebroid> {
    let r = d + g.dim();
    let proto = ScalarField::zero(d);
    let mut anchor = vec![proto.clone(); r * d];
    for i in 0..d {
        anchor[i * d + i] = ScalarField::constant(d, 1.0);
    }
    let mut structure = vec![proto.clone(); r * r * r];
    for k in 0..g.dim() {
        for i in 0..g.dim() {
            for j in 0..g.dim() {
                let v = g.c(k, i, j);
                if v != 0.0 {
                    structure[((d + k) * r + (d + i)) * r + (d + j)] =
                        ScalarField::constant(d, v);
                }
            }
        }
    }
    TrivLieAlgebroid::new_unchecked(d, r, anchor, structure, proto, Some(g.dim()), None)
        .expect("transitive shapes are consistent")
}

/// A = TM ⊕ End(ℝ^n) with kernel frames the matrix units, row-major.
pub fn build_end_model(d: usize, n: usize) -> Arc<ScalarAlgebroid> {
    let g = LieStructure::gl(n);
    let alg = build_transitive(d, &g);
    TrivLieAlgebroid::new_unchecked(
        alg.base_dim,
        alg.rank,
        alg.anchor.clone(),
        alg.structure.clone(),
        alg.proto.clone(),
        alg.g_dim,
        Some(n),
    )
    .expect("shapes preserved")
}

fn lift_field(f: &ScalarField) -> TPolyField {
    TPolyField::from_field(f.clone())
}

/// Tℝ × L: frame 0 is ∂/∂t with anchor the t-derivation, frames 1..=r are
/// the lifted frames of L with t-independent structure.
pub fn product_with_line(l: &Arc<ScalarAlgebroid>) -> Arc<TrivLieAlgebroid<TPolyField>> {
    let d = l.base_dim();
    let r = l.rank();
    let proto = TPolyField::zero(d);
    let rr = r + 1;
    let dd = d + 1;
    let mut anchor = vec![proto.clone(); rr * dd];
    anchor[0] = TPolyField::constant(d, 1.0); // ∂/∂t ↦ d/dt (axis 0)
    for i in 0..r {
        for a in 0..d {
            anchor[(i + 1) * dd + (a + 1)] = lift_field(l.anchor_entry(i, a));
        }
    }
    let mut structure = vec![proto.clone(); rr * rr * rr];
    for k in 0..r {
        for i in 0..r {
            for j in 0..r {
                let e = l.structure_entry(k, i, j);
                if !e.is_zero() {
                    structure[((k + 1) * rr + (i + 1)) * rr + (j + 1)] = lift_field(e);
                }
            }
        }
    }
    TrivLieAlgebroid::new_unchecked(
        dd,
        rr,
        anchor,
        structure,
        proto,
        l.g_dim(),
        l.end_dim(),
    )
    .expect("product shapes are consistent")
}

/// Section of a trivialized algebroid, stored in frame components.
#[derive(Clone, Debug)]
pub struct Section<C: Coeff> {
    pub alg: Arc<TrivLieAlgebroid<C>>,
    pub comps: Vec<C>,
}

impl<C: Coeff> Section<C> {
    pub fn new(alg: Arc<TrivLieAlgebroid<C>>, comps: Vec<C>) -> Result<Self, Error> {
        if comps.len() != alg.rank() {
            return Err(Error::input("section component count differs from rank"));
        }
        Ok(Section { alg, comps })
    }

    pub fn zero(alg: &Arc<TrivLieAlgebroid<C>>) -> Self {
        Section { alg: alg.clone(), comps: vec![alg.proto.zero_like(); alg.rank()] }
    }

    pub fn frame(alg: &Arc<TrivLieAlgebroid<C>>, i: usize) -> Self {
        let mut s = Self::zero(alg);
        s.comps[i] = alg.proto.constant_like(1.0);
        s
    }

    pub fn add(&self, other: &Self) -> Self {
        let comps = self.comps.iter().zip(&other.comps).map(|(a, b)| a.add_c(b)).collect();
        Section { alg: self.alg.clone(), comps }
    }

    pub fn scale(&self, s: f64) -> Self {
        Section { alg: self.alg.clone(), comps: self.comps.iter().map(|c| c.scale_c(s)).collect() }
    }

    pub fn mul_field(&self, f: &C) -> Self {
        Section { alg: self.alg.clone(), comps: self.comps.iter().map(|c| c.mul_c(f)).collect() }
    }

    pub fn norm(&self) -> f64 {
        self.comps.iter().map(|c| c.norm_l1()).fold(0.0, f64::max)
    }
}

/// Leibniz-extended bracket in frame components:
/// `[[ξ,η]]^k = Σ_{ij} ξ^i η^j c^k_{ij} + ρ(ξ)(η^k) − ρ(η)(ξ^k)`.
pub fn bracket<C: Coeff>(xi: &Section<C>, eta: &Section<C>) -> Result<Section<C>, Error> {
    if !xi.alg.same_as(&eta.alg) {
        return Err(Error::input("bracket of sections of different algebroids"));
    }
    let alg = &xi.alg;
    let r = alg.rank();
    let mut comps = Vec::with_capacity(r);
    for k in 0..r {
        let mut acc = alg.proto.zero_like();
        for i in 0..r {
            if xi.comps[i].is_zero() {
                continue;
            }
            for j in 0..r {
                if eta.comps[j].is_zero() {
                    continue;
                }
                let c = alg.structure_entry(k, i, j);
                if c.is_zero() {
                    continue;
                }
                acc = acc.add_c(&xi.comps[i].mul_c(&eta.comps[j]).mul_c(c));
            }
        }
        acc = acc.add_c(&alg.anchor_apply(&xi.comps, &eta.comps[k]));
        acc = acc.sub_c(&alg.anchor_apply(&eta.comps, &xi.comps[k]));
        comps.push(acc);
    }
    Ok(Section { alg: alg.clone(), comps })
}

/// Commutator of the anchor images as coordinate vector fields.
fn anchor_field_bracket<C: Coeff>(
    alg: &TrivLieAlgebroid<C>,
    i: usize,
    j: usize,
    axis: usize,
) -> C {
    let mut acc = alg.proto.zero_like();
    for b in 0..alg.base_dim() {
        let xi_b = alg.anchor_entry(i, b);
        let eta_b = alg.anchor_entry(j, b);
        if !xi_b.is_zero() {
            acc = acc.add_c(&xi_b.mul_c(&alg.anchor_entry(j, axis).diff_c(b)));
        }
        if !eta_b.is_zero() {
            acc = acc.sub_c(&eta_b.mul_c(&alg.anchor_entry(i, axis).diff_c(b)));
        }
    }
    acc
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub jacobi_defect: f64,
    pub anchor_defect: f64,
    pub antisymmetry_defect: f64,
    pub pass: bool,
}

/// Checks the Jacobi identity over frame triples and that the anchor is a
/// bracket homomorphism over frame pairs; the Leibniz extension carries the
/// identities to all sections.
pub fn validate<C: Coeff>(alg: &Arc<TrivLieAlgebroid<C>>, tol: f64) -> ValidationReport {
    let r = alg.rank();
    let mut anti = 0.0f64;
    for k in 0..r {
        for i in 0..r {
            for j in 0..r {
                anti = anti.max(
                    alg.structure_entry(k, i, j).add_c(alg.structure_entry(k, j, i)).norm_l1(),
                );
            }
        }
    }

    let mut anchor_defect = 0.0f64;
    for i in 0..r {
        for j in i + 1..r {
            let br = bracket(&Section::frame(alg, i), &Section::frame(alg, j))
                .expect("frames share the algebroid");
            for axis in 0..alg.base_dim() {
                // #[[e_i,e_j]] component on this axis
                let mut lhs = alg.proto.zero_like();
                for k in 0..r {
                    if br.comps[k].is_zero() {
                        continue;
                    }
                    lhs = lhs.add_c(&br.comps[k].mul_c(alg.anchor_entry(k, axis)));
                }
                let rhs = anchor_field_bracket(alg.as_ref(), i, j, axis);
                anchor_defect = anchor_defect.max(lhs.sub_c(&rhs).norm_l1());
            }
        }
    }

    let mut jacobi = 0.0f64;
    for i in 0..r {
        for j in i + 1..r {
            for k in j + 1..r {
                let ei = Section::frame(alg, i);
                let ej = Section::frame(alg, j);
                let ek = Section::frame(alg, k);
                let t1 = bracket(&ei, &bracket(&ej, &ek).unwrap()).unwrap();
                let t2 = bracket(&ej, &bracket(&ek, &ei).unwrap()).unwrap();
                let t3 = bracket(&ek, &bracket(&ei, &ej).unwrap()).unwrap();
                jacobi = jacobi.max(t1.add(&t2).add(&t3).norm());
            }
        }
    }

    ValidationReport {
        jacobi_defect: jacobi,
        anchor_defect,
        antisymmetry_defect: anti,
        pass: jacobi <= tol && anchor_defect <= tol && anti <= tol,
    }
}

/// Scalar k-form on an algebroid, stored on sorted frame combinations.
#[derive(Clone, Debug)]
pub struct LForm<C: Coeff> {
    pub alg: Arc<TrivLieAlgebroid<C>>,
    degree: usize,
    vals: Vec<C>,
    combos: Vec<Vec<usize>>,
}

impl<C: Coeff> LForm<C> {
    pub fn zero(alg: &Arc<TrivLieAlgebroid<C>>, degree: usize) -> Result<Self, Error> {
        // degree > rank is the canonical zero form with no stored slots
        let combos = combinations(alg.rank(), degree);
        Ok(LForm { alg: alg.clone(), degree, vals: vec![alg.proto.zero_like(); combos.len()], combos })
    }

    pub fn from_fn(
        alg: &Arc<TrivLieAlgebroid<C>>,
        degree: usize,
        mut f: impl FnMut(&[usize]) -> C,
    ) -> Result<Self, Error> {
        let mut form = Self::zero(alg, degree)?;
        for (r, combo) in form.combos.clone().iter().enumerate() {
            form.vals[r] = f(combo);
        }
        Ok(form)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn combos(&self) -> &[Vec<usize>] {
        &self.combos
    }

    pub fn vals(&self) -> &[C] {
        &self.vals
    }

    pub fn value(&self, combo: &[usize]) -> &C {
        &self.vals[combination_rank(&self.combos, combo)]
    }

    pub fn set(&mut self, combo: &[usize], v: C) {
        let r = combination_rank(&self.combos, combo);
        self.vals[r] = v;
    }

    /// Value on frames in arbitrary order, zero on repeats.
    pub fn eval_frames(&self, indices: &[usize]) -> C {
        if self.combos.is_empty() {
            return self.alg.proto.zero_like();
        }
        match sort_with_sign(indices) {
            None => self.alg.proto.zero_like(),
            Some((sorted, sign)) => {
                self.vals[combination_rank(&self.combos, &sorted)].scale_c(sign)
            }
        }
    }

    /// Multilinear evaluation on sections.
    pub fn eval_sections(&self, args: &[Section<C>]) -> Result<C, Error> {
        if args.len() != self.degree {
            return Err(Error::input("argument count differs from form degree"));
        }
        for s in args {
            if !s.alg.same_as(&self.alg) {
                return Err(Error::input("section belongs to a different algebroid"));
            }
        }
        if self.degree == 0 {
            return Ok(self.vals[0].clone());
        }
        let perms = crate::combi::permutations_signed(self.degree);
        let mut acc = self.alg.proto.zero_like();
        for (r, combo) in self.combos.iter().enumerate() {
            if self.vals[r].is_zero() {
                continue;
            }
            for (perm, sign) in &perms {
                let mut prod = self.vals[r].scale_c(*sign);
                let mut zero = false;
                for (slot, p) in perm.iter().enumerate() {
                    let comp = &args[slot].comps[combo[*p]];
                    if comp.is_zero() {
                        zero = true;
                        break;
                    }
                    prod = prod.mul_c(comp);
                }
                if !zero {
                    acc = acc.add_c(&prod);
                }
            }
        }
        Ok(acc)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert!(self.alg.same_as(&other.alg));
        assert_eq!(self.degree, other.degree);
        let vals = self.vals.iter().zip(&other.vals).map(|(a, b)| a.add_c(b)).collect();
        LForm { alg: self.alg.clone(), degree: self.degree, vals, combos: self.combos.clone() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        LForm {
            alg: self.alg.clone(),
            degree: self.degree,
            vals: self.vals.iter().map(|v| v.scale_c(s)).collect(),
            combos: self.combos.clone(),
        }
    }

    /// Max over combinations of the coefficient l1 norm.
    pub fn norm(&self) -> f64 {
        self.vals.iter().map(|v| v.norm_l1()).fold(0.0, f64::max)
    }

    pub fn trunc_loss(&self) -> f64 {
        self.vals.iter().map(|v| v.trunc_loss()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.vals.iter().all(|v| v.is_zero())
    }

    /// Shuffle-convention wedge product.
    pub fn wedge(&self, other: &Self) -> Result<Self, Error> {
        if !self.alg.same_as(&other.alg) {
            return Err(Error::input("wedge of forms on different algebroids"));
        }
        let deg = self.degree + other.degree;
        let mut out = LForm::zero(&self.alg, deg)?;
        let shuffles = crate::combi::shuffles(self.degree, other.degree);
        for (r, combo) in out.combos.clone().iter().enumerate() {
            let mut acc = self.alg.proto.zero_like();
            for (first, second, sign) in &shuffles {
                let a_idx: Vec<usize> = first.iter().map(|&i| combo[i]).collect();
                let b_idx: Vec<usize> = second.iter().map(|&i| combo[i]).collect();
                let a = self.eval_frames(&a_idx);
                if a.is_zero() {
                    continue;
                }
                let b = other.eval_frames(&b_idx);
                if b.is_zero() {
                    continue;
                }
                acc = acc.add_c(&a.mul_c(&b).scale_c(*sign));
            }
            out.vals[r] = acc;
        }
        Ok(out)
    }
}

/// Cartan differential on frame combinations:
/// `(dω)(ξ_0,…,ξ_k) = Σ_i (−1)^i ρ(ξ_i) ω(…î…) + Σ_{i<j} (−1)^{i+j} ω([[ξ_i,ξ_j]],…î…ĵ…)`.
pub fn d_form<C: Coeff>(omega: &LForm<C>) -> Result<LForm<C>, Error> {
    let alg = &omega.alg;
    if omega.degree() >= alg.rank() {
        return Err(Error::input("d of a top-degree form"));
    }
    let k = omega.degree();
    let mut out = LForm::zero(alg, k + 1)?;
    for (r, combo) in out.combos.clone().iter().enumerate() {
        let mut acc = alg.proto.zero_like();
        for i in 0..k + 1 {
            let rest: Vec<usize> =
                combo.iter().enumerate().filter(|(t, _)| *t != i).map(|(_, v)| *v).collect();
            let inner = omega.eval_frames(&rest);
            if !inner.is_zero() {
                let term = alg.anchor_frame_apply(combo[i], &inner);
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                acc = acc.add_c(&term.scale_c(sign));
            }
        }
        for i in 0..k + 1 {
            for j in i + 1..k + 1 {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                let rest: Vec<usize> = combo
                    .iter()
                    .enumerate()
                    .filter(|(t, _)| *t != i && *t != j)
                    .map(|(_, v)| *v)
                    .collect();
                for l in 0..alg.rank() {
                    let c = alg.structure_entry(l, combo[i], combo[j]);
                    if c.is_zero() {
                        continue;
                    }
                    let mut idx = Vec::with_capacity(k);
                    idx.push(l);
                    idx.extend_from_slice(&rest);
                    let w = omega.eval_frames(&idx);
                    if w.is_zero() {
                        continue;
                    }
                    acc = acc.add_c(&c.mul_c(&w).scale_c(sign));
                }
            }
        }
        out.vals[r] = acc;
    }
    Ok(out)
}

/// Vector-valued k-form: one coefficient vector of length `vdim` per sorted
/// frame combination. Kernel-valued forms use the kernel frame order.
#[derive(Clone, Debug)]
pub struct VecForm<C: Coeff> {
    pub alg: Arc<TrivLieAlgebroid<C>>,
    degree: usize,
    vdim: usize,
    vals: Vec<Vec<C>>,
    combos: Vec<Vec<usize>>,
}

impl<C: Coeff> VecForm<C> {
    pub fn zero(alg: &Arc<TrivLieAlgebroid<C>>, degree: usize, vdim: usize) -> Result<Self, Error> {
        // degree > rank is the canonical zero form with no stored slots
        let combos = combinations(alg.rank(), degree);
        Ok(VecForm {
            alg: alg.clone(),
            degree,
            vdim,
            vals: vec![vec![alg.proto.zero_like(); vdim]; combos.len()],
            combos,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn vdim(&self) -> usize {
        self.vdim
    }

    pub fn combos(&self) -> &[Vec<usize>] {
        &self.combos
    }

    pub fn value(&self, combo: &[usize]) -> &[C] {
        &self.vals[combination_rank(&self.combos, combo)]
    }

    pub fn set(&mut self, combo: &[usize], v: Vec<C>) {
        assert_eq!(v.len(), self.vdim);
        let r = combination_rank(&self.combos, combo);
        self.vals[r] = v;
    }

    pub fn eval_frames(&self, indices: &[usize]) -> Vec<C> {
        if self.combos.is_empty() {
            return vec![self.alg.proto.zero_like(); self.vdim];
        }
        match sort_with_sign(indices) {
            None => vec![self.alg.proto.zero_like(); self.vdim],
            Some((sorted, sign)) => self.vals[combination_rank(&self.combos, &sorted)]
                .iter()
                .map(|v| v.scale_c(sign))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.degree, self.vdim), (other.degree, other.vdim));
        let vals = self
            .vals
            .iter()
            .zip(&other.vals)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.add_c(y)).collect())
            .collect();
        VecForm {
            alg: self.alg.clone(),
            degree: self.degree,
            vdim: self.vdim,
            vals,
            combos: self.combos.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        VecForm {
            alg: self.alg.clone(),
            degree: self.degree,
            vdim: self.vdim,
            vals: self
                .vals
                .iter()
                .map(|v| v.iter().map(|x| x.scale_c(s)).collect())
                .collect(),
            combos: self.combos.clone(),
        }
    }

    /// Multiplies every coefficient by a fixed scalar-algebra element.
    pub fn mul_coeff(&self, f: &C) -> Self {
        VecForm {
            alg: self.alg.clone(),
            degree: self.degree,
            vdim: self.vdim,
            vals: self
                .vals
                .iter()
                .map(|v| v.iter().map(|x| x.mul_c(f)).collect())
                .collect(),
            combos: self.combos.clone(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.vals
            .iter()
            .map(|v| v.iter().map(|x| x.norm_l1()).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.vals.iter().all(|v| v.iter().all(|x| x.is_zero()))
    }

    /// Wedge with values composed as n×n matrices (row-major layout):
    /// (α∧β)(…) = Σ_shuffles sgn · α(…)·β(…) with matrix multiplication.
    pub fn wedge_compose(&self, other: &Self, n: usize) -> Result<Self, Error> {
        if self.vdim != n * n || other.vdim != n * n {
            return Err(Error::input("wedge_compose needs square matrix values"));
        }
        if self.alg.id() != other.alg.id() {
            return Err(Error::input("wedge of forms on different algebroids"));
        }
        let deg = self.degree + other.degree;
        let mut out = VecForm::zero(&self.alg, deg, n * n)?;
        let shuffles = crate::combi::shuffles(self.degree, other.degree);
        let proto = &self.alg.proto;
        for (r, combo) in out.combos.clone().iter().enumerate() {
            let mut acc = vec![proto.zero_like(); n * n];
            for (first, second, sign) in &shuffles {
                let a_idx: Vec<usize> = first.iter().map(|&i| combo[i]).collect();
                let b_idx: Vec<usize> = second.iter().map(|&i| combo[i]).collect();
                let a = self.eval_frames(&a_idx);
                if a.iter().all(|x| x.is_zero()) {
                    continue;
                }
                let b = other.eval_frames(&b_idx);
                if b.iter().all(|x| x.is_zero()) {
                    continue;
                }
                for p in 0..n {
                    for q in 0..n {
                        let mut cell = proto.zero_like();
                        for s in 0..n {
                            let x = &a[p * n + s];
                            let y = &b[s * n + q];
                            if x.is_zero() || y.is_zero() {
                                continue;
                            }
                            cell = cell.add_c(&x.mul_c(y));
                        }
                        if !cell.is_zero() {
                            acc[p * n + q] = acc[p * n + q].add_c(&cell.scale_c(*sign));
                        }
                    }
                }
            }
            out.vals[r] = acc;
        }
        Ok(out)
    }

    /// Trace of matrix values, producing a scalar form.
    pub fn trace(&self, n: usize) -> Result<LForm<C>, Error> {
        if self.vdim != n * n {
            return Err(Error::input("trace needs square matrix values"));
        }
        let mut out = LForm::zero(&self.alg, self.degree)?;
        for (r, v) in self.vals.iter().enumerate() {
            let mut acc = self.alg.proto.zero_like();
            for p in 0..n {
                acc = acc.add_c(&v[p * n + p]);
            }
            out.vals[r] = acc;
        }
        Ok(out)
    }
}

/// Regular reduction B = TM ⊕ (M×𝔥) of a transitive trivialized A, together
/// with a fixed constant complement of 𝔥 realizing the quotient 𝔤/𝔥.
#[derive(Clone, Debug)]
pub struct Reduction {
    pub parent: Arc<ScalarAlgebroid>,
    h_basis: Vec<DVector<f64>>,
    comp_basis: Vec<DVector<f64>>,
    /// Rows map kernel coordinates to complement coordinates.
    proj_comp: Mat,
    metric: Option<FibreMetric>,
}

impl Reduction {
    /// General constructor: 𝔥 given by a basis in kernel coordinates plus a
    /// chosen complement; validates that 𝔥 is a subalgebra.
    pub fn new(
        parent: Arc<ScalarAlgebroid>,
        h_basis: Vec<DVector<f64>>,
        comp_basis: Vec<DVector<f64>>,
        tol: f64,
    ) -> Result<Self, Error> {
        let g_dim = parent
            .g_dim()
            .ok_or_else(|| Error::input("reduction needs a transitive trivialized parent"))?;
        if h_basis.len() + comp_basis.len() != g_dim {
            return Err(Error::input("h-basis and complement must span the kernel"));
        }
        let mut basis = Mat::zeros(g_dim, g_dim);
        for (j, v) in h_basis.iter().chain(comp_basis.iter()).enumerate() {
            if v.len() != g_dim {
                return Err(Error::input("basis vector has wrong length"));
            }
            basis.set_column(j, v);
        }
        let inv = basis
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::input("h-basis plus complement is not a basis"))?;
        let proj_comp = inv.rows(h_basis.len(), comp_basis.len()).into_owned();

        let ks = parent.kernel_structure()?;
        let mut worst = 0.0f64;
        for a in &h_basis {
            for b in &h_basis {
                let br = ks.bracket_vec(a, b);
                let comp_part = &proj_comp * &br;
                worst = worst.max(comp_part.abs().max());
            }
        }
        if worst > tol {
            return Err(Error::precondition(format!(
                "kernel subspace is not a subalgebra (defect {worst:.3e})"
            )));
        }
        Ok(Reduction { parent, h_basis, comp_basis, proj_comp, metric: None })
    }

    /// Riemannian reduction of an End-model: 𝔥 = h-skew endomorphisms,
    /// complement = h-symmetric endomorphisms. Quotient coordinates are the
    /// entries of h·σ̃ on the diagonal and above.
    pub fn riemannian(parent: Arc<ScalarAlgebroid>, h: FibreMetric) -> Result<Self, Error> {
        let n = parent
            .end_dim()
            .ok_or_else(|| Error::input("riemannian reduction needs an End-model parent"))?;
        if h.n() != n {
            return Err(Error::input("metric size does not match the fibre"));
        }
        let mut h_basis = Vec::new();
        let mut comp_basis = Vec::new();
        // h-skew: h⁻¹·(E_pq − E_qp); h-symmetric: h⁻¹·E_pp, h⁻¹·(E_pq + E_qp)
        for p in 0..n {
            for q in p..n {
                let mut y = Mat::zeros(n, n);
                if p == q {
                    y[(p, p)] = 1.0;
                } else {
                    y[(p, q)] = 1.0;
                    y[(q, p)] = 1.0;
                }
                comp_basis.push(crate::liealg::mat_to_vec(&(h.h_inv() * &y)));
                if p != q {
                    let mut z = Mat::zeros(n, n);
                    z[(p, q)] = 1.0;
                    z[(q, p)] = -1.0;
                    h_basis.push(crate::liealg::mat_to_vec(&(h.h_inv() * &z)));
                }
            }
        }
        let q_dim = comp_basis.len();
        // coords of σ in the complement: upper entries of h·σ̃
        let mut proj = Mat::zeros(q_dim, n * n);
        let mut row = 0usize;
        for p in 0..n {
            for q in p..n {
                // (h·σ̃)_{pq} = ½((hσ)_{pq} + (σᵀh)_{pq}) = ½ Σ_s (h_ps σ_sq + σ_sp h_sq)
                for s in 0..n {
                    proj[(row, s * n + q)] += 0.5 * h.h()[(p, s)];
                    proj[(row, s * n + p)] += 0.5 * h.h()[(s, q)];
                }
                row += 1;
            }
        }
        // the rows produce coordinates in the basis {h⁻¹Y_pq}: by
        // construction proj·comp_basis = identity
        Ok(Reduction { parent, h_basis, comp_basis, proj_comp: proj, metric: Some(h) })
    }

    pub fn g_dim(&self) -> usize {
        self.parent.g_dim().expect("transitive parent")
    }

    pub fn h_dim(&self) -> usize {
        self.h_basis.len()
    }

    pub fn quotient_dim(&self) -> usize {
        self.comp_basis.len()
    }

    pub fn h_basis(&self) -> &[DVector<f64>] {
        &self.h_basis
    }

    pub fn comp_basis(&self) -> &[DVector<f64>] {
        &self.comp_basis
    }

    pub fn metric(&self) -> Option<&FibreMetric> {
        self.metric.as_ref()
    }

    /// B-frame sections of the parent: tangent frames then 𝔥 frames.
    pub fn b_frame_sections(&self) -> Vec<Section<ScalarField>> {
        let alg = &self.parent;
        let t = alg.tangent_dim().expect("transitive parent");
        let mut out = Vec::new();
        for a in 0..t {
            out.push(Section::frame(alg, a));
        }
        for hb in &self.h_basis {
            let mut s = Section::zero(alg);
            for (k, v) in hb.iter().enumerate() {
                if *v != 0.0 {
                    s.comps[t + k] = ScalarField::constant(alg.base_dim(), *v);
                }
            }
            out.push(s);
        }
        out
    }

    /// Quotient coordinates of constant kernel vectors.
    pub fn project_const(&self, kernel_vec: &DVector<f64>) -> DVector<f64> {
        &self.proj_comp * kernel_vec
    }

    /// Quotient coordinates of a kernel vector with field components.
    pub fn project_fields(&self, kernel_comps: &[ScalarField]) -> Vec<ScalarField> {
        let g = self.g_dim();
        assert_eq!(kernel_comps.len(), g);
        let q = self.quotient_dim();
        let mut out = Vec::with_capacity(q);
        for row in 0..q {
            let mut acc = ScalarField::zero(self.parent.base_dim());
            for col in 0..g {
                let w = self.proj_comp[(row, col)];
                if w != 0.0 && !kernel_comps[col].is_zero() {
                    acc = acc.add(&kernel_comps[col].scale(w));
                }
            }
            out.push(acc);
        }
        out
    }

    /// Quotient coordinates of a kernel section of the parent; errors when
    /// the section has a tangent part.
    pub fn quotient_of_section(&self, sigma: &Section<ScalarField>) -> Result<Vec<ScalarField>, Error> {
        if !sigma.alg.same_as(&self.parent) {
            return Err(Error::input("section belongs to a different algebroid"));
        }
        let t = self.parent.tangent_dim().expect("transitive parent");
        for a in 0..t {
            if !sigma.comps[a].is_zero() {
                return Err(Error::input("section does not lie in the kernel bundle"));
            }
        }
        Ok(self.project_fields(&sigma.comps[t..]))
    }
}
