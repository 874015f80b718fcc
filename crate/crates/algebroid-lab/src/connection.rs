//! L-connections into transitive algebroids: anchor-compatibility checks,
//! curvature, flatness, the covariant differential, metric adjoints, gauge
//! generated flat fixtures and the affine combination over Tℝ×L.

use std::sync::Arc;

use crate::algebroid::{
    bracket, product_with_line, ScalarAlgebroid, Section, TrivLieAlgebroid, VecForm,
};
use crate::combi::shuffles;
use crate::error::Error;
use crate::fields::{Coeff, ScalarField, TPolyField};
use crate::liealg::{mat_to_vec, FibreMetric, Mat};

/// Bundle map ∇: L → A in frame-to-frame components (target rank × source
/// rank), required to commute with the anchors.
#[derive(Clone, Debug)]
pub struct LConnection<C: Coeff> {
    pub source: Arc<TrivLieAlgebroid<C>>,
    pub target: Arc<TrivLieAlgebroid<C>>,
    mat: Vec<C>,
}

impl<C: Coeff> LConnection<C> {
    pub fn new(
        source: Arc<TrivLieAlgebroid<C>>,
        target: Arc<TrivLieAlgebroid<C>>,
        mat: Vec<C>,
    ) -> Result<Self, Error> {
        if source.base_dim() != target.base_dim() {
            return Err(Error::input("connection endpoints live over different bases"));
        }
        if mat.len() != source.rank() * target.rank() {
            return Err(Error::input("connection matrix has wrong shape"));
        }
        Ok(LConnection { source, target, mat })
    }

    pub fn identity(alg: &Arc<TrivLieAlgebroid<C>>) -> Self {
        let r = alg.rank();
        let mut mat = vec![alg.proto().zero_like(); r * r];
        for i in 0..r {
            mat[i * r + i] = alg.proto().constant_like(1.0);
        }
        LConnection { source: alg.clone(), target: alg.clone(), mat }
    }

    pub fn entry(&self, target_frame: usize, source_frame: usize) -> &C {
        &self.mat[target_frame * self.source.rank() + source_frame]
    }

    pub fn set_entry(&mut self, target_frame: usize, source_frame: usize, v: C) {
        self.mat[target_frame * self.source.rank() + source_frame] = v;
    }

    /// Image of a source frame as a target section.
    pub fn apply_frame(&self, j: usize) -> Section<C> {
        let mut s = Section::zero(&self.target);
        for i in 0..self.target.rank() {
            s.comps[i] = self.entry(i, j).clone();
        }
        s
    }

    /// Image of a source section (C^∞-linear bundle map).
    pub fn apply(&self, xi: &Section<C>) -> Result<Section<C>, Error> {
        if !xi.alg.same_as(&self.source) {
            return Err(Error::input("section belongs to a different algebroid"));
        }
        let mut s = Section::zero(&self.target);
        for i in 0..self.target.rank() {
            let mut acc = self.target.proto().zero_like();
            for j in 0..self.source.rank() {
                let e = self.entry(i, j);
                if e.is_zero() || xi.comps[j].is_zero() {
                    continue;
                }
                acc = acc.add_c(&e.mul_c(&xi.comps[j]));
            }
            s.comps[i] = acc;
        }
        Ok(s)
    }

    /// Max defect of #_A ∘ ∇ − #_L over source frames.
    pub fn anchor_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.source.rank() {
            for axis in 0..self.source.base_dim() {
                let mut acc = self.source.proto().zero_like();
                for i in 0..self.target.rank() {
                    let e = self.entry(i, j);
                    if e.is_zero() {
                        continue;
                    }
                    acc = acc.add_c(&e.mul_c(self.target.anchor_entry(i, axis)));
                }
                worst = worst.max(acc.sub_c(self.source.anchor_entry(j, axis)).norm_l1());
            }
        }
        worst
    }

    pub fn validate(&self, tol: f64) -> ConnectionReport {
        let defect = self.anchor_defect();
        ConnectionReport { anchor_defect: defect, pass: defect <= tol }
    }

    /// Kernel part of ∇e_j on a transitive target, as kernel coordinates.
    pub fn kernel_column(&self, j: usize) -> Result<Vec<C>, Error> {
        let g = self
            .target
            .g_dim()
            .ok_or_else(|| Error::input("target is not transitive trivialized"))?;
        let t = self.target.rank() - g;
        Ok((0..g).map(|k| self.entry(t + k, j).clone()).collect())
    }
}

#[derive(Clone, Debug)]
pub struct ConnectionReport {
    pub anchor_defect: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct FlatReport {
    pub flat: bool,
    pub curvature_norm: f64,
}

/// Curvature `R^∇(ξ,η) = [[∇ξ,∇η]] − ∇([[ξ,η]])` on frame pairs, returned as
/// a kernel-valued 2-form on the source (tensorial by anchor compatibility).
pub fn curvature<C: Coeff>(conn: &LConnection<C>) -> Result<VecForm<C>, Error> {
    let g = conn
        .target
        .g_dim()
        .ok_or_else(|| Error::input("curvature needs a transitive trivialized target"))?;
    let t = conn.target.rank() - g;
    let report = conn.validate(1e-8);
    if !report.pass {
        return Err(Error::precondition(format!(
            "connection does not commute with the anchors (defect {:.3e})",
            report.anchor_defect
        )));
    }
    let mut out = VecForm::zero(&conn.source, 2, g)?;
    for combo in out.combos().to_vec() {
        let (i, j) = (combo[0], combo[1]);
        let bi = conn.apply_frame(i);
        let bj = conn.apply_frame(j);
        let mut r = bracket(&bi, &bj)?;
        let lij = bracket(&Section::frame(&conn.source, i), &Section::frame(&conn.source, j))?;
        let nab = conn.apply(&lij)?;
        r = r.add(&nab.scale(-1.0));
        let kernel: Vec<C> = r.comps[t..].to_vec();
        out.set(&[i, j], kernel);
    }
    Ok(out)
}

pub fn is_flat<C: Coeff>(conn: &LConnection<C>, tol: f64) -> Result<FlatReport, Error> {
    let r = curvature(conn)?;
    let n = r.norm();
    Ok(FlatReport { flat: n <= tol, curvature_norm: n })
}

/// Covariant differential of a kernel-valued form:
/// `(d^∇Ω)(…) = Σ_i (−1)^{i−1} [[∇ξ_i, Ω(…î…)]]_A + Σ_{i<j} (−1)^{i+j} Ω([[ξ_i,ξ_j]]_L, …î…ĵ…)`.
pub fn d_nabla<C: Coeff>(conn: &LConnection<C>, omega: &VecForm<C>) -> Result<VecForm<C>, Error> {
    if !omega.alg.same_as(&conn.source) {
        return Err(Error::input("form lives on a different algebroid than the connection"));
    }
    let g = conn
        .target
        .g_dim()
        .ok_or_else(|| Error::input("d_nabla needs a transitive trivialized target"))?;
    if omega.vdim() != g {
        return Err(Error::input("form values do not live in the kernel bundle"));
    }
    let t = conn.target.rank() - g;
    let k = omega.degree();
    let src = &conn.source;
    let mut out = VecForm::zero(src, k + 1, g)?;
    for combo in out.combos().to_vec() {
        let mut acc = vec![src.proto().zero_like(); g];
        // derivative/adjoint terms, 1-indexed sign (−1)^{i−1}
        for (pos, &fi) in combo.iter().enumerate() {
            let rest: Vec<usize> =
                combo.iter().enumerate().filter(|(p, _)| *p != pos).map(|(_, v)| *v).collect();
            let val = omega.eval_frames(&rest);
            if val.iter().all(|v| v.is_zero()) {
                continue;
            }
            // kernel-valued section of the target
            let mut kernel_section = Section::zero(&conn.target);
            for (s, v) in val.iter().enumerate() {
                kernel_section.comps[t + s] = v.clone();
            }
            let br = bracket(&conn.apply_frame(fi), &kernel_section)?;
            let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
            for s in 0..g {
                acc[s] = acc[s].add_c(&br.comps[t + s].scale_c(sign));
            }
        }
        // bracket terms, 1-indexed sign (−1)^{i+j}
        for i in 0..k + 1 {
            for j in i + 1..k + 1 {
                let sign = if (i + 1 + j + 1) % 2 == 0 { 1.0 } else { -1.0 };
                let rest: Vec<usize> = combo
                    .iter()
                    .enumerate()
                    .filter(|(p, _)| *p != i && *p != j)
                    .map(|(_, v)| *v)
                    .collect();
                let lij = bracket(
                    &Section::frame(src, combo[i]),
                    &Section::frame(src, combo[j]),
                )?;
                for l in 0..src.rank() {
                    if lij.comps[l].is_zero() {
                        continue;
                    }
                    let mut idx = Vec::with_capacity(k);
                    idx.push(l);
                    idx.extend_from_slice(&rest);
                    let w = omega.eval_frames(&idx);
                    for s in 0..g {
                        if w[s].is_zero() {
                            continue;
                        }
                        acc[s] = acc[s].add_c(&lij.comps[l].mul_c(&w[s]).scale_c(sign));
                    }
                }
            }
        }
        out.set(&combo, acc);
    }
    Ok(out)
}

/// Adjoint-action wedge `(R ∧ Ω)(ξ_1,…) = Σ_{(2,n)-shuffles} sgn · [[R(…), Ω(…)]]`
/// with the pointwise bracket of the value Lie algebra (the target's kernel).
pub fn action_wedge<C: Coeff>(
    r: &VecForm<C>,
    omega: &VecForm<C>,
    ks: &crate::liealg::LieStructure,
) -> Result<VecForm<C>, Error> {
    if !r.alg.same_as(&omega.alg) {
        return Err(Error::input("forms live on different algebroids"));
    }
    let alg = &r.alg;
    let g = r.vdim();
    if omega.vdim() != g || ks.dim() != g {
        return Err(Error::input("value bundles differ"));
    }
    let deg = r.degree() + omega.degree();
    let mut out = VecForm::zero(alg, deg, g)?;
    let sh = shuffles(r.degree(), omega.degree());
    for combo in out.combos().to_vec() {
        let mut acc = vec![alg.proto().zero_like(); g];
        for (first, second, sign) in &sh {
            let a_idx: Vec<usize> = first.iter().map(|&i| combo[i]).collect();
            let b_idx: Vec<usize> = second.iter().map(|&i| combo[i]).collect();
            let a = r.eval_frames(&a_idx);
            if a.iter().all(|v| v.is_zero()) {
                continue;
            }
            let b = omega.eval_frames(&b_idx);
            if b.iter().all(|v| v.is_zero()) {
                continue;
            }
            for k in 0..g {
                let mut cell = alg.proto().zero_like();
                for i in 0..g {
                    if a[i].is_zero() {
                        continue;
                    }
                    for j in 0..g {
                        let c = ks.c(k, i, j);
                        if c == 0.0 || b[j].is_zero() {
                            continue;
                        }
                        cell = cell.add_c(&a[i].mul_c(&b[j]).scale_c(c));
                    }
                }
                if !cell.is_zero() {
                    acc[k] = acc[k].add_c(&cell.scale_c(*sign));
                }
            }
        }
        out.set(&combo, acc);
    }
    Ok(out)
}

/// Metric adjoint on an End-model target: tangent part unchanged, kernel
/// part σ ↦ −h⁻¹σᵀh, so that h(∇^h ν, μ) = #(h(ν,μ)) − h(ν, ∇μ).
pub fn adjoint_connection(
    conn: &LConnection<ScalarField>,
    h: &FibreMetric,
) -> Result<LConnection<ScalarField>, Error> {
    let n = conn
        .target
        .end_dim()
        .ok_or_else(|| Error::input("adjoint connection needs an End-model target"))?;
    if h.n() != n {
        return Err(Error::input("metric size does not match the fibre"));
    }
    let t = conn.target.rank() - n * n;
    let mut out = conn.clone();
    for j in 0..conn.source.rank() {
        // assemble σ_j as an n×n matrix of fields, then transform entries
        for p in 0..n {
            for q in 0..n {
                // (−h⁻¹ σᵀ h)_{pq} = −Σ_{s,u} h⁻¹_{ps} σ_{us} h_{uq}
                let mut acc = ScalarField::zero(conn.source.base_dim());
                for s in 0..n {
                    for u in 0..n {
                        let w = -h.h_inv()[(p, s)] * h.h()[(u, q)];
                        if w == 0.0 {
                            continue;
                        }
                        let sigma = conn.entry(t + u * n + s, j);
                        if sigma.is_zero() {
                            continue;
                        }
                        acc = acc.add(&sigma.scale(w));
                    }
                }
                out.set_entry(t + p * n + q, j, acc);
            }
        }
    }
    Ok(out)
}

/// Flat test fixture on L = T(T^d): kernel 1-form ω(∂_a) = Σ_i ∂_a(φ_i)·K_i
/// for pairwise commuting generators (flatness is not enforced here; sums of
/// non-commuting generators give the non-flat negative controls).
pub fn gauge_connection(
    a: &Arc<ScalarAlgebroid>,
    generators: &[(Mat, ScalarField)],
) -> Result<LConnection<ScalarField>, Error> {
    let n = a
        .end_dim()
        .ok_or_else(|| Error::input("gauge connections target an End-model"))?;
    let d = a.base_dim();
    let l = crate::algebroid::tangent_algebroid(d);
    let mut mat = vec![ScalarField::zero(d); a.rank() * d];
    for axis in 0..d {
        mat[axis * d + axis] = ScalarField::constant(d, 1.0);
    }
    for (k, phi) in generators {
        if k.nrows() != n || k.ncols() != n {
            return Err(Error::input("generator size does not match the fibre"));
        }
        if phi.dim() != d {
            return Err(Error::input("phase field dimension mismatch"));
        }
        let kv = mat_to_vec(k);
        for axis in 0..d {
            let dphi = phi.diff(axis)?;
            if dphi.is_zero() {
                continue;
            }
            for s in 0..n * n {
                if kv[s] == 0.0 {
                    continue;
                }
                let row = d + s;
                mat[row * d + axis] = mat[row * d + axis].add(&dphi.scale(kv[s]));
            }
        }
    }
    LConnection::new(l, a.clone(), mat)
}

/// Square matrix of fields, row-major; used for exact conjugation algebra.
fn fmat_const(m: &Mat, d: usize) -> Vec<ScalarField> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * n);
    for p in 0..n {
        for q in 0..n {
            out.push(ScalarField::constant(d, m[(p, q)]));
        }
    }
    out
}

fn fmat_mul(a: &[ScalarField], b: &[ScalarField], n: usize) -> Vec<ScalarField> {
    let d = a[0].dim();
    let mut out = vec![ScalarField::zero(d); n * n];
    for p in 0..n {
        for q in 0..n {
            let mut acc = ScalarField::zero(d);
            for s in 0..n {
                let x = &a[p * n + s];
                let y = &b[s * n + q];
                if !x.is_zero() && !y.is_zero() {
                    acc = acc.add(&x.mul(y));
                }
            }
            out[p * n + q] = acc;
        }
    }
    out
}

/// (I + ψN)⁻¹ M (I + ψN) = M + ψ[M,N] − ψ²·N·M·N for N² = 0.
fn fmat_conjugate_nilpotent(
    m: &[ScalarField],
    nil: &Mat,
    psi: &ScalarField,
    n: usize,
) -> Vec<ScalarField> {
    let d = psi.dim();
    let nf = fmat_const(nil, d);
    let mn = fmat_mul(m, &nf, n);
    let nm = fmat_mul(&nf, m, n);
    let nmn = fmat_mul(&nf, &mn, n);
    let psi2 = psi.mul(psi);
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n * n {
        let comm = mn[i].sub(&nm[i]);
        out.push(m[i].add(&comm.mul(psi)).sub(&nmn[i].mul(&psi2)));
    }
    out
}

/// Flat connection with non-commuting values: the gauge field of the
/// periodic map g = exp(ψ₀K)·exp(ψ₁N₁)·…·exp(ψ_mN_m) with N_i² = 0, namely
/// ω = Ad(C₁…C_m)⁻¹(K)·dψ₀ + Σ_i Ad(C_{i+1}…C_m)⁻¹(N_i)·dψ_i.
/// Flat by construction (a gauge transform of the trivial connection); all
/// entries stay polynomial in the phase fields because the exponentials of
/// the nilpotent factors terminate.
pub fn gauge_conjugated(
    a: &Arc<ScalarAlgebroid>,
    k: &Mat,
    psi0: &ScalarField,
    nils: &[(Mat, ScalarField)],
) -> Result<LConnection<ScalarField>, Error> {
    let n = a
        .end_dim()
        .ok_or_else(|| Error::input("gauge connections target an End-model"))?;
    let d = a.base_dim();
    for (nil, psi) in nils {
        if (nil * nil).abs().max() > 1e-14 {
            return Err(Error::input("conjugating generators must square to zero"));
        }
        if psi.dim() != d {
            return Err(Error::input("phase field dimension mismatch"));
        }
    }
    // conjugated generator terms paired with their phase fields
    let mut terms: Vec<(Vec<ScalarField>, ScalarField)> = Vec::new();
    let mut kc = fmat_const(k, d);
    for (nil, psi) in nils {
        kc = fmat_conjugate_nilpotent(&kc, nil, psi, n);
    }
    terms.push((kc, psi0.clone()));
    for (i, (nil, psi)) in nils.iter().enumerate() {
        let mut m = fmat_const(nil, d);
        for (later_nil, later_psi) in &nils[i + 1..] {
            m = fmat_conjugate_nilpotent(&m, later_nil, later_psi, n);
        }
        terms.push((m, psi.clone()));
    }

    let l = crate::algebroid::tangent_algebroid(d);
    let mut mat = vec![ScalarField::zero(d); a.rank() * d];
    for axis in 0..d {
        mat[axis * d + axis] = ScalarField::constant(d, 1.0);
    }
    for (value, psi) in &terms {
        for axis in 0..d {
            let dpsi = psi.diff(axis)?;
            if dpsi.is_zero() {
                continue;
            }
            for s in 0..n * n {
                if value[s].is_zero() {
                    continue;
                }
                let row = d + s;
                mat[row * d + axis] = mat[row * d + axis].add(&value[s].mul(&dpsi));
            }
        }
    }
    LConnection::new(l, a.clone(), mat)
}

/// Two-factor conjugated gauge field g = exp(ψ₁K)·exp(ψ₂N).
pub fn gauge_composed(
    a: &Arc<ScalarAlgebroid>,
    k: &Mat,
    psi1: &ScalarField,
    n_mat: &Mat,
    psi2: &ScalarField,
) -> Result<LConnection<ScalarField>, Error> {
    gauge_conjugated(a, k, psi1, &[(n_mat.clone(), psi2.clone())])
}

/// Canonical splitting λ(∂_a) = (∂_a, 0) of a transitive trivialized target.
pub fn canonical_splitting(a: &Arc<ScalarAlgebroid>) -> Result<LConnection<ScalarField>, Error> {
    let t = a
        .tangent_dim()
        .ok_or_else(|| Error::input("canonical splitting needs a transitive model"))?;
    let d = a.base_dim();
    if t != d {
        return Err(Error::input("tangent block does not match the base"));
    }
    let l = crate::algebroid::tangent_algebroid(d);
    let mut mat = vec![ScalarField::zero(d); a.rank() * d];
    for axis in 0..d {
        mat[axis * d + axis] = ScalarField::constant(d, 1.0);
    }
    LConnection::new(l, a.clone(), mat)
}

/// θ = ∇₁ − ∇₀ as a kernel-valued 1-form on the common source.
pub fn theta(
    nabla0: &LConnection<ScalarField>,
    nabla1: &LConnection<ScalarField>,
) -> Result<VecForm<ScalarField>, Error> {
    if !nabla0.source.same_as(&nabla1.source) || !nabla0.target.same_as(&nabla1.target) {
        return Err(Error::input("connections do not share source and target"));
    }
    let g = nabla0
        .target
        .g_dim()
        .ok_or_else(|| Error::input("theta needs a transitive target"))?;
    let mut out = VecForm::zero(&nabla0.source, 1, g)?;
    for j in 0..nabla0.source.rank() {
        let c0 = nabla0.kernel_column(j)?;
        let c1 = nabla1.kernel_column(j)?;
        let diff: Vec<ScalarField> = c0.iter().zip(&c1).map(|(a, b)| b.sub(a)).collect();
        out.set(&[j], diff);
    }
    Ok(out)
}

/// Affine combination ∇^aff = (1−t)∇̃₀ + t∇̃₁ over the product algebroids
/// Tℝ×L → Tℝ×A; ∂/∂t maps to the pure t-derivation.
pub struct AffineCombination {
    pub conn: LConnection<TPolyField>,
    pub source: Arc<TrivLieAlgebroid<TPolyField>>,
    pub target: Arc<TrivLieAlgebroid<TPolyField>>,
}

pub fn affine_combination(
    nabla0: &LConnection<ScalarField>,
    nabla1: &LConnection<ScalarField>,
) -> Result<AffineCombination, Error> {
    if !nabla0.source.same_as(&nabla1.source) || !nabla0.target.same_as(&nabla1.target) {
        return Err(Error::input("connections do not share source and target"));
    }
    let src = product_with_line(&nabla0.source);
    let tgt = product_with_line(&nabla0.target);
    let rs = src.rank();
    let rt = tgt.rank();
    let d = nabla0.source.base_dim();
    let mut mat = vec![TPolyField::zero(d); rt * rs];
    mat[0] = TPolyField::constant(d, 1.0); // ∂/∂t ↦ ∂/∂t
    let t = TPolyField::t(d);
    let one = TPolyField::constant(d, 1.0);
    let one_minus_t = one.sub(&t);
    for i in 0..nabla0.target.rank() {
        for j in 0..nabla0.source.rank() {
            let m0 = TPolyField::from_field(nabla0.entry(i, j).clone());
            let m1 = TPolyField::from_field(nabla1.entry(i, j).clone());
            let v = one_minus_t.mul(&m0).add(&t.mul(&m1));
            if !v.is_zero() {
                mat[(i + 1) * rs + (j + 1)] = v;
            }
        }
    }
    let conn = LConnection::new(src.clone(), tgt.clone(), mat)?;
    Ok(AffineCombination { conn, source: src, target: tgt })
}

/// Lifts a kernel-valued form on L to the same combinations of lifted frames
/// on Tℝ×L (zero on combinations containing ∂/∂t).
pub fn lift_vecform(
    omega: &VecForm<ScalarField>,
    product: &Arc<TrivLieAlgebroid<TPolyField>>,
) -> Result<VecForm<TPolyField>, Error> {
    let mut out = VecForm::zero(product, omega.degree(), omega.vdim())?;
    for combo in omega.combos().to_vec() {
        let shifted: Vec<usize> = combo.iter().map(|i| i + 1).collect();
        let vals: Vec<TPolyField> = omega
            .value(&combo)
            .iter()
            .map(|f| TPolyField::from_field(f.clone()))
            .collect();
        out.set(&shifted, vals);
    }
    Ok(out)
}

/// k-th wedge power with matrix-composition values.
pub fn wedge_power<C: Coeff>(r: &VecForm<C>, k: usize, n: usize) -> Result<VecForm<C>, Error> {
    let mut acc = r.clone();
    for _ in 1..k {
        acc = acc.wedge_compose(r, n)?;
    }
    Ok(acc)
}

/// Interior product with a frame: (i_f ω)(ξ_1,…) = ω(f, ξ_1, …).
pub fn contract_frame<C: Coeff>(omega: &VecForm<C>, frame: usize) -> Result<VecForm<C>, Error> {
    if omega.degree() == 0 {
        return Err(Error::input("cannot contract a 0-form"));
    }
    let mut out = VecForm::zero(&omega.alg, omega.degree() - 1, omega.vdim())?;
    for combo in out.combos().to_vec() {
        if combo.contains(&frame) {
            continue;
        }
        let mut idx = Vec::with_capacity(omega.degree());
        idx.push(frame);
        idx.extend_from_slice(&combo);
        out.set(&combo, omega.eval_frames(&idx));
    }
    Ok(out)
}

/// Both routes of the affine-curvature contraction:
/// direct = ((R^aff)^k)_{∂/∂t, ·}, closed = k·t^{k−1}(t−1)^{k−1}·θ^{2k−1}.
pub struct PowerContraction {
    pub direct: VecForm<TPolyField>,
    pub closed: Option<VecForm<TPolyField>>,
    pub defect: Option<f64>,
}

/// Max over combinations, value slots and t-powers of the coefficient norm
/// of a − b.
pub fn vecform_tpoly_defect(a: &VecForm<TPolyField>, b: &VecForm<TPolyField>) -> f64 {
    a.sub(b).norm()
}

pub fn curvature_power_contraction(
    nabla0: &LConnection<ScalarField>,
    nabla1: &LConnection<ScalarField>,
    k: usize,
) -> Result<PowerContraction, Error> {
    if k == 0 {
        return Err(Error::input("power must be positive"));
    }
    let n = nabla0
        .target
        .end_dim()
        .ok_or_else(|| Error::input("power contraction needs an End-model target"))?;
    let aff = affine_combination(nabla0, nabla1)?;
    let r_aff = curvature(&aff.conn)?;
    let r_k = wedge_power(&r_aff, k, n)?;
    let direct = contract_frame(&r_k, 0)?;

    let flat0 = is_flat(nabla0, 1e-10)?;
    let flat1 = is_flat(nabla1, 1e-10)?;
    if !(flat0.flat && flat1.flat) {
        return Ok(PowerContraction { direct, closed: None, defect: None });
    }

    let th = theta(nabla0, nabla1)?;
    let th_pow = wedge_power(&th, 2 * k - 1, n)?;
    let lifted = lift_vecform(&th_pow, &aff.source)?;
    // k·t^{k−1}·(t−1)^{k−1} expanded in powers of t
    let d = nabla0.source.base_dim();
    let mut poly = TPolyField::constant(d, k as f64);
    let t = TPolyField::t(d);
    let t_minus_1 = t.sub(&TPolyField::constant(d, 1.0));
    for _ in 0..k - 1 {
        poly = poly.mul(&t).mul(&t_minus_1);
    }
    let closed = lifted.mul_coeff(&poly);
    let defect = vecform_tpoly_defect(&direct, &closed);
    Ok(PowerContraction { direct, closed: Some(closed), defect: Some(defect) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::{build_end_model, validate};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sym_k() -> Mat {
        Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.5, -0.25])
    }

    #[test]
    fn identity_connection_is_valid_and_flat() {
        let a = build_end_model(1, 2);
        let id = LConnection::identity(&a);
        assert_eq!(id.validate(1e-12).anchor_defect, 0.0);
        let rep = is_flat(&id, 1e-12).unwrap();
        assert!(rep.flat);
        assert_eq!(rep.curvature_norm, 0.0);
    }

    #[test]
    fn canonical_splitting_is_valid() {
        let a = build_end_model(2, 2);
        let lam = canonical_splitting(&a).unwrap();
        assert!(lam.validate(1e-12).pass);
    }

    #[test]
    fn broken_tangent_block_fails_validation() {
        let a = build_end_model(1, 2);
        let mut lam = canonical_splitting(&a).unwrap();
        lam.set_entry(0, 0, ScalarField::constant(1, 0.5));
        assert!(!lam.validate(1e-12).pass);
    }

    #[test]
    fn gauge_fixture_is_flat() {
        let a = build_end_model(2, 2);
        let phi = ScalarField::sin_axis(2, 0);
        let conn = gauge_connection(&a, &[(sym_k(), phi)]).unwrap();
        assert!(conn.validate(1e-12).pass);
        let rep = is_flat(&conn, 1e-12).unwrap();
        assert!(rep.flat, "curvature {}", rep.curvature_norm);
    }

    #[test]
    fn noncommuting_sum_is_not_flat() {
        let a = build_end_model(2, 2);
        let k1 = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let k2 = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let conn = gauge_connection(
            &a,
            &[(k1, ScalarField::sin_axis(2, 0)), (k2, ScalarField::cos_axis(2, 1))],
        )
        .unwrap();
        let rep = is_flat(&conn, 1e-10).unwrap();
        assert!(!rep.flat);
    }

    #[test]
    fn composed_gauge_is_flat_with_noncommuting_values() {
        let a = build_end_model(2, 2);
        let k = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let n = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let conn = gauge_composed(
            &a,
            &k,
            &ScalarField::sin_axis(2, 0),
            &n,
            &ScalarField::cos_axis(2, 1),
        )
        .unwrap();
        assert!(conn.validate(1e-12).pass);
        let rep = is_flat(&conn, 1e-11).unwrap();
        assert!(rep.flat, "curvature {}", rep.curvature_norm);
        // the connection form really has non-commuting values
        let th = theta(&canonical_splitting(&a).unwrap(), &conn).unwrap();
        let w2 = th.wedge_compose(&th, 2).unwrap();
        assert!(w2.norm() > 1e-3);
    }

    #[test]
    fn riemannian_gauge_curvature_can_be_nonzero_in_h() {
        // skew generator with two phases: curvature lands in 𝔥 and is nonzero
        let a = build_end_model(2, 2);
        let s = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let mut conn = canonical_splitting(&a).unwrap();
        // ω(∂0) = sin(x0)·S, ω(∂1) = cos(x1)·S·x-dependent mix
        let w0 = ScalarField::sin_axis(2, 0);
        let w1 = ScalarField::cos_axis(2, 0); // depends on x0, so dω ≠ 0
        let sv = mat_to_vec(&s);
        for t in 0..4 {
            if sv[t] != 0.0 {
                conn.set_entry(2 + t, 0, w0.scale(sv[t]));
                conn.set_entry(2 + t, 1, w1.scale(sv[t]));
            }
        }
        let rep = is_flat(&conn, 1e-10).unwrap();
        assert!(!rep.flat);
    }

    #[test]
    fn adjoint_examples() {
        let a = build_end_model(1, 2);
        let h = FibreMetric::identity(2);
        // Riemannian (skew image): ∇^h = ∇
        let s = Mat::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        let conn = gauge_connection(&a, &[(s, ScalarField::sin_axis(1, 0))]).unwrap();
        let adj = adjoint_connection(&conn, &h).unwrap();
        let mut worst = 0.0f64;
        for i in 0..a.rank() {
            worst = worst.max(adj.entry(i, 0).sub(conn.entry(i, 0)).norm_l1());
        }
        assert!(worst < 1e-14);

        // flat input gives flat adjoint
        let conn2 = gauge_connection(&a, &[(sym_k(), ScalarField::sin_axis(1, 0))]).unwrap();
        let adj2 = adjoint_connection(&conn2, &h).unwrap();
        assert!(is_flat(&adj2, 1e-10).unwrap().flat);

        // involution
        let h3 = FibreMetric::new(Mat::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
        let adj3 = adjoint_connection(&adjoint_connection(&conn2, &h3).unwrap(), &h3).unwrap();
        let mut worst3 = 0.0f64;
        for i in 0..a.rank() {
            worst3 = worst3.max(adj3.entry(i, 0).sub(conn2.entry(i, 0)).norm_l1());
        }
        assert!(worst3 < 1e-12);
    }

    #[test]
    fn identity_adjoint_matches_negated_symmetrized_connection_form() {
        // ½(id^h − id)(X,σ) = (0, −σ̃)
        let a = build_end_model(1, 2);
        let h = FibreMetric::new(Mat::from_row_slice(2, 2, &[1.5, 0.25, 0.25, 1.0])).unwrap();
        let id = LConnection::identity(&a);
        let idh = adjoint_connection(&id, &h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sigma = Mat::from_fn(2, 2, |_, _| rng.gen_range(-1.0..1.0));
        let sv = mat_to_vec(&sigma);
        let mut sec = Section::zero(&a);
        sec.comps[0] = ScalarField::sin_axis(1, 0);
        for t in 0..4 {
            sec.comps[1 + t] = ScalarField::constant(1, sv[t]);
        }
        let half_diff = idh.apply(&sec).unwrap().add(&id.apply(&sec).unwrap().scale(-1.0)).scale(0.5);
        let tilde = h.symmetrize(&sigma);
        let tv = mat_to_vec(&tilde);
        assert!(half_diff.comps[0].norm_l1() < 1e-14);
        for t in 0..4 {
            let kernel = &half_diff.comps[1 + t];
            // constant part −σ̃ plus the field part from the tangent factor,
            // which must vanish since id and id^h share the tangent block
            assert!(kernel.sub(&ScalarField::constant(1, -tv[t])).norm_l1() < 1e-12);
        }
    }

    #[test]
    fn degenerate_rank_one_curvature_is_zero() {
        // rank-1 source: no 2-form combinations at all
        let a = build_end_model(1, 2);
        let phi = ScalarField::sin_axis(1, 0);
        let kmat = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let conn = gauge_connection(&a, &[(kmat, phi)]).unwrap();
        let r = curvature(&conn).unwrap();
        assert_eq!(r.combos().len(), 0);
        assert!(is_flat(&conn, 1e-12).unwrap().flat);
    }

    #[test]
    fn affine_combination_of_equal_connections_is_the_lift() {
        let a = build_end_model(1, 2);
        let conn = gauge_connection(&a, &[(sym_k(), ScalarField::sin_axis(1, 0))]).unwrap();
        let aff = affine_combination(&conn, &conn).unwrap();
        for i in 0..aff.target.rank() {
            for j in 0..aff.source.rank() {
                assert!(aff.conn.entry(i, j).degree() == 0);
            }
        }
        assert!(validate(&aff.source, 1e-10).pass);
    }

    #[test]
    fn affine_curvature_contracts_to_theta() {
        let a = build_end_model(2, 2);
        let c0 = gauge_connection(&a, &[(sym_k(), ScalarField::sin_axis(2, 0))]).unwrap();
        let h = FibreMetric::identity(2);
        let c1 = adjoint_connection(&c0, &h).unwrap();
        let pc = curvature_power_contraction(&c0, &c1, 1).unwrap();
        assert!(pc.defect.unwrap() < 1e-12, "defect {}", pc.defect.unwrap());
    }

    #[test]
    fn affine_pure_curvature_slot_matches_t_squared_minus_t() {
        // R^aff(ξ̃,η̃) = (t²−t)·(θ∧θ)(ξ,η) for flat pairs
        let a = build_end_model(2, 2);
        let k = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let nm = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let c0 = gauge_composed(
            &a,
            &k,
            &ScalarField::sin_axis(2, 0),
            &nm,
            &ScalarField::cos_axis(2, 1),
        )
        .unwrap();
        let c1 = adjoint_connection(&c0, &FibreMetric::identity(2)).unwrap();
        let aff = affine_combination(&c0, &c1).unwrap();
        let r_aff = curvature(&aff.conn).unwrap();
        let th = theta(&c0, &c1).unwrap();
        let th2 = th.wedge_compose(&th, 2).unwrap();
        assert!(th2.norm() > 1e-3, "fixture should have non-commuting θ values");
        let lifted = lift_vecform(&th2, &aff.source).unwrap();
        let poly = TPolyField::poly(2, &[0.0, -1.0, 1.0]); // t² − t
        let closed = lifted.mul_coeff(&poly);
        // compare on lifted-frame pairs only
        let mut defect = 0.0f64;
        for combo in closed.combos().to_vec() {
            if combo.contains(&0) {
                continue;
            }
            let a_val = r_aff.value(&combo);
            let b_val = closed.value(&combo);
            for (x, y) in a_val.iter().zip(b_val) {
                defect = defect.max(x.sub(y).norm_l1());
            }
        }
        assert!(defect < 1e-11, "defect {defect}");
    }

    #[test]
    fn d_nabla_on_flat_connection_squares_to_zero() {
        let a = build_end_model(2, 2);
        let conn = gauge_connection(&a, &[(sym_k(), ScalarField::sin_axis(2, 0))]).unwrap();
        let l = conn.source.clone();
        let mut nu = VecForm::zero(&l, 0, 4).unwrap();
        nu.set(
            &[],
            vec![
                ScalarField::sin_axis(2, 0),
                ScalarField::constant(2, 1.0),
                ScalarField::cos_axis(2, 1),
                ScalarField::zero(2),
            ],
        );
        let dd = d_nabla(&conn, &d_nabla(&conn, &nu).unwrap()).unwrap();
        assert!(dd.norm() < 1e-12, "d∇² defect {}", dd.norm());
    }

    #[test]
    fn d_nabla_curvature_identity_nonflat() {
        // d^∇d^∇Ω = R^∇ ∧ Ω for a non-flat fixture, degree 0 and 1
        let a = build_end_model(2, 2);
        let k1 = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let k2 = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let conn = gauge_connection(
            &a,
            &[(k1, ScalarField::sin_axis(2, 0)), (k2, ScalarField::cos_axis(2, 1))],
        )
        .unwrap();
        let r = curvature(&conn).unwrap();
        assert!(r.norm() > 1e-3);
        let l = conn.source.clone();

        let mut nu = VecForm::zero(&l, 0, 4).unwrap();
        nu.set(
            &[],
            vec![
                ScalarField::cos_axis(2, 0),
                ScalarField::constant(2, 0.5),
                ScalarField::sin_axis(2, 1),
                ScalarField::constant(2, -1.0),
            ],
        );
        let lhs = d_nabla(&conn, &d_nabla(&conn, &nu).unwrap()).unwrap();
        let ks = conn.target.kernel_structure().unwrap();
        let rhs = action_wedge(&r, &nu, &ks).unwrap();
        let defect = lhs.sub(&rhs).norm();
        assert!(defect < 1e-11, "degree-0 defect {defect}");

        let mut om = VecForm::zero(&l, 1, 4).unwrap();
        om.set(
            &[0],
            vec![
                ScalarField::sin_axis(2, 1),
                ScalarField::zero(2),
                ScalarField::constant(2, 0.7),
                ScalarField::cos_axis(2, 0),
            ],
        );
        om.set(
            &[1],
            vec![
                ScalarField::constant(2, 1.0),
                ScalarField::sin_axis(2, 0),
                ScalarField::zero(2),
                ScalarField::zero(2),
            ],
        );
        let lhs1 = d_nabla(&conn, &d_nabla(&conn, &om).unwrap()).unwrap();
        let rhs1 = action_wedge(&r, &om, &ks).unwrap();
        let defect1 = lhs1.sub(&rhs1).norm();
        assert!(defect1 < 1e-11, "degree-1 defect {defect1}");
    }

    #[test]
    fn constant_section_on_abelian_kernel_is_parallel() {
        // d^∇ν = 0 for constant ν, abelian kernel, ∇ = id
        let a = crate::algebroid::build_transitive(1, &crate::liealg::LieStructure::abelian(2));
        let id = LConnection::identity(&a);
        let mut nu = VecForm::zero(&a, 0, 2).unwrap();
        nu.set(&[], vec![ScalarField::constant(1, 0.7), ScalarField::constant(1, -1.5)]);
        let d = d_nabla(&id, &nu).unwrap();
        assert!(d.norm() < 1e-14);
    }

    #[test]
    fn curvature_is_tensorial() {
        // [[∇(fξ), ∇η]] − ∇([[fξ,η]]) = f·([[∇ξ,∇η]] − ∇[[ξ,η]]) on frames
        let a = build_end_model(2, 2);
        let k1 = Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let k2 = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let conn = gauge_connection(
            &a,
            &[(k1, ScalarField::sin_axis(2, 0)), (k2, ScalarField::cos_axis(2, 1))],
        )
        .unwrap();
        let f = ScalarField::cos_axis(2, 0);
        let l = conn.source.clone();
        let xi = Section::frame(&l, 0).mul_field(&f);
        let eta = Section::frame(&l, 1);
        let direct = {
            let lhs = bracket(&conn.apply(&xi).unwrap(), &conn.apply(&eta).unwrap()).unwrap();
            let rhs = conn.apply(&bracket(&xi, &eta).unwrap()).unwrap();
            lhs.add(&rhs.scale(-1.0))
        };
        let r = curvature(&conn).unwrap();
        let frame_val = r.value(&[0, 1]);
        let t = a.tangent_dim().unwrap();
        let mut worst: f64 = 0.0;
        for s in 0..4 {
            worst = worst.max(direct.comps[t + s].sub(&frame_val[s].mul(&f)).norm_l1());
        }
        for axis in 0..t {
            worst = worst.max(direct.comps[axis].norm_l1());
        }
        assert!(worst < 1e-12, "tensoriality defect {worst}");
    }

    #[test]
    fn curvature_difference_identity() {
        // R^∇1 − R^∇0 − d^∇0 θ − [θ,θ] = 0 for arbitrary pairs
        let a = build_end_model(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let mut c0 = canonical_splitting(&a).unwrap();
            let mut c1 = canonical_splitting(&a).unwrap();
            for conn in [&mut c0, &mut c1] {
                for s in 0..4 {
                    for axis in 0..2 {
                        let kx = rng.gen_range(-1..=1);
                        let ky = rng.gen_range(-1..=1);
                        let re = rng.gen_range(-0.5..0.5);
                        let im = if kx == 0 && ky == 0 { 0.0 } else { rng.gen_range(-0.5..0.5) };
                        let f = ScalarField::from_literals(2, &[(vec![kx, ky], re, im)]).unwrap();
                        conn.set_entry(2 + s, axis, f);
                    }
                }
            }
            let r0 = curvature(&c0).unwrap();
            let r1 = curvature(&c1).unwrap();
            let th = theta(&c0, &c1).unwrap();
            let dth = d_nabla(&c0, &th).unwrap();
            let ks = a.kernel_structure().unwrap();
            let thth = action_wedge(&th, &th, &ks).unwrap().scale(0.5);
            // [θ,θ](ξ,η) = [θξ,θη]; the action wedge double counts shuffles
            let defect = r1.sub(&r0).sub(&dth).sub(&thth).norm();
            assert!(defect < 1e-9, "difference identity defect {defect}");
        }
    }
}
