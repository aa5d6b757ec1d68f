//! Forms on S³ = SU(2) expanded in Wigner matrix coefficients D^j_{mn}, with
//! the left-invariant coframe σ¹, σ², σ³.
//!
//! Convention: E_a is the left-invariant field of X_a = −iσ_a (Pauli), so
//! [E_1, E_2] = 2E_3 cyclically and dσ^i = −2 σ^j∧σ^k. With σ orthonormal
//! this is the unit sphere, of volume 2π². E_a acts on the right index n of
//! D^j_{mn} through R_a = −2iJ_a.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, RngCore};
use thiserror::Error;

use crate::blocks::{Block, BlockAnalysis, BlockComplex, CMat};
use crate::ext::Ext;
use crate::space::{CVec, FormSpace, SpaceError};

pub const STRUCTURE_CONSTANT: f64 = 2.0;
pub const ROUND_VOLUME: f64 = 2.0 * PI * PI;

#[derive(Debug, Error, PartialEq)]
pub enum Su2Error {
    #[error("scales must be positive, got {0:?}")]
    Scale([f64; 3]),
    #[error("J_max must be a multiple of 1/2 and at least 1, got {0}")]
    Truncation(f64),
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// (J_+, J_3) in the basis n = −j, …, j.
pub fn spin_matrices(tj: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = tj + 1;
    let j = tj as f64 / 2.0;
    let mut jp = DMatrix::zeros(d, d);
    let mut j3 = DMatrix::zeros(d, d);
    for i in 0..d {
        let n = -j + i as f64;
        j3[(i, i)] = n;
        if i + 1 < d {
            jp[(i + 1, i)] = (j * (j + 1.0) - n * (n + 1.0)).sqrt();
        }
    }
    (jp, j3)
}

/// Matrices of E_1, E_2, E_3 on coefficient vectors of spin j.
pub fn frame_derivatives(tj: usize) -> [CMat; 3] {
    let (jp, j3) = spin_matrices(tj);
    let jm = jp.transpose();
    let i = Complex64::new(0.0, 1.0);
    let r1 = (&jp + &jm).map(|x| -i * x);
    let r2 = (&jp - &jm).map(|x| c(-x));
    let r3 = j3.map(|x| -2.0 * i * x);
    [r1, r2, r3]
}

#[derive(Debug, Clone)]
pub struct Su2Complex {
    pub jmax2: usize,
    pub scales: [f64; 3],
    ext: Ext,
    /// Per degree, per spin: (offset, block length); copies are laid out m-major.
    offsets: Vec<Vec<usize>>,
    d_inv: Vec<DMatrix<f64>>,
    wedge_sigma: Vec<[DMatrix<f64>; 3]>,
    lambda_mass: Vec<Vec<f64>>,
    xi_interior: Vec<DMatrix<f64>>,
    d_blocks: Vec<Vec<CMat>>,
}

pub fn build_su2(jmax: f64, scales: [f64; 3]) -> Result<Su2Complex, Su2Error> {
    if scales.iter().any(|a| !(*a > 0.0)) {
        return Err(Su2Error::Scale(scales));
    }
    let jmax2 = (2.0 * jmax).round();
    if (2.0 * jmax - jmax2).abs() > 1e-12 || jmax < 1.0 {
        return Err(Su2Error::Truncation(jmax));
    }
    let jmax2 = jmax2 as usize;
    let ext = Ext::new(3);
    // structure equations dσ^a = −c σ^b∧σ^c on basis 1-forms
    let mut dsigma = vec![vec![0.0; 3]; 3];
    dsigma[0][ext.index_of(0b110)] = -STRUCTURE_CONSTANT;
    dsigma[1][ext.index_of(0b101)] = STRUCTURE_CONSTANT;
    dsigma[2][ext.index_of(0b011)] = -STRUCTURE_CONSTANT;
    let mut d_inv = Vec::new();
    let mut wedge_sigma = Vec::new();
    let mut lambda_mass = Vec::new();
    let mut xi_interior = Vec::new();
    for k in 0..=3 {
        let (ck, ck1) = (ext.count(k), ext.count(k + 1));
        let mut m = DMatrix::zeros(ck1, ck);
        for (col, &mask) in ext.masks(k).iter().enumerate() {
            // Leibniz over σ^{i1}∧…∧σ^{ik}
            let idx: Vec<usize> = (0..3).filter(|b| mask >> b & 1 == 1).collect();
            for r in 0..idx.len() {
                let mut acc = vec![1.0];
                let mut deg = 0;
                for (s, &l) in idx.iter().enumerate() {
                    let mut unit = vec![0.0; 3];
                    let factor = if s == r {
                        dsigma[l].clone()
                    } else {
                        unit[l] = 1.0;
                        unit
                    };
                    let fdeg = if s == r { 2 } else { 1 };
                    acc = ext.wedge(deg, &acc, fdeg, &factor);
                    deg += fdeg;
                }
                let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
                for (row, v) in acc.iter().enumerate() {
                    m[(row, col)] += sign * v;
                }
            }
        }
        d_inv.push(m);
        let ws = [0usize, 1, 2].map(|a| {
            let mut w = DMatrix::zeros(ck1, ck);
            let mut unit = vec![0.0; 3];
            unit[a] = 1.0;
            for (i, j, r, s) in ext.wedge_table(1, k) {
                w[(r, j)] += s * unit[i];
            }
            w
        });
        wedge_sigma.push(ws);
        lambda_mass.push(
            ext.masks(k)
                .iter()
                .map(|&mask| (0..3).filter(|b| mask >> b & 1 == 1).map(|b| scales[b].powi(-2)).product())
                .collect(),
        );
        let mut xi = DMatrix::zeros(ext.count(k.saturating_sub(1)), ck);
        for (i, r, s) in ext.interior_table(k, 2) {
            xi[(r, i)] += s / scales[2];
        }
        xi_interior.push(xi);
    }
    let mut offsets = Vec::new();
    for k in 0..=3 {
        let mut off = Vec::new();
        let mut acc = 0;
        for tj in 0..=jmax2 {
            off.push(acc);
            acc += (tj + 1) * (tj + 1) * ext.count(k);
        }
        off.push(acc);
        offsets.push(off);
    }
    let mut out = Su2Complex {
        jmax2,
        scales,
        ext,
        offsets,
        d_inv,
        wedge_sigma,
        lambda_mass,
        xi_interior,
        d_blocks: Vec::new(),
    };
    out.d_blocks = (0..=jmax2).map(|tj| (0..=3).map(|k| out.d_block(tj, k)).collect()).collect();
    Ok(out)
}

impl Su2Complex {
    pub fn scalar_modes(&self) -> usize {
        (0..=self.jmax2).map(|tj| (tj + 1) * (tj + 1)).sum()
    }

    pub fn ext(&self) -> &Ext {
        &self.ext
    }

    /// Haar-measure volume for the current scales.
    pub fn volume(&self) -> f64 {
        ROUND_VOLUME * self.scales.iter().product::<f64>()
    }

    fn block_len(&self, tj: usize, k: usize) -> usize {
        (tj + 1) * self.ext.count(k)
    }

    /// Offset of copy (j, m) in a degree-k vector; `mi` = m + j.
    pub fn copy_offset(&self, k: usize, tj: usize, mi: usize) -> usize {
        self.offsets[k][tj] + mi * self.block_len(tj, k)
    }

    fn d_block(&self, tj: usize, k: usize) -> CMat {
        let d = tj + 1;
        if k == 3 {
            return CMat::zeros(0, d);
        }
        let r = frame_derivatives(tj);
        let mut out = CMat::identity(d, d).kronecker(&self.d_inv[k].map(c));
        for a in 0..3 {
            out += r[a].kronecker(&self.wedge_sigma[k][a].map(c));
        }
        out
    }

    fn mass_block(&self, tj: usize, k: usize) -> CMat {
        let d = tj + 1;
        let w = self.volume() / d as f64;
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.ext.count(k),
            self.lambda_mass[k].iter().map(|x| c(x * w)),
        ));
        CMat::identity(d, d).kronecker(&diag)
    }

    fn each_copy(&self, k: usize, mut f: impl FnMut(usize, usize, std::ops::Range<usize>)) {
        for tj in 0..=self.jmax2 {
            let len = self.block_len(tj, k);
            for mi in 0..=tj {
                let o = self.copy_offset(k, tj, mi);
                f(tj, mi, o..o + len);
            }
        }
    }

    /// Impose the conjugation symmetry that makes the field real.
    pub fn realify(&self, k: usize, x: &mut [Complex64]) {
        let ck = self.ext.count(k);
        let src = x.to_vec();
        for tj in 0..=self.jmax2 {
            let d = tj + 1;
            for mi in 0..d {
                for ni in 0..d {
                    let sign = if (mi + ni) % 2 == 0 { 1.0 } else { -1.0 };
                    for i in 0..ck {
                        let here = self.copy_offset(k, tj, mi) + ni * ck + i;
                        let there = self.copy_offset(k, tj, d - 1 - mi) + (d - 1 - ni) * ck + i;
                        x[here] = 0.5 * (src[here] + sign * src[there].conj());
                    }
                }
            }
        }
    }

    /// Largest deviation from the reality condition.
    pub fn reality_residual(&self, k: usize, x: &[Complex64]) -> f64 {
        let mut y = x.to_vec();
        self.realify(k, &mut y);
        y.iter().zip(x).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// Coefficient of D^j_{mn} σ^I in a degree-k vector (`mi` = m + j, `ni` = n + j).
    pub fn coefficient_index(&self, k: usize, tj: usize, mi: usize, ni: usize, i: usize) -> usize {
        self.copy_offset(k, tj, mi) + ni * self.ext.count(k) + i
    }

    fn invariant_part(&self, k: usize, a: &[Complex64]) -> Result<Vec<Complex64>, SpaceError> {
        let ck = self.ext.count(k);
        let scale = a.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if a[ck..].iter().any(|z| z.norm() > 1e-13 * scale.max(1.0)) {
            return Err(SpaceError::Truncation);
        }
        Ok(a[..ck].to_vec())
    }
}

impl FormSpace for Su2Complex {
    type V = Vec<Complex64>;
    type Op = CMat;
    type Proj = Vec<Vec<(CMat, CMat)>>;

    fn n(&self) -> usize {
        3
    }

    fn p(&self) -> usize {
        1
    }

    fn backend(&self) -> &'static str {
        "su2"
    }

    fn len(&self, k: usize) -> usize {
        if k > 3 {
            0
        } else {
            self.offsets[k][self.jmax2 + 1]
        }
    }

    fn zero(&self, k: usize) -> Vec<Complex64> {
        vec![c(0.0); self.len(k)]
    }

    fn random(&self, k: usize, rng: &mut dyn RngCore) -> Vec<Complex64> {
        let mut x: Vec<Complex64> = (0..self.len(k))
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        self.realify(k, &mut x);
        x
    }

    fn inner(&self, k: usize, a: &Vec<Complex64>, b: &Vec<Complex64>) -> f64 {
        let mut acc = 0.0;
        self.each_copy(k, |tj, _, r| {
            let w = self.volume() / (tj + 1) as f64;
            let ck = self.ext.count(k);
            for (off, idx) in r.enumerate() {
                acc += w * self.lambda_mass[k][off % ck] * (a[idx].conj() * b[idx]).re;
            }
        });
        acc
    }

    fn axpy(&self, alpha: f64, x: &Vec<Complex64>, y: &mut Vec<Complex64>) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
    }

    fn scale(&self, alpha: f64, x: &mut Vec<Complex64>) {
        x.iter_mut().for_each(|v| *v *= alpha);
    }

    fn sup_norm(&self, x: &Vec<Complex64>) -> f64 {
        x.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    fn d(&self, k: usize, x: &Vec<Complex64>) -> Vec<Complex64> {
        let mut out = self.zero(k + 1);
        if k >= 3 {
            return out;
        }
        self.each_copy(k, |tj, mi, r| {
            let v = CVec::from_column_slice(&x[r]);
            let y = &self.d_blocks[tj][k] * v;
            let o = self.copy_offset(k + 1, tj, mi);
            out[o..o + y.len()].copy_from_slice(y.as_slice());
        });
        out
    }

    fn delta(&self, k: usize, x: &Vec<Complex64>) -> Vec<Complex64> {
        assert!(k >= 1 && k <= 3, "codifferential needs 1 <= k <= 3");
        let mut out = self.zero(k - 1);
        let (lo, hi) = (&self.lambda_mass[k - 1], &self.lambda_mass[k]);
        self.each_copy(k, |tj, mi, r| {
            let ck = self.ext.count(k);
            let v = CVec::from_iterator(r.len(), r.clone().map(|i| x[i] * hi[(i - r.start) % ck]));
            let y = self.d_blocks[tj][k - 1].adjoint() * v;
            let o = self.copy_offset(k - 1, tj, mi);
            let cl = self.ext.count(k - 1);
            for (i, z) in y.iter().enumerate() {
                out[o + i] = z / lo[i % cl];
            }
        });
        out
    }

    fn wedge_op(&self, ka: usize, a: &Vec<Complex64>, k: usize) -> Result<CMat, SpaceError> {
        if ka + k > 3 {
            return Err(SpaceError::Degree { op: "wedge", degree: ka + k });
        }
        let inv = self.invariant_part(ka, a)?;
        let mut w = CMat::zeros(self.ext.count(ka + k), self.ext.count(k));
        for (i, j, r, s) in self.ext.wedge_table(ka, k) {
            w[(r, j)] += inv[i] * s;
        }
        Ok(w)
    }

    fn contract_op(&self, ka: usize, a: &Vec<Complex64>, k: usize) -> Result<CMat, SpaceError> {
        if ka > k || k > 3 {
            return Err(SpaceError::Degree { op: "contract", degree: k });
        }
        let w = self.wedge_op(ka, a, k - ka)?;
        let lo = &self.lambda_mass[k - ka];
        let hi = &self.lambda_mass[k];
        Ok(CMat::from_fn(w.ncols(), w.nrows(), |i, j| w[(j, i)].conj() * hi[j] / lo[i]))
    }

    fn apply(&self, op: &CMat, x: &Vec<Complex64>) -> Vec<Complex64> {
        let (co, ci) = op.shape();
        let total = x.len() / ci * co;
        let mut out = vec![c(0.0); total];
        for (chunk_in, chunk_out) in x.chunks(ci).zip(out.chunks_mut(co)) {
            for r in 0..co {
                chunk_out[r] = (0..ci).map(|s| op[(r, s)] * chunk_in[s]).sum();
            }
        }
        out
    }

    fn leaf_interior(&self, k: usize, x: &Vec<Complex64>) -> Vec<Vec<Complex64>> {
        if k == 0 {
            return vec![Vec::new()];
        }
        vec![self.apply(&self.xi_interior[k].map(c), x)]
    }

    fn characteristic_form(&self) -> Result<Vec<Complex64>, SpaceError> {
        let mut chi = self.zero(1);
        chi[self.ext.index_of(0b100)] = c(self.scales[2]);
        Ok(chi)
    }

    fn constant_function(&self) -> Vec<Complex64> {
        let mut f = self.zero(0);
        f[0] = c(1.0);
        f
    }

    /// Only invariant forms have a closed-form pointwise norm.
    fn pointwise_norms(&self, k: usize, x: &Vec<Complex64>) -> Option<Vec<f64>> {
        let inv = self.invariant_part(k, x).ok()?;
        let sq: f64 = inv.iter().zip(&self.lambda_mass[k]).map(|(z, l)| z.norm_sqr() * l).sum();
        Some(vec![sq.sqrt()])
    }

    fn block_complex(&self, chi: &Vec<Complex64>) -> BlockComplex {
        let chi_w: Vec<CMat> = (0..=3)
            .map(|k| {
                if k < 3 {
                    self.wedge_op(1, chi, k).expect("χ is invariant")
                } else {
                    CMat::zeros(0, 1)
                }
            })
            .collect();
        let mut blocks = Vec::new();
        let mut copies = Vec::new();
        for tj in 0..=self.jmax2 {
            let d = tj + 1;
            let id = CMat::identity(d, d);
            let dims: Vec<usize> = (0..=3).map(|k| self.block_len(tj, k)).collect();
            let constraint = (0..=3)
                .map(|k| {
                    let xi_k = id.kronecker(&self.xi_interior[k].map(c));
                    let mut parts = Vec::new();
                    if k > 0 {
                        parts.push(xi_k);
                    }
                    if k < 3 {
                        let xi_k1 = id.kronecker(&self.xi_interior[k + 1].map(c));
                        parts.push(xi_k1 * &self.d_blocks[tj][k]);
                    }
                    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
                    let mut m = CMat::zeros(rows, dims[k]);
                    let mut r0 = 0;
                    for p in parts {
                        m.view_mut((r0, 0), p.shape()).copy_from(&p);
                        r0 += p.nrows();
                    }
                    m
                })
                .collect();
            blocks.push(Block {
                label: format!("j={}", tj as f64 / 2.0),
                multiplicity: d,
                dims: dims.clone(),
                d: self.d_blocks[tj].clone(),
                mass: (0..=3).map(|k| self.mass_block(tj, k)).collect(),
                constraint,
                chi_wedge: (0..=3)
                    .map(|k| if k < 3 { id.kronecker(&chi_w[k]) } else { CMat::zeros(0, dims[3]) })
                    .collect(),
            });
            copies.extend(std::iter::repeat(tj).take(d));
        }
        BlockComplex { n: 3, p: 1, blocks, copies }
    }

    fn analyze(&self, k: usize, x: &Vec<Complex64>) -> Vec<CVec> {
        let mut out = Vec::new();
        self.each_copy(k, |_, _, r| out.push(CVec::from_column_slice(&x[r])));
        out
    }

    fn synthesize(&self, k: usize, parts: &[CVec]) -> Vec<Complex64> {
        let mut out = self.zero(k);
        let mut i = 0;
        self.each_copy(k, |_, _, r| {
            out[r].copy_from_slice(parts[i].as_slice());
            i += 1;
        });
        out
    }

    fn projector(&self, blocks: &BlockComplex, analysis: &BlockAnalysis) -> Result<Self::Proj, SpaceError> {
        Ok(blocks
            .blocks
            .iter()
            .zip(&analysis.bases)
            .map(|(b, s)| {
                (0..=3)
                    .map(|k| {
                        let q = s.basic(k);
                        let mq = &b.mass[k] * &q;
                        (q, mq)
                    })
                    .collect()
            })
            .collect())
    }

    fn project_basic(&self, proj: &Self::Proj, k: usize, x: &Vec<Complex64>) -> Vec<Complex64> {
        let mut out = self.zero(k);
        self.each_copy(k, |tj, _, r| {
            let (q, mq) = &proj[tj][k];
            let v = CVec::from_column_slice(&x[r.clone()]);
            let y = q * (mq.adjoint() * v);
            out[r].copy_from_slice(y.as_slice());
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mode_count_and_scale_errors() {
        let s = build_su2(1.0, [1.0; 3]).unwrap();
        assert_eq!(s.scalar_modes(), 14);
        assert_eq!(build_su2(3.0, [1.0; 3]).unwrap().scalar_modes(), 140);
        assert!(matches!(build_su2(1.0, [1.0, 0.0, 1.0]), Err(Su2Error::Scale(_))));
        assert!(matches!(build_su2(0.5, [1.0; 3]), Err(Su2Error::Truncation(_))));
    }

    #[test]
    fn brackets_match_convention() {
        for tj in 0..4 {
            let [r1, r2, r3] = frame_derivatives(tj);
            let br = &r1 * &r2 - &r2 * &r1;
            assert!((br - &r3 * c(STRUCTURE_CONSTANT)).norm() < 1e-13);
            let br = &r2 * &r3 - &r3 * &r2;
            assert!((br - &r1 * c(STRUCTURE_CONSTANT)).norm() < 1e-13);
        }
    }

    #[test]
    fn structure_equation_and_closure() {
        let s = build_su2(1.0, [1.0; 3]).unwrap();
        let chi = s.characteristic_form().unwrap();
        let dchi = s.d(1, &chi);
        // dσ³ = −2 σ¹∧σ²
        assert!((dchi[s.ext.index_of(0b011)] - c(-2.0)).norm() < 1e-15);
        assert!(s.sup_norm(&s.d(2, &dchi)) < 1e-14);
    }

    #[test]
    fn realified_fields_stay_real() {
        let s = build_su2(2.0, [1.0, 1.0, 0.7]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for k in 0..3 {
            let x = s.random(k, &mut rng);
            assert!(s.reality_residual(k, &x) < 1e-15);
            assert!(s.reality_residual(k + 1, &s.d(k, &x)) < 1e-13);
        }
    }
}
