//! Block-diagonal form of a discrete complex and the audited split of every
//! block into basic and antibasic parts.
//!
//! Each backend decomposes its form spaces into mutually invariant blocks
//! (Fourier orbits on grids, spins on SU(2)). A block carries dense complex
//! matrices for d, the mass operator, the basic constraint and χ∧, in a basis
//! that is orthonormal for the Euclidean coefficient product.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::space::SpaceError;

pub type CMat = DMatrix<Complex64>;

pub const GAP_MIN: f64 = 1e3;

#[derive(Debug, Clone)]
pub struct Block {
    pub label: String,
    pub multiplicity: usize,
    pub dims: Vec<usize>,
    /// d[k]: dims[k+1] × dims[k], with d[n] the empty map.
    pub d: Vec<CMat>,
    pub mass: Vec<CMat>,
    /// Stacked (i_X ω, i_X dω) for every leaf frame vector.
    pub constraint: Vec<CMat>,
    /// χ∧ from degree k to degree k + p (empty when k + p > n).
    pub chi_wedge: Vec<CMat>,
}

#[derive(Debug, Clone)]
pub struct BlockComplex {
    pub n: usize,
    pub p: usize,
    pub blocks: Vec<Block>,
    /// Block index of every copy, in the order used by `analyze`.
    pub copies: Vec<usize>,
}

impl BlockComplex {
    pub fn total_dim(&self, k: usize) -> usize {
        self.blocks.iter().map(|b| b.multiplicity * b.dims[k]).sum()
    }
}

/// Record of one thresholded spectrum family.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Audit {
    pub what: String,
    pub tau: f64,
    pub scale: f64,
    pub accepted_min: Option<f64>,
    pub rejected_max: Option<f64>,
    pub gap_ratio: f64,
    pub ok: bool,
    /// True when no value lies within a factor 10 of the threshold.
    pub robust: bool,
}

/// Threshold a family of nonnegative spectra at `rel` times its maximum.
pub fn audit(what: &str, values: &[&[f64]], rel: f64) -> Audit {
    let scale = values.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, &x| m.max(x.abs()));
    audit_scaled(what, values, rel, scale)
}

/// Threshold at `rel` times an external scale, e.g. the norm of the operator
/// a family was compressed from.
pub fn audit_scaled(what: &str, values: &[&[f64]], rel: f64, scale: f64) -> Audit {
    let tau = rel * scale;
    let mut acc: Option<f64> = None;
    let mut rej: Option<f64> = None;
    let mut robust = true;
    for &x in values.iter().flat_map(|v| v.iter()) {
        let x = x.abs();
        if x > tau {
            acc = Some(acc.map_or(x, |a: f64| a.min(x)));
        } else {
            rej = Some(rej.map_or(x, |r: f64| r.max(x)));
        }
        if x > tau / 10.0 && x <= tau * 10.0 {
            robust = false;
        }
    }
    let floor = scale * 1e-20;
    let gap_ratio = match (acc, rej) {
        (Some(a), Some(r)) => a / r.max(floor).max(f64::MIN_POSITIVE),
        _ => f64::MAX,
    };
    Audit {
        what: what.to_string(),
        tau,
        scale,
        accepted_min: acc,
        rejected_max: rej,
        gap_ratio,
        ok: gap_ratio > GAP_MIN,
        robust,
    }
}

pub fn count_above(values: &[f64], tau: f64) -> usize {
    values.iter().filter(|x| x.abs() > tau).count()
}

/// Singular values and right singular vectors (columns of V, b × b).
pub fn svd_full(a: &CMat) -> (Vec<f64>, CMat) {
    let (r, b) = a.shape();
    if b == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let padded = if r < b {
        let mut m = CMat::zeros(b, b);
        m.view_mut((0, 0), (r, b)).copy_from(a);
        m
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let v = svd.v_t.expect("requested V").adjoint();
    (svd.singular_values.iter().copied().collect(), v)
}

fn split(a: &CMat) -> (DMatrix<f64>, Option<DMatrix<f64>>) {
    let re = a.map(|z| z.re);
    let imag = a.iter().any(|z| z.im != 0.0);
    (re, imag.then(|| a.map(|z| z.im)))
}

/// Complex product through real products, which run on the blocked f64
/// kernel; real operands skip the imaginary terms.
pub fn cmul(a: &CMat, b: &CMat) -> CMat {
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let mut re = &ar * &br;
    let im = match (&ai, &bi) {
        (None, None) => None,
        (Some(ai), None) => Some(ai * &br),
        (None, Some(bi)) => Some(&ar * bi),
        (Some(ai), Some(bi)) => {
            re -= ai * bi;
            Some(&ar * bi + ai * &br)
        }
    };
    match im {
        None => re.map(|x| Complex64::new(x, 0.0)),
        Some(im) => re.zip_map(&im, Complex64::new),
    }
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    a.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Eigen-decomposition of a Hermitian matrix, ascending.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let mut vals: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
    vals
}

pub fn select_columns(v: &CMat, cols: &[usize]) -> CMat {
    CMat::from_fn(v.nrows(), cols.len(), |r, c| v[(r, cols[c])])
}

/// Per-block, per-degree factorizations and the basic/antibasic split.
#[derive(Debug, Clone)]
pub struct BlockBases {
    /// Cholesky factor L with M = L Lᴴ.
    pub chol: Vec<CMat>,
    /// L⁻ᴴ.
    pub chol_inv_h: Vec<CMat>,
    /// Right singular vectors of the whitened constraint, split at τ.
    pub v_basic: Vec<CMat>,
    pub v_anti: Vec<CMat>,
}

impl BlockBases {
    /// M-orthonormal basic basis in block coordinates.
    pub fn basic(&self, k: usize) -> CMat {
        &self.chol_inv_h[k] * &self.v_basic[k]
    }

    pub fn anti(&self, k: usize) -> CMat {
        &self.chol_inv_h[k] * &self.v_anti[k]
    }
}

#[derive(Debug, Clone)]
pub struct BlockAnalysis {
    pub rel_tol: f64,
    pub bases: Vec<BlockBases>,
    pub audits: Vec<Audit>,
    pub constraint_spectra: Vec<Vec<Vec<f64>>>,
}

impl BlockAnalysis {
    pub fn new(bc: &BlockComplex, rel_tol: f64) -> Result<Self, SpaceError> {
        let n = bc.n;
        let mut spectra = Vec::with_capacity(bc.blocks.len());
        let mut partial = Vec::with_capacity(bc.blocks.len());
        for b in &bc.blocks {
            let mut chol = Vec::new();
            let mut chol_inv_h = Vec::new();
            let mut sv = Vec::new();
            let mut vs = Vec::new();
            for k in 0..=n {
                let m = &b.mass[k];
                let l = if m.nrows() == 0 {
                    CMat::zeros(0, 0)
                } else {
                    m.clone()
                        .cholesky()
                        .ok_or_else(|| SpaceError::Unsupported(format!("mass of block {} not positive", b.label)))?
                        .l()
                };
                let linv = l
                    .solve_lower_triangular(&CMat::identity(l.nrows(), l.nrows()))
                    .expect("triangular factor is invertible");
                let lih = linv.adjoint();
                let (s, v) = svd_full(&cmul(&b.constraint[k], &lih));
                chol.push(l);
                chol_inv_h.push(lih);
                sv.push(s);
                vs.push(v);
            }
            spectra.push(sv);
            partial.push((chol, chol_inv_h, vs));
        }
        let mut audits = Vec::new();
        let mut taus = Vec::new();
        for k in 0..=n {
            let fam: Vec<&[f64]> = spectra.iter().map(|s| s[k].as_slice()).collect();
            let a = audit(&format!("basic_constraint^{}", k), &fam, rel_tol);
            if !a.ok {
                let mut all: Vec<f64> = fam.iter().flat_map(|v| v.iter().copied()).collect();
                all.sort_by(|x, y| y.partial_cmp(x).unwrap());
                return Err(SpaceError::IllConditioned { what: a.what, ratio: a.gap_ratio, spectrum: all });
            }
            taus.push(a.tau);
            audits.push(a);
        }
        let bases = partial
            .into_iter()
            .zip(&spectra)
            .map(|((chol, chol_inv_h, vs), sv)| {
                let mut v_basic = Vec::new();
                let mut v_anti = Vec::new();
                for k in 0..=n {
                    let b = vs[k].nrows();
                    // padded rows give σ = 0 beyond the constraint row count
                    let sig = |i: usize| sv[k].get(i).copied().unwrap_or(0.0);
                    let keep: Vec<usize> = (0..b).filter(|&i| sig(i) <= taus[k]).collect();
                    let rest: Vec<usize> = (0..b).filter(|&i| sig(i) > taus[k]).collect();
                    v_basic.push(select_columns(&vs[k], &keep));
                    v_anti.push(select_columns(&vs[k], &rest));
                }
                BlockBases { chol, chol_inv_h, v_basic, v_anti }
            })
            .collect();
        Ok(BlockAnalysis { rel_tol, bases, audits, constraint_spectra: spectra })
    }

    pub fn basic_dim(&self, bc: &BlockComplex, k: usize) -> usize {
        bc.blocks.iter().zip(&self.bases).map(|(b, s)| b.multiplicity * s.v_basic[k].ncols()).sum()
    }

    pub fn anti_dim(&self, bc: &BlockComplex, k: usize) -> usize {
        bc.blocks.iter().zip(&self.bases).map(|(b, s)| b.multiplicity * s.v_anti[k].ncols()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn audit_gap_and_robustness() {
        let a = audit("x", &[&[1.0, 0.5, 1e-15], &[2.0, 1e-14]], 1e-8);
        assert!((a.tau - 2e-8).abs() < 1e-22);
        assert_eq!(a.accepted_min, Some(0.5));
        assert_eq!(a.rejected_max, Some(1e-14));
        assert!(a.ok && a.robust);
        let b = audit("y", &[&[1.0, 5e-8, 1e-9]], 1e-8);
        assert!(!b.robust);
        assert!(b.gap_ratio < 1e3 && !b.ok);
    }

    #[test]
    fn svd_full_pads_short_matrices() {
        let a = CMat::from_row_slice(1, 3, &[c(1.0), c(1.0), c(0.0)]);
        let (s, v) = svd_full(&a);
        assert_eq!(v.shape(), (3, 3));
        let nonzero = s.iter().filter(|x| **x > 1e-12).count();
        assert_eq!(nonzero, 1);
        let resid = &a * &v;
        for (i, &x) in s.iter().enumerate() {
            if x < 1e-12 {
                assert!(resid.column(i).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn hermitian_eigen_sorted() {
        let a = CMat::from_row_slice(2, 2, &[c(2.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0), c(2.0)]);
        let (vals, vecs) = hermitian_eigen(&a);
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] - 3.0).abs() < 1e-14);
        let r = &a * vecs.column(0) - vecs.column(0) * c(vals[0]);
        assert!(r.norm() < 1e-14);
    }
}
