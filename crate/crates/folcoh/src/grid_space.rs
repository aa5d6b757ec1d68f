//! The grid backend seen through `FormSpace`.
//!
//! Axes on which nothing depends are diagonalized by a unitary DFT; with a
//! monodromy the fiber modes are permuted by Wᵀ at the wrap, so blocks are
//! orbits of that permutation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, RngCore};
use sprs::CsMat;

use crate::blocks::{hermitian_eigen, Block, BlockAnalysis, BlockComplex, CMat};
use crate::grid::{spmv, FormField, GridComplex};
use crate::space::{CVec, FormSpace, SpaceError};

#[derive(Debug, Clone)]
struct Orbit {
    modes: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
struct Fourier {
    axes: Vec<usize>,
    /// Per point: (index among Fourier-axis points, index among rest points).
    split: Vec<(usize, usize)>,
    /// Per Fourier-point index: coordinates on the Fourier axes.
    fpoints: Vec<Vec<usize>>,
    /// Point index for (fourier index, rest index).
    join: Vec<Vec<usize>>,
    orbits: Vec<Orbit>,
    conj: Vec<usize>,
    nf: usize,
}

pub struct GridSpace {
    pub complex: GridComplex,
    d: Vec<CsMat<f64>>,
    /// d_{k+1}·d_k assembled as one sparse product.
    dd: Vec<CsMat<f64>>,
    delta: Vec<Option<CsMat<f64>>>,
    mass: Vec<CsMat<f64>>,
    interior: Vec<Vec<CsMat<f64>>>,
    /// Leaf frame fields used by the constraint, `n` values per point each.
    pub frame_fields: Vec<Vec<f64>>,
    fourier: Fourier,
}

pub struct GridProjector {
    /// Per degree: real basic vectors and their images under M.
    q: Vec<Vec<Vec<f64>>>,
    mq: Vec<Vec<Vec<f64>>>,
}

impl GridProjector {
    pub fn basis(&self, k: usize) -> &[Vec<f64>] {
        &self.q[k]
    }
}

fn fourier_structure(c: &GridComplex, axes: Vec<usize>) -> Fourier {
    let n = c.n();
    let rest: Vec<usize> = (0..n).filter(|a| !axes.contains(a)).collect();
    let sizes = &c.sizes;
    let nf: usize = axes.iter().map(|&a| sizes[a]).product();
    let nr: usize = rest.iter().map(|&a| sizes[a]).product();
    let flat = |coords: &[usize], which: &[usize]| -> usize {
        which.iter().fold(0, |acc, &a| acc * sizes[a] + coords[a])
    };
    let mut split = Vec::with_capacity(c.points());
    let mut join = vec![vec![0; nr]; nf];
    let mut fpoints = vec![Vec::new(); nf];
    for pt in 0..c.points() {
        let x = c.point_coords(pt);
        let (fi, ri) = (flat(&x, &axes), flat(&x, &rest));
        split.push((fi, ri));
        join[fi][ri] = pt;
        fpoints[fi] = axes.iter().map(|&a| x[a]).collect();
    }
    // mode map: Wᵀ on the fiber pair when both are Fourier axes
    let mono = c.monodromy_axis().and_then(|(_, fib, w)| {
        let i0 = axes.iter().position(|&a| a == fib[0])?;
        let i1 = axes.iter().position(|&a| a == fib[1])?;
        Some((i0, i1, w))
    });
    let map = |k: &[usize]| -> Vec<usize> {
        let mut out = k.to_vec();
        if let Some((i0, i1, w)) = mono {
            let nn = sizes[axes[i0]] as i64;
            let (a, b) = (k[i0] as i64, k[i1] as i64);
            out[i0] = (w[0][0] * a + w[1][0] * b).rem_euclid(nn) as usize;
            out[i1] = (w[0][1] * a + w[1][1] * b).rem_euclid(nn) as usize;
        }
        out
    };
    let mode_index = |k: &[usize]| -> usize { k.iter().zip(&axes).fold(0, |acc, (&m, &a)| acc * sizes[a] + m) };
    let mut seen = vec![usize::MAX; nf];
    let mut orbits: Vec<Orbit> = Vec::new();
    for start in 0..nf {
        if seen[start] != usize::MAX {
            continue;
        }
        let k0 = fpoints[start].clone();
        let mut modes = vec![k0.clone()];
        seen[start] = orbits.len();
        let mut k = map(&k0);
        while k != k0 {
            seen[mode_index(&k)] = orbits.len();
            modes.push(k.clone());
            k = map(&k);
        }
        orbits.push(Orbit { modes });
    }
    let conj = orbits
        .iter()
        .map(|o| {
            let neg: Vec<usize> = o.modes[0].iter().zip(&axes).map(|(&m, &a)| (sizes[a] - m) % sizes[a]).collect();
            seen[mode_index(&neg)]
        })
        .collect();
    Fourier { axes, split, fpoints, join, orbits, conj, nf }
}

impl GridSpace {
    pub fn new(complex: GridComplex) -> Result<Self, SpaceError> {
        let axes = complex.homogeneous_axes();
        Self::with_fourier_axes(complex, axes)
    }

    /// Use an explicit set of DFT axes (each must be homogeneous).
    pub fn with_fourier_axes(complex: GridComplex, axes: Vec<usize>) -> Result<Self, SpaceError> {
        let hom = complex.homogeneous_axes();
        if axes.iter().any(|a| !hom.contains(a)) {
            return Err(SpaceError::Unsupported(format!("axes {:?} are not homogeneous", axes)));
        }
        let n = complex.n();
        let p = complex.p();
        let npts = complex.points();
        let d: Vec<_> = (0..=n).map(|k| complex.d_matrix(k)).collect();
        let delta: Vec<_> = (0..=n).map(|k| if k == 0 { None } else { Some(complex.delta_matrix(k)) }).collect();
        let mass: Vec<_> = (0..=n).map(|k| complex.mass_matrix(k)).collect();
        let frame_fields: Vec<Vec<f64>> = if p == 1 {
            let mut f = vec![0.0; npts * n];
            for pt in 0..npts {
                let x = DVector::from_column_slice(&complex.frame_at(pt)[0]);
                let len = (x.transpose() * complex.metric_at(pt) * &x)[(0, 0)].sqrt();
                for a in 0..n {
                    f[pt * n + a] = x[a] / len;
                }
            }
            vec![f]
        } else {
            (0..p)
                .map(|j| (0..npts).flat_map(|pt| complex.frame_at(pt)[j].clone()).collect())
                .collect()
        };
        let interior = frame_fields
            .iter()
            .map(|f| (0..=n).map(|k| complex.interior_matrix(f, k)).collect())
            .collect();
        let fourier = fourier_structure(&complex, axes);
        let dd = (0..n.saturating_sub(1)).map(|k| &d[k + 1] * &d[k]).collect();
        Ok(GridSpace { complex, d, dd, delta, mass, interior, frame_fields, fourier })
    }

    pub fn fourier_axes(&self) -> &[usize] {
        &self.fourier.axes
    }

    pub fn block_count(&self) -> usize {
        self.fourier.orbits.len()
    }

    /// Coordinate leaf axes and a block-orthogonal metric are required for p > 1.
    fn product_leaf_mask(&self) -> Result<u32, SpaceError> {
        let c = &self.complex;
        let n = c.n();
        let mut mask = 0u32;
        for j in 0..c.p() {
            let v0 = &c.frame_at(0)[j];
            let axis = (0..n).find(|&a| v0[a] != 0.0);
            let ok = axis.is_some()
                && (0..c.points()).all(|pt| {
                    let v = &c.frame_at(pt)[j];
                    (0..n).all(|a| if Some(a) == axis { v[a] == 1.0 } else { v[a] == 0.0 })
                });
            if !ok {
                return Err(SpaceError::Unsupported("p > 1 requires coordinate leaf frames".into()));
            }
            mask |= 1 << axis.unwrap();
        }
        for pt in 0..c.points() {
            let g = c.metric_at(pt);
            for a in 0..n {
                for b in 0..n {
                    let leaf_a = mask >> a & 1 == 1;
                    let leaf_b = mask >> b & 1 == 1;
                    if leaf_a != leaf_b && g[(a, b)] != 0.0 {
                        return Err(SpaceError::Unsupported("p > 1 requires a block-orthogonal metric".into()));
                    }
                }
            }
        }
        Ok(mask)
    }

    fn phase(&self, mode: &[usize], fi: usize) -> Complex64 {
        let q = &self.fourier.fpoints[fi];
        let mut t = 0.0;
        for (i, &a) in self.fourier.axes.iter().enumerate() {
            let nn = self.complex.sizes[a];
            t += ((mode[i] * q[i]) % nn) as f64 / nn as f64;
        }
        Complex64::from_polar(1.0 / (self.fourier.nf as f64).sqrt(), 2.0 * PI * t)
    }

    fn block_dim(&self, b: usize, k: usize) -> usize {
        let nr = self.fourier.join[0].len();
        self.fourier.orbits[b].modes.len() * nr * self.complex.ext.count(k)
    }

    /// Dense restriction of a sparse operator (degree kin → kout) to block b.
    fn extract(&self, t: &CsMat<f64>, kin: usize, kout: usize, b: usize) -> CMat {
        let f = &self.fourier;
        let orbit = &f.orbits[b];
        let nr = f.join[0].len();
        let (cin, cout) = (self.complex.ext.count(kin), self.complex.ext.count(kout));
        let mut out = CMat::zeros(self.block_dim(b, kout), self.block_dim(b, kin));
        if cout == 0 || cin == 0 {
            return out;
        }
        let tc = t.to_csc();
        let mut acc = vec![Complex64::new(0.0, 0.0); t.rows()];
        let mut touched: Vec<usize> = Vec::new();
        let mut mark = vec![false; t.rows()];
        let conj_phase: Vec<Vec<Complex64>> = orbit
            .modes
            .iter()
            .map(|m| (0..f.nf).map(|fi| self.phase(m, fi).conj()).collect())
            .collect();
        for (mp, mode) in orbit.modes.iter().enumerate() {
            let ph: Vec<Complex64> = (0..f.nf).map(|fi| self.phase(mode, fi)).collect();
            for r in 0..nr {
                for i in 0..cin {
                    let col = (mp * nr + r) * cin + i;
                    for fi in 0..f.nf {
                        let src = f.join[fi][r] * cin + i;
                        if let Some(cv) = tc.outer_view(src) {
                            for (row, &v) in cv.iter() {
                                if !mark[row] {
                                    mark[row] = true;
                                    touched.push(row);
                                }
                                acc[row] += ph[fi] * v;
                            }
                        }
                    }
                    for &row in &touched {
                        let (pt, j) = (row / cout, row % cout);
                        let (fi, r2) = f.split[pt];
                        let y = acc[row];
                        for mp2 in 0..orbit.modes.len() {
                            out[((mp2 * nr + r2) * cout + j, col)] += conj_phase[mp2][fi] * y;
                        }
                        acc[row] = Complex64::new(0.0, 0.0);
                        mark[row] = false;
                    }
                    touched.clear();
                }
            }
        }
        out
    }

    fn synthesize_complex(&self, k: usize, b: usize, c: &[Complex64], out: &mut [Complex64]) {
        let f = &self.fourier;
        let nr = f.join[0].len();
        let ck = self.complex.ext.count(k);
        for (mp, mode) in f.orbits[b].modes.iter().enumerate() {
            for fi in 0..f.nf {
                let ph = self.phase(mode, fi);
                for r in 0..nr {
                    let pt = f.join[fi][r];
                    for i in 0..ck {
                        out[pt * ck + i] += ph * c[(mp * nr + r) * ck + i];
                    }
                }
            }
        }
    }
}

impl FormSpace for GridSpace {
    type V = Vec<f64>;
    type Op = CsMat<f64>;
    type Proj = GridProjector;

    fn n(&self) -> usize {
        self.complex.n()
    }

    fn p(&self) -> usize {
        self.complex.p()
    }

    fn backend(&self) -> &'static str {
        "grid"
    }

    fn len(&self, k: usize) -> usize {
        self.complex.len(k)
    }

    fn zero(&self, k: usize) -> Vec<f64> {
        vec![0.0; self.len(k)]
    }

    fn random(&self, k: usize, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.len(k)).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn inner(&self, k: usize, a: &Vec<f64>, b: &Vec<f64>) -> f64 {
        let mb = spmv(&self.mass[k], b);
        a.iter().zip(&mb).map(|(x, y)| x * y).sum()
    }

    fn axpy(&self, alpha: f64, x: &Vec<f64>, y: &mut Vec<f64>) {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
    }

    fn scale(&self, alpha: f64, x: &mut Vec<f64>) {
        x.iter_mut().for_each(|v| *v *= alpha);
    }

    fn sup_norm(&self, x: &Vec<f64>) -> f64 {
        x.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn d(&self, k: usize, x: &Vec<f64>) -> Vec<f64> {
        spmv(&self.d[k], x)
    }

    fn d_squared(&self, k: usize, x: &Vec<f64>) -> Vec<f64> {
        spmv(&self.dd[k], x)
    }

    fn delta(&self, k: usize, x: &Vec<f64>) -> Vec<f64> {
        spmv(self.delta[k].as_ref().expect("codifferential needs k >= 1"), x)
    }

    fn wedge_op(&self, ka: usize, a: &Vec<f64>, k: usize) -> Result<CsMat<f64>, SpaceError> {
        if ka + k > self.n() {
            return Err(SpaceError::Degree { op: "wedge", degree: ka + k });
        }
        Ok(self.complex.wedge_matrix(&FormField { degree: ka, coeffs: a.clone() }, k))
    }

    fn contract_op(&self, ka: usize, a: &Vec<f64>, k: usize) -> Result<CsMat<f64>, SpaceError> {
        if ka > k || k > self.n() {
            return Err(SpaceError::Degree { op: "contract", degree: k });
        }
        Ok(self.complex.wedge_adjoint_matrix(&FormField { degree: ka, coeffs: a.clone() }, k))
    }

    fn apply(&self, op: &CsMat<f64>, x: &Vec<f64>) -> Vec<f64> {
        spmv(op, x)
    }

    fn leaf_interior(&self, k: usize, x: &Vec<f64>) -> Vec<Vec<f64>> {
        self.interior.iter().map(|m| spmv(&m[k], x)).collect()
    }

    fn characteristic_form(&self) -> Result<Vec<f64>, SpaceError> {
        let c = &self.complex;
        let n = c.n();
        if c.p() == 1 {
            let f = &self.frame_fields[0];
            let mut chi = vec![0.0; c.points() * n];
            for pt in 0..c.points() {
                let g = c.metric_at(pt);
                for a in 0..n {
                    chi[pt * n + a] = (0..n).map(|b| g[(a, b)] * f[pt * n + b]).sum();
                }
            }
            return Ok(chi);
        }
        let mask = self.product_leaf_mask()?;
        let leaf: Vec<usize> = (0..n).filter(|a| mask >> a & 1 == 1).collect();
        let ck = c.ext.count(c.p());
        let idx = c.ext.index_of(mask);
        let mut chi = vec![0.0; c.points() * ck];
        for pt in 0..c.points() {
            let g = c.metric_at(pt);
            let gl = DMatrix::from_fn(leaf.len(), leaf.len(), |i, j| g[(leaf[i], leaf[j])]);
            chi[pt * ck + idx] = gl.determinant().sqrt();
        }
        Ok(chi)
    }

    fn constant_function(&self) -> Vec<f64> {
        vec![1.0; self.complex.points()]
    }

    fn pointwise_norms(&self, k: usize, x: &Vec<f64>) -> Option<Vec<f64>> {
        Some(self.complex.pointwise_norm(&FormField { degree: k, coeffs: x.clone() }))
    }

    fn star(&self, k: usize, x: &Vec<f64>) -> Option<Vec<f64>> {
        Some(spmv(&self.complex.star_matrix(k), x))
    }

    fn block_complex(&self, chi: &Vec<f64>) -> BlockComplex {
        let n = self.n();
        let p = self.p();
        let chi_field = FormField { degree: p, coeffs: chi.clone() };
        let wedge: Vec<Option<CsMat<f64>>> = (0..=n)
            .map(|k| if k + p <= n { Some(self.complex.wedge_matrix(&chi_field, k)) } else { None })
            .collect();
        let blocks = (0..self.fourier.orbits.len())
            .map(|b| {
                let dims: Vec<usize> = (0..=n).map(|k| self.block_dim(b, k)).collect();
                let d = (0..=n)
                    .map(|k| if k < n { self.extract(&self.d[k], k, k + 1, b) } else { CMat::zeros(0, dims[n]) })
                    .collect();
                let mass = (0..=n).map(|k| self.extract(&self.mass[k], k, k, b)).collect();
                let constraint = (0..=n)
                    .map(|k| {
                        let mut parts: Vec<CMat> = Vec::new();
                        for ints in &self.interior {
                            if k > 0 {
                                parts.push(self.extract(&ints[k], k, k - 1, b));
                            }
                            if k < n {
                                let id = &ints[k + 1] * &self.d[k];
                                parts.push(self.extract(&id, k, k, b));
                            }
                        }
                        vstack(&parts, dims[k])
                    })
                    .collect();
                let chi_wedge = (0..=n)
                    .map(|k| match &wedge[k] {
                        Some(w) => self.extract(w, k, k + p, b),
                        None => CMat::zeros(0, dims[k]),
                    })
                    .collect();
                let m0 = &self.fourier.orbits[b].modes[0];
                Block {
                    label: format!("modes{:?}x{}", m0, self.fourier.orbits[b].modes.len()),
                    multiplicity: 1,
                    dims,
                    d,
                    mass,
                    constraint,
                    chi_wedge,
                }
            })
            .collect::<Vec<_>>();
        let copies = (0..blocks.len()).collect();
        BlockComplex { n, p, blocks, copies }
    }

    fn analyze(&self, k: usize, x: &Vec<f64>) -> Vec<CVec> {
        let f = &self.fourier;
        let nr = f.join[0].len();
        let ck = self.complex.ext.count(k);
        (0..f.orbits.len())
            .map(|b| {
                let mut c = CVec::zeros(self.block_dim(b, k));
                for (mp, mode) in f.orbits[b].modes.iter().enumerate() {
                    for fi in 0..f.nf {
                        let ph = self.phase(mode, fi).conj();
                        for r in 0..nr {
                            let pt = f.join[fi][r];
                            for i in 0..ck {
                                c[(mp * nr + r) * ck + i] += ph * x[pt * ck + i];
                            }
                        }
                    }
                }
                c
            })
            .collect()
    }

    fn synthesize(&self, k: usize, parts: &[CVec]) -> Vec<f64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.len(k)];
        for (b, c) in parts.iter().enumerate() {
            self.synthesize_complex(k, b, c.as_slice(), &mut out);
        }
        out.iter().map(|z| z.re).collect()
    }

    fn projector(&self, blocks: &BlockComplex, analysis: &BlockAnalysis) -> Result<GridProjector, SpaceError> {
        let n = self.n();
        let mut q = vec![Vec::new(); n + 1];
        let mut mq = vec![Vec::new(); n + 1];
        for k in 0..=n {
            let len = self.len(k);
            for b in 0..blocks.blocks.len() {
                let cb = self.fourier.conj[b];
                if cb < b {
                    continue;
                }
                let basis = analysis.bases[b].basic(k);
                let m = basis.ncols();
                if m == 0 {
                    continue;
                }
                let fields: Vec<Vec<Complex64>> = (0..m)
                    .map(|j| {
                        let mut z = vec![Complex64::new(0.0, 0.0); len];
                        let col: Vec<Complex64> = basis.column(j).iter().copied().collect();
                        self.synthesize_complex(k, b, &col, &mut z);
                        z
                    })
                    .collect();
                let mut reals: Vec<Vec<f64>> = Vec::with_capacity(2 * m);
                for z in &fields {
                    reals.push(z.iter().map(|c| c.re * std::f64::consts::SQRT_2).collect());
                    reals.push(z.iter().map(|c| c.im * std::f64::consts::SQRT_2).collect());
                }
                let chosen = if cb != b {
                    reals
                } else {
                    let mrs: Vec<Vec<f64>> = reals.iter().map(|v| spmv(&self.mass[k], v)).collect();
                    let g = CMat::from_fn(reals.len(), reals.len(), |i, j| {
                        Complex64::new(reals[i].iter().zip(&mrs[j]).map(|(a, b)| a * b).sum(), 0.0)
                    });
                    let (vals, vecs) = hermitian_eigen(&g);
                    let top = vals.last().copied().unwrap_or(0.0);
                    let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > 1e-6 * top).collect();
                    if keep.len() != m {
                        return Err(SpaceError::Unsupported(format!(
                            "real basic basis of self-conjugate block {} has rank {} != {}",
                            b,
                            keep.len(),
                            m
                        )));
                    }
                    keep.iter()
                        .map(|&i| {
                            let s = 1.0 / vals[i].sqrt();
                            let mut v = vec![0.0; len];
                            for (r, x) in reals.iter().enumerate() {
                                let c = vecs[(r, i)].re * s;
                                if c != 0.0 {
                                    v.iter_mut().zip(x).for_each(|(vi, xi)| *vi += c * xi);
                                }
                            }
                            v
                        })
                        .collect()
                };
                for v in chosen {
                    mq[k].push(spmv(&self.mass[k], &v));
                    q[k].push(v);
                }
            }
        }
        Ok(GridProjector { q, mq })
    }

    fn project_basic(&self, proj: &GridProjector, k: usize, x: &Vec<f64>) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        for (qi, mqi) in proj.q[k].iter().zip(&proj.mq[k]) {
            let c: f64 = x.iter().zip(mqi).map(|(a, b)| a * b).sum();
            out.iter_mut().zip(qi).for_each(|(o, v)| *o += c * v);
        }
        out
    }
}

fn vstack(parts: &[CMat], cols: usize) -> CMat {
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut r = 0;
    for p in parts {
        out.view_mut((r, 0), (p.nrows(), cols)).copy_from(p);
        r += p.nrows();
    }
    out
}
