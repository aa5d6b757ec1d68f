//! Betti numbers, spectra and the antibasic Hodge decomposition, all computed
//! block by block in coordinates that are orthonormal for the L² product.
//!
//! With M = LLᴴ per block and degree, d̃ = L_{k+1}ᴴ d L_k⁻ᴴ is the exterior
//! derivative in orthonormal coordinates. The right singular vectors of the
//! whitened constraint split those coordinates into basic (V₀) and antibasic
//! (V₁) parts, so d_b = V₀ᴴ d̃ V₀ and d_a = V₁ᴴ d̃ V₁.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::blocks::{audit, audit_scaled, cmul, hermitian_eigen, hermitian_eigenvalues, singular_values, Audit, CMat};
use crate::foliation::FoliationPackage;
use crate::space::{norm, CVec, FormSpace, SpaceError};

#[derive(Debug, Error)]
pub enum CohomologyError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("ill-conditioned spectrum for {}: gap ratio {:e} below 1e3; spectrum {spectrum:?}", audit.what, audit.gap_ratio)]
    IllConditioned { audit: Audit, spectrum: Vec<f64> },
    #[error("rank and harmonic antibasic Betti numbers disagree in degree {degree}: {rank} vs {harmonic}; δ_a singular values {rank_spectrum:?}; Δ_a eigenvalues {harmonic_spectrum:?}")]
    MethodDisagreement {
        degree: usize,
        rank: usize,
        harmonic: usize,
        rank_spectrum: Vec<f64>,
        harmonic_spectrum: Vec<f64>,
    },
    #[error("input is not antibasic: |P_b ω| / |ω| = {0:e}")]
    NotAntibasic(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BettiNumbers {
    pub h: Vec<usize>,
    /// Degrees 0..=q.
    pub h_b: Vec<usize>,
    /// From the δ_a complex.
    pub h_a_rank: Vec<usize>,
    /// Zero modes of Δ_a.
    pub h_a_harmonic: Vec<usize>,
    /// From the d_a complex.
    pub h_a_d_complex: Vec<usize>,
    /// Zero modes of Δ, cross-checking `h`.
    pub h_harmonic: Vec<usize>,
    pub basic_dims: Vec<usize>,
    pub antibasic_dims: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BettiReport {
    pub betti: BettiNumbers,
    pub audits: Vec<Audit>,
    /// True when no audited value lies within a factor 10 of its threshold.
    pub robust: bool,
}

struct BlockMats {
    multiplicity: usize,
    /// L_kᴴ and L_k⁻ᴴ.
    lh: Vec<CMat>,
    lih: Vec<CMat>,
    v_basic: Vec<CMat>,
    v_anti: Vec<CMat>,
    dt: Vec<CMat>,
    db: Vec<CMat>,
    da: Vec<CMat>,
    /// δ_a from degree k + 1 to k, assembled through M⁻¹dᴴM.
    dla: Vec<CMat>,
    /// Eigen-decomposition of Δ_a per degree, ascending.
    lap_a: Vec<(Vec<f64>, CMat)>,
    lap: Vec<Vec<f64>>,
}

pub struct Engine<'p, 's, S: FormSpace> {
    pub pkg: &'p FoliationPackage<'s, S>,
    pub rel_tol: f64,
    blocks: Vec<BlockMats>,
    /// Harmonic threshold per degree.
    lap_a_tau: Vec<f64>,
    report: BettiReport,
}

fn gram(a: &CMat) -> CMat {
    cmul(&a.adjoint(), a)
}

fn cogram(a: &CMat) -> CMat {
    cmul(a, &a.adjoint())
}

fn sized(rows: usize, cols: usize, m: CMat) -> CMat {
    if m.nrows() == rows && m.ncols() == cols {
        m
    } else {
        CMat::zeros(rows, cols)
    }
}

impl<'p, 's, S: FormSpace> Engine<'p, 's, S> {
    pub fn new(pkg: &'p FoliationPackage<'s, S>) -> Result<Self, CohomologyError> {
        let rel_tol = pkg.analysis.rel_tol;
        let n = pkg.n();
        let bc = &pkg.blocks;
        let mut blocks = Vec::with_capacity(bc.blocks.len());
        for (b, bases) in bc.blocks.iter().zip(&pkg.analysis.bases) {
            let lh: Vec<CMat> = bases.chol.iter().map(|l| l.adjoint()).collect();
            let lih = bases.chol_inv_h.clone();
            let mut dt = Vec::with_capacity(n);
            let mut db = Vec::with_capacity(n);
            let mut da = Vec::with_capacity(n);
            let mut dla = Vec::with_capacity(n);
            for k in 0..n {
                let t = cmul(&cmul(&lh[k + 1], &b.d[k]), &lih[k]);
                db.push(cmul(&bases.v_basic[k + 1].adjoint(), &cmul(&t, &bases.v_basic[k])));
                da.push(cmul(&bases.v_anti[k + 1].adjoint(), &cmul(&t, &bases.v_anti[k])));
                let u_lo = cmul(&lih[k], &bases.v_anti[k]);
                let u_hi = cmul(&lih[k + 1], &bases.v_anti[k + 1]);
                let dm = cmul(&b.d[k].adjoint(), &cmul(&b.mass[k + 1], &u_hi));
                dla.push(cmul(&u_lo.adjoint(), &dm));
                dt.push(t);
            }
            let mut lap_a = Vec::with_capacity(n + 1);
            let mut lap = Vec::with_capacity(n + 1);
            for k in 0..=n {
                let ma = bases.v_anti[k].ncols();
                let mut l = CMat::zeros(ma, ma);
                let dim = b.dims[k];
                let mut full = CMat::zeros(dim, dim);
                if k < n {
                    l += sized(ma, ma, gram(&da[k]));
                    full += sized(dim, dim, gram(&dt[k]));
                }
                if k > 0 {
                    l += sized(ma, ma, cogram(&da[k - 1]));
                    full += sized(dim, dim, cogram(&dt[k - 1]));
                }
                lap_a.push(hermitian_eigen(&l));
                lap.push(hermitian_eigenvalues(&full));
            }
            blocks.push(BlockMats {
                multiplicity: b.multiplicity,
                lh,
                lih,
                v_basic: bases.v_basic.clone(),
                v_anti: bases.v_anti.clone(),
                dt,
                db,
                da,
                dla,
                lap_a,
                lap,
            });
        }
        let mut engine = Engine { pkg, rel_tol, blocks, lap_a_tau: vec![0.0; n + 1], report: BettiReport::empty() };
        engine.report = engine.compute()?;
        Ok(engine)
    }

    pub fn report(&self) -> &BettiReport {
        &self.report
    }

    pub fn betti(&self) -> &BettiNumbers {
        &self.report.betti
    }

    fn family<'a>(&'a self, f: impl Fn(&'a BlockMats) -> &'a CMat) -> Vec<Vec<f64>> {
        self.blocks.iter().map(|b| singular_values(f(b))).collect()
    }

    fn ranks(&self, audit: &Audit, spectra: &[Vec<f64>]) -> usize {
        self.blocks
            .iter()
            .zip(spectra)
            .map(|(b, s)| b.multiplicity * s.iter().filter(|&&x| x > audit.tau).count())
            .sum()
    }

    fn checked(audits: &mut Vec<Audit>, a: Audit, spectra: &[Vec<f64>]) -> Result<Audit, CohomologyError> {
        audits.push(a.clone());
        if !a.ok {
            let mut all: Vec<f64> = spectra.iter().flatten().copied().collect();
            all.sort_by(|x, y| y.partial_cmp(x).unwrap());
            return Err(CohomologyError::IllConditioned { audit: a, spectrum: all });
        }
        Ok(a)
    }

    fn compute(&mut self) -> Result<BettiReport, CohomologyError> {
        let n = self.pkg.n();
        let rel = self.rel_tol;
        let mut audits = self.pkg.analysis.audits.clone();
        let dims: Vec<usize> = (0..=n).map(|k| self.pkg.blocks.total_dim(k)).collect();
        let basic_dims: Vec<usize> = (0..=n).map(|k| self.pkg.basic_dim(k)).collect();
        let anti_dims: Vec<usize> = (0..=n).map(|k| self.pkg.antibasic_dim(k)).collect();

        let mut rank_d = vec![0; n + 1];
        let mut rank_db = vec![0; n + 1];
        let mut rank_da = vec![0; n + 1];
        let mut rank_dla = vec![0; n + 1];
        let mut dla_spectra = vec![Vec::new(); n + 1];
        let mut scales = vec![0.0f64; n + 1];
        for k in 0..n {
            let sd = self.family(|b| &b.dt[k]);
            let a = Self::checked(&mut audits, audit(&format!("d^{k}"), &refs(&sd), rel), &sd)?;
            scales[k] = a.scale;
            rank_d[k] = self.ranks(&a, &sd);
            let sb = self.family(|b| &b.db[k]);
            let a = Self::checked(&mut audits, audit_scaled(&format!("d_b^{k}"), &refs(&sb), rel, scales[k]), &sb)?;
            rank_db[k] = self.ranks(&a, &sb);
            let sa = self.family(|b| &b.da[k]);
            let a = Self::checked(&mut audits, audit_scaled(&format!("d_a^{k}"), &refs(&sa), rel, scales[k]), &sa)?;
            rank_da[k] = self.ranks(&a, &sa);
            let sl = self.family(|b| &b.dla[k]);
            let a = Self::checked(&mut audits, audit_scaled(&format!("delta_a^{}", k + 1), &refs(&sl), rel, scales[k]), &sl)?;
            rank_dla[k] = self.ranks(&a, &sl);
            dla_spectra[k] = sl.into_iter().flatten().collect();
        }
        let below = |r: &[usize], k: usize| if k == 0 { 0 } else { r[k - 1] };
        let h: Vec<usize> = (0..=n).map(|k| dims[k] - rank_d[k] - below(&rank_d, k)).collect();
        let q = n - self.pkg.p();
        let h_b: Vec<usize> = (0..=q).map(|k| basic_dims[k] - rank_db[k] - below(&rank_db, k)).collect();
        let h_a_rank: Vec<usize> = (0..=n).map(|k| anti_dims[k] - rank_dla[k] - below(&rank_dla, k)).collect();
        let h_a_d: Vec<usize> = (0..=n).map(|k| anti_dims[k] - rank_da[k] - below(&rank_da, k)).collect();

        let mut h_a_harmonic = vec![0; n + 1];
        let mut h_harmonic = vec![0; n + 1];
        for k in 0..=n {
            let full: Vec<Vec<f64>> = self.blocks.iter().map(|b| b.lap[k].clone()).collect();
            let lap_scale = full.iter().flatten().fold(0.0f64, |m, &x| m.max(x));
            let a = Self::checked(&mut audits, audit(&format!("Delta^{k}"), &refs(&full), rel), &full)?;
            h_harmonic[k] = self.blocks.iter().zip(&full).map(|(b, s)| b.multiplicity * s.iter().filter(|&&x| x <= a.tau).count()).sum();
            let anti: Vec<Vec<f64>> = self.blocks.iter().map(|b| b.lap_a[k].0.clone()).collect();
            let a = Self::checked(&mut audits, audit_scaled(&format!("Delta_a^{k}"), &refs(&anti), rel, lap_scale), &anti)?;
            self.lap_a_tau[k] = a.tau;
            h_a_harmonic[k] =
                self.blocks.iter().zip(&anti).map(|(b, s)| b.multiplicity * s.iter().filter(|&&x| x <= a.tau).count()).sum();
            if h_a_harmonic[k] != h_a_rank[k] {
                let mut hs: Vec<f64> = anti.into_iter().flatten().collect();
                hs.sort_by(|x, y| x.partial_cmp(y).unwrap());
                hs.truncate(64);
                let mut rs: Vec<f64> = (if k > 0 { dla_spectra[k - 1].clone() } else { Vec::new() })
                    .into_iter()
                    .chain(dla_spectra[k].iter().copied())
                    .collect();
                rs.sort_by(|x, y| x.partial_cmp(y).unwrap());
                rs.truncate(64);
                return Err(CohomologyError::MethodDisagreement {
                    degree: k,
                    rank: h_a_rank[k],
                    harmonic: h_a_harmonic[k],
                    rank_spectrum: rs,
                    harmonic_spectrum: hs,
                });
            }
        }
        let robust = audits.iter().all(|a| a.robust);
        Ok(BettiReport {
            betti: BettiNumbers {
                h,
                h_b,
                h_a_rank,
                h_a_harmonic,
                h_a_d_complex: h_a_d,
                h_harmonic,
                basic_dims,
                antibasic_dims: anti_dims,
            },
            audits,
            robust,
        })
    }

    /// The m smallest eigenvalues of Δ_a in degree k with the largest
    /// eigenpair residual ‖Δ_a v − λv‖ over the returned pairs.
    pub fn spectrum(&self, k: usize, m: usize) -> (Vec<f64>, f64) {
        let n = self.pkg.n();
        let mut all: Vec<(f64, usize, usize)> = Vec::new();
        for (bi, b) in self.blocks.iter().enumerate() {
            for (i, &l) in b.lap_a[k].0.iter().enumerate() {
                for _ in 0..b.multiplicity {
                    all.push((l, bi, i));
                }
            }
        }
        all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        all.truncate(m);
        let mut resid = 0.0f64;
        for &(l, bi, i) in &all {
            let b = &self.blocks[bi];
            let v = b.lap_a[k].1.column(i).into_owned();
            let mut w = CVec::zeros(v.len());
            if k < n {
                w += b.da[k].adjoint() * (&b.da[k] * &v);
            }
            if k > 0 {
                w += &b.da[k - 1] * (b.da[k - 1].adjoint() * &v);
            }
            resid = resid.max((w - &v * Complex64::new(l, 0.0)).norm());
        }
        (all.iter().map(|x| x.0).collect(), resid)
    }

    /// Eigenvalues of the full Hodge Laplacian in degree k with
    /// multiplicity, ascending.
    pub fn laplacian_spectrum(&self, k: usize) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|b| b.lap[k].iter().flat_map(move |&l| std::iter::repeat(l).take(b.multiplicity)))
            .collect();
        all.sort_by(|x, y| x.partial_cmp(y).unwrap());
        all
    }

    pub fn harmonic_threshold(&self, k: usize) -> f64 {
        self.lap_a_tau[k]
    }

    fn to_anti(&self, k: usize, x: &S::V) -> (Vec<CVec>, f64) {
        let parts = self.pkg.space.analyze(k, x);
        let copies = &self.pkg.blocks.copies;
        let mut basic_sq = 0.0;
        let out = parts
            .iter()
            .zip(copies)
            .map(|(c, &bi)| {
                let b = &self.blocks[bi];
                let z = &b.lh[k] * c;
                basic_sq += (b.v_basic[k].adjoint() * &z).norm_squared();
                b.v_anti[k].adjoint() * z
            })
            .collect();
        (out, basic_sq.sqrt())
    }

    fn from_anti(&self, k: usize, parts: &[CVec]) -> S::V {
        let copies = &self.pkg.blocks.copies;
        let coords: Vec<CVec> = parts
            .iter()
            .zip(copies)
            .map(|(a, &bi)| {
                let b = &self.blocks[bi];
                &b.lih[k] * (&b.v_anti[k] * a)
            })
            .collect();
        self.pkg.space.synthesize(k, &coords)
    }

    /// ω = harmonic + δ_a-exact + d_a-exact for an antibasic degree-k form.
    pub fn hodge_decompose(&self, k: usize, x: &S::V) -> Result<HodgeParts<S::V>, CohomologyError> {
        let n = self.pkg.n();
        let s = self.pkg.space;
        let (anti, basic_norm) = self.to_anti(k, x);
        let xn = norm(s, k, x);
        if basic_norm > 1e-8 * xn.max(f64::MIN_POSITIVE) {
            return Err(CohomologyError::NotAntibasic(basic_norm / xn));
        }
        let tau = self.lap_a_tau[k];
        let mut harm = Vec::with_capacity(anti.len());
        let mut dexact = Vec::with_capacity(anti.len());
        let mut coexact = Vec::with_capacity(anti.len());
        for (a, &bi) in anti.iter().zip(&self.pkg.blocks.copies) {
            let b = &self.blocks[bi];
            let (vals, vecs) = &b.lap_a[k];
            let coef = vecs.adjoint() * a;
            let mut h = CVec::zeros(a.len());
            let mut g = CVec::zeros(a.len());
            for (i, &l) in vals.iter().enumerate() {
                let col = vecs.column(i);
                if l <= tau {
                    h += col * coef[i];
                } else {
                    g += col * (coef[i] / l);
                }
            }
            let de = if k > 0 { &b.da[k - 1] * (b.da[k - 1].adjoint() * &g) } else { CVec::zeros(a.len()) };
            let ce = if k < n { b.da[k].adjoint() * (&b.da[k] * &g) } else { CVec::zeros(a.len()) };
            harm.push(h);
            dexact.push(de);
            coexact.push(ce);
        }
        Ok(HodgeParts {
            harmonic: self.from_anti(k, &harm),
            coexact: self.from_anti(k, &coexact),
            exact: self.from_anti(k, &dexact),
        })
    }

    /// Orthonormal basis of the basic harmonic forms in degree k, as block
    /// coordinates of whitened basic vectors per copy.
    fn basic_harmonic(&self, k: usize) -> Vec<(usize, CVec)> {
        let n = self.pkg.n();
        let mut out = Vec::new();
        for (bi, b) in self.blocks.iter().enumerate() {
            let mb = b.v_basic[k].ncols();
            let mut l = CMat::zeros(mb, mb);
            if k < n {
                l += sized(mb, mb, gram(&b.db[k]));
            }
            if k > 0 {
                l += sized(mb, mb, cogram(&b.db[k - 1]));
            }
            let (vals, vecs) = hermitian_eigen(&l);
            for (i, &v) in vals.iter().enumerate() {
                if v <= self.lap_a_tau[k].max(f64::MIN_POSITIVE) {
                    out.push((bi, vecs.column(i).into_owned()));
                }
            }
        }
        out
    }

    /// Relative L² norm of the basic harmonic component of x. For a closed
    /// basic form this is nonzero exactly when its basic class is.
    pub fn basic_harmonic_fraction(&self, k: usize, x: &S::V) -> f64 {
        let basis = self.basic_harmonic(k);
        let parts = self.pkg.space.analyze(k, x);
        let mut sq = 0.0;
        for (c, &bi) in parts.iter().zip(&self.pkg.blocks.copies) {
            let b = &self.blocks[bi];
            let zb = b.v_basic[k].adjoint() * (&b.lh[k] * c);
            for (_, h) in basis.iter().filter(|(i, _)| *i == bi) {
                sq += h.dotc(&zb).norm_sqr();
            }
        }
        let xn = norm(self.pkg.space, k, x);
        if xn == 0.0 {
            0.0
        } else {
            sq.sqrt() / xn
        }
    }

    /// χ∧ applied to the basic harmonic forms of degree r: the largest
    /// relative Δ_a residual of the images and the numerical rank of the image
    /// set relative to its size. Counts are per block (without multiplicity).
    pub fn chi_wedge_harmonic(&self, r: usize) -> ChiWedgeReport {
        let n = self.pkg.n();
        let p = self.pkg.p();
        let basis = self.basic_harmonic(r);
        let mut residual = 0.0f64;
        let mut antibasic_residual = 0.0f64;
        let mut rank = 0;
        let mut count = 0;
        if r + p > n {
            return ChiWedgeReport { degree: r, count: 0, rank: 0, residual: 0.0, antibasic_residual: 0.0 };
        }
        let t = r + p;
        for (bi, b) in self.blocks.iter().enumerate() {
            let cols: Vec<&CVec> = basis.iter().filter(|(i, _)| *i == bi).map(|(_, v)| v).collect();
            if cols.is_empty() {
                continue;
            }
            let block = &self.pkg.blocks.blocks[bi];
            let mut images = CMat::zeros(b.v_anti[t].ncols(), cols.len());
            for (j, v) in cols.iter().enumerate() {
                // whitened basic → block coords → χ∧ → whitened degree t
                let c = &b.lih[r] * (&b.v_basic[r] * *v);
                let w = &b.lh[t] * (&block.chi_wedge[r] * c);
                let wn = w.norm().max(f64::MIN_POSITIVE);
                antibasic_residual = antibasic_residual.max((b.v_basic[t].adjoint() * &w).norm() / wn);
                let a = b.v_anti[t].adjoint() * &w;
                let mut lap = CVec::zeros(a.len());
                if t < n {
                    lap += b.da[t].adjoint() * (&b.da[t] * &a);
                }
                if t > 0 {
                    lap += &b.da[t - 1] * (b.da[t - 1].adjoint() * &a);
                }
                let scale = self.blocks.iter().map(|bb| bb.lap_a[t].0.last().copied().unwrap_or(0.0)).fold(0.0, f64::max);
                residual = residual.max(lap.norm() / (scale.max(1.0) * wn));
                images.set_column(j, &a);
            }
            let sv = singular_values(&images);
            let top = sv.first().copied().unwrap_or(0.0);
            rank += b.multiplicity * sv.iter().filter(|&&x| x > 1e-8 * top.max(f64::MIN_POSITIVE)).count();
            count += b.multiplicity * cols.len();
        }
        ChiWedgeReport { degree: r, count, rank, residual, antibasic_residual }
    }
}

impl BettiReport {
    fn empty() -> Self {
        BettiReport {
            betti: BettiNumbers {
                h: Vec::new(),
                h_b: Vec::new(),
                h_a_rank: Vec::new(),
                h_a_harmonic: Vec::new(),
                h_a_d_complex: Vec::new(),
                h_harmonic: Vec::new(),
                basic_dims: Vec::new(),
                antibasic_dims: Vec::new(),
            },
            audits: Vec::new(),
            robust: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HodgeParts<V> {
    pub harmonic: V,
    /// In the image of δ_a.
    pub coexact: V,
    /// In the image of d_a.
    pub exact: V,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChiWedgeReport {
    pub degree: usize,
    pub count: usize,
    pub rank: usize,
    /// max ‖Δ_a(χ∧α)‖ / (‖Δ_a‖·‖χ∧α‖) over basis elements α.
    pub residual: f64,
    /// max ‖P_b(χ∧α)‖ / ‖χ∧α‖.
    pub antibasic_residual: f64,
}

/// Dense real matrix helper for oracles in tests.
pub fn real_rank(m: &DMatrix<f64>, rel: f64) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    sv.iter().filter(|&&x| x > rel * top).count()
}

fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
    v.iter().map(|x| x.as_slice()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, AxisSpec, GridSpec, MetricSpec, Wrap};
    use crate::space::CaseFlags;
    use crate::grid_space::GridSpace;
    use crate::su2::build_su2;
    use std::collections::BTreeMap;

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn flat_torus_scalar_spectrum() {
        let (nx, ny, nz) = (6, 4, 4);
        let spec = GridSpec {
            name: "flat".into(),
            coords: vec!["x".into(), "y".into(), "z".into()],
            axes: [nx, ny, nz].iter().map(|&size| AxisSpec { size, length: 1.0, wrap: Wrap::Plain }).collect(),
            metric: MetricSpec::Builtin("euclidean".into()),
            frame: vec![vec!["0".into(), "0".into(), "1".into()]],
            constants: BTreeMap::new(),
            flags: CaseFlags::default(),
        };
        let space = GridSpace::new(build_grid(&spec).unwrap()).unwrap();
        let pkg = FoliationPackage::derive(&space, 1e-8).unwrap();
        let engine = Engine::new(&pkg).unwrap();
        let sym = |m: usize, n: usize| (2.0 * n as f64 * (std::f64::consts::PI * m as f64 / n as f64).sin()).powi(2);
        let mut want = Vec::new();
        for a in 0..nx {
            for b in 0..ny {
                for c in 0..nz {
                    want.push(sym(a, nx) + sym(b, ny) + sym(c, nz));
                }
            }
        }
        want.sort_by(|x, y| x.partial_cmp(y).unwrap());
        close(&engine.laplacian_spectrum(0), &want, 1e-10);
        assert_eq!(engine.laplacian_spectrum(1).len(), 3 * nx * ny * nz);
    }

    #[test]
    fn round_sphere_scalar_spectrum() {
        let s = build_su2(2.0, [1.0; 3]).unwrap();
        let pkg = FoliationPackage::derive(&s, 1e-8).unwrap();
        let engine = Engine::new(&pkg).unwrap();
        let mut want = Vec::new();
        for l in 0..=4usize {
            want.extend(std::iter::repeat((l * (l + 2)) as f64).take((l + 1) * (l + 1)));
        }
        close(&engine.laplacian_spectrum(0), &want, 1e-10);
    }
}
