//! Forward-difference forms on periodic grids, optionally glued across one
//! axis by an integral monodromy acting on a pair of fiber axes.

use std::collections::BTreeMap;

use folcoh_expr::{check_bindings, evaluate, parse, Constant, Constants, Env, Expr, ExprError};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sprs::{CsMat, TriMat};
use thiserror::Error;

use crate::ext::{wedge_sign, Ext};
use crate::space::CaseFlags;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Wrap {
    Plain,
    /// Crossing the end of this axis identifies (m, L) with (W m, 0) on the
    /// two fiber axes.
    Monodromy { fiber: [usize; 2], matrix: [[i64; 2]; 2] },
}

impl Default for Wrap {
    fn default() -> Self {
        Wrap::Plain
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub size: usize,
    pub length: f64,
    #[serde(default)]
    pub wrap: Wrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    /// `"euclidean"` is the only built-in.
    Builtin(String),
    Entries(Vec<Vec<String>>),
}

/// JSON-compatible description of a grid case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub name: String,
    pub coords: Vec<String>,
    pub axes: Vec<AxisSpec>,
    pub metric: MetricSpec,
    /// Leaf frame: `p` vector fields, each a list of `n` component strings.
    pub frame: Vec<Vec<String>>,
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    #[serde(default)]
    pub flags: CaseFlags,
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error("expression '{src}': {err}")]
    Expr { src: String, err: ExprError },
    #[error("metric not positive definite at point {point} (coords {coords:?}): smallest eigenvalue {min_eig:e}")]
    NotSpd { point: usize, coords: Vec<f64>, min_eig: f64 },
    #[error("monodromy does not preserve the fiber lattice: {0}")]
    Lattice(String),
    #[error("frame rank deficient at point {point}: smallest singular value {sigma:e}")]
    FrameRank { point: usize, sigma: f64 },
    #[error("{what} incompatible across the wrap of axis {axis}: relative residual {residual:e}")]
    Incompatible { what: &'static str, axis: usize, residual: f64 },
    #[error("degree {degree} out of range for {op}")]
    Degree { op: &'static str, degree: usize },
    #[error("grids differ in shape")]
    Shape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormField {
    pub degree: usize,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Monodromy {
    axis: usize,
    fiber: [usize; 2],
    w: [[i64; 2]; 2],
    /// Pullback on fiber cochains, indexed by local fiber mask (0..4):
    /// (offset from W·m, local source mask, coefficient).
    pullback: Vec<Vec<([i64; 2], u32, f64)>>,
}

#[derive(Debug, Clone)]
pub struct BuildReport {
    pub min_metric_eig: f64,
    pub min_frame_sigma: f64,
    pub wrap_residual: f64,
}

#[derive(Debug, Clone)]
pub struct GridComplex {
    pub spec: GridSpec,
    pub ext: Ext,
    pub sizes: Vec<usize>,
    pub spacing: Vec<f64>,
    strides: Vec<usize>,
    npts: usize,
    cell_volume: f64,
    metric: Vec<DMatrix<f64>>,
    frame: Vec<Vec<Vec<f64>>>,
    mass_blocks: Vec<Vec<DMatrix<f64>>>,
    mass_inv_blocks: Vec<Vec<DMatrix<f64>>>,
    monodromy: Option<Monodromy>,
    pub build: BuildReport,
}

struct Evaluator {
    coords: Vec<String>,
    constants: Constants,
}

impl Evaluator {
    fn compile(&self, src: &str) -> Result<Expr, GridError> {
        let e = parse(src).map_err(|err| GridError::Expr { src: src.into(), err })?;
        let names: Vec<&str> = self.coords.iter().map(|s| s.as_str()).collect();
        check_bindings(&e, &names).map_err(|err| GridError::Expr { src: src.into(), err })?;
        Ok(e)
    }

    fn eval(&self, e: &Expr, x: &[f64]) -> Result<f64, GridError> {
        let env: Env = self.coords.iter().cloned().zip(x.iter().copied()).collect();
        evaluate(e, &env, &self.constants).map_err(|err| GridError::Expr { src: e.to_string(), err })
    }
}

struct Fields {
    metric: Option<Vec<Vec<Expr>>>,
    frame: Vec<Vec<Expr>>,
    ev: Evaluator,
}

impl Fields {
    fn metric_at(&self, n: usize, x: &[f64]) -> Result<DMatrix<f64>, GridError> {
        match &self.metric {
            None => Ok(DMatrix::identity(n, n)),
            Some(rows) => {
                let mut g = DMatrix::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        g[(i, j)] = self.ev.eval(&rows[i][j], x)?;
                    }
                }
                Ok(g)
            }
        }
    }

    fn frame_at(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, GridError> {
        self.frame
            .iter()
            .map(|v| v.iter().map(|e| self.ev.eval(e, x)).collect())
            .collect()
    }
}

fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max() / a.abs().max().max(b.abs().max()).max(f64::MIN_POSITIVE)
}

/// Pullback of a 2D cubical cochain through x ↦ W x, as a cellular chain map
/// (edges follow axis 0 then axis 1; squares are filled by winding number).
fn fiber_pullback(w: [[i64; 2]; 2]) -> Vec<Vec<([i64; 2], u32, f64)>> {
    fn path(from: [i64; 2], step: [i64; 2]) -> Vec<([i64; 2], u32, f64)> {
        let mut out = Vec::new();
        let mut q = from;
        for axis in 0..2 {
            let s = step[axis].signum();
            for _ in 0..step[axis].abs() {
                if s > 0 {
                    out.push((q, 1 << axis, 1.0));
                    q[axis] += 1;
                } else {
                    q[axis] -= 1;
                    out.push((q, 1 << axis, -1.0));
                }
            }
        }
        out
    }
    let col = |i: usize| [w[0][i], w[1][i]];
    let (w0, w1) = (col(0), col(1));
    let mut table = vec![Vec::new(); 4];
    table[0] = vec![([0, 0], 0, 1.0)];
    table[1] = path([0, 0], w0);
    table[2] = path([0, 0], w1);

    let mut lp = path([0, 0], w0);
    lp.extend(path(w0, w1));
    lp.extend(path(w1, w0).into_iter().map(|(q, m, c)| (q, m, -c)));
    lp.extend(path([0, 0], w1).into_iter().map(|(q, m, c)| (q, m, -c)));
    // horizontal edge (x,y) has coefficient c(x,y) - c(x,y-1) in the boundary
    let mut horiz: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    for (q, m, c) in &lp {
        if *m == 1 {
            *horiz.entry((q[0], q[1])).or_default() += c;
        }
    }
    let ys = lp.iter().map(|(q, _, _)| q[1]);
    let (ylo, yhi) = (ys.clone().min().unwrap_or(0), ys.max().unwrap_or(0));
    let xs: std::collections::BTreeSet<i64> = horiz.keys().map(|k| k.0).collect();
    for x in xs {
        let mut acc = 0.0;
        for y in ylo..=yhi {
            acc += horiz.get(&(x, y)).copied().unwrap_or(0.0);
            if acc != 0.0 {
                table[3].push(([x, y], 3, acc));
            }
        }
    }
    table
}

pub fn build_grid(spec: &GridSpec) -> Result<GridComplex, GridError> {
    let n = spec.axes.len();
    if n == 0 || spec.coords.len() != n {
        return Err(GridError::Invalid(format!("{} axes but {} coordinate names", n, spec.coords.len())));
    }
    let p = spec.frame.len();
    if p == 0 || p >= n {
        return Err(GridError::Invalid(format!("leaf dimension p = {} must satisfy 0 < p < n = {}", p, n)));
    }
    for (a, ax) in spec.axes.iter().enumerate() {
        // a single plain point is the invariant (zero-mode) restriction
        let min = if ax.wrap == Wrap::Plain { 1 } else { 2 };
        if ax.size < min || !(ax.length > 0.0) {
            return Err(GridError::Invalid(format!("axis {} needs size >= {} and positive length", a, min)));
        }
    }
    let mut constants = Constants::default();
    for (name, v) in &spec.constants {
        let c = Constant::from_name(name)
            .ok_or_else(|| GridError::Invalid(format!("unknown constant '{}'", name)))?;
        constants = constants.with(c, *v);
    }
    let ev = Evaluator { coords: spec.coords.clone(), constants };
    let metric = match &spec.metric {
        MetricSpec::Builtin(s) if s == "euclidean" => None,
        MetricSpec::Builtin(s) => return Err(GridError::Invalid(format!("unknown built-in metric '{}'", s))),
        MetricSpec::Entries(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(GridError::Invalid("metric must be n x n".into()));
            }
            Some(
                rows.iter()
                    .map(|r| r.iter().map(|s| ev.compile(s)).collect::<Result<Vec<_>, _>>())
                    .collect::<Result<Vec<_>, _>>()?,
            )
        }
    };
    if spec.frame.iter().any(|v| v.len() != n) {
        return Err(GridError::Invalid("frame vectors need n components".into()));
    }
    let frame_exprs = spec
        .frame
        .iter()
        .map(|v| v.iter().map(|s| ev.compile(s)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    let fields = Fields { metric, frame: frame_exprs, ev };

    let sizes: Vec<usize> = spec.axes.iter().map(|a| a.size).collect();
    let spacing: Vec<f64> = spec.axes.iter().map(|a| a.length / a.size as f64).collect();
    let mut strides = vec![1; n];
    for a in (0..n - 1).rev() {
        strides[a] = strides[a + 1] * sizes[a + 1];
    }
    let npts = strides[0] * sizes[0];

    let mut monodromy = None;
    for (a, ax) in spec.axes.iter().enumerate() {
        if let Wrap::Monodromy { fiber, matrix } = &ax.wrap {
            if monodromy.is_some() {
                return Err(GridError::Invalid("at most one monodromy axis".into()));
            }
            let [f0, f1] = *fiber;
            if f0 == f1 || f0 >= n || f1 >= n || f0 == a || f1 == a {
                return Err(GridError::Lattice(format!("bad fiber axes {:?} for axis {}", fiber, a)));
            }
            let det = matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0];
            if det.abs() != 1 {
                return Err(GridError::Lattice(format!("|det W| = {} != 1", det.abs())));
            }
            if sizes[f0] != sizes[f1] || (spacing[f0] - spacing[f1]).abs() > 1e-14 * spacing[f0] {
                return Err(GridError::Lattice("fiber axes need equal size and spacing".into()));
            }
            let mut pb = fiber_pullback(*matrix);
            if f0 > f1 {
                return Err(GridError::Lattice("fiber axes must be listed in increasing order".into()));
            }
            pb.shrink_to_fit();
            monodromy = Some(Monodromy { axis: a, fiber: *fiber, w: *matrix, pullback: pb });
        }
    }

    let ext = Ext::new(n);
    let cell_volume: f64 = spacing.iter().product();
    let coords_of = |pt: usize| -> Vec<f64> {
        (0..n).map(|a| ((pt / strides[a]) % sizes[a]) as f64 * spacing[a]).collect()
    };

    let mut metric_tab = Vec::with_capacity(npts);
    let mut frame_tab = Vec::with_capacity(npts);
    let mut min_eig = f64::INFINITY;
    let mut min_sigma = f64::INFINITY;
    for pt in 0..npts {
        let x = coords_of(pt);
        let g = fields.metric_at(n, &x)?;
        if rel_diff(&g, &g.transpose()) > 1e-12 {
            return Err(GridError::Invalid(format!("metric not symmetric at point {}", pt)));
        }
        let e = g.clone().symmetric_eigen().eigenvalues.min();
        if !(e > 1e-8) {
            return Err(GridError::NotSpd { point: pt, coords: x, min_eig: e });
        }
        min_eig = min_eig.min(e);
        let fr = fields.frame_at(&x)?;
        let fm = DMatrix::from_fn(n, p, |i, j| fr[j][i]);
        let s = fm.singular_values().min();
        if !(s > 1e-8) {
            return Err(GridError::FrameRank { point: pt, sigma: s });
        }
        min_sigma = min_sigma.min(s);
        metric_tab.push(g);
        frame_tab.push(fr);
    }

    // wrap compatibility: pullback of g and pushforward of the frame
    let mut wrap_residual: f64 = 0.0;
    for a in 0..n {
        let (w, fib) = match &monodromy {
            Some(m) if m.axis == a => (m.w, Some(m.fiber)),
            _ => ([[1, 0], [0, 1]], None),
        };
        let mut jac = DMatrix::<f64>::identity(n, n);
        if let Some([f0, f1]) = fib {
            jac[(f0, f0)] = w[0][0] as f64;
            jac[(f0, f1)] = w[0][1] as f64;
            jac[(f1, f0)] = w[1][0] as f64;
            jac[(f1, f1)] = w[1][1] as f64;
        }
        for pt in (0..npts).filter(|&pt| (pt / strides[a]) % sizes[a] == 0) {
            let mut pre = coords_of(pt);
            pre[a] = spec.axes[a].length;
            let mut img = coords_of(pt);
            if let Some([f0, f1]) = fib {
                let m = [pre[f0] / spacing[f0], pre[f1] / spacing[f1]];
                img[f0] = (w[0][0] as f64 * m[0] + w[0][1] as f64 * m[1]) * spacing[f0];
                img[f1] = (w[1][0] as f64 * m[0] + w[1][1] as f64 * m[1]) * spacing[f1];
            }
            let g_pre = fields.metric_at(n, &pre)?;
            let g_img = fields.metric_at(n, &img)?;
            let r = rel_diff(&g_pre, &(jac.transpose() * &g_img * &jac));
            if !(r <= 1e-10) {
                return Err(GridError::Incompatible { what: "metric", axis: a, residual: r });
            }
            wrap_residual = wrap_residual.max(r);
            let f_pre = fields.frame_at(&pre)?;
            let f_img = fields.frame_at(&img)?;
            for (u, v) in f_pre.iter().zip(&f_img) {
                let pushed = &jac * nalgebra::DVector::from_column_slice(u);
                let v = nalgebra::DVector::from_column_slice(v);
                let r = (pushed.normalize() - v.normalize()).amax();
                if !(r <= 1e-10) {
                    return Err(GridError::Incompatible { what: "frame", axis: a, residual: r });
                }
            }
        }
    }

    let mut mass_blocks = Vec::with_capacity(n + 1);
    let mut mass_inv_blocks = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let mut mb = Vec::with_capacity(npts);
        let mut mi = Vec::with_capacity(npts);
        for g in &metric_tab {
            let ginv = g.clone().try_inverse().expect("SPD");
            let vol = g.determinant().sqrt() * cell_volume;
            mb.push(ext.compound(k, &ginv) * vol);
            mi.push(ext.compound(k, g) / vol);
        }
        mass_blocks.push(mb);
        mass_inv_blocks.push(mi);
    }

    Ok(GridComplex {
        spec: spec.clone(),
        ext,
        sizes,
        spacing,
        strides,
        npts,
        cell_volume,
        metric: metric_tab,
        frame: frame_tab,
        mass_blocks,
        mass_inv_blocks,
        monodromy,
        build: BuildReport { min_metric_eig: min_eig, min_frame_sigma: min_sigma, wrap_residual },
    })
}

pub fn spmv(a: &CsMat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(a.cols(), x.len(), "operator/vector size mismatch");
    let mut y = vec![0.0; a.rows()];
    if a.is_csr() {
        for (r, row) in a.outer_iterator().enumerate() {
            y[r] = row.iter().map(|(c, v)| v * x[c]).sum();
        }
    } else {
        for (c, col) in a.outer_iterator().enumerate() {
            for (r, v) in col.iter() {
                y[r] += v * x[c];
            }
        }
    }
    y
}

fn pointwise_matrix(npts: usize, rows: usize, cols: usize, block: impl Fn(usize) -> DMatrix<f64>) -> CsMat<f64> {
    let mut t = TriMat::new((npts * rows, npts * cols));
    for pt in 0..npts {
        let b = block(pt);
        for i in 0..rows {
            for j in 0..cols {
                if b[(i, j)] != 0.0 {
                    t.add_triplet(pt * rows + i, pt * cols + j, b[(i, j)]);
                }
            }
        }
    }
    t.to_csr()
}

impl GridComplex {
    pub fn n(&self) -> usize {
        self.sizes.len()
    }

    pub fn p(&self) -> usize {
        self.frame[0].len()
    }

    pub fn q(&self) -> usize {
        self.n() - self.p()
    }

    pub fn points(&self) -> usize {
        self.npts
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn total_volume(&self) -> f64 {
        self.metric.iter().map(|g| g.determinant().sqrt()).sum::<f64>() * self.cell_volume
    }

    pub fn len(&self, k: usize) -> usize {
        self.npts * self.ext.count(k)
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn point_coords(&self, pt: usize) -> Vec<usize> {
        (0..self.n()).map(|a| (pt / self.strides[a]) % self.sizes[a]).collect()
    }

    pub fn position(&self, pt: usize) -> Vec<f64> {
        self.point_coords(pt).iter().zip(&self.spacing).map(|(&i, h)| i as f64 * h).collect()
    }

    pub fn metric_at(&self, pt: usize) -> &DMatrix<f64> {
        &self.metric[pt]
    }

    pub fn frame_at(&self, pt: usize) -> &[Vec<f64>] {
        &self.frame[pt]
    }

    pub fn mass_block(&self, k: usize, pt: usize) -> &DMatrix<f64> {
        &self.mass_blocks[k][pt]
    }

    pub fn monodromy_axis(&self) -> Option<(usize, [usize; 2], [[i64; 2]; 2])> {
        self.monodromy.as_ref().map(|m| (m.axis, m.fiber, m.w))
    }

    /// Axes whose coordinate appears in no metric or frame expression and
    /// whose own wrap is plain.
    pub fn homogeneous_axes(&self) -> Vec<usize> {
        let mut used = std::collections::BTreeSet::new();
        let mut scan = |src: &str| {
            if let Ok(e) = parse(src) {
                for v in e.variables() {
                    used.insert(v.to_string());
                }
            }
        };
        if let MetricSpec::Entries(rows) = &self.spec.metric {
            rows.iter().flatten().for_each(|s| scan(s));
        }
        self.spec.frame.iter().flatten().for_each(|s| scan(s));
        let mono = self.monodromy.as_ref();
        let mut out: Vec<usize> = (0..self.n())
            .filter(|&a| !used.contains(&self.spec.coords[a]))
            .filter(|&a| mono.map_or(true, |m| m.axis != a))
            .collect();
        if let Some(m) = mono {
            if !(out.contains(&m.fiber[0]) && out.contains(&m.fiber[1])) {
                out.retain(|a| !m.fiber.contains(a));
            }
        }
        out
    }

    /// Global source entries feeding the forward neighbour of `pt` along
    /// `axis` for component `mask`: (point, mask, coefficient).
    fn forward(&self, pt: usize, axis: usize, mask: u32) -> Vec<(usize, u32, f64)> {
        let mut c = self.point_coords(pt);
        match &self.monodromy {
            Some(m) if m.axis == axis && c[axis] + 1 == self.sizes[axis] => {
                let [f0, f1] = m.fiber;
                let nf = self.sizes[f0] as i64;
                let fiber_bits = (1u32 << f0) | (1u32 << f1);
                let rest = mask & !fiber_bits;
                let local = (mask >> f0 & 1) | (mask >> f1 & 1) << 1;
                let fiber_part = mask & fiber_bits;
                let s_out = wedge_sign(fiber_part, rest).unwrap();
                let (x, y) = (c[f0] as i64, c[f1] as i64);
                let wx = m.w[0][0] * x + m.w[0][1] * y;
                let wy = m.w[1][0] * x + m.w[1][1] * y;
                c[axis] = 0;
                m.pullback[local as usize]
                    .iter()
                    .map(|&(off, src_local, coef)| {
                        let mut cc = c.clone();
                        cc[f0] = (wx + off[0]).rem_euclid(nf) as usize;
                        cc[f1] = (wy + off[1]).rem_euclid(nf) as usize;
                        let src_fiber = (src_local & 1) << f0 | (src_local >> 1 & 1) << f1;
                        let s_in = wedge_sign(src_fiber, rest).unwrap();
                        (self.index(&cc), src_fiber | rest, coef * s_in * s_out)
                    })
                    .collect()
            }
            _ => {
                c[axis] = (c[axis] + 1) % self.sizes[axis];
                vec![(self.index(&c), mask, 1.0)]
            }
        }
    }

    pub fn d_matrix(&self, k: usize) -> CsMat<f64> {
        let n = self.n();
        let (ck, ck1) = (self.ext.count(k), self.ext.count(k + 1));
        let mut t = TriMat::new((self.npts * ck1, self.npts * ck));
        if k >= n {
            return t.to_csr();
        }
        for pt in 0..self.npts {
            for (j, &jm) in self.ext.masks(k + 1).iter().enumerate() {
                let row = pt * ck1 + j;
                for a in (0..n).filter(|a| jm >> a & 1 == 1) {
                    let before = (jm & ((1 << a) - 1)).count_ones();
                    let s = if before % 2 == 0 { 1.0 } else { -1.0 };
                    let im = jm & !(1 << a);
                    let scale = s / self.spacing[a];
                    t.add_triplet(row, pt * ck + self.ext.index_of(im), -scale);
                    for (src, sm, c) in self.forward(pt, a, im) {
                        t.add_triplet(row, src * ck + self.ext.index_of(sm), scale * c);
                    }
                }
            }
        }
        t.to_csr()
    }

    pub fn mass_matrix(&self, k: usize) -> CsMat<f64> {
        let c = self.ext.count(k);
        pointwise_matrix(self.npts, c, c, |pt| self.mass_blocks[k][pt].clone())
    }

    pub fn mass_inv_matrix(&self, k: usize) -> CsMat<f64> {
        let c = self.ext.count(k);
        pointwise_matrix(self.npts, c, c, |pt| self.mass_inv_blocks[k][pt].clone())
    }

    /// M_{k−1}⁻¹ d_{k−1}ᵀ M_k.
    pub fn delta_matrix(&self, k: usize) -> CsMat<f64> {
        assert!(k >= 1 && k <= self.n());
        let dt = self.d_matrix(k - 1).transpose_into().to_csr();
        let left = &self.mass_inv_matrix(k - 1) * &dt;
        &left * &self.mass_matrix(k)
    }

    /// ω ↦ α∧ω as a sparse operator on degree `k`.
    pub fn wedge_matrix(&self, alpha: &FormField, k: usize) -> CsMat<f64> {
        let l = alpha.degree;
        let (cl, ck, co) = (self.ext.count(l), self.ext.count(k), self.ext.count(k + l));
        let table = self.ext.wedge_table(l, k);
        pointwise_matrix(self.npts, co, ck, |pt| {
            let mut b = DMatrix::zeros(co, ck);
            for &(i, j, r, s) in &table {
                b[(r, j)] += s * alpha.coeffs[pt * cl + i];
            }
            b
        })
    }

    /// Metric adjoint of `wedge_matrix(alpha, k − deg α)`: the contraction α⌟.
    pub fn wedge_adjoint_matrix(&self, alpha: &FormField, k: usize) -> CsMat<f64> {
        let l = alpha.degree;
        assert!(k >= l);
        let w = self.wedge_matrix(alpha, k - l).transpose_into().to_csr();
        let left = &self.mass_inv_matrix(k - l) * &w;
        &left * &self.mass_matrix(k)
    }

    /// Interior product with a pointwise vector field given as `n` values per point.
    pub fn interior_matrix(&self, field: &[f64], k: usize) -> CsMat<f64> {
        let n = self.n();
        let (ck, co) = (self.ext.count(k), self.ext.count(k.saturating_sub(1)));
        let tables: Vec<_> = (0..n).map(|a| self.ext.interior_table(k, a)).collect();
        pointwise_matrix(self.npts, co, ck, |pt| {
            let mut b = DMatrix::zeros(co, ck);
            for a in 0..n {
                for &(i, r, s) in &tables[a] {
                    b[(r, i)] += s * field[pt * n + a];
                }
            }
            b
        })
    }

    pub fn star_matrix(&self, k: usize) -> CsMat<f64> {
        let (ck, co) = (self.ext.count(k), self.ext.count(self.n() - k));
        pointwise_matrix(self.npts, co, ck, |pt| self.ext.star(k, &self.metric[pt]))
    }

    fn check(&self, op: &'static str, w: &FormField) -> Result<(), GridError> {
        if w.degree > self.n() || w.coeffs.len() != self.len(w.degree) {
            return Err(GridError::Degree { op, degree: w.degree });
        }
        Ok(())
    }

    pub fn zero(&self, k: usize) -> FormField {
        FormField { degree: k, coeffs: vec![0.0; self.len(k)] }
    }

    /// Evaluate a form from per-point coefficient closures.
    pub fn sample(&self, k: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> FormField {
        let c = self.ext.count(k);
        let mut out = self.zero(k);
        for pt in 0..self.npts {
            let v = f(&self.position(pt));
            out.coeffs[pt * c..(pt + 1) * c].copy_from_slice(&v);
        }
        out
    }

    pub fn exterior_derivative(&self, w: &FormField) -> Result<FormField, GridError> {
        self.check("exterior_derivative", w)?;
        if w.degree == self.n() {
            return Err(GridError::Degree { op: "exterior_derivative", degree: w.degree });
        }
        Ok(FormField { degree: w.degree + 1, coeffs: spmv(&self.d_matrix(w.degree), &w.coeffs) })
    }

    pub fn codifferential(&self, w: &FormField) -> Result<FormField, GridError> {
        self.check("codifferential", w)?;
        if w.degree == 0 {
            return Ok(self.zero(0));
        }
        Ok(FormField { degree: w.degree - 1, coeffs: spmv(&self.delta_matrix(w.degree), &w.coeffs) })
    }

    pub fn wedge(&self, a: &FormField, b: &FormField) -> Result<FormField, GridError> {
        self.check("wedge", a)?;
        self.check("wedge", b)?;
        if a.degree + b.degree > self.n() {
            return Err(GridError::Degree { op: "wedge", degree: a.degree + b.degree });
        }
        let (ca, cb) = (self.ext.count(a.degree), self.ext.count(b.degree));
        let mut out = self.zero(a.degree + b.degree);
        let co = self.ext.count(out.degree);
        let table = self.ext.wedge_table(a.degree, b.degree);
        for pt in 0..self.npts {
            for &(i, j, r, s) in &table {
                out.coeffs[pt * co + r] += s * a.coeffs[pt * ca + i] * b.coeffs[pt * cb + j];
            }
        }
        Ok(out)
    }

    pub fn interior_product(&self, field: &[f64], w: &FormField) -> Result<FormField, GridError> {
        self.check("interior_product", w)?;
        if w.degree == 0 {
            return Err(GridError::Degree { op: "interior_product", degree: 0 });
        }
        assert_eq!(field.len(), self.npts * self.n());
        Ok(FormField { degree: w.degree - 1, coeffs: spmv(&self.interior_matrix(field, w.degree), &w.coeffs) })
    }

    pub fn inner_product(&self, a: &FormField, b: &FormField) -> Result<f64, GridError> {
        self.check("inner_product", a)?;
        self.check("inner_product", b)?;
        if a.degree != b.degree {
            return Err(GridError::Degree { op: "inner_product", degree: b.degree });
        }
        Ok(self.inner_raw(a.degree, &a.coeffs, &b.coeffs))
    }

    pub fn inner_raw(&self, k: usize, a: &[f64], b: &[f64]) -> f64 {
        let c = self.ext.count(k);
        let mut acc = 0.0;
        for pt in 0..self.npts {
            let m = &self.mass_blocks[k][pt];
            for i in 0..c {
                let ai = a[pt * c + i];
                if ai == 0.0 {
                    continue;
                }
                for j in 0..c {
                    acc += ai * m[(i, j)] * b[pt * c + j];
                }
            }
        }
        acc
    }

    /// Pointwise norm |ω|_g at every point.
    pub fn pointwise_norm(&self, w: &FormField) -> Vec<f64> {
        let c = self.ext.count(w.degree);
        let ginv_k: Vec<DMatrix<f64>> = (0..self.npts)
            .map(|pt| {
                let g = &self.metric[pt];
                self.ext.compound(w.degree, &g.clone().try_inverse().unwrap())
            })
            .collect();
        (0..self.npts)
            .map(|pt| {
                let v = nalgebra::DVector::from_column_slice(&w.coeffs[pt * c..(pt + 1) * c]);
                (v.transpose() * &ginv_k[pt] * &v)[(0, 0)].max(0.0).sqrt()
            })
            .collect()
    }

    pub fn hodge_star(&self, w: &FormField) -> Result<FormField, GridError> {
        self.check("hodge_star", w)?;
        Ok(FormField { degree: self.n() - w.degree, coeffs: spmv(&self.star_matrix(w.degree), &w.coeffs) })
    }

    fn same_shape(&self, other: &GridComplex) -> bool {
        self.sizes == other.sizes
            && self.spacing.iter().zip(&other.spacing).all(|(a, b)| (a - b).abs() <= 1e-14 * a.abs())
            && self.monodromy_axis() == other.monodromy_axis()
    }

    /// B^k = ∗′∗⁻¹ from the metric of `self` to that of `other`; pointwise it
    /// equals M′⁻¹M.
    pub fn metric_change_matrix(&self, other: &GridComplex, k: usize) -> Result<CsMat<f64>, GridError> {
        if !self.same_shape(other) {
            return Err(GridError::Shape);
        }
        let c = self.ext.count(k);
        Ok(pointwise_matrix(self.npts, c, c, |pt| &other.mass_inv_blocks[k][pt] * &self.mass_blocks[k][pt]))
    }

    pub fn metric_change_map(&self, other: &GridComplex, w: &FormField) -> Result<FormField, GridError> {
        self.check("metric_change_map", w)?;
        let b = self.metric_change_matrix(other, w.degree)?;
        Ok(FormField { degree: w.degree, coeffs: spmv(&b, &w.coeffs) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn flat_t3(n: usize) -> GridSpec {
        GridSpec {
            name: "flat".into(),
            coords: vec!["x".into(), "y".into(), "z".into()],
            axes: vec![AxisSpec { size: n, length: 1.0, wrap: Wrap::Plain }; 3],
            metric: MetricSpec::Builtin("euclidean".into()),
            frame: vec![vec!["0".into(), "0".into(), "1".into()]],
            constants: BTreeMap::new(),
            flags: CaseFlags::default(),
        }
    }

    #[test]
    fn flat_product_case_dimensions() {
        let c = build_grid(&flat_t3(4)).unwrap();
        assert_eq!((c.n(), c.p(), c.q()), (3, 1, 2));
        assert_eq!(c.len(1), 64 * 3);
        assert!((c.total_volume() - 1.0).abs() < 1e-14);
        assert_eq!(c.homogeneous_axes(), vec![0, 1, 2]);
    }

    #[test]
    fn pullback_square_boundary_matches_loop() {
        for w in [[[2, 1], [1, 1]], [[1, -1], [0, 1]], [[1, 2], [1, 1]], [[0, -1], [1, 0]]] {
            let t = fiber_pullback(w);
            let det = (w[0][0] * w[1][1] - w[0][1] * w[1][0]) as f64;
            let area: f64 = t[3].iter().map(|e| e.2).sum();
            assert_eq!(area, det, "{:?}", w);
        }
    }

    #[test]
    fn rejects_bad_monodromy_and_spd() {
        let mut s = flat_t3(4);
        s.axes[2].wrap = Wrap::Monodromy { fiber: [0, 1], matrix: [[2, 0], [0, 1]] };
        assert!(matches!(build_grid(&s), Err(GridError::Lattice(_))));
        let mut s = flat_t3(4);
        s.metric = MetricSpec::Entries(vec![
            vec!["1".into(), "0".into(), "0".into()],
            vec!["0".into(), "sin(2*pi*x)".into(), "0".into()],
            vec!["0".into(), "0".into(), "1".into()],
        ]);
        assert!(matches!(build_grid(&s), Err(GridError::NotSpd { point: 0, .. })));
        let mut s = flat_t3(4);
        s.frame = vec![vec!["0".into(), "0".into(), "sin(pi*x)".into()]];
        assert!(matches!(build_grid(&s), Err(GridError::FrameRank { .. })));
        let mut s = flat_t3(4);
        s.frame = vec![vec!["0".into(), "0".into(), "w".into()]];
        assert!(matches!(build_grid(&s), Err(GridError::Expr { .. })));
    }

    fn flat_t2(n: usize, metric: MetricSpec) -> GridSpec {
        GridSpec {
            name: "flat2".into(),
            coords: vec!["x".into(), "y".into()],
            axes: vec![AxisSpec { size: n, length: 1.0, wrap: Wrap::Plain }; 2],
            metric,
            frame: vec![vec!["0".into(), "1".into()]],
            constants: BTreeMap::new(),
            flags: CaseFlags::default(),
        }
    }

    fn d_error(n: usize) -> f64 {
        let c = build_grid(&flat_t2(n, MetricSpec::Builtin("euclidean".into()))).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        let w = c.sample(1, |x| vec![0.0, (tau * x[0]).sin()]);
        let dw = c.exterior_derivative(&w).unwrap();
        let exact = c.sample(2, |x| vec![tau * (tau * x[0]).cos()]);
        dw.coeffs.iter().zip(&exact.coeffs).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    #[test]
    fn derivative_converges_at_first_order() {
        let (e1, e2) = (d_error(16), d_error(32));
        assert!(e2 <= 0.6 * e1, "{e1} -> {e2}");
        // forward difference of sin at spacing h: error ≈ 2π² h
        let h = 1.0 / 32.0;
        assert!((e2 - 2.0 * std::f64::consts::PI.powi(2) * h).abs() < 0.01 * e2, "{e2}");
    }

    #[test]
    fn conformal_metric_change() {
        let a = build_grid(&flat_t2(4, MetricSpec::Builtin("euclidean".into()))).unwrap();
        let four = MetricSpec::Entries(vec![vec!["4".into(), "0".into()], vec!["0".into(), "4".into()]]);
        let b = build_grid(&flat_t2(4, four)).unwrap();
        // g' = c g gives B^k = c^(k - n/2)
        for (k, want) in [(0, 0.25), (1, 1.0), (2, 4.0)] {
            let m = a.metric_change_matrix(&b, k).unwrap();
            for (v, (i, j)) in m.iter() {
                let expect = if i == j { want } else { 0.0 };
                assert!((v - expect).abs() < 1e-14, "k={k} ({i},{j}) {v}");
            }
            assert_eq!(m.diag().nnz(), a.len(k));
        }
        let mut t = flat_t3(4);
        t.axes[0].size = 5;
        assert!(matches!(a.metric_change_matrix(&build_grid(&t).unwrap(), 0), Err(GridError::Shape)));
    }
}
