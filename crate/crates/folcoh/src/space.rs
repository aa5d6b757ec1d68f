//! The backend-independent view of a discrete foliated manifold.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocks::{BlockAnalysis, BlockComplex};

pub type CVec = DVector<Complex64>;

/// Catalog metadata; each flag is re-certified numerically where possible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseFlags {
    pub riemannian: bool,
    pub taut: bool,
    pub involutive_normal: bool,
    pub basic_mean_curvature: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("degree {degree} out of range for {op}")]
    Degree { op: &'static str, degree: usize },
    #[error("product of two non-invariant expansions would exceed the truncation J_max")]
    Truncation,
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("ill-conditioned kernel for {what}: gap ratio {ratio:e} below 1e3; spectrum {spectrum:?}")]
    IllConditioned { what: String, ratio: f64, spectrum: Vec<f64> },
    #[error("basis for degree {0} has not been built")]
    MissingBasis(usize),
}

/// A finite model of (M, F, g) with real form fields of type `V`.
pub trait FormSpace {
    type V: Clone;
    /// A prepared zeroth-order pointwise operator.
    type Op;
    type Proj;

    fn n(&self) -> usize;
    fn p(&self) -> usize;
    fn q(&self) -> usize {
        self.n() - self.p()
    }
    fn backend(&self) -> &'static str;
    /// Coefficient count in degree k; zero above n.
    fn len(&self, k: usize) -> usize;
    fn zero(&self, k: usize) -> Self::V;
    fn random(&self, k: usize, rng: &mut dyn RngCore) -> Self::V;
    fn inner(&self, k: usize, a: &Self::V, b: &Self::V) -> f64;
    fn axpy(&self, alpha: f64, x: &Self::V, y: &mut Self::V);
    fn scale(&self, alpha: f64, x: &mut Self::V);
    fn sup_norm(&self, x: &Self::V) -> f64;

    /// Exterior derivative of a degree-k form; for k = n the result is the
    /// empty degree-(n+1) vector.
    fn d(&self, k: usize, x: &Self::V) -> Self::V;
    /// d∘d on degree k, k + 2 ≤ n.
    fn d_squared(&self, k: usize, x: &Self::V) -> Self::V {
        self.d(k + 1, &self.d(k, x))
    }
    /// Codifferential of a degree-k form, k ≥ 1.
    fn delta(&self, k: usize, x: &Self::V) -> Self::V;
    /// ω ↦ a∧ω on degree k.
    fn wedge_op(&self, ka: usize, a: &Self::V, k: usize) -> Result<Self::Op, SpaceError>;
    /// Metric adjoint of a∧, acting on degree k.
    fn contract_op(&self, ka: usize, a: &Self::V, k: usize) -> Result<Self::Op, SpaceError>;
    fn apply(&self, op: &Self::Op, x: &Self::V) -> Self::V;
    /// i_{X_j} x for each leaf frame vector (the unit field for flows).
    fn leaf_interior(&self, k: usize, x: &Self::V) -> Vec<Self::V>;
    fn characteristic_form(&self) -> Result<Self::V, SpaceError>;
    fn constant_function(&self) -> Self::V;
    /// Pointwise norm at every sample point, where the backend can evaluate it.
    fn pointwise_norms(&self, k: usize, x: &Self::V) -> Option<Vec<f64>>;
    /// Hodge star of a degree-k form.
    fn star(&self, _k: usize, _x: &Self::V) -> Option<Self::V> {
        None
    }

    fn block_complex(&self, chi: &Self::V) -> BlockComplex;
    /// Coordinates of x in each block copy, ordered as `BlockComplex::copies`.
    fn analyze(&self, k: usize, x: &Self::V) -> Vec<CVec>;
    fn synthesize(&self, k: usize, parts: &[CVec]) -> Self::V;
    fn projector(&self, blocks: &BlockComplex, analysis: &BlockAnalysis) -> Result<Self::Proj, SpaceError>;
    fn project_basic(&self, proj: &Self::Proj, k: usize, x: &Self::V) -> Self::V;
}

pub fn sub<S: FormSpace + ?Sized>(s: &S, a: &S::V, b: &S::V) -> S::V {
    let mut out = a.clone();
    s.axpy(-1.0, b, &mut out);
    out
}

pub fn add<S: FormSpace + ?Sized>(s: &S, a: &S::V, b: &S::V) -> S::V {
    let mut out = a.clone();
    s.axpy(1.0, b, &mut out);
    out
}

pub fn scaled<S: FormSpace + ?Sized>(s: &S, alpha: f64, a: &S::V) -> S::V {
    let mut out = a.clone();
    s.scale(alpha, &mut out);
    out
}

pub fn norm<S: FormSpace + ?Sized>(s: &S, k: usize, a: &S::V) -> f64 {
    s.inner(k, a, a).max(0.0).sqrt()
}
