//! Foliation data derived from a backend: χ, κ, φ₀, the basic projector and
//! the operators built from them.
//!
//! Forms of mixed degree are `Graded` vectors indexed by degree 0..=n.

use serde::Serialize;

use crate::blocks::{BlockAnalysis, BlockComplex};
use crate::space::{sub, FormSpace, SpaceError};

pub type Graded<V> = Vec<V>;

pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// Numerical certificates of the derived data.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PackageCertificate {
    /// max |‖χ‖ − 1| over sample points.
    pub chi_norm_deviation: Option<f64>,
    /// sup ‖i_X φ₀‖ over leaf frame vectors, relative to sup ‖dχ‖ (or 1).
    pub leaf_phi0_residual: f64,
    pub kappa_sup: f64,
    pub kappa_a_sup: f64,
    pub phi0_sup: f64,
    pub dchi_sup: f64,
    /// min pointwise |κ_N| in codimension one.
    pub kappa_n_min: Option<f64>,
}

pub struct FoliationPackage<'s, S: FormSpace> {
    pub space: &'s S,
    pub chi: S::V,
    pub kappa: S::V,
    pub kappa_a: S::V,
    pub phi0: S::V,
    pub nu: Option<S::V>,
    pub kappa_n: Option<S::V>,
    pub blocks: BlockComplex,
    pub analysis: BlockAnalysis,
    pub proj: S::Proj,
    pub certificate: PackageCertificate,
    /// Per degree k: (−κ_a⌟ on k, χ∧ on k, φ₀⌟ on k + p).
    eps_parts: Vec<EpsParts<S::Op>>,
    /// Per degree k: (−κ_a∧ on k, φ₀∧ on k, χ⌟ on k + 2).
    eps_star_parts: Vec<EpsParts<S::Op>>,
}

struct EpsParts<Op> {
    kappa: Option<Op>,
    first: Option<Op>,
    second: Option<Op>,
}

/// A named linear operator on graded forms.
pub struct LinearOperatorHandle<'p, V> {
    pub name: &'static str,
    /// Degree shift, or None when the operator mixes degrees.
    pub shift: Option<i32>,
    pub adjoint: Option<&'static str>,
    apply: Box<dyn Fn(&Graded<V>) -> Graded<V> + 'p>,
}

impl<V> LinearOperatorHandle<'_, V> {
    pub fn apply(&self, x: &Graded<V>) -> Graded<V> {
        (self.apply)(x)
    }

    pub fn self_adjoint(&self) -> bool {
        self.adjoint == Some(self.name)
    }
}

/// Canonical operator names and their adjoints.
pub const OPERATORS: &[(&str, Option<i32>, &str)] = &[
    ("d", Some(1), "δ"),
    ("δ", Some(-1), "d"),
    ("P_b", Some(0), "P_b"),
    ("P_a", Some(0), "P_a"),
    ("ε", Some(-1), "ε*"),
    ("ε*", Some(1), "ε"),
    ("d_a", Some(1), "δ_a"),
    ("δ_a", Some(-1), "d_a"),
    ("d_b", Some(1), "δ_b"),
    ("δ_b", Some(-1), "d_b"),
    ("D_a", None, "D_a"),
    ("Δ", Some(0), "Δ"),
    ("Δ_a", Some(0), "Δ_a"),
    ("Δ_b", Some(0), "Δ_b"),
    ("D^ε", None, ""),
    ("Δ^ε", Some(0), ""),
    ("Δ̃", Some(0), "Δ̃*"),
    ("Δ̃*", Some(0), "Δ̃"),
    ("Δ̄", Some(0), "Δ̄"),
];

fn canonical(name: &str) -> Option<&'static str> {
    let alias = match name {
        "delta" => "δ",
        "eps" | "epsilon" => "ε",
        "eps*" | "epsilon*" => "ε*",
        "delta_a" => "δ_a",
        "delta_b" => "δ_b",
        "Delta" | "laplacian" => "Δ",
        "Delta_a" => "Δ_a",
        "Delta_b" => "Δ_b",
        "D^eps" => "D^ε",
        "Delta^eps" => "Δ^ε",
        "Delta~" | "Delta_tilde" => "Δ̃",
        "Delta~*" | "Delta_tilde*" => "Δ̃*",
        "Deltabar" | "Delta_bar" => "Δ̄",
        other => other,
    };
    OPERATORS.iter().find(|(n, _, _)| *n == alias).map(|(n, _, _)| *n)
}

impl<'s, S: FormSpace> FoliationPackage<'s, S> {
    pub fn derive(space: &'s S, rel_tol: f64) -> Result<Self, SpaceError> {
        let n = space.n();
        let p = space.p();
        let chi = space.characteristic_form()?;
        let blocks = space.block_complex(&chi);
        let analysis = BlockAnalysis::new(&blocks, rel_tol)?;
        let proj = space.projector(&blocks, &analysis)?;

        let dchi = space.d(p, &chi);
        // κ = (−1)^{p+1} χ⌟dχ; for a unit flow field this is i_ξ dχ
        let mut kappa = space.apply(&space.contract_op(p, &chi, p + 1)?, &dchi);
        if p % 2 == 0 {
            space.scale(-1.0, &mut kappa);
        }
        let mut phi0 = dchi.clone();
        let kchi = space.apply(&space.wedge_op(1, &kappa, p)?, &chi);
        space.axpy(1.0, &kchi, &mut phi0);
        let kappa_b = space.project_basic(&proj, 1, &kappa);
        let kappa_a = sub(space, &kappa, &kappa_b);

        let (nu, kappa_n) = if n - p == 1 {
            match space.star(p, &chi) {
                Some(nu) => {
                    let dnu = space.d(1, &nu);
                    let kn = space.apply(&space.contract_op(1, &nu, 2)?, &dnu);
                    (Some(nu), Some(kn))
                }
                None => (None, None),
            }
        } else {
            (None, None)
        };

        let chi_norm_deviation = space
            .pointwise_norms(p, &chi)
            .map(|v| v.iter().fold(0.0f64, |m, x| m.max((x - 1.0).abs())));
        let dchi_sup = space.sup_norm(&dchi);
        let leaf = space
            .leaf_interior(p + 1, &phi0)
            .iter()
            .fold(0.0f64, |m, v| m.max(space.sup_norm(v)));
        let kappa_n_min = kappa_n
            .as_ref()
            .and_then(|k| space.pointwise_norms(1, k))
            .map(|v| v.iter().fold(f64::INFINITY, |m, &x| m.min(x)));
        let certificate = PackageCertificate {
            chi_norm_deviation,
            leaf_phi0_residual: leaf / dchi_sup.max(1.0),
            kappa_sup: space.sup_norm(&kappa),
            kappa_a_sup: space.sup_norm(&kappa_a),
            phi0_sup: space.sup_norm(&phi0),
            dchi_sup,
            kappa_n_min,
        };

        let sign_p = if p % 2 == 0 { 1.0 } else { -1.0 };
        let mut neg_kappa_a = kappa_a.clone();
        space.scale(-1.0, &mut neg_kappa_a);
        let mut signed_phi0 = phi0.clone();
        space.scale(sign_p, &mut signed_phi0);
        let mut eps_parts = Vec::with_capacity(n + 1);
        let mut eps_star_parts = Vec::with_capacity(n + 1);
        for k in 0..=n {
            eps_parts.push(if k == 0 {
                EpsParts { kappa: None, first: None, second: None }
            } else {
                let (first, second) = if k + p <= n {
                    (Some(space.wedge_op(p, &chi, k)?), Some(space.contract_op(p + 1, &signed_phi0, k + p)?))
                } else {
                    (None, None)
                };
                EpsParts { kappa: Some(space.contract_op(1, &neg_kappa_a, k)?), first, second }
            });
            eps_star_parts.push(if k == n {
                EpsParts { kappa: None, first: None, second: None }
            } else {
                let (first, second) = if k + p + 1 <= n {
                    (Some(space.wedge_op(p + 1, &signed_phi0, k)?), Some(space.contract_op(p, &chi, k + p + 1)?))
                } else {
                    (None, None)
                };
                EpsParts { kappa: Some(space.wedge_op(1, &neg_kappa_a, k)?), first, second }
            });
        }

        Ok(FoliationPackage {
            space,
            chi,
            kappa,
            kappa_a,
            phi0,
            nu,
            kappa_n,
            blocks,
            analysis,
            proj,
            certificate,
            eps_parts,
            eps_star_parts,
        })
    }

    pub fn n(&self) -> usize {
        self.space.n()
    }

    pub fn p(&self) -> usize {
        self.space.p()
    }

    pub fn basic_dim(&self, k: usize) -> usize {
        self.analysis.basic_dim(&self.blocks, k)
    }

    pub fn antibasic_dim(&self, k: usize) -> usize {
        self.analysis.anti_dim(&self.blocks, k)
    }

    /// sup norm of the stacked basic constraint (i_X ω, i_X dω).
    pub fn constraint_residual(&self, k: usize, x: &S::V) -> f64 {
        let s = self.space;
        let mut r = 0.0f64;
        if k > 0 {
            for v in s.leaf_interior(k, x) {
                r = r.max(s.sup_norm(&v));
            }
        }
        if k < s.n() {
            for v in s.leaf_interior(k + 1, &s.d(k, x)) {
                r = r.max(s.sup_norm(&v));
            }
        }
        r
    }

    pub fn pb(&self, k: usize, x: &S::V) -> S::V {
        self.space.project_basic(&self.proj, k, x)
    }

    pub fn pa(&self, k: usize, x: &S::V) -> S::V {
        sub(self.space, x, &self.pb(k, x))
    }

    /// ε on a degree-k form (k ≥ 1), landing in degree k − 1.
    pub fn eps(&self, k: usize, x: &S::V) -> S::V {
        let s = self.space;
        let e = &self.eps_parts[k];
        let mut out = s.apply(e.kappa.as_ref().expect("ε needs k >= 1"), x);
        if let (Some(a), Some(b)) = (&e.first, &e.second) {
            s.axpy(1.0, &s.apply(b, &s.apply(a, x)), &mut out);
        }
        out
    }

    /// ε* on a degree-k form (k < n), landing in degree k + 1.
    pub fn eps_star(&self, k: usize, x: &S::V) -> S::V {
        let s = self.space;
        let e = &self.eps_star_parts[k];
        let mut out = s.apply(e.kappa.as_ref().expect("ε* needs k < n"), x);
        if let (Some(a), Some(b)) = (&e.first, &e.second) {
            s.axpy(1.0, &s.apply(b, &s.apply(a, x)), &mut out);
        }
        out
    }

    pub fn graded_zero(&self) -> Graded<S::V> {
        (0..=self.n()).map(|k| self.space.zero(k)).collect()
    }

    /// A graded form with `x` in degree k.
    pub fn embed(&self, k: usize, x: S::V) -> Graded<S::V> {
        let mut g = self.graded_zero();
        g[k] = x;
        g
    }

    pub fn graded_sub(&self, a: &Graded<S::V>, b: &Graded<S::V>) -> Graded<S::V> {
        a.iter().zip(b).map(|(x, y)| sub(self.space, x, y)).collect()
    }

    pub fn graded_inner(&self, a: &Graded<S::V>, b: &Graded<S::V>) -> f64 {
        a.iter().zip(b).enumerate().map(|(k, (x, y))| self.space.inner(k, x, y)).sum()
    }

    pub fn graded_norm(&self, a: &Graded<S::V>) -> f64 {
        self.graded_inner(a, a).max(0.0).sqrt()
    }

    fn nonzero(&self, x: &S::V) -> bool {
        self.space.sup_norm(x) > 0.0
    }

    /// Apply a degree-shifting primitive to every nonzero component.
    fn shift_map(&self, x: &Graded<S::V>, up: bool, f: impl Fn(usize, &S::V) -> S::V) -> Graded<S::V> {
        let n = self.n();
        let mut out = self.graded_zero();
        for (k, xk) in x.iter().enumerate() {
            if (up && k == n) || (!up && k == 0) || !self.nonzero(xk) {
                continue;
            }
            let t = if up { k + 1 } else { k - 1 };
            let y = f(k, xk);
            self.space.axpy(1.0, &y, &mut out[t]);
        }
        out
    }

    fn diag_map(&self, x: &Graded<S::V>, f: impl Fn(usize, &S::V) -> S::V) -> Graded<S::V> {
        x.iter()
            .enumerate()
            .map(|(k, xk)| if self.nonzero(xk) { f(k, xk) } else { self.space.zero(k) })
            .collect()
    }

    fn plus(&self, mut a: Graded<S::V>, b: &Graded<S::V>, alpha: f64) -> Graded<S::V> {
        for (x, y) in a.iter_mut().zip(b) {
            self.space.axpy(alpha, y, x);
        }
        a
    }

    /// Apply a named operator to a graded form.
    pub fn apply_named(&self, name: &str, x: &Graded<S::V>) -> Result<Graded<S::V>, SpaceError> {
        let name = canonical(name).ok_or_else(|| SpaceError::Unsupported(format!("unknown operator {name}")))?;
        let s = self.space;
        let op = |m: &str, y: &Graded<S::V>| self.apply_named(m, y).expect("known operator");
        let chain = |names: &[&str], y: &Graded<S::V>| names.iter().rev().fold(y.clone(), |acc, m| op(m, &acc));
        Ok(match name {
            "d" => self.shift_map(x, true, |k, v| s.d(k, v)),
            "δ" => self.shift_map(x, false, |k, v| s.delta(k, v)),
            "P_b" => self.diag_map(x, |k, v| self.pb(k, v)),
            "P_a" => x.iter().enumerate().map(|(k, v)| self.pa(k, v)).collect(),
            "ε" => self.shift_map(x, false, |k, v| self.eps(k, v)),
            "ε*" => self.shift_map(x, true, |k, v| self.eps_star(k, v)),
            "d_a" => chain(&["P_a", "d", "P_a"], x),
            "δ_a" => chain(&["P_a", "δ", "P_a"], x),
            "d_b" => chain(&["P_b", "d", "P_b"], x),
            "δ_b" => chain(&["P_b", "δ", "P_b"], x),
            "D_a" => self.plus(op("d_a", x), &op("δ_a", x), 1.0),
            "Δ" => self.plus(chain(&["d", "δ"], x), &chain(&["δ", "d"], x), 1.0),
            "Δ_a" => chain(&["D_a", "D_a"], x),
            "Δ_b" => self.plus(chain(&["d_b", "δ_b"], x), &chain(&["δ_b", "d_b"], x), 1.0),
            "D^ε" => {
                let t = self.plus(op("δ", x), &op("d", x), 1.0);
                self.plus(t, &op("ε*", x), 1.0)
            }
            "Δ^ε" => {
                let t = self.plus(op("Δ", x), &chain(&["ε*", "δ"], x), 1.0);
                self.plus(t, &chain(&["δ", "ε*"], x), 1.0)
            }
            "Δ̃" => {
                let t = self.plus(op("Δ", x), &chain(&["δ", "P_b", "ε*"], x), 1.0);
                self.plus(t, &chain(&["P_b", "ε*", "δ"], x), 1.0)
            }
            "Δ̃*" => {
                let t = self.plus(op("Δ", x), &chain(&["ε", "P_b", "d"], x), 1.0);
                self.plus(t, &chain(&["d", "ε", "P_b"], x), 1.0)
            }
            "Δ̄" => self.plus(op("Δ", x), &chain(&["ε", "P_b", "ε*"], x), -1.0),
            _ => unreachable!("canonical names are exhaustive"),
        })
    }

    pub fn named_operator(&self, name: &str) -> Result<LinearOperatorHandle<'_, S::V>, SpaceError> {
        let canon = canonical(name).ok_or_else(|| SpaceError::Unsupported(format!("unknown operator {name}")))?;
        let &(_, shift, adj) = OPERATORS.iter().find(|(n, _, _)| *n == canon).unwrap();
        Ok(LinearOperatorHandle {
            name: canon,
            shift,
            adjoint: if adj.is_empty() { None } else { Some(adj) },
            apply: Box::new(move |x| self.apply_named(canon, x).expect("known operator")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::su2::build_su2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hopf_package() {
        let s = build_su2(2.0, [1.0, 1.0, 1.0]).unwrap();
        let f = FoliationPackage::derive(&s, DEFAULT_REL_TOL).unwrap();
        let c = &f.certificate;
        assert!(c.chi_norm_deviation.unwrap() < 1e-14);
        assert!(c.kappa_sup < 1e-14);
        assert!((c.phi0_sup - 2.0).abs() < 1e-14);
        assert!(c.leaf_phi0_residual < 1e-13);
        // basic functions are the j = 0 constants and the m-invariant j = 1 modes
        assert_eq!(f.basic_dim(0), 1 + 3 + 5);
    }

    #[test]
    fn epsilon_pair_is_adjoint_on_hopf() {
        let s = build_su2(1.5, [1.0, 1.0, 1.0]).unwrap();
        let f = FoliationPackage::derive(&s, DEFAULT_REL_TOL).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 0..3 {
            let a = s.random(k, &mut rng);
            let b = s.random(k + 1, &mut rng);
            let lhs = s.inner(k + 1, &f.eps_star(k, &a), &b);
            let rhs = s.inner(k, &a, &f.eps(k + 1, &b));
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{k}: {lhs} {rhs}");
        }
        let one = s.constant_function();
        assert!(s.sup_norm(&f.eps_star(0, &one)) < 1e-14);
    }

    #[test]
    fn unknown_operator_rejected() {
        let s = build_su2(1.0, [1.0, 1.0, 1.0]).unwrap();
        let f = FoliationPackage::derive(&s, DEFAULT_REL_TOL).unwrap();
        assert!(f.named_operator("nabla").is_err());
        let h = f.named_operator("Delta_a").unwrap();
        assert!(h.self_adjoint());
        assert_eq!(f.named_operator("d").unwrap().adjoint, Some("δ"));
    }
}
