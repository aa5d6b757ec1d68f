//! Structural checks on computed Betti numbers. A check whose hypotheses
//! cannot be certified for the case is skipped with a reason code.

use serde::Serialize;

use crate::cohomology::{BettiNumbers, Engine};
use crate::foliation::FoliationPackage;
use crate::grid::{build_grid, GridComplex, GridSpec};
use crate::grid_space::GridSpace;
use crate::identities::IdentityResult;
use crate::space::{CaseFlags, FormSpace};

/// Sup-norm bound below which φ₀, κ and κ_a count as zero.
pub const HYPOTHESIS_TOL: f64 = 1e-10;
/// Residual bound for the χ∧ harmonic map.
pub const CHI_WEDGE_TOL: f64 = 1e-10;
/// Basic harmonic fraction above which [κ] counts as nonzero.
pub const CLASS_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub status: Status,
    /// Reason code for a skip, or what went wrong for a failure.
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl PropertyResult {
    pub fn verdict(name: &str, ok: bool, detail: String) -> Self {
        PropertyResult {
            name: name.to_string(),
            status: if ok { Status::Passed } else { Status::Failed },
            reason: if ok { None } else { Some("violated".into()) },
            detail: Some(detail),
        }
    }

    pub fn skipped(name: &str, reason: &str) -> Self {
        PropertyResult { name: name.to_string(), status: Status::Skipped, reason: Some(reason.into()), detail: None }
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Failed
    }
}

/// Certified facts the checks condition on.
#[derive(Debug, Clone, Serialize)]
pub struct Hypotheses {
    pub riemannian: bool,
    pub flow: bool,
    pub connected: bool,
    pub phi0_zero: bool,
    pub kappa_zero: bool,
    pub kappa_basic: bool,
    pub kappa_closed: bool,
    /// Relative size of the basic harmonic part of κ.
    pub kappa_class: f64,
    pub kappa_n_nonvanishing: bool,
}

impl Hypotheses {
    pub fn certify<S: FormSpace>(engine: &Engine<'_, '_, S>, flags: &CaseFlags) -> Self {
        let pkg = engine.pkg;
        let s = pkg.space;
        let c = &pkg.certificate;
        let n = pkg.n();
        let kappa_basic = c.kappa_a_sup <= HYPOTHESIS_TOL;
        let (kappa_closed, kappa_class) = if n >= 2 && c.kappa_sup > HYPOTHESIS_TOL {
            let dk = s.d(1, &pkg.kappa);
            let closed = s.sup_norm(&dk) <= HYPOTHESIS_TOL * c.kappa_sup.max(1.0);
            (closed, if kappa_basic { engine.basic_harmonic_fraction(1, &pkg.kappa) } else { 0.0 })
        } else {
            (true, 0.0)
        };
        Hypotheses {
            riemannian: flags.riemannian,
            flow: pkg.p() == 1,
            connected: engine.betti().h.first() == Some(&1),
            phi0_zero: c.phi0_sup <= HYPOTHESIS_TOL,
            kappa_zero: c.kappa_sup <= HYPOTHESIS_TOL,
            kappa_basic,
            kappa_closed,
            kappa_class,
            kappa_n_nonvanishing: c.kappa_n_min.map_or(false, |m| m > HYPOTHESIS_TOL),
        }
    }
}

fn fmt(v: &[usize]) -> String {
    format!("{v:?}")
}

fn h_b_padded(b: &BettiNumbers) -> Vec<usize> {
    (0..b.h.len()).map(|k| b.h_b.get(k).copied().unwrap_or(0)).collect()
}

/// Every check that needs only one computed case. `identities` supplies the
/// quadratic form residual when the identity suite has run.
pub fn property_checks<S: FormSpace>(
    engine: &Engine<'_, '_, S>,
    flags: &CaseFlags,
    identities: Option<&[IdentityResult]>,
) -> Vec<PropertyResult> {
    let hyp = Hypotheses::certify(engine, flags);
    let b = engine.betti();
    let n = b.h.len() - 1;
    let q = b.h_b.len() - 1;
    let h = &b.h;
    let ha = &b.h_a_rank;
    let hb = h_b_padded(b);
    let mut out = Vec::new();

    out.push(PropertyResult::verdict(
        "rank_harmonic_agreement",
        b.h_a_rank == b.h_a_harmonic && b.h == b.h_harmonic,
        format!("h_a rank {} harmonic {}; h rank {} harmonic {}", fmt(&b.h_a_rank), fmt(&b.h_a_harmonic), fmt(&b.h), fmt(&b.h_harmonic)),
    ));

    out.push(PropertyResult::verdict(
        "poincare_duality",
        (0..=n).all(|k| h[k] == h[n - k]),
        format!("h {}", fmt(h)),
    ));

    let top = (q + 1..=n).all(|k| ha[k] == h[k]) && ha[q] <= h[q];
    out.push(PropertyResult::verdict(
        "top_degree_agreement",
        top,
        format!("h_a^k = h^k for k > {q} and h_a^{q} <= h^{q}: h_a {} h {}", fmt(ha), fmt(h)),
    ));

    out.push(if !hyp.riemannian {
        PropertyResult::skipped("d_complex_agreement", "not_riemannian")
    } else {
        PropertyResult::verdict(
            "d_complex_agreement",
            b.h_a_d_complex == b.h_a_rank,
            format!("d_a complex {} delta_a complex {}", fmt(&b.h_a_d_complex), fmt(ha)),
        )
    });

    out.push(if !hyp.riemannian {
        PropertyResult::skipped("direct_sum", "not_riemannian")
    } else if !hyp.phi0_zero {
        PropertyResult::skipped("direct_sum", "phi0_nonzero")
    } else {
        PropertyResult::verdict(
            "direct_sum",
            (0..=n).all(|k| h[k] == hb[k] + ha[k]),
            format!("h {} h_b {} h_a {}", fmt(h), fmt(&hb), fmt(ha)),
        )
    });

    out.push(if !hyp.riemannian {
        PropertyResult::skipped("connected_degree_zero", "not_riemannian")
    } else if !hyp.connected {
        PropertyResult::skipped("connected_degree_zero", "not_connected")
    } else {
        PropertyResult::verdict("connected_degree_zero", hb[0] == 1 && ha[0] == 0, format!("h_b^0 {} h_a^0 {}", hb[0], ha[0]))
    });

    out.push(if !hyp.riemannian {
        PropertyResult::skipped("degree_one_bound", "not_riemannian")
    } else if !hyp.connected {
        PropertyResult::skipped("degree_one_bound", "not_connected")
    } else if n < 1 {
        PropertyResult::skipped("degree_one_bound", "dimension_too_small")
    } else {
        PropertyResult::verdict("degree_one_bound", h[1] <= hb[1] + ha[1], format!("h^1 {} h_b^1 {} h_a^1 {}", h[1], hb[1], ha[1]))
    });

    let flow_gate = |name: &str| -> Option<PropertyResult> {
        if !hyp.riemannian {
            Some(PropertyResult::skipped(name, "not_riemannian"))
        } else if !hyp.flow {
            Some(PropertyResult::skipped(name, "not_flow"))
        } else if !hyp.connected {
            Some(PropertyResult::skipped(name, "not_connected"))
        } else {
            None
        }
    };

    out.push(flow_gate("vanishing_h1_forces_h_a1").unwrap_or_else(|| {
        if h[1] != 0 {
            PropertyResult::skipped("vanishing_h1_forces_h_a1", "h1_nonzero")
        } else {
            PropertyResult::verdict("vanishing_h1_forces_h_a1", ha[1] == 1, format!("h^1 0, h_a^1 {}", ha[1]))
        }
    }));

    out.push(flow_gate("nontaut_kills_h_a1").unwrap_or_else(|| {
        if hyp.kappa_zero {
            PropertyResult::skipped("nontaut_kills_h_a1", "kappa_zero")
        } else if !hyp.kappa_basic {
            PropertyResult::skipped("nontaut_kills_h_a1", "kappa_not_basic")
        } else if !hyp.kappa_closed {
            PropertyResult::skipped("nontaut_kills_h_a1", "kappa_not_closed")
        } else if hyp.kappa_class <= CLASS_TOL {
            PropertyResult::skipped("nontaut_kills_h_a1", "kappa_class_zero")
        } else {
            PropertyResult::verdict(
                "nontaut_kills_h_a1",
                ha[1] == 0,
                format!("basic class fraction of kappa {:.3e}, h_a^1 {}", hyp.kappa_class, ha[1]),
            )
        }
    }));

    out.push(flow_gate("chi_wedge_harmonic").unwrap_or_else(|| {
        if !hyp.kappa_zero {
            PropertyResult::skipped("chi_wedge_harmonic", "kappa_nonzero")
        } else {
            let mut ok = true;
            let mut parts = Vec::new();
            for r in 0..=q {
                let rep = engine.chi_wedge_harmonic(r);
                let good = rep.rank == rep.count
                    && rep.residual <= CHI_WEDGE_TOL
                    && rep.antibasic_residual <= CHI_WEDGE_TOL
                    && ha.get(r + 1).map_or(true, |&a| a >= hb[r]);
                ok &= good;
                parts.push(format!(
                    "r={r}: rank {}/{} residual {:.2e} antibasic {:.2e}",
                    rep.rank, rep.count, rep.residual, rep.antibasic_residual
                ));
            }
            PropertyResult::verdict("chi_wedge_harmonic", ok, parts.join("; "))
        }
    }));

    out.push(flow_gate("quadratic_form").unwrap_or_else(|| {
        if !hyp.kappa_basic {
            return PropertyResult::skipped("quadratic_form", "kappa_not_basic");
        }
        match identities.and_then(|ids| ids.iter().find(|r| r.name == "quadratic_form")) {
            None => PropertyResult::skipped("quadratic_form", "identity_suite_not_run"),
            Some(r) => PropertyResult::verdict(
                "quadratic_form",
                r.passed,
                format!("residual {:.3e} ({:?})", r.residual, r.class),
            ),
        }
    }));

    out.push(if q != 1 {
        PropertyResult::skipped("codimension_one_normal_curvature", "not_codimension_one")
    } else if !hyp.connected {
        PropertyResult::skipped("codimension_one_normal_curvature", "not_connected")
    } else if !hyp.kappa_n_nonvanishing {
        PropertyResult::skipped("codimension_one_normal_curvature", "kappa_n_vanishes")
    } else {
        PropertyResult::verdict(
            "codimension_one_normal_curvature",
            ha[0] == 0 && (1..=n).all(|k| ha[k] == h[k]),
            format!("h_a {} h {}", fmt(ha), fmt(h)),
        )
    });

    out
}

/// Two Betti computations that must agree exactly.
pub fn betti_agreement(name: &str, a: &BettiNumbers, b: &BettiNumbers, what: &str) -> PropertyResult {
    let same = a.h == b.h && a.h_b == b.h_b && a.h_a_rank == b.h_a_rank && a.h_a_harmonic == b.h_a_harmonic;
    PropertyResult::verdict(
        name,
        same,
        format!(
            "{what}: h {} vs {}, h_b {} vs {}, h_a {} vs {}",
            fmt(&a.h),
            fmt(&b.h),
            fmt(&a.h_b),
            fmt(&b.h_b),
            fmt(&a.h_a_rank),
            fmt(&b.h_a_rank)
        ),
    )
}

/// The coordinate axis along which a flow is generated by an isometric
/// circle action, if there is one: the leaf frame is a constant multiple of
/// that coordinate vector and nothing depends on the coordinate.
pub fn circle_action_axis(c: &GridComplex) -> Option<usize> {
    if c.p() != 1 {
        return None;
    }
    let homogeneous = c.homogeneous_axes();
    let first = c.frame_at(0)[0].clone();
    let axis = (0..c.n()).find(|&a| first[a].abs() > 0.0)?;
    if !homogeneous.contains(&axis) {
        return None;
    }
    let constant = (0..c.points()).all(|pt| {
        let w = &c.frame_at(pt)[0];
        (0..c.n()).all(|i| if i == axis { w[i] == first[axis] } else { w[i] == 0.0 })
    });
    constant.then_some(axis)
}

/// Restriction to forms invariant along `axis`: one grid point across it,
/// which is the zero Fourier mode of the forward difference there.
pub fn invariant_spec(spec: &GridSpec, axis: usize) -> GridSpec {
    let mut out = spec.clone();
    out.axes[axis].size = 1;
    out.name = format!("{}-invariant", spec.name);
    out
}

/// Checks that the invariant reduction along the circle action reproduces
/// the basic and antibasic Betti numbers of the full complex.
pub fn invariant_reduction(full: &GridComplex, betti: &BettiNumbers, rel_tol: f64) -> PropertyResult {
    const NAME: &str = "invariant_reduction";
    let Some(axis) = circle_action_axis(full) else {
        return PropertyResult::skipped(NAME, "no_circle_action");
    };
    let fail = |why: String| PropertyResult {
        name: NAME.into(),
        status: Status::Failed,
        reason: Some("reduction_failed".into()),
        detail: Some(why),
    };
    let reduced = match build_grid(&invariant_spec(&full.spec, axis)) {
        Ok(c) => c,
        Err(e) => return fail(e.to_string()),
    };
    let factor = full.sizes[axis];
    let sized = (0..=full.n()).all(|k| reduced.len(k) * factor == full.len(k));
    let space = match GridSpace::new(reduced) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string()),
    };
    let pkg = match FoliationPackage::derive(&space, rel_tol) {
        Ok(p) => p,
        Err(e) => return fail(e.to_string()),
    };
    let engine = match Engine::new(&pkg) {
        Ok(e) => e,
        Err(e) => return fail(e.to_string()),
    };
    let r = engine.betti();
    PropertyResult::verdict(
        NAME,
        sized && r.h_b == betti.h_b && r.h_a_rank == betti.h_a_rank,
        format!(
            "axis {axis}, size ratio {factor}: h_b {} vs {}, h_a {} vs {}",
            fmt(&r.h_b),
            fmt(&betti.h_b),
            fmt(&r.h_a_rank),
            fmt(&betti.h_a_rank)
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::lookup;
    use crate::grid::{AxisSpec, MetricSpec, Wrap};
    use crate::su2::build_su2;

    fn by_name<'a>(r: &'a [PropertyResult], name: &str) -> &'a PropertyResult {
        r.iter().find(|p| p.name == name).unwrap()
    }

    fn grid_checks(case: &str, sizes: &[usize]) -> (BettiNumbers, Vec<PropertyResult>) {
        let info = lookup(case).unwrap();
        let space = GridSpace::new(build_grid(&info.grid_spec(sizes).unwrap()).unwrap()).unwrap();
        let pkg = FoliationPackage::derive(&space, 1e-8).unwrap();
        let engine = Engine::new(&pkg).unwrap();
        (engine.betti().clone(), property_checks(&engine, &info.flags, None))
    }

    #[test]
    fn hopf_properties() {
        let s = build_su2(2.0, [1.0; 3]).unwrap();
        let pkg = FoliationPackage::derive(&s, 1e-8).unwrap();
        let engine = Engine::new(&pkg).unwrap();
        let r = property_checks(&engine, &lookup("hopf").unwrap().flags, None);
        assert!(r.iter().all(|p| !p.failed()), "{r:#?}");
        assert_eq!(by_name(&r, "vanishing_h1_forces_h_a1").status, Status::Passed);
        assert_eq!(by_name(&r, "chi_wedge_harmonic").status, Status::Passed);
        assert_eq!(by_name(&r, "direct_sum").reason.as_deref(), Some("phi0_nonzero"));
        assert_eq!(by_name(&r, "nontaut_kills_h_a1").reason.as_deref(), Some("kappa_zero"));
        assert_eq!(by_name(&r, "quadratic_form").reason.as_deref(), Some("identity_suite_not_run"));
        assert_eq!(by_name(&r, "codimension_one_normal_curvature").reason.as_deref(), Some("not_codimension_one"));
    }

    #[test]
    fn carriere_nontaut_class() {
        let (_, r) = grid_checks("carriere", &[6, 6, 4]);
        assert!(r.iter().all(|p| !p.failed()), "{r:#?}");
        assert_eq!(by_name(&r, "nontaut_kills_h_a1").status, Status::Passed);
        assert_eq!(by_name(&r, "direct_sum").status, Status::Passed);
        assert_eq!(by_name(&r, "chi_wedge_harmonic").reason.as_deref(), Some("kappa_nonzero"));
    }

    #[test]
    fn non_riemannian_skips() {
        let (_, r) = grid_checks("flat-torus-flow", &[16, 8]);
        assert!(r.iter().all(|p| !p.failed()), "{r:#?}");
        for name in ["direct_sum", "connected_degree_zero", "degree_one_bound", "chi_wedge_harmonic"] {
            assert_eq!(by_name(&r, name).reason.as_deref(), Some("not_riemannian"));
        }
        assert_eq!(by_name(&r, "codimension_one_normal_curvature").reason.as_deref(), Some("kappa_n_vanishes"));
        assert_eq!(by_name(&r, "top_degree_agreement").status, Status::Passed);
    }

    fn z_flow(n: usize) -> GridSpec {
        let ax = AxisSpec { size: n, length: 1.0, wrap: Wrap::Plain };
        GridSpec {
            name: "z-flow".into(),
            coords: vec!["x".into(), "y".into(), "z".into()],
            axes: vec![ax.clone(), ax.clone(), ax],
            metric: MetricSpec::Builtin("euclidean".into()),
            frame: vec![vec!["0".into(), "0".into(), "1".into()]],
            constants: Default::default(),
            flags: CaseFlags { riemannian: true, taut: true, involutive_normal: true, basic_mean_curvature: true },
        }
    }

    #[test]
    fn circle_action_detection() {
        let c = build_grid(&z_flow(4)).unwrap();
        assert_eq!(circle_action_axis(&c), Some(2));
        for case in ["carriere", "torus-bundle", "linear-flow-t3", "t3-bump-flow"] {
            let info = lookup(case).unwrap();
            let sizes = info.grid_sizes(4).unwrap();
            let c = build_grid(&info.grid_spec(&sizes).unwrap()).unwrap();
            assert_eq!(circle_action_axis(&c), None, "{case}");
        }
    }

    #[test]
    fn z_flow_invariant_reduction() {
        let c = build_grid(&z_flow(5)).unwrap();
        let space = GridSpace::new(c.clone()).unwrap();
        let pkg = FoliationPackage::derive(&space, 1e-8).unwrap();
        let engine = Engine::new(&pkg).unwrap();
        let b = engine.betti();
        // T³ fibred by z-circles over T²
        assert_eq!(b.h_b, vec![1, 2, 1]);
        assert_eq!(b.h_a_rank, vec![0, 1, 2, 1]);
        let r = invariant_reduction(&c, b, 1e-8);
        assert_eq!(r.status, Status::Passed, "{r:?}");
        let checks = property_checks(&engine, &z_flow(5).flags, None);
        assert!(checks.iter().all(|p| !p.failed()), "{checks:#?}");
        assert_eq!(by_name(&checks, "chi_wedge_harmonic").status, Status::Passed);
    }

    #[test]
    fn betti_agreement_detects_change() {
        let (a, _) = grid_checks("linear-flow-t3", &[4, 4, 4]);
        let mut b = a.clone();
        assert_eq!(betti_agreement("x", &a, &b, "same").status, Status::Passed);
        b.h_a_rank[1] += 1;
        assert_eq!(betti_agreement("x", &a, &b, "changed").status, Status::Failed);
    }
}
