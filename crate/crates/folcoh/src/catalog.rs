//! Built-in example foliations.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::grid::{AxisSpec, GridSpec, MetricSpec, Wrap};
use crate::space::CaseFlags;

/// Golden ratio; λ = φ² is the expanding eigenvalue of [[2,1],[1,1]].
pub const GOLDEN: f64 = 1.618_033_988_749_895;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    /// Values printed with the example.
    Published,
    /// Values obtained independently (closed form or brute force).
    Derived,
}

/// Expected Betti tables; `None` marks an entry with no finite target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expected {
    pub source: Source,
    pub h: Option<Vec<Option<usize>>>,
    pub h_b: Option<Vec<Option<usize>>>,
    pub h_a: Option<Vec<Option<usize>>>,
}

fn table(v: &[usize]) -> Option<Vec<Option<usize>>> {
    Some(v.iter().map(|&x| Some(x)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Grid,
    Su2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Resolution {
    Grid(Vec<usize>),
    Su2 { jmax: f64 },
}

impl Resolution {
    pub fn describe(&self) -> String {
        match self {
            Resolution::Grid(s) => s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("x"),
            Resolution::Su2 { jmax } => format!("J_max={}", jmax),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseInfo {
    pub name: &'static str,
    pub description: &'static str,
    pub backend: BackendKind,
    pub flags: CaseFlags,
    /// For perturbed variants, the case they perturb.
    pub base: Option<&'static str>,
    pub expected: Vec<Expected>,
    pub default_resolution: Resolution,
}

const BASE_CASES: [&str; 6] = ["hopf", "carriere", "torus-bundle", "flat-torus-flow", "t3-bump-flow", "linear-flow-t3"];

fn flags(riemannian: bool, taut: bool, involutive_normal: bool, basic_mean_curvature: bool) -> CaseFlags {
    CaseFlags { riemannian, taut, involutive_normal, basic_mean_curvature }
}

fn base_info(name: &str) -> Option<CaseInfo> {
    use Source::*;
    Some(match name {
        "hopf" => CaseInfo {
            name: "hopf",
            description: "Hopf flow on the round unit S^3 (Peter-Weyl truncation)",
            backend: BackendKind::Su2,
            flags: flags(true, true, false, true),
            base: None,
            expected: vec![Expected {
                source: Published,
                h: table(&[1, 0, 0, 1]),
                h_b: table(&[1, 0, 1]),
                h_a: table(&[0, 1, 0, 1]),
            }],
            default_resolution: Resolution::Su2 { jmax: 3.0 },
        },
        "carriere" => CaseInfo {
            name: "carriere",
            description: "Anosov flow along the contracting direction of the hyperbolic torus bundle T_A^3, A = [[2,1],[1,1]]",
            backend: BackendKind::Grid,
            flags: flags(true, false, true, true),
            base: None,
            expected: vec![
                Expected {
                    source: Published,
                    h: table(&[1, 3, 3, 1]),
                    h_b: table(&[1, 1, 0]),
                    h_a: table(&[0, 0, 3, 1]),
                },
                Expected {
                    source: Derived,
                    h: table(&[1, 1, 1, 1]),
                    h_b: table(&[1, 1, 0]),
                    h_a: table(&[0, 0, 1, 1]),
                },
            ],
            default_resolution: Resolution::Grid(vec![12, 12, 8]),
        },
        "torus-bundle" => CaseInfo {
            name: "torus-bundle",
            description: "flow along the base circle of the parabolic torus bundle with A = [[1,1],[0,1]]",
            backend: BackendKind::Grid,
            flags: flags(false, true, true, true),
            base: None,
            expected: vec![Expected {
                source: Published,
                h: table(&[1, 2, 2, 1]),
                h_b: Some(vec![Some(1), Some(1), None]),
                h_a: table(&[0, 1, 1, 1]),
            }],
            default_resolution: Resolution::Grid(vec![12, 12, 8]),
        },
        "flat-torus-flow" => CaseInfo {
            name: "flat-torus-flow",
            description: "flow on the flat torus (0,2]x[0,1) with dense leaves for 0<x<1 and circles for 1<=x<=2",
            backend: BackendKind::Grid,
            flags: flags(false, false, true, false),
            base: None,
            expected: vec![Expected {
                source: Published,
                h: table(&[1, 2, 1]),
                h_b: table(&[1, 1]),
                h_a: table(&[0, 1, 1]),
            }],
            default_resolution: Resolution::Grid(vec![64, 32]),
        },
        "t3-bump-flow" => CaseInfo {
            name: "t3-bump-flow",
            description: "non-Riemannian flow W = (f(x), sqrt(1-f(x)^2), 0) on the flat 3-torus",
            backend: BackendKind::Grid,
            flags: flags(false, false, true, false),
            base: None,
            expected: vec![Expected {
                source: Published,
                h: table(&[1, 3, 3, 1]),
                h_b: table(&[1, 1, 0]),
                h_a: table(&[0, 2, 3, 1]),
            }],
            default_resolution: Resolution::Grid(vec![16, 16, 8]),
        },
        "linear-flow-t3" => CaseInfo {
            name: "linear-flow-t3",
            description: "linear flow with rationally independent slopes on the flat 3-torus",
            backend: BackendKind::Grid,
            flags: flags(true, true, true, true),
            base: None,
            expected: vec![Expected {
                source: Derived,
                h: table(&[1, 3, 3, 1]),
                h_b: table(&[1, 2, 1]),
                h_a: table(&[0, 1, 2, 1]),
            }],
            default_resolution: Resolution::Grid(vec![8, 8, 8]),
        },
        _ => return None,
    })
}

pub fn case_names() -> Vec<String> {
    let mut out: Vec<String> = BASE_CASES.iter().map(|s| s.to_string()).collect();
    for b in BASE_CASES.iter().filter(|b| **b != "hopf") {
        out.push(format!("{b}-perturbed"));
    }
    out
}

pub fn lookup(name: &str) -> Option<CaseInfo> {
    if let Some(base) = name.strip_suffix("-perturbed") {
        let b = base_info(base)?;
        if b.backend != BackendKind::Grid {
            return None;
        }
        let base_name = BASE_CASES.iter().copied().find(|c| *c == base)?;
        return Some(CaseInfo {
            name: Box::leak(name.to_string().into_boxed_str()),
            description: "same foliation as the base case with a perturbed metric",
            // metric-dependent flags are not claimed for the perturbed metric
            flags: CaseFlags::default(),
            base: Some(base_name),
            ..b
        });
    }
    base_info(name)
}

pub fn catalog() -> Vec<CaseInfo> {
    case_names().iter().filter_map(|n| lookup(n)).collect()
}

impl CaseInfo {
    pub fn is_perturbed(&self) -> bool {
        self.base.is_some()
    }

    pub fn base_name(&self) -> &'static str {
        self.base.unwrap_or(self.name)
    }

    /// Resolution from an optional `--n` (grid) or `--jmax` (su2) override.
    pub fn resolution(&self, n: Option<usize>, jmax: Option<f64>) -> Result<Resolution, String> {
        match (self.backend, n, jmax) {
            (BackendKind::Su2, Some(_), _) => Err(format!("case {} takes --jmax, not --n", self.name)),
            (BackendKind::Grid, _, Some(_)) => Err(format!("case {} takes --n, not --jmax", self.name)),
            (BackendKind::Su2, None, Some(j)) => {
                if j < 1.0 || (2.0 * j).fract() != 0.0 {
                    return Err(format!("--jmax must be a half-integer >= 1, got {j}"));
                }
                Ok(Resolution::Su2 { jmax: j })
            }
            (_, None, None) => Ok(self.default_resolution.clone()),
            (BackendKind::Grid, Some(n), None) => self.grid_sizes(n).map(Resolution::Grid),
        }
    }

    /// Grid sizes for the scalar resolution parameter of each case.
    pub fn grid_sizes(&self, n: usize) -> Result<Vec<usize>, String> {
        let bad = |why: &str| Err(format!("--n {n} invalid for {}: {why}", self.name));
        match self.base_name() {
            "carriere" | "torus-bundle" => {
                if n < 2 || n % 2 != 0 {
                    return bad("N_t must be even and >= 2 (fiber size 3N_t/2)");
                }
                Ok(vec![3 * n / 2, 3 * n / 2, n])
            }
            "flat-torus-flow" | "t3-bump-flow" => {
                if n < 4 || n % 2 != 0 {
                    return bad("must be even and >= 4");
                }
                if self.base_name() == "flat-torus-flow" {
                    Ok(vec![n, n / 2])
                } else {
                    Ok(vec![n, n, n / 2])
                }
            }
            "linear-flow-t3" => {
                if n < 3 {
                    return bad("must be >= 3");
                }
                Ok(vec![n, n, n])
            }
            _ => bad("not a grid case"),
        }
    }

    /// Scalar resolution parameter of a grid resolution (inverse of `grid_sizes`).
    pub fn scalar_resolution(&self, sizes: &[usize]) -> usize {
        match self.base_name() {
            "carriere" | "torus-bundle" => sizes[2],
            _ => sizes[0],
        }
    }

    pub fn grid_spec(&self, sizes: &[usize]) -> Option<GridSpec> {
        let perturbed = self.is_perturbed();
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let plain = |size: usize, length: f64| AxisSpec { size, length, wrap: Wrap::Plain };
        let mut constants = BTreeMap::new();
        let spec = match self.base_name() {
            "carriere" => {
                let lambda = GOLDEN * GOLDEN;
                constants.insert("lambda".to_string(), lambda);
                constants.insert("phi".to_string(), GOLDEN);
                // λ^{2t} θ₁² + λ^{−2t} θ₂² + dt², θ₁ = (φ,1)/√5, θ₂ = (1/φ,−1)/√5
                let mut m = vec![
                    s(&["(lambda^(2*t)*phi^2 + lambda^(-2*t)/phi^2)/5", "(lambda^(2*t)*phi - lambda^(-2*t)/phi)/5", "0"]),
                    s(&["(lambda^(2*t)*phi - lambda^(-2*t)/phi)/5", "(lambda^(2*t) + lambda^(-2*t))/5", "0"]),
                    s(&["0", "0", "1"]),
                ];
                if perturbed {
                    // cross term c(t) = 0.3 sin(2πt) λ^t θ₁ is monodromy compatible
                    m[0][2] = "0.3*sin(2*pi*t)*lambda^t*phi/sqrt(5)".into();
                    m[1][2] = "0.3*sin(2*pi*t)*lambda^t/sqrt(5)".into();
                    m[2][0] = m[0][2].clone();
                    m[2][1] = m[1][2].clone();
                    m[2][2] = "1 + 0.2*sin(2*pi*t)".into();
                }
                GridSpec {
                    name: self.name.into(),
                    coords: s(&["u", "v", "t"]),
                    axes: vec![
                        plain(sizes[0], 1.0),
                        plain(sizes[1], 1.0),
                        AxisSpec { size: sizes[2], length: 1.0, wrap: Wrap::Monodromy { fiber: [0, 1], matrix: [[2, 1], [1, 1]] } },
                    ],
                    metric: MetricSpec::Entries(m),
                    frame: vec![s(&["1", "-phi", "0"])],
                    constants,
                    flags: self.flags,
                }
            }
            "torus-bundle" => {
                // orthonormal coframe e₁ = dx₁ − t dx₂, e₂ = dx₂, dt
                let m = if perturbed {
                    vec![
                        s(&["1 + 0.3*sin(pi*t)^2", "-t*(1 + 0.3*sin(pi*t)^2) + 0.2*sin(2*pi*t)", "0.1*sin(2*pi*t)"]),
                        s(&[
                            "-t*(1 + 0.3*sin(pi*t)^2) + 0.2*sin(2*pi*t)",
                            "t^2*(1 + 0.3*sin(pi*t)^2) - 0.4*t*sin(2*pi*t) + 1",
                            "0.1*cos(2*pi*t) - 0.1*t*sin(2*pi*t)",
                        ]),
                        s(&["0.1*sin(2*pi*t)", "0.1*cos(2*pi*t) - 0.1*t*sin(2*pi*t)", "1"]),
                    ]
                } else {
                    vec![s(&["1", "-t", "0"]), s(&["-t", "1 + t^2", "0"]), s(&["0", "0", "1"])]
                };
                GridSpec {
                    name: self.name.into(),
                    coords: s(&["x1", "x2", "t"]),
                    axes: vec![
                        plain(sizes[0], 1.0),
                        plain(sizes[1], 1.0),
                        AxisSpec { size: sizes[2], length: 1.0, wrap: Wrap::Monodromy { fiber: [0, 1], matrix: [[1, -1], [0, 1]] } },
                    ],
                    metric: MetricSpec::Entries(m),
                    frame: vec![s(&["0", "0", "1"])],
                    constants,
                    flags: self.flags,
                }
            }
            "flat-torus-flow" => {
                let f = "exp(1 - 2/(sin(pi*x) + abs(sin(pi*x))))";
                let metric = if perturbed {
                    MetricSpec::Entries(vec![
                        s(&["1 + 0.3*sin(pi*x)^2", "0.2*sin(pi*x)"]),
                        s(&["0.2*sin(pi*x)", "1 + 0.1*cos(pi*x)"]),
                    ])
                } else {
                    MetricSpec::Builtin("euclidean".into())
                };
                GridSpec {
                    name: self.name.into(),
                    coords: s(&["x", "y"]),
                    axes: vec![plain(sizes[0], 2.0), plain(sizes[1], 1.0)],
                    metric,
                    frame: vec![vec![f.to_string(), format!("sqrt(1 - {f}^2)")]],
                    constants,
                    flags: self.flags,
                }
            }
            "t3-bump-flow" => {
                let f = "exp(1 - 1/abs(sin(pi*x)))";
                let metric = if perturbed {
                    MetricSpec::Entries(vec![
                        s(&["1 + 0.25*sin(2*pi*x)^2", "0.1*cos(2*pi*x)", "0.15*sin(2*pi*x)"]),
                        s(&["0.1*cos(2*pi*x)", "1.2", "0"]),
                        s(&["0.15*sin(2*pi*x)", "0", "1 + 0.2*cos(2*pi*x)"]),
                    ])
                } else {
                    MetricSpec::Builtin("euclidean".into())
                };
                GridSpec {
                    name: self.name.into(),
                    coords: s(&["x", "y", "z"]),
                    axes: vec![plain(sizes[0], 1.0), plain(sizes[1], 1.0), plain(sizes[2], 1.0)],
                    metric,
                    frame: vec![vec![f.to_string(), format!("sqrt(1 - {f}^2)"), "0".into()]],
                    constants,
                    flags: self.flags,
                }
            }
            "linear-flow-t3" => {
                let metric = if perturbed {
                    MetricSpec::Entries(vec![
                        s(&["1 + 0.2*sin(2*pi*x)^2", "0.1*sin(2*pi*x)", "0"]),
                        s(&["0.1*sin(2*pi*x)", "1", "0.1*cos(2*pi*x)"]),
                        s(&["0", "0.1*cos(2*pi*x)", "1 + 0.3*sin(2*pi*x)^2"]),
                    ])
                } else {
                    MetricSpec::Builtin("euclidean".into())
                };
                GridSpec {
                    name: self.name.into(),
                    coords: s(&["x", "y", "z"]),
                    axes: vec![plain(sizes[0], 1.0), plain(sizes[1], 1.0), plain(sizes[2], 1.0)],
                    metric,
                    frame: vec![s(&["1", "sqrt(2)", "sqrt(3)"])],
                    constants,
                    flags: self.flags,
                }
            }
            _ => return None,
        };
        Some(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn catalog_contents() {
        let names = case_names();
        assert_eq!(names.len(), 11);
        assert!(lookup("hopf-perturbed").is_none());
        assert!(lookup("nope").is_none());
        let hopf = lookup("hopf").unwrap();
        assert_eq!(hopf.expected[0].h_a, table(&[0, 1, 0, 1]));
        let lin = lookup("linear-flow-t3").unwrap();
        assert_eq!(lin.expected[0].h_b, table(&[1, 2, 1]));
        assert_eq!(lin.expected[0].source, Source::Derived);
    }

    #[test]
    fn every_grid_case_builds() {
        for c in catalog() {
            if c.backend != BackendKind::Grid {
                continue;
            }
            let res = c.resolution(None, None).unwrap();
            let Resolution::Grid(sizes) = res else { unreachable!() };
            let g = build_grid(&c.grid_spec(&sizes).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", c.name));
            assert_eq!(g.sizes, sizes);
        }
    }

    #[test]
    fn resolution_overrides() {
        let c = lookup("carriere").unwrap();
        assert_eq!(c.resolution(Some(4), None).unwrap(), Resolution::Grid(vec![6, 6, 4]));
        assert!(c.resolution(Some(3), None).is_err());
        assert!(c.resolution(None, Some(2.0)).is_err());
        let h = lookup("hopf").unwrap();
        assert_eq!(h.resolution(None, Some(2.0)).unwrap(), Resolution::Su2 { jmax: 2.0 });
        assert!(h.resolution(Some(8), None).is_err());
        assert_eq!(lookup("t3-bump-flow").unwrap().grid_sizes(20).unwrap(), vec![20, 20, 10]);
    }
}
