//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! Every case is computed once per (resolution, tolerance) and shared.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use folcoh::catalog::{case_names, lookup, CaseInfo, Resolution};
use folcoh::cohomology::{BettiNumbers, Engine};
use folcoh::foliation::{FoliationPackage, DEFAULT_REL_TOL};
use folcoh::grid::build_grid;
use folcoh::grid_space::GridSpace;
use folcoh::identities::{
    b_intertwining, convergence_suite, exact_suite, grid_continuum_residuals, machine_suite, EXACT_D2_TOL, EXACT_SAMPLES,
    EXACT_TOL,
};
use folcoh::properties::{property_checks, PropertyResult, Status};
use folcoh::report::{run_case, RunConfig, Suite};
use folcoh::space::{add, norm, FormSpace};
use folcoh::su2::build_su2;

const BASE: [&str; 6] = ["hopf", "carriere", "torus-bundle", "flat-torus-flow", "t3-bump-flow", "linear-flow-t3"];
const GRID_BASE: [&str; 5] = ["carriere", "torus-bundle", "flat-torus-flow", "t3-bump-flow", "linear-flow-t3"];

struct Computed {
    betti: BettiNumbers,
    props: Vec<PropertyResult>,
    /// Worst recomposition and orthogonality residuals of the Hodge split.
    hodge: (f64, f64),
    secs: f64,
}

fn hodge_residuals<S: FormSpace>(engine: &Engine<'_, '_, S>) -> (f64, f64) {
    let pkg = engine.pkg;
    let s = pkg.space;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut recomp, mut orth) = (0.0f64, 0.0f64);
    for k in 0..=pkg.n() {
        for _ in 0..3 {
            let x = pkg.pa(k, &s.random(k, &mut rng));
            let xn = norm(s, k, &x);
            if xn == 0.0 {
                continue;
            }
            let parts = engine.hodge_decompose(k, &x).expect("antibasic input");
            let sum = add(s, &add(s, &parts.harmonic, &parts.coexact), &parts.exact);
            let mut diff = sum;
            s.axpy(-1.0, &x, &mut diff);
            recomp = recomp.max(norm(s, k, &diff) / xn);
            let pieces = [&parts.harmonic, &parts.coexact, &parts.exact];
            for i in 0..3 {
                for j in i + 1..3 {
                    orth = orth.max(s.inner(k, pieces[i], pieces[j]).abs() / (xn * xn));
                }
            }
        }
    }
    (recomp, orth)
}

fn compute_with<S: FormSpace>(s: &S, info: &CaseInfo, tol: f64, t0: Instant) -> Result<Computed, String> {
    let pkg = FoliationPackage::derive(s, tol).map_err(|e| e.to_string())?;
    let engine = Engine::new(&pkg).map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    Ok(Computed {
        betti: engine.betti().clone(),
        props: property_checks(&engine, &info.flags, None),
        hodge: hodge_residuals(&engine),
        secs,
    })
}

fn grid_space(info: &CaseInfo, sizes: &[usize]) -> GridSpace {
    GridSpace::new(build_grid(&info.grid_spec(sizes).unwrap()).unwrap()).unwrap()
}

#[derive(Default)]
struct Cache(BTreeMap<(String, String, u64), Result<Computed, String>>);

impl Cache {
    fn get(&mut self, case: &str, res: &Resolution, tol: f64) -> Result<&Computed, String> {
        let key = (case.to_string(), res.describe(), tol.to_bits());
        if !self.0.contains_key(&key) {
            let info = lookup(case).unwrap();
            let t0 = Instant::now();
            let r = match res {
                Resolution::Su2 { jmax } => compute_with(&build_su2(*jmax, [1.0; 3]).unwrap(), &info, tol, t0),
                Resolution::Grid(sizes) => compute_with(&grid_space(&info, sizes), &info, tol, t0),
            };
            self.0.insert(key.clone(), r);
        }
        self.0[&key].as_ref().map_err(|e| e.clone())
    }

    fn at_default(&mut self, case: &str) -> Result<&Computed, String> {
        let res = lookup(case).unwrap().default_resolution;
        self.get(case, &res, DEFAULT_REL_TOL)
    }
}

fn grid(sizes: &[usize]) -> Resolution {
    Resolution::Grid(sizes.to_vec())
}

struct Verdict {
    ok: bool,
    notes: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Verdict { ok: true, notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, note: String) {
        if !ok {
            self.ok = false;
            self.notes.push(format!("FAILED {note}"));
        } else {
            self.notes.push(note);
        }
    }

    fn error(&mut self, e: String) {
        self.ok = false;
        self.notes.push(format!("ERROR {e}"));
    }
}

fn expect_tables(v: &mut Verdict, label: &str, b: &BettiNumbers, h: Option<&[usize]>, h_b: Option<&[usize]>, h_a: Option<&[usize]>) {
    if let Some(h) = h {
        v.check(b.h == h, format!("{label} h={:?} want {:?}", b.h, h));
    }
    if let Some(h_b) = h_b {
        v.check(b.h_b == h_b, format!("{label} h_b={:?} want {:?}", b.h_b, h_b));
    }
    if let Some(h_a) = h_a {
        v.check(b.h_a_rank == h_a, format!("{label} h_a={:?} want {:?}", b.h_a_rank, h_a));
    }
}

fn prop_passed(v: &mut Verdict, label: &str, props: &[PropertyResult], name: &str) {
    match props.iter().find(|p| p.name == name) {
        Some(p) => v.check(p.status == Status::Passed, format!("{label} {name} {:?}", p.status)),
        None => v.error(format!("{label} missing property {name}")),
    }
}

fn c1(cache: &mut Cache) -> Verdict {
    let mut v = Verdict::new();
    for j in [3.0, 2.0] {
        match cache.get("hopf", &Resolution::Su2 { jmax: j }, DEFAULT_REL_TOL) {
            Ok(c) => {
                expect_tables(&mut v, &format!("J={j}"), &c.betti, None, Some(&[1, 0, 1]), Some(&[0, 1, 0, 1]));
                if j == 3.0 {
                    v.check(c.secs < 30.0, format!("{:.2} s < 30 s", c.secs));
                }
            }
            Err(e) => v.error(e),
        }
    }
    v
}

fn c2(cache: &mut Cache) -> Verdict {
    let mut v = Verdict::new();
    for (sizes, timed) in [(vec![16, 16, 8], true), (vec![20, 20, 10], false)] {
        match cache.get("t3-bump-flow", &grid(&sizes), DEFAULT_REL_TOL) {
            Ok(c) => {
                expect_tables(&mut v, &format!("{sizes:?}"), &c.betti, Some(&[1, 3, 3, 1]), Some(&[1, 1, 0]), Some(&[0, 2, 3, 1]));
                if timed {
                    v.check(c.secs < 300.0, format!("{:.1} s < 300 s", c.secs));
                }
            }
            Err(e) => v.error(e),
        }
    }
    v
}

fn c3(cache: &mut Cache) -> Verdict {
    let mut v = Verdict::new();
    match cache.get("flat-torus-flow", &grid(&[64, 32]), DEFAULT_REL_TOL) {
        Ok(c) => {
            expect_tables(&mut v, "64x32", &c.betti, Some(&[1, 2, 1]), Some(&[1, 1]), Some(&[0, 1, 1]));
            v.check(c.secs < 180.0, format!("{:.1} s < 180 s", c.secs));
        }
        Err(e) => v.error(e),
    }
    v
}

fn c4(cache: &mut Cache) -> Verdict {
    let mut v = Verdict::new();
    match cache.get("torus-bundle", &grid(&[12, 12, 8]), DEFAULT_REL_TOL) {
        Ok(c) => {
            expect_tables(&mut v, "12x12x8", &c.betti, None, None, Some(&[0, 1, 1, 1]));
            v.check(c.betti.h_b[0] == 1 && c.betti.h_b[1] == 1, format!("h_b^0,h_b^1 = {},{}", c.betti.h_b[0], c.betti.h_b[1]));
        }
        Err(e) => v.error(e),
    }
    let info = lookup("torus-bundle").unwrap();
    let dims: Vec<usize> = [4, 6, 8]
        .iter()
        .map(|&nt| {
            let s = grid_space(&info, &info.grid_sizes(nt).unwrap());
            FoliationPackage::derive(&s, DEFAULT_REL_TOL).map(|p| p.basic_dim(2)).unwrap_or(0)
        })
        .collect();
    v.check(dims.windows(2).all(|w| w[1] > w[0]), format!("dim basic 2-forms over N_t=4,6,8: {dims:?}"));
    v
}

fn c5(cache: &mut Cache) -> Verdict {
    let mut v = Verdict::new();
    match cache.at_default("carriere") {
        Ok(c) => {
            expect_tables(&mut v, "12x12x8", &c.betti, None, Some(&[1, 1, 0]), None);
            prop_passed(&mut v, "carriere", &c.props, "direct_sum");
            prop_passed(&mut v, "carriere", &c.props, "poincare_duality");
        }
        Err(e) => v.error(e),
    }
    let cfg = RunConfig::new("carriere", None, None, DEFAULT_REL_TOL, Suite::Betti, 0).unwrap();
    let report = run_case(&cfg);
    let flagged = report.discrepancies.iter().any(|d| d.source == folcoh::catalog::Source::Published);
    v.check(flagged, format!("published-table discrepancies flagged: {}", report.discrepancies.len()));
    v.check(report.exit_code == 0 || report.exit_code == 3, format!("exit {}", report.exit_code));
    v
}

fn c6(cache: &mut Cache) -> Verdict {
    let mut v = Verdict::new();
    match cache.get("linear-flow-t3", &grid(&[8, 8, 8]), DEFAULT_REL_TOL) {
        Ok(c) => {
            let b = &c.betti;
            expect_tables(&mut v, "8^3", b, None, Some(&[1, 2, 1]), Some(&[0, 1, 2, 1]));
            v.check((0..=2).all(|r| b.h_a_rank[r + 1] == b.h_b[r]), format!("h_a^(r+1) = h_b^r: {:?} {:?}", b.h_a_rank, b.h_b));
        }
        Err(e) => v.error(e),
    }
    v
}

fn exact_on<S: FormSpace>(v: &mut Verdict, name: &str, s: &S) {
    let pkg = match FoliationPackage::derive(s, DEFAULT_REL_TOL) {
        Ok(p) => p,
        Err(e) => return v.error(format!("{name}: {e}")),
    };
    let results = exact_suite(&pkg, 7, EXACT_SAMPLES);
    let d2 = results.iter().find(|r| r.name == "d_squared").map(|r| r.residual).unwrap_or(f64::INFINITY);
    let worst = results.iter().filter(|r| r.name != "d_squared").fold(0.0f64, |m, r| m.max(r.residual));
    v.check(d2 <= EXACT_D2_TOL && worst <= EXACT_TOL, format!("{name}: d^2 {d2:.1e}, others {worst:.1e}"));
}

fn c7(_: &mut Cache) -> Verdict {
    let mut v = Verdict::new();
    for name in case_names() {
        let info = lookup(&name).unwrap();
        match info.default_resolution.clone() {
            Resolution::Su2 { jmax } => exact_on(&mut v, &name, &build_su2(jmax, [1.0; 3]).unwrap()),
            Resolution::Grid(sizes) => exact_on(&mut v, &name, &grid_space(&info, &sizes)),
        }
    }
    v
}

fn c8(_: &mut Cache) -> Verdict {
    let mut v = Verdict::new();
    let s = build_su2(3.0, [1.0; 3]).unwrap();
    let pkg = FoliationPackage::derive(&s, DEFAULT_REL_TOL).unwrap();
    match machine_suite(&pkg, 5, 8) {
        Ok(r) => {
            let worst = r.iter().fold(0.0f64, |m, x| m.max(x.residual));
            v.check(r.iter().all(|x| x.passed), format!("hopf machine residuals <= {worst:.1e}"));
        }
        Err(e) => v.error(e.to_string()),
    }
    for name in BASE.iter().filter(|c| lookup(c).unwrap().flags.riemannian && **c != "hopf") {
        let info = lookup(name).unwrap();
        let Resolution::Grid(sizes) = info.default_resolution.clone() else { continue };
        let n = info.scalar_resolution(&sizes);
        let coarse = grid_space(&info, &info.grid_sizes(n / 2).unwrap());
        let fine = grid_space(&info, &sizes);
        let cp = FoliationPackage::derive(&coarse, DEFAULT_REL_TOL).unwrap();
        let fp = FoliationPackage::derive(&fine, DEFAULT_REL_TOL).unwrap();
        let rc = grid_continuum_residuals(&cp, 5, 8).unwrap();
        let rf = grid_continuum_residuals(&fp, 5, 8).unwrap();
        let r = convergence_suite(&rc, &rf);
        let bad: Vec<&str> = r.iter().filter(|x| !x.passed).map(|x| x.name.as_str()).collect();
        let worst = r.iter().fold(0.0f64, |m, x| m.max(x.residual));
        v.check(bad.is_empty() && r.len() == 11, format!("{name} N={}->{n}: worst {worst:.1e} failing {bad:?}", n / 2));
    }
    v
}

fn c9(cache: &mut Cache) -> Verdict {
    let mut v = Verdict::new();
    for name in case_names() {
        match cache.at_default(&name) {
            Ok(c) => {
                let b = &c.betti;
                v.check(b.h_a_rank == b.h_a_harmonic, format!("{name} rank {:?} harmonic {:?}", b.h_a_rank, b.h_a_harmonic));
                v.check(c.hodge.0 <= 1e-10 && c.hodge.1 <= 1e-10, format!("{name} hodge {:.1e}/{:.1e}", c.hodge.0, c.hodge.1));
            }
            Err(e) => v.error(format!("{name}: {e}")),
        }
    }
    v
}

fn c10(cache: &mut Cache) -> Verdict {
    let mut v = Verdict::new();
    for name in GRID_BASE {
        let pert = format!("{name}-perturbed");
        let a = cache.at_default(name).map(|c| c.betti.clone());
        let b = cache.at_default(&pert).map(|c| c.betti.clone());
        match (a, b) {
            (Ok(a), Ok(b)) => v.check(
                a.h == b.h && a.h_b == b.h_b && a.h_a_rank == b.h_a_rank,
                format!("{name}: h_b {:?}/{:?} h_a {:?}/{:?}", a.h_b, b.h_b, a.h_a_rank, b.h_a_rank),
            ),
            (Err(e), _) | (_, Err(e)) => v.error(format!("{name}: {e}")),
        }
        let info = lookup(name).unwrap();
        let pinfo = lookup(&pert).unwrap();
        let Resolution::Grid(sizes) = info.default_resolution.clone() else { continue };
        let r = b_intertwining(&grid_space(&info, &sizes), &grid_space(&pinfo, &sizes), 3, 4).unwrap_or(f64::INFINITY);
        v.check(r <= 1e-10, format!("{name} B {r:.1e}"));
    }
    v
}

fn c11(cache: &mut Cache) -> Verdict {
    let mut v = Verdict::new();
    for name in case_names() {
        let info = lookup(&name).unwrap();
        let c = match cache.at_default(&name) {
            Ok(c) => c,
            Err(e) => {
                v.error(format!("{name}: {e}"));
                continue;
            }
        };
        prop_passed(&mut v, &name, &c.props, "top_degree_agreement");
        if info.flags.riemannian {
            prop_passed(&mut v, &name, &c.props, "connected_degree_zero");
            prop_passed(&mut v, &name, &c.props, "degree_one_bound");
        }
        match name.as_str() {
            "hopf" => {
                prop_passed(&mut v, &name, &c.props, "vanishing_h1_forces_h_a1");
                v.check(c.betti.h_a_rank[1] == 1, format!("hopf h_a^1 = {}", c.betti.h_a_rank[1]));
            }
            "carriere" => {
                prop_passed(&mut v, &name, &c.props, "nontaut_kills_h_a1");
                v.check(c.betti.h_a_rank[1] == 0, format!("carriere h_a^1 = {}", c.betti.h_a_rank[1]));
            }
            _ => {}
        }
    }
    v
}

fn c12(cache: &mut Cache) -> Verdict {
    let mut v = Verdict::new();
    for name in BASE {
        let res = lookup(name).unwrap().default_resolution;
        let base = match cache.get(name, &res, DEFAULT_REL_TOL) {
            Ok(c) => c.betti.clone(),
            Err(e) => {
                v.error(format!("{name}: {e}"));
                continue;
            }
        };
        for f in [10.0, 0.1] {
            match cache.get(name, &res, DEFAULT_REL_TOL * f) {
                Ok(c) => v.check(
                    c.betti.h == base.h && c.betti.h_b == base.h_b && c.betti.h_a_rank == base.h_a_rank,
                    format!("{name} tau x{f}"),
                ),
                Err(e) => v.error(format!("{name} tau x{f}: {e}")),
            }
        }
    }
    v
}

fn main() -> ExitCode {
    let criteria: [(&str, fn(&mut Cache) -> Verdict); 12] = [
        ("hopf Betti numbers and truncation stability", c1),
        ("t3-bump-flow published tables and stability", c2),
        ("flat-torus-flow tables", c3),
        ("torus-bundle h_a and basic dimension growth", c4),
        ("carriere h_b, direct sum, duality, discrepancy flag", c5),
        ("linear-flow-t3 tables and chi-wedge equality", c6),
        ("exact identities on every case", c7),
        ("continuum identities", c8),
        ("rank/harmonic agreement and Hodge decomposition", c9),
        ("metric independence and B intertwining", c10),
        ("structural bounds", c11),
        ("threshold robustness", c12),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut cache = Cache::default();
    let t0 = Instant::now();
    let mut failed = 0;
    for (i, (title, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let v = f(&mut cache);
        if !v.ok {
            failed += 1;
        }
        println!(
            "criterion {:>2}: {}  {} ({:.1} s)",
            i + 1,
            if v.ok { "PASS" } else { "FAIL" },
            title,
            start.elapsed().as_secs_f64()
        );
        for n in &v.notes {
            println!("    {n}");
        }
    }
    println!("acceptance: {failed} failing, {:.1} s total", t0.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
