//! Acceptance criteria. Runs without the libtest harness so that each
//! criterion prints exactly one PASS/FAIL line.
//!
//! A few criteria fail against the printed reference values. Those are
//! listed in `KNOWN_RED` with the exact failure keys; the run succeeds when
//! every other criterion passes and each red criterion fails on precisely the
//! listed keys.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::*;
use vopskit::index::{monomial_vector, MultiIndex};
use vopskit::koornwinder::{build_koornwinder_level, leading_transform, unit_lower_defect, KoornwinderSpec};
use vopskit::matrix::{leading_principal_minors, Matrix};
use vopskit::moments::{moment_matrix, simplex_moment_exact, MomentFunctional, Moments};
use vopskit::quadrature::QuadratureConfig;
use vopskit::relations::{
    agcl_residual, blcl_corrected_residual, compute_relation_set, polyvec_distance, recurrence_step, relation_residual,
    rrc_residual, verify_blcl, RelationOptions,
};
use vopskit::univariate::{monic_uops, Arcsine, FnMoments, UniMoments, UniPoly};
use vopskit::vops::{
    build_level, build_level_determinant, build_levels, pairing_matrix, verify_orthogonality, VopsLevel,
};
use vopskit::{Backend, BiPoly, Scalar};

const KNOWN_RED: &[(&str, &[&str])] = &[
    ("C4", &["P03 x1^1x2^0", "P03 x1^0x2^0"]),
    (
        "C5",
        &[
            "Lambda2[0][1]",
            "Lambda2[1][0]",
            "Lambda2[1][2]",
            "Lambda2[2][1]",
            "Upsilon2[0][0]",
            "Upsilon2[0][1]",
            "Upsilon2[0][2]",
            "Upsilon2[1][0]",
            "Upsilon2[1][1]",
            "Upsilon2[1][2]",
        ],
    ),
    ("C7", &["blcl rectangle", "blcl triangle", "blcl simplex"]),
];

#[derive(Default)]
struct Outcome {
    failures: BTreeSet<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn fail(&mut self, key: impl Into<String>) {
        self.failures.insert(key.into());
    }

    fn check(&mut self, ok: bool, key: impl Into<String>) {
        if !ok {
            self.fail(key);
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

fn f64_of(s: &Scalar) -> f64 {
    s.to_f64()
}

fn mi(i: i32, j: i32) -> MultiIndex {
    MultiIndex::new(i, j)
}

fn label(m: MultiIndex) -> String {
    format!("x1^{}x2^{}", m.i, m.j)
}

fn exact_poly(terms: &[(i32, i32, i64, i64)]) -> BiPoly {
    let e = Backend::Exact;
    BiPoly::from_terms(e, terms.iter().map(|&(i, j, n, d)| (mi(i, j), e.ratio(n, d)))).unwrap()
}

/// Compares every monomial present in either polynomial.
fn compare_decimal(out: &mut Outcome, name: &str, got: &BiPoly, printed: &[(i32, i32, f64)], tol: f64) {
    let mut keys: BTreeSet<MultiIndex> = got.terms().map(|(m, _)| *m).collect();
    keys.extend(printed.iter().map(|&(i, j, _)| mi(i, j)));
    for m in keys {
        let want = printed.iter().find(|&&(i, j, _)| mi(i, j) == m).map_or(0.0, |t| t.2);
        let have = f64_of(&got.coeff(m));
        if (have - want).abs() > tol {
            out.fail(format!("{name} {}", label(m)));
            out.note(format!("{name} {}: printed {want}, computed {have:.10}", label(m)));
        }
    }
}

fn sig8(a: f64, b: f64) -> bool {
    if b == 0.0 {
        return a.abs() <= 1e-30;
    }
    ((a - b) / b).abs() <= 5e-8
}

fn timed(out: &mut Outcome, start: Instant, limit: Duration) {
    let t = start.elapsed();
    out.note(format!("runtime {:.2}s (limit {}s)", t.as_secs_f64(), limit.as_secs()));
    out.check(t <= limit, "runtime");
}

// ---------------------------------------------------------------- criteria

fn c1() -> Outcome {
    let mut out = Outcome::default();
    let start = Instant::now();
    let e = Backend::Exact;
    let nu1 = Arcsine { backend: e, a: r(1, 4), b: r(4, 1) };
    let nu2 = Arcsine { backend: e, a: r(4, 9), b: r(9, 1) };
    #[rustfmt::skip]
    let p_table: &[(i32, usize, &[(i64, i64)])] = &[
        (1, 1, &[(-1, 1), (1, 1)]),
        (2, 1, &[(-8, 17), (1, 1)]),
        (2, 2, &[(1, 1), (-25, 8), (1, 1)]),
        (3, 1, &[(-272, 803), (1, 1)]),
        (3, 2, &[(16, 25), (-59, 25), (1, 1)]),
        (3, 3, &[(-1, 1), (75, 16), (-75, 16), (1, 1)]),
    ];
    #[rustfmt::skip]
    let q_table: &[(i32, usize, &[(i64, i64)])] = &[
        (1, 1, &[(-2, 1), (1, 1)]),
        (2, 1, &[(-72, 85), (1, 1)]),
        (2, 2, &[(4, 1), (-121, 18), (1, 1)]),
        (3, 1, &[(-4080, 6793), (1, 1)]),
        (3, 2, &[(288, 121), (-582, 121), (1, 1)]),
        (3, 3, &[(-8, 1), (121, 6), (-121, 12), (1, 1)]),
    ];
    for (name, nu, table) in [("p", &nu1, p_table), ("q", &nu2, q_table)] {
        for &(n, k, coeffs) in table {
            let shifted = FnMoments::new(e, |j| nu.nu(j - n));
            let got = monic_uops(&shifted, k).unwrap();
            let want = UniPoly::new(coeffs.iter().map(|&(a, b)| e.ratio(a, b)).collect()).unwrap();
            out.check(got == want, format!("{name}^({n})_{k}"));
        }
    }
    timed(&mut out, start, Duration::from_secs(1));
    out
}

fn table2() -> Vec<(&'static str, BiPoly)> {
    vec![
        ("P00", exact_poly(&[(0, 0, 1, 1)])),
        ("P10", exact_poly(&[(1, 0, 1, 1), (0, 0, -1, 1)])),
        ("P01", exact_poly(&[(0, 1, 1, 1), (0, 0, -2, 1)])),
        ("P20", exact_poly(&[(2, 0, 1, 1), (1, 0, -25, 8), (0, 0, 1, 1)])),
        ("P11", exact_poly(&[(1, 1, 1, 1), (1, 0, -72, 85), (0, 1, -8, 17), (0, 0, 576, 1445)])),
        ("P02", exact_poly(&[(0, 2, 1, 1), (0, 1, -121, 18), (0, 0, 4, 1)])),
        ("P30", exact_poly(&[(3, 0, 1, 1), (2, 0, -75, 16), (1, 0, 75, 16), (0, 0, -1, 1)])),
        (
            "P21",
            exact_poly(&[
                (2, 1, 1, 1),
                (2, 0, -4080, 6793),
                (1, 1, -59, 25),
                (1, 0, 48144, 33965),
                (0, 1, 16, 25),
                (0, 0, -13056, 33965),
            ]),
        ),
        (
            "P12",
            exact_poly(&[
                (1, 2, 1, 1),
                (1, 1, -582, 121),
                (0, 2, -272, 803),
                (1, 0, 288, 121),
                (0, 1, 158304, 97163),
                (0, 0, -78336, 97163),
            ]),
        ),
        ("P03", exact_poly(&[(0, 3, 1, 1), (0, 2, -121, 12), (0, 1, 121, 6), (0, 0, -8, 1)])),
    ]
}

fn entry_index(name: &str) -> (usize, usize) {
    let b = name.as_bytes();
    let i = (b[1] - b'0') as usize;
    let j = (b[2] - b'0') as usize;
    (i + j, j)
}

fn c2() -> Outcome {
    let mut out = Outcome::default();
    let start = Instant::now();
    let f = rectangle();
    let levels = build_levels(&f, 3).unwrap();
    for (name, want) in table2() {
        let (n, k) = entry_index(name);
        out.check(levels[n].p.entry(k) == &want, format!("{name} solve"));
        out.check(build_level_determinant(&f, n, k).unwrap() == want, format!("{name} determinant"));
    }
    timed(&mut out, start, Duration::from_secs(5));
    out
}

fn c3() -> Outcome {
    let mut out = Outcome::default();
    let start = Instant::now();
    let f = rectangle();
    let l3 = build_level(&f, 3).unwrap();
    let want = [(183411, 524288), (160083, 2717200), (60025, 194326), (94472147, 2985984)];
    for u in 0..4 {
        for v in 0..4 {
            let x = l3.lambda.get(u, v);
            if u == v {
                out.check(x.pi_exp() == 2, format!("Lambda3[{u}][{u}] pi exponent {}", x.pi_exp()));
                let (n, d) = want[u];
                out.check(x.as_rational() == Some(&r(n, d)), format!("Lambda3[{u}][{u}]"));
            } else {
                out.check(x.is_zero(), format!("Lambda3[{u}][{v}] off-diagonal"));
            }
        }
    }
    timed(&mut out, start, Duration::from_secs(5));
    out
}

#[rustfmt::skip]
fn table3() -> Vec<(&'static str, Vec<(i32, i32, f64)>)> {
    vec![
        ("P00", vec![(0, 0, 1.0)]),
        ("P10", vec![(1, 0, 1.0), (0, 0, -1.31041371)]),
        ("P01", vec![(0, 1, 1.0), (1, 0, 4.16034291), (0, 0, -8.32068582)]),
        ("P20", vec![(2, 0, 1.0), (1, 0, -2.78649820), (0, 0, 1.90208670)]),
        ("P11", vec![(1, 1, 1.0), (2, 0, 4.11932686), (1, 0, -13.3840858), (0, 1, -1.24909536), (0, 0, 10.2908642)]),
        ("P02", vec![(0, 2, 1.0), (1, 1, 8.18284423), (2, 0, 16.5699978), (1, 0, -66.2799910), (0, 1, -16.3656885), (0, 0, 66.2799910)]),
        ("P30", vec![(3, 0, 1.0), (2, 0, -4.37745730), (1, 0, 6.28003391), (0, 0, -2.95184419)]),
        ("P21", vec![(2, 1, 1.0), (3, 0, 4.07720565), (2, 0, -18.9879650), (1, 1, -2.65710257), (1, 0, 28.7424743),
                     (0, 1, 1.73534712), (0, 0, -14.1507342)]),
        ("P12", vec![(1, 2, 1.0), (2, 1, 8.13057120), (3, 0, 16.3546681), (2, 0, -85.1393062), (1, 1, -26.0650722),
                     (0, 2, -1.20581071), (1, 0, 144.301208), (0, 1, 19.6078596), (0, 0, -78.8825355)]),
        ("P03", vec![(0, 3, 1.0), (2, 1, 48.9437310), (1, 2, 12.1645735), (3, 0, 65.1198605), (2, 0, -390.719163),
                     (1, 1, -195.774924), (0, 2, -24.3291470), (1, 0, 781.4383265), (0, 1, 195.774924), (0, 0, -520.958883)]),
    ]
}

fn c4() -> Outcome {
    let mut out = Outcome::default();
    let start = Instant::now();
    let b = float50();
    let spec = KoornwinderSpec::from_weight(&triangle_spec()).unwrap();
    let cfg = QuadratureConfig::default();
    let levels: Vec<_> = (0..=3).map(|n| build_koornwinder_level(&spec, n, b, &cfg).unwrap()).collect();
    for (name, printed) in table3() {
        let (n, k) = entry_index(name);
        compare_decimal(&mut out, name, levels[n].entry(k), &printed, 5e-7);
    }
    let f = triangle();
    let lam = pairing_matrix(&f, &monomial_vector(2), &levels[2], 2).unwrap();
    let want = [
        [0.000144303270, 0.0, 0.0],
        [-0.00059443234, 0.000138244373, 0.0],
        [0.00247304236, -0.00113123217, 0.000759945541],
    ];
    for u in 0..3 {
        for v in 0..3 {
            out.check(sig8(f64_of(lam.get(u, v)), want[u][v]), format!("Lambda2[{u}][{v}]"));
        }
    }
    timed(&mut out, start, Duration::from_secs(30));
    out
}

#[rustfmt::skip]
fn table4() -> Vec<(&'static str, Vec<(i32, i32, f64)>)> {
    vec![
        ("P00", vec![(0, 0, 1.0)]),
        ("P10", vec![(1, 0, 1.0), (0, 0, -1.43796769)]),
        ("P01", vec![(0, 1, 1.0), (0, 0, -1.32696025)]),
        ("P20", vec![(2, 0, 1.0), (1, 0, -2.88799337), (0, 1, 0.00263767), (0, 0, 2.05644459)]),
        ("P11", vec![(1, 1, 1.0), (1, 0, -1.26099644), (0, 1, -1.35144600), (0, 0, 1.71293494)]),
        ("P02", vec![(0, 2, 1.0), (1, 0, 0.00131771), (0, 1, -2.70824586), (0, 0, 1.80864659)]),
        ("P30", vec![(3, 0, 1.0), (2, 0, -4.34366084), (1, 1, 0.00992183), (0, 2, 0.00014521), (1, 0, 6.21350091),
                     (0, 1, -0.01365970), (0, 0, -2.92734391)]),
        ("P21", vec![(2, 1, 1.0), (2, 0, -1.21564853), (1, 1, -2.74130572), (0, 2, 0.00177590), (1, 0, 3.34491332),
                     (0, 1, 1.85415301), (0, 0, -2.27334201)]),
        ("P12", vec![(1, 2, 1.0), (2, 0, 0.00091564), (1, 1, -2.58880086), (0, 2, -1.29133163), (1, 0, 1.65554061),
                     (0, 1, 3.35648957), (0, 0, -2.15629266)]),
        ("P03", vec![(0, 3, 1.0), (2, 0, 0.00006145), (1, 1, 0.00572113), (0, 2, -4.11853295), (1, 0, -0.00732316),
                     (0, 1, 5.58718398), (0, 0, -2.49732589)]),
    ]
}

fn c5() -> Outcome {
    let mut out = Outcome::default();
    let start = Instant::now();
    let f = simplex();
    let levels = build_levels(&f, 3).unwrap();
    for (name, printed) in table4() {
        let (n, k) = entry_index(name);
        compare_decimal(&mut out, name, levels[n].p.entry(k), &printed, 5e-7);
    }
    // the printed matrices correspond to the weight scaled to unit mass
    let g = simplex().normalized().unwrap();
    let l2 = build_level(&g, 2).unwrap();
    let lam = [
        [0.000263986510, 0.000143544887, 0.000089632056],
        [0.000143544887, 0.000157172682, 0.000132333688],
        [0.000089632057, 0.000132333688, 0.000214040951],
    ];
    let ups = [[0.000090452349, 0.000049064200, 0.000030587667], [0.000036048468, 0.000053277399, 0.000086301383]];
    let mut diag = Vec::new();
    for u in 0..3 {
        for v in 0..3 {
            let x = f64_of(l2.lambda.get(u, v));
            if !sig8(x, lam[u][v]) {
                out.fail(format!("Lambda2[{u}][{v}]"));
                diag.push(format!(
                    "Lambda2[{u}][{v}] printed {} computed {x:.9e} |.|-match {}",
                    lam[u][v],
                    sig8(x.abs(), lam[u][v].abs())
                ));
            }
        }
    }
    let up = l2.upsilon().unwrap();
    for u in 0..2 {
        for v in 0..3 {
            let x = f64_of(up.get(u, v));
            if !sig8(x, ups[u][v]) {
                out.fail(format!("Upsilon2[{u}][{v}]"));
                diag.push(format!(
                    "Upsilon2[{u}][{v}] printed {} computed {x:.9e} |.|-match against swapped row {}",
                    ups[u][v],
                    sig8(x.abs(), ups[1 - u][v].abs())
                ));
            }
        }
    }
    out.notes.extend(diag);
    timed(&mut out, start, Duration::from_secs(60));
    out
}

struct Example {
    name: &'static str,
    moments: Moments,
}

fn examples() -> Vec<Example> {
    vec![
        Example { name: "rectangle", moments: rectangle() },
        Example { name: "triangle", moments: triangle() },
        Example { name: "simplex", moments: simplex() },
    ]
}

fn within(s: &Scalar, exact: bool, tol: f64) -> bool {
    if exact {
        s.is_zero()
    } else {
        s.to_f64().abs() <= tol
    }
}

fn c6(ex: &[(Example, Vec<VopsLevel>)]) -> Outcome {
    let mut out = Outcome::default();
    for (e, levels) in ex {
        let exact = e.moments.backend().is_exact();
        let mut worst = 0.0f64;
        for l in &levels[..=4] {
            let res = verify_orthogonality(&e.moments, l).unwrap();
            worst = worst.max(res.to_f64().abs());
            out.check(within(&res, exact, 1e-38), format!("orthogonality {} n={}", e.name, l.degree));
        }
        out.note(format!("{} max residual {worst:.3e}", e.name));
    }
    out
}

fn c7(ex: &[(Example, Vec<VopsLevel>)]) -> Outcome {
    let mut out = Outcome::default();
    for (e, levels) in ex {
        let exact = e.moments.backend().is_exact();
        let tol = 1e-36;
        let mut blcl_worst = 0.0f64;
        let mut corrected_worst = 0.0f64;
        for n in 0..=3 {
            let set = compute_relation_set(levels, n, RelationOptions::default()).unwrap();
            for axis in [1u8, 2] {
                let rel = set.axis(axis);
                let tag = format!("{} n={n} axis={axis}", e.name);
                let id = relation_residual(levels, n, rel).unwrap().max_abs_coeff();
                out.check(within(&id, exact, tol), format!("identity {tag}"));
                out.check(within(&agcl_residual(rel, n).unwrap().max_abs(), exact, tol), format!("agcl {tag}"));
                if n == 0 {
                    continue;
                }
                out.check(within(&rrc_residual(levels, rel, n).unwrap().max_abs(), exact, tol), format!("rrc {tag}"));
                let un = levels[n].upsilon().unwrap();
                let up = levels[n - 1].upsilon().unwrap();
                let blcl = verify_blcl(rel, un, up).unwrap();
                blcl_worst = blcl_worst.max(blcl.to_f64().abs());
                if !within(&blcl, exact, tol) {
                    out.fail(format!("blcl {}", e.name));
                }
                let corrected = blcl_corrected_residual(&e.moments, &levels[n], rel, un, up).unwrap().max_abs();
                corrected_worst = corrected_worst.max(corrected.to_f64().abs());
                out.check(within(&corrected, exact, tol), format!("blcl-corrected {tag}"));
            }
        }
        out.note(format!(
            "{}: stated BLCL max |B Y_n^T + C Y_(n-1)^T| = {blcl_worst:.3e}; paired identity residual {corrected_worst:.3e}",
            e.name
        ));
    }
    out
}

fn c8(ex: &[(Example, Vec<VopsLevel>)]) -> Outcome {
    let mut out = Outcome::default();
    for (e, levels) in ex {
        let exact = e.moments.backend().is_exact();
        for n in 0..=3 {
            let tag = format!("{} n={n}", e.name);
            let set = compute_relation_set(levels, n, RelationOptions::default()).unwrap();
            out.check(set.joint_rank == n + 2, format!("rank {tag}"));
            let Ok(rec) = set.recurrence.as_ref() else {
                out.fail(format!("recurrence {tag}"));
                continue;
            };
            let id = rec
                .d1
                .transpose()
                .mul(&set.axis(1).a)
                .unwrap()
                .add(&rec.d2.transpose().mul(&set.axis(2).a).unwrap())
                .unwrap();
            let b = id.backend();
            let dev = id.sub(&Matrix::identity(b, n + 2)).unwrap().max_abs();
            out.check(within(&dev, exact, 1e-40), format!("left inverse {tag}"));
            let prev = if n > 0 { Some(&levels[n - 1].p) } else { None };
            let next = recurrence_step(prev, &levels[n].p, rec).unwrap();
            let dist = polyvec_distance(&next, &levels[n + 1].p).unwrap();
            out.check(within(&dist, exact, 1e-36), format!("reconstruction {tag}"));
        }
    }
    out
}

fn c9() -> Outcome {
    let mut out = Outcome::default();
    let f = rectangle();
    let (b1, b2) = (1i64, 2i64);
    for rr in -4..=3 {
        for s in -4..=3 {
            let lhs = f.mu(rr, s).unwrap();
            let p1 = 2 * rr + 1;
            let p2 = 2 * s + 1;
            let factor = Scalar::exact(pow_i(b1, p1) * pow_i(b2, p2), 0);
            let rhs = factor.mul(&f.mu(-(rr + 1), -(s + 1)).unwrap()).unwrap();
            out.check(lhs == rhs, format!("mu({rr},{s})"));
        }
    }
    out
}

fn pow_i(base: i64, e: i32) -> dashu_ratio::RBig {
    let b = r(base, 1);
    if e >= 0 {
        b.pow(e as usize)
    } else {
        dashu_ratio::RBig::ONE / b.pow((-e) as usize)
    }
}

fn c10(ex: &[(Example, Vec<VopsLevel>)]) -> Outcome {
    let mut out = Outcome::default();
    for (e, _) in ex {
        for n in 0..=4 {
            let minors = leading_principal_minors(&moment_matrix(&e.moments, n).unwrap()).unwrap();
            let full = minors.len() == moment_matrix(&e.moments, n).unwrap().rows();
            let positive = minors.iter().all(|m| m.signum() > 0);
            out.check(full && positive, format!("{} n={n}", e.name));
        }
    }
    out
}

fn c11(ex: &[(Example, Vec<VopsLevel>)]) -> Outcome {
    let mut out = Outcome::default();
    let spec = KoornwinderSpec::from_weight(&triangle_spec()).unwrap();
    let b = float50();
    let tol = b.tolerance(10);
    let (_, tri_levels) = ex.iter().find(|(e, _)| e.name == "triangle").unwrap();
    for n in 0..=3 {
        let k = build_koornwinder_level(&spec, n, b, &QuadratureConfig::default()).unwrap();
        let (g, residual) = leading_transform(&k, &tri_levels[n].p).unwrap();
        out.check(residual.to_f64().abs() <= tol * 1e3, format!("transform residual n={n}"));
        out.check(unit_lower_defect(&g).unwrap().to_f64() <= tol, format!("unit triangular n={n}"));
    }
    let quad = simplex();
    let mut worst = 0.0f64;
    for k in 0..=8 {
        for m in 0..=8 {
            let exact = simplex_moment_exact(3, 2, 1, &r(1, 1), &r(2, 1), k, m).unwrap();
            let q = quad.mu(k, m).unwrap();
            let diff = q.sub(&b.rational(&exact)).unwrap().to_f64().abs();
            worst = worst.max(diff);
            out.check(diff <= 1e-40, format!("simplex mu({k},{m})"));
        }
    }
    out.note(format!("exact vs quadrature max diff {worst:.3e}"));
    out
}

fn main() {
    let start = Instant::now();
    let built: Vec<(Example, Vec<VopsLevel>)> = examples()
        .into_iter()
        .map(|e| {
            let levels = build_levels(&e.moments, 4).unwrap();
            (e, levels)
        })
        .collect();
    let criteria: Vec<(&str, &str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("C1", "reference univariate polynomials (exact)", Box::new(c1)),
        ("C2", "rectangle reference VOPS, solve and determinant routes (exact)", Box::new(c2)),
        ("C3", "rectangle Lambda_3 diagonal over pi^2", Box::new(c3)),
        ("C4", "triangle reference VOPS via Koornwinder builder, Lambda_2", Box::new(c4)),
        ("C5", "shifted simplex reference VOPS, Lambda_2 and Upsilon_2", Box::new(c5)),
        ("C6", "orthogonality m < n <= 4, all examples", Box::new(|| c6(&built))),
        ("C7", "three-term relation identities n <= 3", Box::new(|| c7(&built))),
        ("C8", "joint rank, left inverse, recurrence reconstruction", Box::new(|| c8(&built))),
        ("C9", "rectangle moment reflection identity", Box::new(c9)),
        ("C10", "positive leading principal minors n <= 4", Box::new(|| c10(&built))),
        ("C11", "Koornwinder transform and simplex backend agreement", Box::new(|| c11(&built))),
    ];
    let mut unexpected = Vec::new();
    for (id, title, run) in criteria {
        let o = run();
        let status = if o.failures.is_empty() { "PASS" } else { "FAIL" };
        let expected: BTreeSet<String> = KNOWN_RED
            .iter()
            .find(|(k, _)| *k == id)
            .map(|(_, keys)| keys.iter().map(|s| s.to_string()).collect())
            .unwrap_or_default();
        let tag = match (o.failures.is_empty(), expected.is_empty()) {
            (true, true) => String::new(),
            (false, false) if o.failures == expected => " (known reference discrepancy)".into(),
            _ => {
                unexpected.push(id);
                " (UNEXPECTED)".into()
            }
        };
        println!("{status} {id}: {title}{tag}");
        for k in &o.failures {
            println!("    failed: {k}");
        }
        for n in &o.notes {
            println!("    {n}");
        }
    }
    println!("acceptance finished in {:.1}s", start.elapsed().as_secs_f64());
    if !unexpected.is_empty() {
        println!("unexpected outcomes: {unexpected:?}");
        std::process::exit(1);
    }
}
