//! Independent reference implementations checked against the library.

use lorentz_core::billiard::{sample_mu_bar, sample_uniform_free};
use lorentz_core::constants::{
    compute_j, discrete_sum_a20, discrete_sum_a20_exact, discrete_sum_j, discrete_sum_j_exact, sample_shifts,
};
use lorentz_core::intersect::{
    count_brute, count_continuous, count_grid, count_v_hat, count_v_hat_brute, max_segment_length, tally_grid,
    StreamingCounter,
};
use lorentz_core::rng::{self, Purpose};
use lorentz_core::stats::{kurtosis, mean};
use lorentz_core::{
    generate, geometry::segments_intersect, BilliardTable, IntersectionReport, Execution, Segment, TableSpec, Trajectory, Vec2,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng;
use std::collections::BTreeMap;
use std::sync::OnceLock;

const J_REFERENCE: f64 = 1.171_953_619_344_73;

fn table() -> &'static BilliardTable {
    static T: OnceLock<BilliardTable> = OnceLock::new();
    T.get_or_init(|| BilliardTable::from_spec(&TableSpec::reference(), 7).unwrap())
}

fn orbit(n: usize, replica: u64) -> Trajectory {
    let mut r = rng::stream(99, Purpose::Test, replica);
    let p0 = sample_mu_bar(table(), &mut r);
    generate(table(), &p0, n).unwrap()
}

// Exact closed-segment predicate on rationals.

fn q(x: f64) -> BigRational {
    BigRational::from_float(x).unwrap()
}

type P = (BigRational, BigRational);

fn qp(v: Vec2) -> P {
    (q(v.x), q(v.y))
}

fn orient(a: &P, b: &P, c: &P) -> i32 {
    let v = (&b.0 - &a.0) * (&c.1 - &a.1) - (&b.1 - &a.1) * (&c.0 - &a.0);
    if v.is_zero() {
        0
    } else if v.is_positive() {
        1
    } else {
        -1
    }
}

fn in_box(a: &P, b: &P, c: &P) -> bool {
    let (lx, hx) = if a.0 <= b.0 { (&a.0, &b.0) } else { (&b.0, &a.0) };
    let (ly, hy) = if a.1 <= b.1 { (&a.1, &b.1) } else { (&b.1, &a.1) };
    *lx <= c.0 && c.0 <= *hx && *ly <= c.1 && c.1 <= *hy
}

fn exact_intersect(s: &Segment, t: &Segment) -> bool {
    let (a, b, c, d) = (qp(s.a), qp(s.b), qp(t.a), qp(t.b));
    let o1 = orient(&a, &b, &c);
    let o2 = orient(&a, &b, &d);
    let o3 = orient(&c, &d, &a);
    let o4 = orient(&c, &d, &b);
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    (o1 == 0 && in_box(&a, &b, &c))
        || (o2 == 0 && in_box(&a, &b, &d))
        || (o3 == 0 && in_box(&c, &d, &a))
        || (o4 == 0 && in_box(&c, &d, &b))
}

#[test]
fn segment_predicate_matches_exact_arithmetic_on_random_pairs() {
    let mut r = rng::stream(1, Purpose::Test, 0);
    let mut hits = 0;
    for _ in 0..10_000 {
        let mut p = || Vec2::new(r.random::<f64>(), r.random::<f64>());
        let s = Segment::new(p(), p());
        let t = Segment::new(p(), p());
        let want = exact_intersect(&s, &t);
        hits += want as u32;
        assert_eq!(segments_intersect(&s, &t), want, "{s:?} {t:?}");
    }
    assert!(hits > 1000 && hits < 9000);
}

#[test]
fn segment_predicate_matches_exact_arithmetic_on_lattice_pairs() {
    // Small integer coordinates produce touching, collinear and T cases.
    let mut r = rng::stream(2, Purpose::Test, 0);
    for _ in 0..10_000 {
        let mut p = || Vec2::new(r.random_range(0..4) as f64, r.random_range(0..4) as f64);
        let s = Segment::new(p(), p());
        let t = Segment::new(p(), p());
        if s.length() == 0.0 || t.length() == 0.0 {
            continue;
        }
        assert_eq!(segments_intersect(&s, &t), exact_intersect(&s, &t), "{s:?} {t:?}");
    }
}

fn counts(r: &IntersectionReport) -> [u64; 5] {
    [r.n, r.v_n, r.transversal, r.v_t, r.degenerate_events]
}

fn ordered_pairs_oracle(segs: &[Segment]) -> (u64, u64) {
    let mut v = segs.len() as u64;
    let mut transversal = 0;
    for j in 0..segs.len() {
        for k in j + 1..segs.len() {
            if exact_intersect(&segs[j], &segs[k]) {
                v += 2;
                if k >= j + 2 {
                    transversal += 1;
                }
            }
        }
    }
    (v, transversal)
}

#[test]
fn counters_match_exact_pair_oracle_on_orbits() {
    for rep in 0..8 {
        let tr = orbit(300, rep);
        let segs = tr.segments();
        let (v, transversal) = ordered_pairs_oracle(&segs);
        let brute = count_brute(&segs);
        let grid = count_grid(&segs, max_segment_length(&segs)).unwrap();
        assert_eq!((brute.v_n, brute.transversal), (v, transversal));
        assert_eq!((grid.v_n, grid.transversal), (v, transversal));
        assert_eq!(brute.degenerate_events, 0);
    }
}

#[test]
fn grid_brute_and_streaming_agree_across_cell_sizes() {
    for rep in 0..6 {
        let tr = orbit(1500, 100 + rep);
        let segs = tr.segments();
        let brute = count_brute(&segs);
        let l = max_segment_length(&segs);
        for cs in [l / 2.0, l, 2.0 * l, 0.25] {
            for mode in [Execution::Sequential, Execution::Parallel] {
                let t = tally_grid(&segs, cs, mode).unwrap();
                assert_eq!(counts(&t.full()), counts(&brute), "cell size {cs}");
            }
            let mut s = StreamingCounter::new(cs).unwrap();
            s.push_block(&segs);
            let r = s.report();
            assert_eq!(counts(&r), counts(&brute));
        }
    }
}

#[test]
fn prefix_counts_match_recounting() {
    let tr = orbit(600, 300);
    let segs = tr.segments();
    let tally = tally_grid(&segs, 0.25, Execution::Sequential).unwrap();
    for m in [1, 2, 3, 10, 77, 300, 599, 600] {
        assert_eq!(tally.prefix(m).v_n, count_brute(&segs[..m]).v_n, "m = {m}");
    }
}

#[test]
fn counts_are_invariant_under_lattice_translation() {
    let tr = orbit(800, 400);
    let segs = tr.segments();
    let base = count_brute(&segs);
    for shift in [Vec2::new(1.0, 0.0), Vec2::new(-3.0, 7.0), Vec2::new(250.0, -41.0)] {
        let moved: Vec<Segment> = segs.iter().map(|s| s.translate(shift)).collect();
        assert_eq!(counts(&count_grid(&moved, 0.25).unwrap()), counts(&base));
    }
}

#[test]
fn continuous_count_at_full_duration_is_twice_transversal() {
    for rep in 0..10 {
        let tr = orbit(700, 500 + rep);
        let full = count_brute(&tr.segments());
        assert_eq!(count_continuous(&tr, tr.duration()).unwrap(), 2 * full.transversal);
    }
}

#[test]
fn continuous_count_matches_brute_on_truncated_paths() {
    let tr = orbit(400, 600);
    let mut r = rng::stream(3, Purpose::Test, 0);
    for _ in 0..8 {
        let t = r.random::<f64>() * tr.duration();
        let segs = tr.segments_up_to(t).unwrap();
        let (_, transversal) = ordered_pairs_oracle(&segs);
        assert_eq!(count_continuous(&tr, t).unwrap(), 2 * transversal);
    }
}

#[test]
fn reflections_before_matches_linear_scan() {
    let tr = orbit(200, 700);
    let times = tr.times();
    let mut r = rng::stream(4, Purpose::Test, 0);
    let mut probes: Vec<f64> = (0..500).map(|_| r.random::<f64>() * tr.duration()).collect();
    probes.extend_from_slice(&times);
    for t in probes {
        let scan = times.iter().skip(1).take_while(|&&s| s <= t).count();
        assert_eq!(tr.reflections_before(t).unwrap(), scan, "t = {t}");
    }
    assert!(tr.reflections_before(tr.duration() + 1.0).is_err());
}

#[test]
fn v_hat_matches_pairwise_count() {
    for rep in 0..5 {
        let tr = orbit(3000, 800 + rep);
        let n = tr.len();
        let mut pairs = 0u64;
        for a in &tr.records[..n] {
            for b in &tr.records[..n] {
                pairs += u64::from(a.obstacle == b.obstacle && a.cell == b.cell);
            }
        }
        assert_eq!(count_v_hat(&tr), pairs);
        assert_eq!(count_v_hat_brute(&tr), pairs);
        assert!(pairs >= n as u64);
    }
}

// First collision by scanning every disk copy in a window of cells.
fn brute_first_hit(t: &BilliardTable, q0: Vec2, v: Vec2) -> (f64, usize, [i64; 2]) {
    let w = t.tau_max_bound().ceil() as i64 + 2;
    let mut best = (f64::INFINITY, usize::MAX, [0, 0]);
    for (i, d) in t.disks().iter().enumerate() {
        for ox in -w..=w {
            for oy in -w..=w {
                let c = d.center + Vec2::new(ox as f64, oy as f64);
                let rel = c - q0;
                let b = rel.dot(v);
                let disc = b * b - (rel.norm2() - d.radius * d.radius);
                if disc < 0.0 {
                    continue;
                }
                let s = b - disc.sqrt();
                if s > 1e-9 && s < best.0 {
                    best = (s, i, [ox, oy]);
                }
            }
        }
    }
    best
}

#[test]
fn fly_to_boundary_matches_window_scan() {
    let t = table();
    let mut r = rng::stream(5, Purpose::Test, 0);
    for _ in 0..2000 {
        let (q0, v) = sample_uniform_free(t, &mut r);
        let (p, dist) = t.fly_to_boundary(q0, v).unwrap();
        let (want, disk, cell) = brute_first_hit(t, q0, v);
        assert!((dist - want).abs() < 1e-9, "{dist} vs {want}");
        assert_eq!((p.disk, p.cell), (disk, cell));
        let hit = t.lifted_position(&p);
        assert!((hit - (q0 + v * dist)).norm() < 1e-9);
    }
}

#[test]
fn consecutive_reflections_match_window_scan() {
    let t = table();
    let tr = orbit(2000, 900);
    for w in tr.records.windows(2) {
        let p = w[0].position;
        let local = p - Vec2::new(p.x.floor(), p.y.floor());
        let (want, disk, _) = brute_first_hit(t, local, w[0].velocity);
        assert!((w[0].flight_to_next - want).abs() < 1e-9, "{} vs {want} at {:?}", w[0].flight_to_next, w[0]);
        assert_eq!(w[1].obstacle, disk);
    }
}

#[test]
fn free_area_and_mean_free_path_identities() {
    let t = table();
    let covered: f64 = t.disks().iter().map(|d| std::f64::consts::PI * d.radius * d.radius).sum();
    assert!((t.free_area() - (1.0 - covered)).abs() < 1e-15);
    assert!((t.free_area() - 0.238_164).abs() < 1e-6);
    let perimeter: f64 = t.disks().iter().map(|d| std::f64::consts::TAU * d.radius).sum();
    assert!((t.total_perimeter() - perimeter).abs() < 1e-15);
    assert!((t.mean_free_path() - std::f64::consts::PI * t.free_area() / perimeter).abs() < 1e-15);
}

#[test]
fn shift_matches_lifted_positions() {
    let t = table();
    for rep in 0..20 {
        let tr = orbit(500, 1000 + rep);
        let offset = |k: usize| {
            let rec = &tr.records[k];
            let d = rec.position - t.disks()[rec.obstacle].center;
            [d.x.round() as i64, d.y.round() as i64]
        };
        let o0 = offset(0);
        for k in 0..tr.records.len() {
            let ok = offset(k);
            assert_eq!(tr.records[k].cell, [ok[0] - o0[0], ok[1] - o0[1]], "k = {k}");
        }
    }
}

#[test]
fn mu_bar_sampling_moments() {
    let t = table();
    let n = 1_000_000u64;
    let mut r = rng::stream(6, Purpose::Test, 0);
    let mut sin_sum = 0.0;
    let mut sin_sq = 0.0;
    let mut on_first = 0u64;
    for _ in 0..n {
        let p = sample_mu_bar(t, &mut r);
        let s = p.phi.sin();
        sin_sum += s;
        sin_sq += s * s;
        on_first += u64::from(p.disk == 0);
    }
    let m = sin_sum / n as f64;
    let se = ((sin_sq / n as f64 - m * m) / n as f64).sqrt();
    assert!(m.abs() < 3.0 * se, "E[sin phi] = {m} (se {se})");
    let radii: Vec<f64> = t.disks().iter().map(|d| d.radius).collect();
    let p0 = radii[0] / radii.iter().sum::<f64>();
    let f = on_first as f64 / n as f64;
    let se = (p0 * (1.0 - p0) / n as f64).sqrt();
    assert!((f - p0).abs() < 3.0 * se, "P(disk 0) = {f} vs {p0}");
}

#[test]
fn shift_distribution_is_close_to_gaussian() {
    let n = 400u64;
    let shifts = sample_shifts(table(), 10_000, n, 11, Purpose::Test, Execution::Parallel).unwrap();
    let scale = 1.0 / (n as f64).sqrt();
    let x: Vec<f64> = shifts.iter().map(|s| s[0] as f64 * scale).collect();
    let y: Vec<f64> = shifts.iter().map(|s| s[1] as f64 * scale).collect();
    for comp in [&x, &y] {
        let k = kurtosis(comp);
        assert!((2.7..=3.3).contains(&k), "kurtosis {k}");
    }
    let (mx, my) = (mean(&x), mean(&y));
    let cov = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / x.len() as f64;
    let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
    let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
    let rho = cov / (sx * sy);
    let se = (1.0 - rho * rho) / ((x.len() - 1) as f64).sqrt();
    assert!(rho.abs() <= 3.0 * se, "correlation {rho} (se {se})");
}

// Lattice sums with k1 kept as an explicit loop index.

fn tally_to_rational(tally: &BTreeMap<u64, u64>, n: u64) -> BigRational {
    let mut s = BigRational::zero();
    for (&den, &count) in tally {
        s += BigRational::new(BigInt::from(count), BigInt::from(den));
    }
    s / BigRational::from_integer(BigInt::from(n * n))
}

fn quadruple_a20(n: u64) -> BigRational {
    let mut tally = BTreeMap::new();
    for k1 in 1..=n {
        for r in 0..=n - k1 {
            for l in 1..=(n - k1 - r) {
                for s in 0..=(n - k1 - r - l) {
                    *tally.entry((r + l) * (l + s)).or_insert(0) += 1;
                }
            }
        }
    }
    tally_to_rational(&tally, n)
}

fn quadruple_j(n: u64) -> BigRational {
    let mut tally = BTreeMap::new();
    for k1 in 1..=n {
        for r in 1..=n - k1 {
            for l in 1..=(n - k1 - r) {
                for s in 1..=(n - k1 - r - l) {
                    *tally.entry(r * l + r * s + s * l).or_insert(0) += 1;
                }
            }
        }
    }
    tally_to_rational(&tally, n)
}

#[test]
fn lattice_sums_match_quadruple_loops_exactly() {
    use num_traits::ToPrimitive;
    for n in 1..=40 {
        let a = quadruple_a20(n);
        let j = quadruple_j(n);
        assert_eq!(discrete_sum_a20_exact(n), a, "A20 at n = {n}");
        assert_eq!(discrete_sum_j_exact(n), j, "J at n = {n}");
        assert!((discrete_sum_a20(n) - a.to_f64().unwrap()).abs() < 1e-12);
        assert!((discrete_sum_j(n) - j.to_f64().unwrap()).abs() < 1e-12);
    }
}

#[test]
fn j_matches_high_precision_value() {
    let j = compute_j(1e-6).unwrap();
    assert!((j.value - J_REFERENCE).abs() < 2e-6, "J = {}", j.value);
}
