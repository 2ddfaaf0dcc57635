//! Lattice sums whose `n^2` asymptotics give `pi^2/12` and `J`.
//!
//! Both sums run over `k1 + r + l + s <= n` with a summand independent of
//! `k1`, so `k1` is eliminated as the weight `n - (r + l + s)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use std::collections::BTreeMap;

fn check_n(n: u64) {
    assert!(n >= 1, "lattice sums need n >= 1");
}

/// `n^{-2} sum_{k1>=1, r>=0, l>=1, s>=0, k1+r+l+s<=n} 1/((r+l)(l+s))`.
pub fn discrete_sum_a20(n: u64) -> f64 {
    check_n(n);
    let mut total = 0.0;
    for l in 1..n {
        for r in 0..n - l {
            let a = (r + l) as f64;
            let mut inner = 0.0;
            // s runs while r + l + s <= n - 1.
            for s in 0..n - r - l {
                let weight = (n - r - l - s) as f64;
                inner += weight / (l + s) as f64;
            }
            total += inner / a;
        }
    }
    total / (n as f64 * n as f64)
}

/// `n^{-2} sum_{k1,r,l,s>=1, k1+r+l+s<=n} 1/(rl + rs + sl)`.
pub fn discrete_sum_j(n: u64) -> f64 {
    check_n(n);
    let mut total = 0.0;
    for r in 1..n {
        for l in 1..n - r {
            let mut inner = 0.0;
            let (rf, lf) = (r as f64, l as f64);
            let rl = rf * lf;
            let rpl = rf + lf;
            for s in 1..n - r - l {
                let sf = s as f64;
                let weight = (n - r - l - s) as f64;
                inner += weight / (rl + sf * rpl);
            }
            total += inner;
        }
    }
    total / (n as f64 * n as f64)
}

/// Weight attached to the `(r, l, s)` term once `k1` is summed out.
pub fn k1_weight(n: u64, r: u64, l: u64, s: u64) -> u64 {
    n.saturating_sub(r + l + s)
}

/// Collapse `denominator -> multiplicity` into an exact rational.
pub fn rational_from_tally(tally: &BTreeMap<u64, u64>, n: u64) -> BigRational {
    let mut sum = BigRational::zero();
    for (&den, &count) in tally {
        sum += BigRational::new(BigInt::from(count), BigInt::from(den));
    }
    sum / BigRational::from_integer(BigInt::from(n * n))
}

/// Exact value of [`discrete_sum_a20`].
pub fn discrete_sum_a20_exact(n: u64) -> BigRational {
    check_n(n);
    let mut tally = BTreeMap::new();
    for l in 1..n {
        for r in 0..n - l {
            for s in 0..n - r - l {
                *tally.entry((r + l) * (l + s)).or_insert(0) += k1_weight(n, r, l, s);
            }
        }
    }
    rational_from_tally(&tally, n)
}

/// Exact value of [`discrete_sum_j`].
pub fn discrete_sum_j_exact(n: u64) -> BigRational {
    check_n(n);
    let mut tally = BTreeMap::new();
    for r in 1..n {
        for l in 1..n - r {
            for s in 1..n - r - l {
                *tally.entry(r * l + r * s + s * l).or_insert(0) += k1_weight(n, r, l, s);
            }
        }
    }
    rational_from_tally(&tally, n)
}

/// Extrapolation of `discrete_sum_j` to `n -> inf` assuming the error
/// `(A log^2 m + C) / m`, fitted through `m = n/4, n/2, n`.
pub fn extrapolated_sum_j(n: u64) -> f64 {
    assert!(n >= 40, "extrapolation needs n >= 40");
    let ms = [n / 4, n / 2, n];
    let vals: Vec<f64> = ms.iter().map(|&m| discrete_sum_j(m)).collect();
    let rows: Vec<[f64; 3]> = ms
        .iter()
        .map(|&m| {
            let mf = m as f64;
            [1.0, mf.ln().powi(2) / mf, 1.0 / mf]
        })
        .collect();
    solve3(&rows, &vals)[0]
}

fn solve3(m: &[[f64; 3]], y: &[f64]) -> [f64; 3] {
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let base = [m[0], m[1], m[2]];
    let d = det(base);
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut a = base;
        for r in 0..3 {
            a[r][c] = y[r];
        }
        *o = det(a) / d;
    }
    out
}
