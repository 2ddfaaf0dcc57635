//! Self-intersection counts of a polygonal trajectory.
//!
//! `v_n` counts ordered pairs `(j, k)` of chords whose closed segments meet,
//! diagonal included, so `v_n = n + 2 * #{j < k : chords meet}`. The
//! transversal count keeps unordered pairs with `|j - k| >= 2`; the
//! continuous-time count is twice the transversal count on the path
//! truncated at time `t`.
//!
//! Three counters share one pair classification: an exhaustive quadratic
//! reference, a sort-based uniform grid, and a streaming hashed grid for
//! paths too long to keep as records.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{classify, segment_crossing_point, Contact, Segment, Vec2};
use crate::trajectory::{truncate_path, Trajectory};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

/// Bounding boxes are padded by this much before bucketing.
const GRID_PAD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntersectionReport {
    pub n: u64,
    pub v_n: u64,
    pub transversal: u64,
    pub v_hat_n: Option<u64>,
    pub v_t: u64,
    /// Path duration the counts refer to, when known.
    pub t: Option<OrderedTime>,
    pub degenerate_events: u64,
}

/// Duration wrapper with total equality so reports compare exactly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OrderedTime(pub f64);

impl PartialEq for OrderedTime {
    fn eq(&self, o: &Self) -> bool {
        self.0.to_bits() == o.0.to_bits()
    }
}

impl Eq for OrderedTime {}

/// Outcome of one candidate pair `j < k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairKind {
    Miss,
    /// Intersecting; `degenerate` marks collinear overlap or a touching
    /// contact between non-adjacent chords.
    Hit { adjacent: bool, degenerate: bool },
}

#[inline]
fn pair_kind(j: usize, k: usize, sj: &Segment, sk: &Segment) -> PairKind {
    let adjacent = k == j + 1;
    match classify(sj, sk) {
        Contact::Disjoint => PairKind::Miss,
        Contact::Proper => PairKind::Hit {
            adjacent,
            degenerate: false,
        },
        Contact::Touching => PairKind::Hit {
            adjacent,
            degenerate: !adjacent,
        },
        Contact::CollinearOverlap => PairKind::Hit {
            adjacent,
            degenerate: true,
        },
    }
}

/// Intersecting pairs bucketed by their later chord index, so counts for
/// every prefix of the path come out of a single pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairTally {
    all: Vec<u32>,
    nonadjacent: Vec<u32>,
    degenerate: Vec<u32>,
}

impl PairTally {
    fn new(n: usize) -> Self {
        PairTally {
            all: vec![0; n],
            nonadjacent: vec![0; n],
            degenerate: vec![0; n],
        }
    }

    #[inline]
    fn record(&mut self, k: usize, kind: PairKind) {
        if let PairKind::Hit {
            adjacent,
            degenerate,
        } = kind
        {
            self.all[k] += 1;
            if !adjacent {
                self.nonadjacent[k] += 1;
            }
            if degenerate {
                self.degenerate[k] += 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.all.len()
    }

    pub fn is_empty(&self) -> bool {
        self.all.is_empty()
    }

    /// Counts restricted to the first `m` chords.
    pub fn prefix(&self, m: usize) -> IntersectionReport {
        assert!(m <= self.len());
        let sum = |v: &[u32]| v[..m].iter().map(|&x| x as u64).sum::<u64>();
        let pairs = sum(&self.all);
        let transversal = sum(&self.nonadjacent);
        IntersectionReport {
            n: m as u64,
            v_n: m as u64 + 2 * pairs,
            transversal,
            v_hat_n: None,
            v_t: 2 * transversal,
            t: None,
            degenerate_events: sum(&self.degenerate),
        }
    }

    /// `v_n` at each requested prefix length.
    pub fn v_n_at(&self, ns: &[usize]) -> Vec<u64> {
        let mut out = Vec::with_capacity(ns.len());
        let mut acc = 0u64;
        let mut upto = 0usize;
        let mut sorted: Vec<(usize, usize)> = ns.iter().copied().enumerate().map(|(i, n)| (n, i)).collect();
        sorted.sort_unstable();
        out.resize(ns.len(), 0);
        for (m, idx) in sorted {
            assert!(m <= self.len());
            while upto < m {
                acc += self.all[upto] as u64;
                upto += 1;
            }
            out[idx] = m as u64 + 2 * acc;
        }
        out
    }

    pub fn full(&self) -> IntersectionReport {
        self.prefix(self.len())
    }
}

fn total_length(segments: &[Segment]) -> f64 {
    segments.iter().map(Segment::length).sum()
}

/// Exhaustive `O(n^2)` tally over all pairs.
pub fn tally_brute(segments: &[Segment]) -> PairTally {
    let mut tally = PairTally::new(segments.len());
    for k in 0..segments.len() {
        for j in 0..k {
            tally.record(k, pair_kind(j, k, &segments[j], &segments[k]));
        }
    }
    tally
}

/// Reference counter: every pair is classified.
pub fn count_brute(segments: &[Segment]) -> IntersectionReport {
    let mut r = tally_brute(segments).full();
    r.t = Some(OrderedTime(total_length(segments)));
    r
}

#[derive(Debug, Clone, Copy)]
struct CellRange {
    x0: i32,
    y0: i32,
    x1: i32,
    y1: i32,
}

#[inline]
fn cell_range(s: &Segment, inv: f64) -> CellRange {
    let (lo, hi) = s.bbox();
    let f = |v: f64| (v * inv).floor() as i32;
    CellRange {
        x0: f(lo.x - GRID_PAD),
        y0: f(lo.y - GRID_PAD),
        x1: f(hi.x + GRID_PAD),
        y1: f(hi.y + GRID_PAD),
    }
}

#[inline]
fn cell_key(x: i32, y: i32) -> u64 {
    ((x as u32 as u64) << 32) | (y as u32 as u64)
}

/// Uniform-grid tally: chords are bucketed by the cells their padded
/// bounding boxes cover, and each candidate pair is classified once, in the
/// lowest cell both cover.
pub fn tally_grid(segments: &[Segment], cell_size: f64, mode: Execution) -> Result<PairTally> {
    if !(cell_size > 0.0) || !cell_size.is_finite() {
        return Err(Error::CellSizeNonPositive(cell_size));
    }
    let inv = 1.0 / cell_size;
    let ranges: Vec<CellRange> = segments.iter().map(|s| cell_range(s, inv)).collect();
    let mut entries: Vec<(u64, u32)> = Vec::with_capacity(segments.len() * 3);
    for (k, r) in ranges.iter().enumerate() {
        for x in r.x0..=r.x1 {
            for y in r.y0..=r.y1 {
                entries.push((cell_key(x, y), k as u32));
            }
        }
    }
    entries.sort_unstable();

    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=entries.len() {
        if i == entries.len() || entries[i].0 != entries[start].0 {
            if i - start > 1 {
                runs.push((start, i));
            }
            start = i;
        }
    }

    let scan = |&(lo, hi): &(usize, usize)| -> Vec<(u32, PairKind)> {
        let key = entries[lo].0;
        let cx = (key >> 32) as u32 as i32;
        let cy = key as u32 as i32;
        let mut hits = Vec::new();
        for b in lo + 1..hi {
            let k = entries[b].1 as usize;
            let rk = ranges[k];
            for a in lo..b {
                let j = entries[a].1 as usize;
                let rj = ranges[j];
                if rj.x0.max(rk.x0) != cx || rj.y0.max(rk.y0) != cy {
                    continue;
                }
                let kind = pair_kind(j, k, &segments[j], &segments[k]);
                if kind != PairKind::Miss {
                    hits.push((k as u32, kind));
                }
            }
        }
        hits
    };

    let mut tally = PairTally::new(segments.len());
    match mode {
        Execution::Sequential => {
            for run in &runs {
                for (k, kind) in scan(run) {
                    tally.record(k as usize, kind);
                }
            }
        }
        Execution::Parallel => {
            let chunks = crate::exec::map_range(0..runs.len().div_ceil(256) as u64, mode, |c| {
                let lo = c as usize * 256;
                let hi = (lo + 256).min(runs.len());
                runs[lo..hi].iter().flat_map(scan).collect::<Vec<_>>()
            });
            for (k, kind) in chunks.into_iter().flatten() {
                tally.record(k as usize, kind);
            }
        }
    }
    Ok(tally)
}

/// Grid counter; identical counts to [`count_brute`].
pub fn count_grid(segments: &[Segment], cell_size: f64) -> Result<IntersectionReport> {
    count_grid_with(segments, cell_size, Execution::Parallel)
}

pub fn count_grid_with(segments: &[Segment], cell_size: f64, mode: Execution) -> Result<IntersectionReport> {
    let mut r = tally_grid(segments, cell_size, mode)?.full();
    r.t = Some(OrderedTime(total_length(segments)));
    Ok(r)
}

/// Longest chord, the natural grid cell size.
pub fn max_segment_length(segments: &[Segment]) -> f64 {
    segments.iter().map(Segment::length).fold(0.0, f64::max)
}

/// Ordered pairs of reflections `0..n` that hit the same obstacle copy.
pub fn count_v_hat(trajectory: &Trajectory) -> u64 {
    let n = trajectory.len();
    let mut groups: FxHashMap<(usize, [i64; 2]), u64> = FxHashMap::default();
    for r in &trajectory.records[..n] {
        *groups.entry((r.obstacle, r.cell)).or_insert(0) += 1;
    }
    groups.values().map(|&g| g * g).sum()
}

/// Quadratic reference for [`count_v_hat`].
pub fn count_v_hat_brute(trajectory: &Trajectory) -> u64 {
    let recs = &trajectory.records[..trajectory.len()];
    let mut total = 0;
    for a in recs {
        for b in recs {
            if a.obstacle == b.obstacle && a.cell == b.cell {
                total += 1;
            }
        }
    }
    total
}

/// Full report for a trajectory using the quadratic counters throughout.
pub fn report_brute(trajectory: &Trajectory) -> IntersectionReport {
    let mut r = count_brute(&trajectory.segments());
    r.v_hat_n = Some(count_v_hat_brute(trajectory));
    r.t = Some(OrderedTime(trajectory.duration()));
    r
}

/// Full report for a trajectory using the grid and hashing counters.
pub fn report_grid(trajectory: &Trajectory, cell_size: Option<f64>) -> Result<IntersectionReport> {
    let segments = trajectory.segments();
    let cs = cell_size.unwrap_or_else(|| max_segment_length(&segments));
    let mut r = count_grid(&segments, cs)?;
    r.v_hat_n = Some(count_v_hat(trajectory));
    r.t = Some(OrderedTime(trajectory.duration()));
    Ok(r)
}

/// Twice the number of non-adjacent intersecting chord pairs of a timed
/// polyline truncated at `t`.
pub fn count_continuous_path(points: &[Vec2], times: &[f64], t: f64) -> Result<u64> {
    let (pts, _) = truncate_path(points, times, t)?;
    let segs: Vec<Segment> = pts.windows(2).map(|w| Segment::new(w[0], w[1])).collect();
    if segs.len() < 3 {
        return Ok(0);
    }
    let cs = max_segment_length(&segs);
    Ok(tally_grid(&segs, cs, Execution::Sequential)?.full().v_t)
}

/// Continuous-time self-intersection count up to time `t`.
pub fn count_continuous(trajectory: &Trajectory, t: f64) -> Result<u64> {
    count_continuous_path(&trajectory.positions(), &trajectory.times(), t)
}

/// Times at which each non-adjacent crossing of a timed polyline is first
/// reached, sorted. `2 * #{times <= t}` reproduces [`count_continuous_path`]
/// for generic paths.
pub fn crossing_times(points: &[Vec2], times: &[f64], cell_size: f64) -> Result<(Vec<f64>, u64)> {
    let segs: Vec<Segment> = points.windows(2).map(|w| Segment::new(w[0], w[1])).collect();
    let mut grid = StreamingCounter::new(cell_size)?;
    let mut out = Vec::new();
    let mut degenerate = 0;
    for (k, s) in segs.iter().enumerate() {
        grid.push_with(s, |j, kind| {
            if let PairKind::Hit { adjacent: false, degenerate: d } = kind {
                if d {
                    degenerate += 1;
                }
                let when = match segment_crossing_point(&segs[j], s) {
                    Some(x) => times[k] + (x - points[k]).norm(),
                    None => times[k],
                };
                out.push(when.min(times[k + 1]));
            }
        });
    }
    out.sort_unstable_by(f64::total_cmp);
    Ok((out, degenerate))
}

/// Incremental hashed-grid counter. Chords arrive in path order; each new
/// chord is tested against all earlier chords sharing a grid cell.
#[derive(Debug, Clone)]
pub struct StreamingCounter {
    inv: f64,
    grid: FxHashMap<u64, Vec<u32>>,
    segments: Vec<Segment>,
    ranges: Vec<CellRange>,
    pairs: u64,
    nonadjacent: u64,
    degenerate: u64,
}

impl StreamingCounter {
    /// Chords pushed per block by [`StreamingCounter::push_block`] callers.
    pub const BLOCK: usize = 1 << 18;

    pub fn new(cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::CellSizeNonPositive(cell_size));
        }
        Ok(Self::with_cell_size(cell_size))
    }

    fn with_cell_size(cell_size: f64) -> Self {
        StreamingCounter {
            inv: 1.0 / cell_size,
            grid: FxHashMap::default(),
            segments: Vec::new(),
            ranges: Vec::new(),
            pairs: 0,
            nonadjacent: 0,
            degenerate: 0,
        }
    }

    fn push_with(&mut self, s: &Segment, mut on_hit: impl FnMut(usize, PairKind)) {
        let k = self.segments.len();
        let rk = cell_range(s, self.inv);
        for x in rk.x0..=rk.x1 {
            for y in rk.y0..=rk.y1 {
                let bucket = self.grid.entry(cell_key(x, y)).or_default();
                for &j in bucket.iter() {
                    let j = j as usize;
                    let rj = self.ranges[j];
                    if rj.x0.max(rk.x0) != x || rj.y0.max(rk.y0) != y {
                        continue;
                    }
                    let kind = pair_kind(j, k, &self.segments[j], s);
                    if let PairKind::Hit {
                        adjacent,
                        degenerate,
                    } = kind
                    {
                        self.pairs += 1;
                        self.nonadjacent += u64::from(!adjacent);
                        self.degenerate += u64::from(degenerate);
                        on_hit(j, kind);
                    }
                }
                bucket.push(k as u32);
            }
        }
        self.segments.push(*s);
        self.ranges.push(rk);
    }

    pub fn push(&mut self, s: &Segment) {
        self.push_with(s, |_, _| {});
    }

    pub fn push_block(&mut self, block: &[Segment]) {
        for s in block {
            self.push(s);
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn report(&self) -> IntersectionReport {
        let n = self.segments.len() as u64;
        IntersectionReport {
            n,
            v_n: n + 2 * self.pairs,
            transversal: self.nonadjacent,
            v_hat_n: None,
            v_t: 2 * self.nonadjacent,
            t: None,
            degenerate_events: self.degenerate,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(pts: &[(f64, f64)]) -> Vec<Segment> {
        pts.windows(2)
            .map(|w| Segment::new(Vec2::new(w[0].0, w[0].1), Vec2::new(w[1].0, w[1].1)))
            .collect()
    }

    /// Segments 0 and 2 cross; 0-1 and 1-2 share reflection points.
    fn crossing_fixture() -> Vec<Segment> {
        path(&[(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, -1.0)])
    }

    #[test]
    fn single_segment() {
        let r = count_brute(&path(&[(0.0, 0.0), (1.0, 0.0)]));
        assert_eq!((r.v_n, r.transversal), (1, 0));
    }

    #[test]
    fn two_segments_touch_once() {
        let r = count_brute(&path(&[(0.0, 0.0), (1.0, 0.0), (1.5, 1.0)]));
        assert_eq!((r.v_n, r.transversal, r.degenerate_events), (4, 0, 0));
    }

    #[test]
    fn three_segment_crossing() {
        let segs = crossing_fixture();
        let r = count_brute(&segs);
        assert_eq!((r.v_n, r.transversal, r.v_t), (9, 1, 2));
        assert_eq!(r, count_grid(&segs, 1.0).unwrap());
        assert_eq!(r, count_grid_with(&segs, 0.3, Execution::Sequential).unwrap());
    }

    #[test]
    fn non_positive_cell_rejected() {
        assert!(matches!(count_grid(&crossing_fixture(), 0.0), Err(Error::CellSizeNonPositive(_))));
        assert!(StreamingCounter::new(-1.0).is_err());
    }

    #[test]
    fn backtracking_is_degenerate() {
        let r = count_brute(&path(&[(0.0, 0.0), (2.0, 0.0), (1.0, 0.0)]));
        assert_eq!(r.v_n, 4);
        assert_eq!(r.degenerate_events, 1);
    }

    #[test]
    fn streaming_matches_batch() {
        let segs = crossing_fixture();
        let mut s = StreamingCounter::new(0.7).unwrap();
        s.push_block(&segs);
        let mut batch = count_brute(&segs);
        batch.t = None;
        assert_eq!(s.report(), batch);
    }

    #[test]
    fn continuous_on_fixture() {
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 1.0),
            Vec2::new(1.0, -1.0),
        ];
        let mut times = vec![0.0];
        for w in pts.windows(2) {
            times.push(times.last().unwrap() + (w[1] - w[0]).norm());
        }
        let full = *times.last().unwrap();
        assert_eq!(count_continuous_path(&pts, &times, full).unwrap(), 2);
        assert_eq!(count_continuous_path(&pts, &times, 1.0).unwrap(), 0);
        // Segment 2 reaches the crossing at (1.5, 0) halfway along.
        let cross = times[2] + 0.5 * (times[3] - times[2]);
        assert_eq!(count_continuous_path(&pts, &times, cross - 1e-6).unwrap(), 0);
        assert_eq!(count_continuous_path(&pts, &times, cross + 1e-6).unwrap(), 2);
        let (ct, deg) = crossing_times(&pts, &times, 1.0).unwrap();
        assert_eq!(deg, 0);
        assert_eq!(ct.len(), 1);
        assert!((ct[0] - cross).abs() < 1e-12);
    }

    #[test]
    fn prefix_counts() {
        let segs = crossing_fixture();
        let tally = tally_brute(&segs);
        assert_eq!(tally.v_n_at(&[3, 1, 2]), vec![9, 1, 4]);
        assert_eq!(tally.prefix(2).v_n, 4);
    }
}
