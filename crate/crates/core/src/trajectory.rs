//! Lifted planar trajectories of the Lorentz process, observed at
//! reflection times.

use crate::billiard::{BilliardTable, Bounce, PhasePoint};
use crate::error::{Error, Result};
use crate::geometry::{Segment, Vec2};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionRecord {
    /// Planar (lifted) position of the reflection.
    pub position: Vec2,
    /// Outgoing unit velocity.
    pub velocity: Vec2,
    pub flight_to_next: f64,
    /// Time of this reflection measured from record 0.
    pub cumulative_time: f64,
    /// Cell shift `S_k` accumulated since record 0.
    pub cell: [i64; 2],
    /// Obstacle index `I_k`.
    pub obstacle: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<ReflectionRecord>,
    pub table_ref: String,
    pub seed: Option<(u64, u64)>,
}

/// Incremental generator of the lifted orbit. Holds `O(1)` state so long
/// runs can stream segments without materializing records.
#[derive(Debug, Clone)]
pub struct Walker<'a> {
    table: &'a BilliardTable,
    state: Bounce,
    base: Vec2,
    shift: [i64; 2],
    time: f64,
    steps: u64,
}

/// One completed flight between reflections `k` and `k + 1`.
#[derive(Debug, Clone, Copy)]
pub struct Flight {
    pub from: Vec2,
    pub to: Vec2,
    pub length: f64,
    pub shift: [i64; 2],
}

impl<'a> Walker<'a> {
    pub fn new(table: &'a BilliardTable, start: &PhasePoint) -> Self {
        Walker {
            table,
            state: table.bounce_of(start),
            base: Vec2::new(start.cell[0] as f64, start.cell[1] as f64),
            shift: [0, 0],
            time: 0.0,
            steps: 0,
        }
    }

    #[inline]
    pub fn position(&self) -> Vec2 {
        self.table.contact_point(&self.state)
            + self.base
            + Vec2::new(self.shift[0] as f64, self.shift[1] as f64)
    }

    #[inline]
    pub fn velocity(&self) -> Vec2 {
        self.state.velocity
    }

    #[inline]
    pub fn obstacle(&self) -> usize {
        self.state.disk
    }

    /// `S_k` for the current reflection.
    #[inline]
    pub fn cell(&self) -> [i64; 2] {
        self.shift
    }

    #[inline]
    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Current state as a phase point carrying its absolute cell.
    pub fn phase_point(&self) -> PhasePoint {
        let mut p = self.table.phase_of(&self.state);
        p.cell = [
            self.base.x as i64 + self.shift[0],
            self.base.y as i64 + self.shift[1],
        ];
        p
    }

    /// Fly to the next reflection.
    #[inline]
    pub fn advance(&mut self) -> Result<Flight> {
        let from = self.position();
        let (next, length, shift) = self.table.advance(&self.state)?;
        self.state = next;
        self.shift[0] += shift[0];
        self.shift[1] += shift[1];
        self.time += length;
        self.steps += 1;
        Ok(Flight {
            from,
            to: self.position(),
            length,
            shift,
        })
    }
}

/// Orbit of `start` up to the `n`-th reflection (`n + 1` records).
pub fn generate(table: &BilliardTable, start: &PhasePoint, n: usize) -> Result<Trajectory> {
    if n == 0 {
        return Err(Error::InvalidParam("trajectory length n must be >= 1".into()));
    }
    if !table.horizon_validated() {
        return Err(Error::InvalidParam("table horizon has not been validated".into()));
    }
    let mut walker = Walker::new(table, start);
    let mut records = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        let position = walker.position();
        let velocity = walker.velocity();
        let cell = walker.cell();
        let obstacle = walker.obstacle();
        let cumulative_time = walker.time();
        // The extra flight after record n gives it a defined flight_to_next.
        let flight = walker.advance()?;
        records.push(ReflectionRecord {
            position,
            velocity,
            flight_to_next: flight.length,
            cumulative_time,
            cell,
            obstacle,
        });
    }
    Ok(Trajectory {
        records,
        table_ref: table.fingerprint(),
        seed: None,
    })
}

impl Trajectory {
    /// Number of completed flights `n`.
    pub fn len(&self) -> usize {
        self.records.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.records.len() < 2
    }

    pub fn duration(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cumulative_time)
    }

    pub fn with_seed(mut self, seed: u64, replica: u64) -> Self {
        self.seed = Some((seed, replica));
        self
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.records.iter().map(|r| r.position).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cumulative_time).collect()
    }

    /// The `n` chords `[x_k, x_{k+1}]`.
    pub fn segments(&self) -> Vec<Segment> {
        self.records
            .windows(2)
            .map(|w| Segment::new(w[0].position, w[1].position))
            .collect()
    }

    /// `S_n`.
    pub fn final_shift(&self) -> [i64; 2] {
        self.records.last().map_or([0, 0], |r| r.cell)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParam(format!("time must be >= 0, got {t}")));
        }
        let duration = self.duration();
        if t > duration {
            return Err(Error::TimeBeyondTrajectory { t, duration });
        }
        Ok(())
    }

    /// Number of completed flights by time `t`.
    pub fn reflections_before(&self, t: f64) -> Result<usize> {
        self.check_time(t)?;
        let count = self.records.partition_point(|r| r.cumulative_time <= t);
        Ok(count - 1)
    }

    /// Chords traversed up to time `t`, the last one possibly partial.
    pub fn segments_up_to(&self, t: f64) -> Result<Vec<Segment>> {
        let (points, _) = truncate_path(&self.positions(), &self.times(), t)?;
        Ok(points
            .windows(2)
            .map(|w| Segment::new(w[0], w[1]))
            .collect())
    }

    /// CSV dump: `k,x,y,vx,vy,tau,Sx,Sy,obstacle`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,x,y,vx,vy,tau,Sx,Sy,obstacle")?;
        for (k, r) in self.records.iter().enumerate() {
            writeln!(
                out,
                "{k},{},{},{},{},{},{},{},{}",
                r.position.x,
                r.position.y,
                r.velocity.x,
                r.velocity.y,
                r.flight_to_next,
                r.cell[0],
                r.cell[1],
                r.obstacle
            )?;
        }
        Ok(())
    }
}

/// Vertices of a timed polyline truncated at time `t`, with their times.
/// A zero-length final piece is dropped.
pub fn truncate_path(points: &[Vec2], times: &[f64], t: f64) -> Result<(Vec<Vec2>, Vec<f64>)> {
    debug_assert_eq!(points.len(), times.len());
    let duration = *times.last().unwrap_or(&0.0);
    if !(t >= 0.0) {
        return Err(Error::InvalidParam(format!("time must be >= 0, got {t}")));
    }
    if t > duration {
        return Err(Error::TimeBeyondTrajectory { t, duration });
    }
    let full = times.partition_point(|&s| s <= t);
    let mut pts = points[..full].to_vec();
    let mut ts = times[..full].to_vec();
    let last = full - 1;
    let rest = t - times[last];
    if rest > 0.0 && full < points.len() {
        let dir = points[full] - points[last];
        let len = times[full] - times[last];
        pts.push(points[last] + dir * (rest / len));
        ts.push(t);
    }
    Ok((pts, ts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::billiard::TableSpec;

    fn table() -> BilliardTable {
        let mut spec = TableSpec::reference();
        spec.horizon_probes = 20_000;
        BilliardTable::from_spec(&spec, 11).unwrap()
    }

    #[test]
    fn single_step_trajectory() {
        let t = table();
        let start = PhasePoint::new(0, 0.3, 0.2, [0, 0]);
        let tr = generate(&t, &start, 1).unwrap();
        assert_eq!(tr.records.len(), 2);
        let step = crate::billiard::billiard_step(&t, &start).unwrap();
        assert_eq!(tr.final_shift(), step.shift);
        assert!((tr.records[0].flight_to_next - step.flight).abs() < 1e-15);
    }

    #[test]
    fn reflection_count_boundaries() {
        let t = table();
        let tr = generate(&t, &PhasePoint::new(1, 1.0, -0.4, [0, 0]), 20).unwrap();
        assert_eq!(tr.reflections_before(0.0).unwrap(), 0);
        let t3 = tr.records[3].cumulative_time;
        assert_eq!(tr.reflections_before(t3).unwrap(), 3);
        assert_eq!(tr.reflections_before(tr.duration()).unwrap(), 20);
        assert!(matches!(
            tr.reflections_before(tr.duration() + 1.0),
            Err(Error::TimeBeyondTrajectory { .. })
        ));
    }

    #[test]
    fn truncation_lengths() {
        let t = table();
        let tr = generate(&t, &PhasePoint::new(0, 2.0, 0.7, [0, 0]), 30).unwrap();
        assert_eq!(tr.segments_up_to(tr.duration()).unwrap().len(), 30);
        let half = 0.5 * tr.records[0].flight_to_next;
        let segs = tr.segments_up_to(half).unwrap();
        assert_eq!(segs.len(), 1);
        assert!((segs[0].length() - half).abs() < 1e-12);
        let tm = 0.37 * tr.duration();
        let total: f64 = tr.segments_up_to(tm).unwrap().iter().map(|s| s.length()).sum();
        assert!((total - tm).abs() < 1e-9);
        assert!(tr.segments_up_to(0.0).unwrap().is_empty());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let t = table();
        let tr = generate(&t, &PhasePoint::new(0, 2.0, 0.7, [0, 0]), 3).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "k,x,y,vx,vy,tau,Sx,Sy,obstacle");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,"));
    }
}
