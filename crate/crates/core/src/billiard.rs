//! The periodic billiard table, its validation, the collision map and
//! sampling from the invariant measure.
//!
//! Obstacles are disks with centers in the unit cell, repeated over the
//! integer lattice. A boundary phase point is `(disk, theta, phi, cell)`:
//! `theta` is the angular position on the disk, `phi` the angle from the
//! outward normal to the outgoing velocity (counter-clockwise positive).

use crate::error::{Error, Result};
use crate::geometry::{ray_disk_hit_t, Disk, Vec2};
use crate::rng::{self, Purpose};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

pub const DEFAULT_MAX_DENOMINATOR: u32 = 12;
pub const DEFAULT_HORIZON_PROBES: u64 = 1_000_000;
/// Multiplier applied to the largest probed flight.
pub const TAU_MAX_SAFETY: f64 = 1.5;
/// Ray-march cap (cell units) used while probing an unvalidated table.
const PROBE_CAP: f64 = 64.0;
/// Margin for the disk/cell overlap test that builds the cell lists.
const CELL_MARGIN: f64 = 1e-9;

/// One obstacle as it appears in a table document.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Table document: `{"disks":[...], "horizon_max_denominator":.., "horizon_probes":..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub disks: Vec<DiskSpec>,
    #[serde(default = "default_max_denominator")]
    pub horizon_max_denominator: u32,
    #[serde(default = "default_probes")]
    pub horizon_probes: u64,
}

fn default_max_denominator() -> u32 {
    DEFAULT_MAX_DENOMINATOR
}

fn default_probes() -> u64 {
    DEFAULT_HORIZON_PROBES
}

impl TableSpec {
    pub fn disks(&self) -> Vec<Disk> {
        self.disks
            .iter()
            .map(|d| Disk::new(Vec2::new(d.center[0], d.center[1]), d.radius))
            .collect()
    }

    /// Two disks, r = 0.45 at the cell corner and r = 0.2 at the cell center.
    pub fn reference() -> Self {
        TableSpec {
            disks: vec![
                DiskSpec {
                    center: [0.0, 0.0],
                    radius: 0.45,
                },
                DiskSpec {
                    center: [0.5, 0.5],
                    radius: 0.2,
                },
            ],
            horizon_max_denominator: DEFAULT_MAX_DENOMINATOR,
            horizon_probes: DEFAULT_HORIZON_PROBES,
        }
    }
}

/// Boundary phase point `(i, l, r, phi)` with `r = radius * theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub disk: usize,
    pub theta: f64,
    pub phi: f64,
    pub cell: [i64; 2],
}

impl PhasePoint {
    pub fn new(disk: usize, theta: f64, phi: f64, cell: [i64; 2]) -> Self {
        PhasePoint {
            disk,
            theta: theta.rem_euclid(TAU),
            phi,
            cell,
        }
    }

    /// Same position, velocity replaced by the time-reversed incoming one.
    pub fn reversed(&self) -> Self {
        PhasePoint {
            phi: -self.phi,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub next: PhasePoint,
    pub flight: f64,
    pub shift: [i64; 2],
}

/// Outcome of the finite-horizon check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "horizon", rename_all = "snake_case")]
pub enum HorizonReport {
    Finite {
        directions_checked: usize,
        /// Every primitive direction outside the enumerated set is covered
        /// by the largest disk alone, so the corridor check is exhaustive.
        coverage_complete: bool,
        probes: u64,
        probe_max_flight: f64,
        tau_max_bound: f64,
    },
    Infinite {
        direction: [i64; 2],
        corridor_width: f64,
    },
}

/// Validated fundamental cell of disks.
#[derive(Debug, Clone)]
pub struct BilliardTable {
    disks: Vec<Disk>,
    total_perimeter: f64,
    free_area: f64,
    min_gap: f64,
    tau_max_bound: f64,
    /// Perimeter-weighted cumulative distribution over disks.
    disk_cdf: Vec<f64>,
    /// `(disk, offset)` pairs whose translate meets the closed unit cell.
    cell_list: Vec<(usize, [i64; 2])>,
}

/// Check disjointness of all lattice translates and precompute derived
/// quantities. The horizon is still unvalidated on return.
pub fn validate_table(disks: &[Disk]) -> Result<BilliardTable> {
    if disks.is_empty() {
        return Err(Error::InvalidParam("table needs at least one disk".into()));
    }
    for (i, d) in disks.iter().enumerate() {
        let c = d.center;
        if !(c.is_finite() && d.radius.is_finite()) || d.radius <= 0.0 {
            return Err(Error::InvalidParam(format!("disk {i}: radius must be finite and > 0")));
        }
        if !(0.0..1.0).contains(&c.x) || !(0.0..1.0).contains(&c.y) {
            return Err(Error::InvalidParam(format!(
                "disk {i}: center ({}, {}) outside [0,1)^2",
                c.x, c.y
            )));
        }
    }
    let mut min_gap = f64::INFINITY;
    for i in 0..disks.len() {
        for j in i..disks.len() {
            for tx in -1..=1i64 {
                for ty in -1..=1i64 {
                    if i == j && tx == 0 && ty == 0 {
                        continue;
                    }
                    let shift = Vec2::new(tx as f64, ty as f64);
                    let dist = (disks[i].center - (disks[j].center + shift)).norm();
                    let gap = dist - disks[i].radius - disks[j].radius;
                    if gap <= 0.0 {
                        return Err(Error::OverlappingObstacles {
                            i,
                            j,
                            translate: (tx, ty),
                        });
                    }
                    min_gap = min_gap.min(gap);
                }
            }
        }
    }
    let total_perimeter: f64 = disks.iter().map(|d| TAU * d.radius).sum();
    let free_area = 1.0 - disks.iter().map(|d| PI * d.radius * d.radius).sum::<f64>();
    if free_area <= 0.0 {
        return Err(Error::InvalidParam("obstacles leave no free area".into()));
    }
    let mut acc = 0.0;
    let disk_cdf = disks
        .iter()
        .map(|d| {
            acc += TAU * d.radius / total_perimeter;
            acc
        })
        .collect();

    let mut cell_list = Vec::new();
    for (i, d) in disks.iter().enumerate() {
        for ox in -1..=1i64 {
            for oy in -1..=1i64 {
                let c = d.center + Vec2::new(ox as f64, oy as f64);
                let nearest = Vec2::new(c.x.clamp(0.0, 1.0), c.y.clamp(0.0, 1.0));
                if (c - nearest).norm() <= d.radius + CELL_MARGIN {
                    cell_list.push((i, [ox, oy]));
                }
            }
        }
    }

    Ok(BilliardTable {
        disks: disks.to_vec(),
        total_perimeter,
        free_area,
        min_gap,
        tau_max_bound: f64::INFINITY,
        disk_cdf,
        cell_list,
    })
}

/// Primitive directions `(p, q)` with `|p|, |q| <= max_den`, one per line
/// orientation, ordered by length.
fn primitive_directions(max_den: i64) -> Vec<[i64; 2]> {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    let mut dirs = Vec::new();
    for p in 0..=max_den {
        for q in -max_den..=max_den {
            if (p == 0 && q <= 0) || gcd(p, q) != 1 {
                continue;
            }
            dirs.push([p, q]);
        }
    }
    // Stable sort keeps (1, 0) ahead of (0, 1).
    dirs.sort_by_key(|d| (d[0] * d[0] + d[1] * d[1], d[1].abs()));
    dirs
}

/// Widest gap left by the projected disks along `direction`.
fn corridor_width(disks: &[Disk], direction: [i64; 2]) -> f64 {
    let len = ((direction[0] * direction[0] + direction[1] * direction[1]) as f64).sqrt();
    let period = 1.0 / len;
    let normal = Vec2::new(-direction[1] as f64 / len, direction[0] as f64 / len);
    if disks.iter().any(|d| 2.0 * d.radius >= period) {
        return 0.0;
    }
    let mut intervals: Vec<(f64, f64)> = disks
        .iter()
        .map(|d| {
            let start = (d.center.dot(normal) - d.radius).rem_euclid(period);
            (start, start + 2.0 * d.radius)
        })
        .collect();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut widest: f64 = 0.0;
    let mut reach = intervals[0].1;
    for &(s, e) in &intervals[1..] {
        widest = widest.max(s - reach);
        reach = reach.max(e);
    }
    // Wrap-around gap back to the first interval one period later.
    widest = widest.max(intervals[0].0 + period - reach);
    widest.max(0.0)
}

/// Finite-horizon check: exact corridor coverage over rational directions
/// plus random flight probes that set `tau_max_bound`.
pub fn validate_horizon(
    table: &BilliardTable,
    max_denominator: u32,
    probes: u64,
    seed: u64,
) -> Result<HorizonReport> {
    if max_denominator == 0 {
        return Err(Error::InvalidParam("max_denominator must be >= 1".into()));
    }
    let dirs = primitive_directions(max_denominator as i64);
    let mut worst: Option<([i64; 2], f64)> = None;
    for &d in &dirs {
        let w = corridor_width(&table.disks, d);
        if w > 1e-12 && worst.is_none_or(|(_, best)| w > best) {
            worst = Some((d, w));
        }
    }
    if let Some((direction, corridor_width)) = worst {
        return Ok(HorizonReport::Infinite {
            direction,
            corridor_width,
        });
    }
    let r_max = table.disks.iter().map(|d| d.radius).fold(0.0, f64::max);
    let coverage_complete = 1.0 / (max_denominator as f64 + 1.0) <= 2.0 * r_max;

    let mut rng = rng::stream(seed, Purpose::HorizonProbe, 0);
    let mut probe_max: f64 = 0.0;
    for _ in 0..probes {
        let disk = table.pick_disk(rng.random::<f64>());
        let theta = TAU * rng.random::<f64>();
        let phi = (rng.random::<f64>() - 0.5) * PI;
        let normal = Vec2::from_angle(theta);
        let origin = table.disks[disk].center + normal * table.disks[disk].radius;
        let dir = normal.rotate(phi);
        match table.first_hit(origin, dir, disk, PROBE_CAP) {
            Some(hit) => probe_max = probe_max.max(hit.t),
            None => {
                return Err(Error::NoHitWithinHorizon {
                    origin,
                    direction: dir,
                })
            }
        }
    }
    let tau_max_bound = if probes == 0 {
        // Without probes fall back to the crude bound of the ray-march cap.
        PROBE_CAP
    } else {
        TAU_MAX_SAFETY * probe_max
    };
    Ok(HorizonReport::Finite {
        directions_checked: dirs.len(),
        coverage_complete,
        probes,
        probe_max_flight: probe_max,
        tau_max_bound,
    })
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Hit {
    pub t: f64,
    pub disk: usize,
    pub translate: [i64; 2],
}

/// Boundary state carried by the fast stepping path: positions are relative
/// to the cell of the current obstacle copy.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Bounce {
    pub disk: usize,
    pub normal: Vec2,
    pub velocity: Vec2,
}

impl BilliardTable {
    /// Validate geometry and horizon from a table document.
    pub fn from_spec(spec: &TableSpec, seed: u64) -> Result<Self> {
        let table = validate_table(&spec.disks())?;
        let report = validate_horizon(&table, spec.horizon_max_denominator, spec.horizon_probes, seed)?;
        table.with_horizon(&report)
    }

    /// Attach a horizon report; infinite horizons are rejected.
    pub fn with_horizon(mut self, report: &HorizonReport) -> Result<Self> {
        match *report {
            HorizonReport::Finite { tau_max_bound, .. } => {
                self.tau_max_bound = tau_max_bound;
                Ok(self)
            }
            HorizonReport::Infinite {
                direction,
                corridor_width,
            } => Err(Error::InfiniteHorizon {
                direction: (direction[0], direction[1]),
                width: corridor_width,
            }),
        }
    }

    pub fn disks(&self) -> &[Disk] {
        &self.disks
    }

    pub fn total_perimeter(&self) -> f64 {
        self.total_perimeter
    }

    pub fn free_area(&self) -> f64 {
        self.free_area
    }

    pub fn min_gap(&self) -> f64 {
        self.min_gap
    }

    pub fn tau_max_bound(&self) -> f64 {
        self.tau_max_bound
    }

    /// Stable identifier of the obstacle layout.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for d in &self.disks {
            h.update(d.center.x.to_le_bytes());
            h.update(d.center.y.to_le_bytes());
            h.update(d.radius.to_le_bytes());
        }
        let out = h.finalize();
        out[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn horizon_validated(&self) -> bool {
        self.tau_max_bound.is_finite()
    }

    /// Mean free flight `pi * |Q| / |dQ|` under the invariant measure.
    pub fn mean_free_path(&self) -> f64 {
        PI * self.free_area / self.total_perimeter
    }

    #[inline]
    fn pick_disk(&self, u: f64) -> usize {
        self.disk_cdf
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.disks.len() - 1)
    }

    /// Position (cell-relative to `p.cell`) and velocity of a phase point.
    pub fn position_velocity(&self, p: &PhasePoint) -> (Vec2, Vec2) {
        let normal = Vec2::from_angle(p.theta);
        let d = &self.disks[p.disk];
        (d.center + normal * d.radius, normal.rotate(p.phi))
    }

    /// Planar position of `p` including its cell offset.
    pub fn lifted_position(&self, p: &PhasePoint) -> Vec2 {
        let (q, _) = self.position_velocity(p);
        q + Vec2::new(p.cell[0] as f64, p.cell[1] as f64)
    }

    pub(crate) fn bounce_of(&self, p: &PhasePoint) -> Bounce {
        let normal = Vec2::from_angle(p.theta);
        Bounce {
            disk: p.disk,
            normal,
            velocity: normal.rotate(p.phi),
        }
    }

    pub(crate) fn phase_of(&self, b: &Bounce) -> PhasePoint {
        let phi = b.normal.cross(b.velocity).atan2(b.normal.dot(b.velocity));
        PhasePoint::new(b.disk, b.normal.angle(), phi.clamp(-FRAC_PI_2, FRAC_PI_2), [0, 0])
    }

    #[inline]
    pub(crate) fn contact_point(&self, b: &Bounce) -> Vec2 {
        let d = &self.disks[b.disk];
        d.center + b.normal * d.radius
    }

    /// First obstacle copy hit by the ray, walking lattice cells along it.
    /// `skip` is the disk (at translate zero) the ray departs from.
    pub(crate) fn first_hit(&self, origin: Vec2, dir: Vec2, skip: usize, max_t: f64) -> Option<Hit> {
        let mut cx = origin.x.floor() as i64;
        let mut cy = origin.y.floor() as i64;
        let step_x: i64 = if dir.x >= 0.0 { 1 } else { -1 };
        let step_y: i64 = if dir.y >= 0.0 { 1 } else { -1 };
        let inv_x = if dir.x != 0.0 { 1.0 / dir.x.abs() } else { f64::INFINITY };
        let inv_y = if dir.y != 0.0 { 1.0 / dir.y.abs() } else { f64::INFINITY };
        let fx = origin.x - cx as f64;
        let fy = origin.y - cy as f64;
        let mut t_next_x = if step_x > 0 { (1.0 - fx) * inv_x } else { fx * inv_x };
        let mut t_next_y = if step_y > 0 { (1.0 - fy) * inv_y } else { fy * inv_y };

        let mut best: Option<Hit> = None;
        loop {
            for &(disk, off) in &self.cell_list {
                let translate = [cx + off[0], cy + off[1]];
                if disk == skip && translate == [0, 0] {
                    continue;
                }
                let d = &self.disks[disk];
                let center = d.center + Vec2::new(translate[0] as f64, translate[1] as f64);
                let probe = Disk {
                    center,
                    radius: d.radius,
                };
                if let Some(t) = ray_disk_hit_t(origin, dir, &probe) {
                    if best.is_none_or(|b| t < b.t) {
                        best = Some(Hit { t, disk, translate });
                    }
                }
            }
            let t_exit = t_next_x.min(t_next_y);
            if let Some(b) = best {
                if b.t <= t_exit {
                    return Some(b);
                }
            }
            if t_exit > max_t {
                return best.filter(|b| b.t <= max_t);
            }
            if t_next_x < t_next_y {
                cx += step_x;
                t_next_x += inv_x;
            } else {
                cy += step_y;
                t_next_y += inv_y;
            }
        }
    }

    /// Advance one collision. Returns the next state (relative to the new
    /// obstacle's cell), the flight length and the cell shift.
    #[inline]
    pub(crate) fn advance(&self, b: &Bounce) -> Result<(Bounce, f64, [i64; 2])> {
        let origin = self.contact_point(b);
        let hit = self
            .first_hit(origin, b.velocity, b.disk, self.tau_max_bound)
            .ok_or(Error::NoHitWithinHorizon {
                origin,
                direction: b.velocity,
            })?;
        let d = &self.disks[hit.disk];
        let center = d.center + Vec2::new(hit.translate[0] as f64, hit.translate[1] as f64);
        let point = origin + b.velocity * hit.t;
        let radial = point - center;
        let normal = radial * (1.0 / radial.norm());
        let mut v_in_n = b.velocity.dot(normal);
        if v_in_n > 0.0 {
            // Roundoff on a grazing contact.
            v_in_n = 0.0;
        }
        let mut velocity = b.velocity - normal * (2.0 * v_in_n);
        velocity = velocity * (1.0 / velocity.norm());
        Ok((
            Bounce {
                disk: hit.disk,
                normal,
                velocity,
            },
            hit.t,
            hit.translate,
        ))
    }
}

/// The collision map modulo the lattice.
pub fn billiard_step(table: &BilliardTable, p: &PhasePoint) -> Result<StepResult> {
    if !table.horizon_validated() {
        return Err(Error::InvalidParam("table horizon has not been validated".into()));
    }
    let (next, flight, shift) = table.advance(&table.bounce_of(p))?;
    Ok(StepResult {
        next: table.phase_of(&next),
        flight,
        shift,
    })
}

/// `phi` with density `cos(phi) / 2` on `[-pi/2, pi/2]` from a uniform `u`.
#[inline]
pub fn phi_from_uniform(u: f64) -> f64 {
    (2.0 * u - 1.0).clamp(-1.0, 1.0).asin()
}

/// Draw from the invariant measure of density `cos(phi) / (2 |dQ|)`.
pub fn sample_mu_bar<R: Rng + ?Sized>(table: &BilliardTable, rng: &mut R) -> PhasePoint {
    let disk = table.pick_disk(rng.random::<f64>());
    let theta = TAU * rng.random::<f64>();
    let phi = phi_from_uniform(rng.random::<f64>());
    PhasePoint::new(disk, theta, phi, [0, 0])
}

/// Uniform point of the free part of the unit cell with a uniform direction.
pub fn sample_uniform_free<R: Rng + ?Sized>(table: &BilliardTable, rng: &mut R) -> (Vec2, Vec2) {
    loop {
        let q = Vec2::new(rng.random::<f64>(), rng.random::<f64>());
        if !table.point_blocked(q) {
            let v = Vec2::from_angle(TAU * rng.random::<f64>());
            return (q, v);
        }
    }
}

impl BilliardTable {
    /// Whether `q` (unit-cell coordinates) lies in a closed obstacle.
    pub fn point_blocked(&self, q: Vec2) -> bool {
        self.disks.iter().any(|d| {
            (-1..=1).any(|ox| {
                (-1..=1).any(|oy| {
                    (q - (d.center + Vec2::new(ox as f64, oy as f64))).norm() <= d.radius
                })
            })
        })
    }

    /// First collision from a free point `q` along `v`: the contact phase
    /// point (cell relative to the cell containing `q`) and the distance.
    pub fn fly_to_boundary(&self, q: Vec2, v: Vec2) -> Result<(PhasePoint, f64)> {
        let hit = self
            .first_hit(q, v, usize::MAX, self.tau_max_bound)
            .ok_or(Error::NoHitWithinHorizon {
                origin: q,
                direction: v,
            })?;
        let d = &self.disks[hit.disk];
        let center = d.center + Vec2::new(hit.translate[0] as f64, hit.translate[1] as f64);
        let radial = q + v * hit.t - center;
        let normal = radial * (1.0 / radial.norm());
        let v_in_n = v.dot(normal).min(0.0);
        let out = v - normal * (2.0 * v_in_n);
        let b = Bounce {
            disk: hit.disk,
            normal,
            velocity: out * (1.0 / out.norm()),
        };
        let mut p = self.phase_of(&b);
        p.cell = hit.translate;
        Ok((p, hit.t))
    }
}
