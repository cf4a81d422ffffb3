//! Planar 2-DoF arm kinematics and tip reference trajectories.
//!
//! Joint angles are `(alpha, beta)`: shoulder angle from the x axis and
//! elbow angle between the links. The inverse map always returns the
//! branch with `beta` in `[0, pi]`.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::csvnum;
use crate::error::{Error, Result};

/// Link lengths of the arm, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmGeometry {
    pub l1: f64,
    pub l2: f64,
}

impl Default for ArmGeometry {
    fn default() -> Self {
        ArmGeometry { l1: 0.1, l2: 0.1 }
    }
}

impl ArmGeometry {
    /// Inner and outer radius of the reachable annulus.
    pub fn reach(&self) -> (f64, f64) {
        ((self.l1 - self.l2).abs(), self.l1 + self.l2)
    }
}

/// Tip position for given joint angles.
pub fn forward_kinematics(geom: &ArmGeometry, alpha: f64, beta: f64) -> (f64, f64) {
    let x = geom.l1 * alpha.cos() + geom.l2 * (alpha + beta).cos();
    let y = geom.l1 * alpha.sin() + geom.l2 * (alpha + beta).sin();
    (x, y)
}

/// Joint angles reaching `(x, y)`, on the branch with `beta` in `[0, pi]`.
///
/// Targets outside the reachable annulus (with a small slack at the
/// boundary) report which radius was requested.
pub fn inverse_kinematics(geom: &ArmGeometry, x: f64, y: f64) -> Result<(f64, f64)> {
    const BOUNDARY_SLACK: f64 = 1e-12;
    let (r_min, r_max) = geom.reach();
    let r = x.hypot(y);
    if r < r_min - BOUNDARY_SLACK || r > r_max + BOUNDARY_SLACK {
        return Err(Error::OutOfWorkspace {
            radius: r,
            reach: (r_min, r_max),
        });
    }
    let cos_beta = ((r * r - geom.l1 * geom.l1 - geom.l2 * geom.l2) / (2.0 * geom.l1 * geom.l2))
        .clamp(-1.0, 1.0);
    let beta = cos_beta.acos();
    let alpha = y.atan2(x) - (geom.l2 * beta.sin()).atan2(geom.l1 + geom.l2 * cos_beta);
    Ok((alpha, beta))
}

/// A tip reference path sampled at a fixed control period.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Sample period in seconds.
    pub period: f64,
    /// Tip positions `(x, y)` in meters, one per sample.
    pub points: Vec<[f64; 2]>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Writes the `t,x,y` CSV rows (header included, any comment lines are
    /// the caller's business).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,y")?;
        for (i, p) in self.points.iter().enumerate() {
            writeln!(
                w,
                "{},{},{}",
                csvnum::fmt(i as f64 * self.period),
                csvnum::fmt(p[0]),
                csvnum::fmt(p[1])
            )?;
        }
        Ok(())
    }
}

/// Distance from the origin to the segment `a`-`b`.
fn segment_min_radius(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return a[0].hypot(a[1]);
    }
    let t = (-(a[0] * dx + a[1] * dy) / len2).clamp(0.0, 1.0);
    (a[0] + t * dx).hypot(a[1] + t * dy)
}

/// Random exploration path: straight segments between uniformly sampled
/// workspace targets, each traversed at a constant random speed, with no
/// dwell at the waypoints. Identical seeds give identical trajectories.
pub fn waypoint_trajectory(
    geom: &ArmGeometry,
    duration: f64,
    period: f64,
    speed_range: (f64, f64),
    margin: f64,
    seed: u64,
) -> Result<Trajectory> {
    if !(duration > 0.0 && period > 0.0) {
        return Err(Error::InvalidArgument(
            "duration and period must be positive".into(),
        ));
    }
    let (v_min, v_max) = speed_range;
    if !(v_min > 0.0 && v_max >= v_min) {
        return Err(Error::InvalidArgument(format!(
            "speed range ({v_min}, {v_max}) must be positive and ordered"
        )));
    }
    let (r_min, r_max) = geom.reach();
    let r_lo = r_min + margin;
    let r_hi = r_max - margin;
    if !(margin >= 0.0) || r_lo >= r_hi {
        return Err(Error::InvalidArgument(format!(
            "margin {margin} leaves no sampling region in annulus [{r_min}, {r_max}]"
        )));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sample_point = |rng: &mut ChaCha12Rng| -> [f64; 2] {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let r = rng.random_range(r_lo * r_lo..r_hi * r_hi).sqrt();
        [r * theta.cos(), r * theta.sin()]
    };

    let n_samples = (duration / period).round() as usize;
    let mut pos = sample_point(&mut rng);
    let mut target = pos;
    let mut speed = v_min;
    let mut points = Vec::with_capacity(n_samples);
    points.push(pos);
    while points.len() < n_samples {
        let mut remaining = period;
        while remaining > 0.0 {
            let dx = target[0] - pos[0];
            let dy = target[1] - pos[1];
            let dist = dx.hypot(dy);
            if dist <= speed * remaining {
                // Reached the waypoint inside this control period: spend the
                // corresponding time, then continue toward a fresh target at
                // a fresh speed.
                if speed > 0.0 {
                    remaining -= dist / speed;
                }
                pos = target;
                loop {
                    let candidate = sample_point(&mut rng);
                    if segment_min_radius(pos, candidate) >= r_lo {
                        target = candidate;
                        break;
                    }
                }
                speed = rng.random_range(v_min..=v_max);
            } else {
                let step = speed * remaining / dist;
                pos = [pos[0] + dx * step, pos[1] + dy * step];
                remaining = 0.0;
            }
        }
        points.push(pos);
    }
    Ok(Trajectory { period, points })
}

/// Inner/outer radius ratio of a regular pentagram outline.
pub const STAR_INNER_RATIO: f64 = 0.382;

/// Vertices of an `n`-pointed star outline (alternating outer and inner
/// corners, counterclockwise, starting at the top outer point).
pub fn star_vertices(center: [f64; 2], outer_radius: f64, points: usize) -> Vec<[f64; 2]> {
    let n = points;
    let inner_radius = STAR_INNER_RATIO * outer_radius;
    let mut vertices = Vec::with_capacity(2 * n);
    for i in 0..n {
        let outer_angle = std::f64::consts::FRAC_PI_2 + i as f64 * std::f64::consts::TAU / n as f64;
        let inner_angle = outer_angle + std::f64::consts::PI / n as f64;
        vertices.push([
            center[0] + outer_radius * outer_angle.cos(),
            center[1] + outer_radius * outer_angle.sin(),
        ]);
        vertices.push([
            center[0] + inner_radius * inner_angle.cos(),
            center[1] + inner_radius * inner_angle.sin(),
        ]);
    }
    vertices
}

/// Closed star-shaped reference traversed at constant tip speed, sampled at
/// `period`, ending where it starts.
pub fn star_trajectory(
    geom: &ArmGeometry,
    center: [f64; 2],
    outer_radius: f64,
    points: usize,
    speed: f64,
    period: f64,
) -> Result<Trajectory> {
    if points < 2 {
        return Err(Error::InvalidArgument(
            "a star needs at least 2 points".into(),
        ));
    }
    if !(speed > 0.0 && period > 0.0 && outer_radius > 0.0) {
        return Err(Error::InvalidArgument(
            "speed, period and radius must be positive".into(),
        ));
    }
    let vertices = star_vertices(center, outer_radius, points);
    let (r_min, r_max) = geom.reach();
    for v in &vertices {
        let r = v[0].hypot(v[1]);
        if r < r_min - 1e-12 || r > r_max + 1e-12 {
            return Err(Error::OutOfWorkspace {
                radius: r,
                reach: (r_min, r_max),
            });
        }
    }
    for i in 0..vertices.len() {
        let a = vertices[i];
        let b = vertices[(i + 1) % vertices.len()];
        if segment_min_radius(a, b) < r_min - 1e-12 {
            return Err(Error::OutOfWorkspace {
                radius: segment_min_radius(a, b),
                reach: (r_min, r_max),
            });
        }
    }

    let mut edge_lengths = Vec::with_capacity(vertices.len());
    let mut total = 0.0;
    for i in 0..vertices.len() {
        let a = vertices[i];
        let b = vertices[(i + 1) % vertices.len()];
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        edge_lengths.push(len);
        total += len;
    }

    let n_samples = (total / (speed * period)).round() as usize + 1;
    let mut points_out = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let mut d = (k as f64 * speed * period).min(total);
        let mut idx = 0;
        while d > edge_lengths[idx] && idx < edge_lengths.len() - 1 {
            d -= edge_lengths[idx];
            idx += 1;
        }
        let a = vertices[idx];
        let b = vertices[(idx + 1) % vertices.len()];
        let t = if edge_lengths[idx] > 0.0 {
            (d / edge_lengths[idx]).min(1.0)
        } else {
            0.0
        };
        points_out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
    Ok(Trajectory {
        period,
        points: points_out,
    })
}
