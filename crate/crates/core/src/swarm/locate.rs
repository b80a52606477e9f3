//! Rogue-emitter localization from swarm observations.
//!
//! Two methods:
//! - [`tdoa_locate`] — synchronized arrival times at three or more
//!   receivers; minimizes pairwise range-difference residuals by iterative
//!   least squares from the receiver centroid.
//! - [`bearing_locate`] — bearings (clockwise from north) from two or more
//!   receivers; closed-form least-squares intersection of the bearing
//!   lines.
//!
//! The simulation is planar in meters; geodetic coordinates are mapped by a
//! local tangent plane fixed per scenario before observations reach these
//! solvers.

use std::fmt;

use thiserror::Error;

/// Default signal propagation speed (vacuum light speed, m/s); overridable
/// for scaled test setups.
pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

const MAX_ITERATIONS: usize = 100;
const STEP_TOLERANCE: f64 = 1e-10;

/// A point in the scenario's planar frame, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarPoint {
    pub x_m: f64,
    pub y_m: f64,
}

impl PlanarPoint {
    pub fn new(x_m: f64, y_m: f64) -> Self {
        PlanarPoint { x_m, y_m }
    }

    pub fn distance(&self, other: PlanarPoint) -> f64 {
        let dx = self.x_m - other.x_m;
        let dy = self.y_m - other.y_m;
        (dx * dx + dy * dy).sqrt()
    }
}

impl fmt::Display for PlanarPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x_m, self.y_m)
    }
}

/// Arrival-time observation from one receiver with a synchronized clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingObs {
    pub receiver: PlanarPoint,
    pub arrival_time_s: f64,
}

/// Bearing observation: degrees clockwise from north (90 = due east).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BearingObs {
    pub receiver: PlanarPoint,
    pub bearing_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocateMethod {
    Tdoa,
    Bearing,
}

impl fmt::Display for LocateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LocateMethod::Tdoa => "TDOA",
            LocateMethod::Bearing => "BEARING",
        })
    }
}

/// A position estimate with its residual norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterEstimate {
    pub position: PlanarPoint,
    pub residual: f64,
    pub method: LocateMethod,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LocateError {
    #[error("need at least {need} observations, got {have}")]
    InsufficientObservations { need: usize, have: usize },
    #[error("receivers are collinear; the geometry cannot fix a position")]
    CollinearReceivers,
    #[error("bearings are parallel; the rays never intersect")]
    ParallelBearings,
    #[error("no convergence after {MAX_ITERATIONS} iterations (best residual {})", best.residual)]
    NoConvergence { best: EmitterEstimate },
}

fn centroid(points: impl Iterator<Item = PlanarPoint> + Clone) -> PlanarPoint {
    let n = points.clone().count() as f64;
    let (sx, sy) = points.fold((0.0, 0.0), |(sx, sy), p| (sx + p.x_m, sy + p.y_m));
    PlanarPoint::new(sx / n, sy / n)
}

/// Rank test on the centered receiver cloud: collinear iff the smaller
/// eigenvalue of the 2x2 covariance is negligible against the larger.
fn receivers_collinear(receivers: &[PlanarPoint]) -> bool {
    let c = centroid(receivers.iter().copied());
    let (mut cxx, mut cyy, mut cxy) = (0.0, 0.0, 0.0);
    for r in receivers {
        let dx = r.x_m - c.x_m;
        let dy = r.y_m - c.y_m;
        cxx += dx * dx;
        cyy += dy * dy;
        cxy += dx * dy;
    }
    let det = cxx * cyy - cxy * cxy;
    let scale = cxx + cyy;
    // Relative threshold well above f64 rounding noise (~1e-16 * scale^2)
    // so oblique lines are caught, far below any usable 2-D spread.
    scale <= 0.0 || det <= 1e-12 * scale * scale
}

fn solve_2x2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < 1e-30 {
        return None;
    }
    Some([
        (a[1][1] * b[0] - a[0][1] * b[1]) / det,
        (-a[1][0] * b[0] + a[0][0] * b[1]) / det,
    ])
}

/// Localizes an emitter from synchronized arrival times.
///
/// Minimizes, over all receiver pairs (i, j), the squared mismatch between
/// the measured range difference `(t_i - t_j) * c` and the modeled
/// `|p - r_i| - |p - r_j|`, starting from the receiver centroid.
pub fn tdoa_locate(observations: &[TimingObs], c: f64) -> Result<EmitterEstimate, LocateError> {
    if observations.len() < 3 {
        return Err(LocateError::InsufficientObservations {
            need: 3,
            have: observations.len(),
        });
    }
    let receivers: Vec<PlanarPoint> = observations.iter().map(|o| o.receiver).collect();
    if receivers_collinear(&receivers) {
        return Err(LocateError::CollinearReceivers);
    }

    let pairs: Vec<(usize, usize)> = (0..observations.len())
        .flat_map(|i| (i + 1..observations.len()).map(move |j| (i, j)))
        .collect();

    let residuals = |p: PlanarPoint| -> Vec<f64> {
        pairs
            .iter()
            .map(|&(i, j)| {
                let (oi, oj) = (&observations[i], &observations[j]);
                let measured = (oi.arrival_time_s - oj.arrival_time_s) * c;
                let modeled = p.distance(oi.receiver) - p.distance(oj.receiver);
                measured - modeled
            })
            .collect()
    };
    let norm = |v: &[f64]| v.iter().map(|r| r * r).sum::<f64>().sqrt();

    let mut p = centroid(receivers.iter().copied());
    let mut iterations = 0;

    for iter in 0..MAX_ITERATIONS {
        iterations = iter + 1;
        let mut jtj = [[0.0f64; 2]; 2];
        let mut jtr = [0.0f64; 2];

        for &(i, j) in &pairs {
            let (oi, oj) = (&observations[i], &observations[j]);
            let di = p.distance(oi.receiver).max(1e-9);
            let dj = p.distance(oj.receiver).max(1e-9);
            let measured = (oi.arrival_time_s - oj.arrival_time_s) * c;
            let f = measured - (di - dj);
            // d(residual)/dp = -(unit(p - ri) - unit(p - rj))
            let jx = -((p.x_m - oi.receiver.x_m) / di - (p.x_m - oj.receiver.x_m) / dj);
            let jy = -((p.y_m - oi.receiver.y_m) / di - (p.y_m - oj.receiver.y_m) / dj);
            jtj[0][0] += jx * jx;
            jtj[0][1] += jx * jy;
            jtj[1][0] += jy * jx;
            jtj[1][1] += jy * jy;
            jtr[0] += jx * f;
            jtr[1] += jy * f;
        }

        let Some(delta) = solve_2x2(jtj, jtr) else {
            // Degenerate normal equations away from the solution.
            break;
        };
        p = PlanarPoint::new(p.x_m - delta[0], p.y_m - delta[1]);
        if (delta[0] * delta[0] + delta[1] * delta[1]).sqrt() < STEP_TOLERANCE {
            return Ok(EmitterEstimate {
                position: p,
                residual: norm(&residuals(p)),
                method: LocateMethod::Tdoa,
                iterations,
            });
        }
    }

    Err(LocateError::NoConvergence {
        best: EmitterEstimate {
            position: p,
            residual: norm(&residuals(p)),
            method: LocateMethod::Tdoa,
            iterations,
        },
    })
}

/// Localizes an emitter from two or more bearing rays.
///
/// Each observation contributes the perpendicular-distance equation of its
/// bearing line; the closed-form least-squares solution intersects them.
pub fn bearing_locate(observations: &[BearingObs]) -> Result<EmitterEstimate, LocateError> {
    if observations.len() < 2 {
        return Err(LocateError::InsufficientObservations {
            need: 2,
            have: observations.len(),
        });
    }

    // Bearing theta (cw from north): direction (sin, cos); normal (cos, -sin).
    let mut a = [[0.0f64; 2]; 2];
    let mut b = [0.0f64; 2];
    for o in observations {
        let theta = o.bearing_deg.to_radians();
        let (nx, ny) = (theta.cos(), -theta.sin());
        let rhs = nx * o.receiver.x_m + ny * o.receiver.y_m;
        a[0][0] += nx * nx;
        a[0][1] += nx * ny;
        a[1][0] += ny * nx;
        a[1][1] += ny * ny;
        b[0] += nx * rhs;
        b[1] += ny * rhs;
    }

    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    // The Gram matrix of unit normals has determinant zero exactly when all
    // bearings are parallel mod 180 degrees.
    if det.abs() < 1e-9 {
        return Err(LocateError::ParallelBearings);
    }
    let sol = solve_2x2(a, b).ok_or(LocateError::ParallelBearings)?;
    let p = PlanarPoint::new(sol[0], sol[1]);

    let residual = observations
        .iter()
        .map(|o| {
            let theta = o.bearing_deg.to_radians();
            let (nx, ny) = (theta.cos(), -theta.sin());
            let r = nx * (p.x_m - o.receiver.x_m) + ny * (p.y_m - o.receiver.y_m);
            r * r
        })
        .sum::<f64>()
        .sqrt();

    Ok(EmitterEstimate { position: p, residual, method: LocateMethod::Bearing, iterations: 1 })
}
