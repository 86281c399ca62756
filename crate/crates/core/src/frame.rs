//! The rotation frame `Phi(v)` on unit quaternions, its monodromy, and the
//! rotational extension of a fundamental piece.

use std::cell::RefCell;
use std::f64::consts::PI;

use serde::Serialize;

use crate::curvefamily::CurveFamily;
use crate::error::{Error, Result};
use crate::numerics::{brent, Dopri, StepStats};
use crate::quat::{sandwich_unit, Quaternion, Vec3};
use crate::reparam::{AnalyticReparam, ReparamSpec};
use crate::surface::SampledSurface;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FrameOptions {
    pub tol: f64,
    /// Multiplies the signed root inside the frame equation only. `1.0` in
    /// normal use; `-1.0` produces a deliberately inconsistent surface.
    pub root_factor: f64,
}

impl Default for FrameOptions {
    fn default() -> Self {
        Self { tol: 1e-12, root_factor: 1.0 }
    }
}

impl FrameOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Frame and translation sampled at the requested `v` nodes.
#[derive(Debug, Clone)]
pub struct FrameTrajectory {
    pub v: Vec<f64>,
    /// Integration parameter at each node (equal to `v` for the sine family).
    pub t: Vec<f64>,
    pub phi: Vec<Quaternion>,
    pub translation: Vec<Vec3>,
    pub stats: StepStats,
    /// Largest `| |Phi| - 1 |` seen before renormalization.
    pub drift_before_projection: f64,
}

/// Generator in the integration parameter: `(A, translation rate)` with `Phi' = A Phi`.
fn generator<F: CurveFamily + ?Sized>(fam: &F, spec: &ReparamSpec, t: f64, opts: &FrameOptions) -> Result<(Quaternion, f64)> {
    let smp = spec.sample_param(t)?;
    let w1 = fam.generator(smp.w)?;
    let c = opts.root_factor * smp.root * smp.dv_dt;
    Ok((Quaternion::new(0.0, 0.0, -c * w1.im, c * w1.re), c * fam.translation_rate(smp.w)?))
}

fn rhs<F: CurveFamily + ?Sized>(
    fam: &F,
    spec: &ReparamSpec,
    opts: &FrameOptions,
    failure: &RefCell<Option<Error>>,
    t: f64,
    y: &[f64; 7],
) -> [f64; 7] {
    let (a, r) = match generator(fam, spec, t, opts) {
        Ok(g) => g,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            return [f64::NAN; 7];
        }
    };
    let phi = Quaternion::new(y[0], y[1], y[2], y[3]);
    let dphi = a * phi;
    let n = phi.norm_sqr();
    let dt = sandwich_unit(phi, Vec3::new(r, 0.0, 0.0)) / n;
    [dphi.w, dphi.x, dphi.y, dphi.z, dt.x, dt.y, dt.z]
}

/// Integrate `Phi' = sqrt(1 - w'^2) W1(w) k Phi` from `Phi(0) = 1` through the
/// increasing nodes `v_nodes` (the first node must be 0).
pub fn integrate<F: CurveFamily + ?Sized>(
    fam: &F,
    spec: &ReparamSpec,
    v_nodes: &[f64],
    opts: &FrameOptions,
) -> Result<FrameTrajectory> {
    if v_nodes.first() != Some(&0.0) || !v_nodes.windows(2).all(|p| p[1] > p[0]) {
        return Err(Error::SpecInvalid("v nodes must start at 0 and increase".into()));
    }
    let failure = RefCell::new(None);
    let drift = RefCell::new(0.0f64);
    let solver = Dopri::<7>::new(opts.tol);
    let mut y = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let mut stats = StepStats::default();
    let ts: Vec<f64> = v_nodes.iter().map(|&v| spec.param_of_v(v)).collect();
    let mut phi = vec![Quaternion::ONE];
    let mut translation = vec![Vec3::zero()];
    for win in ts.windows(2) {
        let (next, st) = solver.solve(
            |t, y| rhs(fam, spec, opts, &failure, t, y),
            |y| {
                let n = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3]).sqrt();
                let mut d = drift.borrow_mut();
                *d = d.max((n - 1.0).abs());
                for c in y.iter_mut().take(4) {
                    *c /= n;
                }
            },
            win[0],
            y,
            win[1],
        )?;
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        stats.merge(&st);
        y = next;
        phi.push(Quaternion::new(y[0], y[1], y[2], y[3]));
        translation.push(Vec3::new(y[4], y[5], y[6]));
    }
    let drift_before_projection = *drift.borrow();
    Ok(FrameTrajectory { v: v_nodes.to_vec(), t: ts, phi, translation, stats, drift_before_projection })
}

/// `Phi(0)^{-1} Phi(V)` with its rotation axis and angle in `[0, pi]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Monodromy {
    pub m: Quaternion,
    pub axis: Vec3,
    pub theta: f64,
    /// Translation accumulated over one period; zero for the generic family.
    pub offset: Vec3,
}

/// Rotation angle in `[0, pi]` and axis of a unit quaternion, after fixing the sign `w >= 0`.
pub fn rotation_angle(q: Quaternion) -> (f64, Vec3, Quaternion) {
    let q = q.normalized();
    let q = if q.w < 0.0 { -q } else { q };
    let theta = 2.0 * q.imag().norm().atan2(q.w);
    let v = q.imag();
    let axis = if v.norm() > 0.0 { v.normalized() } else { Vec3::new(0.0, 0.0, 1.0) };
    (theta, axis, q)
}

impl Monodromy {
    pub fn from_quaternion(q: Quaternion, offset: Vec3) -> Result<Self> {
        let (theta, axis, m) = rotation_angle(q);
        if theta < 1e-10 {
            return Err(Error::DegenerateRotation { theta });
        }
        Ok(Self { m, axis, theta, offset })
    }

    pub fn reconstruct(&self) -> Quaternion {
        Quaternion::from_parts((self.theta / 2.0).cos(), self.axis * (self.theta / 2.0).sin())
    }

    pub fn power(&self, k: usize) -> Quaternion {
        (0..k).fold(Quaternion::ONE, |acc, _| acc * self.m)
    }

    /// `M^{-k} x M^k`.
    pub fn rotate(&self, x: Vec3, k: usize) -> Vec3 {
        sandwich_unit(self.power(k), x)
    }

    /// Translation after `k` periods: `sum_{i<k} M^{-i} offset M^i`.
    pub fn offset_after(&self, k: usize) -> Vec3 {
        (0..k).fold(Vec3::zero(), |acc, i| acc + self.rotate(self.offset, i))
    }
}

/// Monodromy of a trajectory that spans exactly one period.
pub fn monodromy(traj: &FrameTrajectory, period: f64) -> Result<Monodromy> {
    let last = *traj.v.last().unwrap_or(&0.0);
    if (last - period).abs() > 1e-9 * period.max(1.0) {
        return Err(Error::SpecInvalid(format!("trajectory ends at {last}, not at the period {period}")));
    }
    let m = traj.phi[0].inverse()? * *traj.phi.last().unwrap();
    Monodromy::from_quaternion(m, *traj.translation.last().unwrap())
}

/// Raw monodromy quaternion and translation over one period.
pub fn period_map<F: CurveFamily + ?Sized>(fam: &F, spec: &ReparamSpec, opts: &FrameOptions) -> Result<(Quaternion, Vec3, StepStats)> {
    let traj = integrate(fam, spec, &[0.0, spec.period()], opts)?;
    Ok((traj.phi[1], traj.translation[1], traj.stats))
}

pub fn period_monodromy<F: CurveFamily + ?Sized>(fam: &F, spec: &ReparamSpec, opts: &FrameOptions) -> Result<Monodromy> {
    let (m, off, _) = period_map(fam, spec, opts)?;
    Monodromy::from_quaternion(m, off)
}

/// Append `k` rotated copies of a one-period piece.
///
/// Copy `c` is `M^{-c} f M^c` plus the accumulated translation; its first row
/// coincides with the last row of the previous copy and is dropped.
pub fn extend_by_rotation(piece: &SampledSurface, mono: &Monodromy, k: usize) -> SampledSurface {
    let mut out = piece.clone();
    let nv = piece.v.len();
    let period = piece.period;
    for c in 1..=k {
        let rot = |x: &Vec3| mono.rotate(*x, c);
        let shift = mono.offset_after(c);
        let phi_c = mono.power(c);
        for j in 1..nv {
            out.v.push(piece.v[j] + c as f64 * period);
            out.reparam.push(piece.reparam[j]);
            out.phi.push(piece.phi[j] * phi_c);
            out.translation.push(rot(&piece.translation[j]) + shift);
            out.points.push(piece.points[j].iter().map(|p| rot(p) + shift).collect());
            out.fu.push(piece.fu[j].iter().map(rot).collect());
            out.fv.push(piece.fv[j].iter().map(rot).collect());
            out.normal.push(piece.normal[j].iter().map(rot).collect());
            out.exp_h.push(piece.exp_h[j].clone());
        }
    }
    out.periods = piece.periods * (k + 1);
    out
}

/// Outcome of tuning the sine amplitude so that the rotation angle hits a target.
#[derive(Debug, Clone, Serialize)]
pub struct TorusTuning {
    pub spec: AnalyticReparam,
    pub amplitude: f64,
    pub theta: f64,
    pub target: f64,
    pub evaluations: usize,
    pub bracket: (f64, f64),
}

/// Scan the amplitude over `range`, bracket `theta(A) = target` and refine
/// with Brent's method.
pub fn close_torus<F: CurveFamily + ?Sized>(
    template: AnalyticReparam,
    fam: &F,
    target: f64,
    range: (f64, f64),
    scan: usize,
    opts: &FrameOptions,
) -> Result<TorusTuning> {
    if !(0.0..=PI).contains(&target) {
        return Err(Error::NoBracket { lo: range.0, hi: range.1 });
    }
    let evals = std::cell::Cell::new(0usize);
    let failure = RefCell::new(None);
    let theta_of = |a: f64| -> f64 {
        evals.set(evals.get() + 1);
        let spec = ReparamSpec::Analytic(AnalyticReparam { amplitude: a, ..template });
        match period_map(fam, &spec, opts) {
            Ok((m, _, _)) => rotation_angle(m).0,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let n = scan.max(2);
    let grid: Vec<f64> = (0..=n).map(|k| range.0 + (range.1 - range.0) * k as f64 / n as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&a| theta_of(a) - target).collect();
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    let mut bracket = None;
    for k in 0..n {
        if values[k] == 0.0 {
            bracket = Some((grid[k], grid[k]));
            break;
        }
        if values[k] * values[k + 1] < 0.0 {
            bracket = Some((grid[k], grid[k + 1]));
            break;
        }
    }
    let (lo, hi) = bracket.ok_or(Error::NoBracket { lo: range.0, hi: range.1 })?;
    let amplitude = if lo == hi { lo } else { brent(|a| theta_of(a) - target, lo, hi, 1e-14)? };
    let theta = theta_of(amplitude);
    Ok(TorusTuning {
        spec: AnalyticReparam { amplitude, ..template },
        amplitude,
        theta,
        target,
        evaluations: evals.get(),
        bracket: (lo, hi),
    })
}
