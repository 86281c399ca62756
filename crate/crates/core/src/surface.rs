//! The immersion `f(u, v) = Phi^{-1} gamma j Phi (+ T)`, its frame fields,
//! and the verification battery.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::curvefamily::{metric_gradient, CurveFamily};
use crate::elliptic::{coeffs, Family};
use crate::error::{Error, Result};
use crate::frame::{integrate, FrameOptions};
use crate::numerics::{d1_central8, d2_central8, StepStats};
use crate::quat::{embed_cj, sandwich_unit, Quaternion, Vec3};
use crate::reparam::{ReparamSample, ReparamSpec};

/// Grid resolution: `nu` nodes over `[0, 2 pi)` and `nv` nodes over `[0, periods V]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridSpec {
    pub nu: usize,
    pub nv: usize,
    pub periods: usize,
}

impl GridSpec {
    pub fn new(nu: usize, nv: usize, periods: usize) -> Self {
        Self { nu, nv, periods }
    }

    pub fn u_nodes(&self) -> Vec<f64> {
        (0..self.nu).map(|i| 2.0 * PI * i as f64 / self.nu as f64).collect()
    }

    pub fn v_nodes(&self, period: f64) -> Vec<f64> {
        let span = self.periods as f64 * period;
        (0..self.nv).map(|j| span * j as f64 / (self.nv - 1) as f64).collect()
    }

    fn check(&self) -> Result<()> {
        if self.nu < 8 || self.nv < 5 || self.periods == 0 {
            return Err(Error::SpecInvalid("grid needs nu >= 8, nv >= 5 and at least one period".into()));
        }
        Ok(())
    }
}

/// Grid samples of the immersion, indexed `[row j over v][column i over u]`.
#[derive(Debug, Clone)]
pub struct SampledSurface {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub reparam: Vec<ReparamSample>,
    pub phi: Vec<Quaternion>,
    pub translation: Vec<Vec3>,
    pub points: Vec<Vec<Vec3>>,
    pub fu: Vec<Vec<Vec3>>,
    pub fv: Vec<Vec<Vec3>>,
    pub normal: Vec<Vec<Vec3>>,
    pub exp_h: Vec<Vec<f64>>,
    /// Reparametrization period `V`.
    pub period: f64,
    pub periods: usize,
    pub stats: StepStats,
    pub frame_drift: f64,
}

/// Immersion and frame fields at one point.
#[derive(Debug, Clone, Copy)]
pub struct NodeFrame {
    pub f: Vec3,
    pub fu: Vec3,
    pub fv: Vec3,
    pub n: Vec3,
    pub exp_h: f64,
}

fn node<F: CurveFamily + ?Sized>(fam: &F, phi: Quaternion, t: Vec3, rs: &ReparamSample, u: f64) -> Result<NodeFrame> {
    let g = fam.gamma(u, rs.w)?;
    let gu = fam.gamma_u(u, rs.w)?;
    let eh = gu.norm();
    let e = gu / eh;
    let (wp, root) = (rs.w_prime, rs.root);
    Ok(NodeFrame {
        f: sandwich_unit(phi, embed_cj(g)) + t,
        fu: sandwich_unit(phi, embed_cj(gu)),
        fv: sandwich_unit(phi, Vec3::new(root, -wp * e.im, wp * e.re)) * eh,
        n: sandwich_unit(phi, Vec3::new(wp, root * e.im, -root * e.re)),
        exp_h: eh,
    })
}

impl SampledSurface {
    pub fn nu(&self) -> usize {
        self.u.len()
    }

    pub fn nv(&self) -> usize {
        self.v.len()
    }

    /// Re-evaluate row `j` at an arbitrary `u`.
    pub fn node_at<F: CurveFamily + ?Sized>(&self, fam: &F, j: usize, u: f64) -> Result<NodeFrame> {
        node(fam, self.phi[j], self.translation[j], &self.reparam[j], u)
    }

    /// Diagonal of the bounding box of all points.
    pub fn diameter(&self) -> f64 {
        let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for p in self.points.iter().flatten() {
            lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        (hi - lo).norm()
    }

    /// Rows spanned by one period.
    pub fn rows_per_period(&self) -> usize {
        (self.nv() - 1) / self.periods
    }
}

/// Integrate the frame on the grid and evaluate the closed forms at every node.
pub fn build<F: CurveFamily + ?Sized>(fam: &F, spec: &ReparamSpec, grid: &GridSpec, opts: &FrameOptions) -> Result<SampledSurface> {
    grid.check()?;
    let u = grid.u_nodes();
    let v = grid.v_nodes(spec.period());
    let traj = integrate(fam, spec, &v, opts)?;
    let reparam: Vec<ReparamSample> = traj.t.iter().map(|&t| spec.sample_param(t)).collect::<Result<_>>()?;
    let rows: Vec<Vec<NodeFrame>> = (0..v.len())
        .into_par_iter()
        .map(|j| u.iter().map(|&ui| node(fam, traj.phi[j], traj.translation[j], &reparam[j], ui)).collect())
        .collect::<Result<_>>()?;
    let grab = |sel: fn(&NodeFrame) -> Vec3| rows.iter().map(|r| r.iter().map(sel).collect()).collect();
    Ok(SampledSurface {
        points: grab(|n| n.f),
        fu: grab(|n| n.fu),
        fv: grab(|n| n.fv),
        normal: grab(|n| n.n),
        exp_h: rows.iter().map(|r| r.iter().map(|n| n.exp_h).collect()).collect(),
        u,
        v,
        reparam,
        phi: traj.phi,
        translation: traj.translation,
        period: spec.period(),
        periods: grid.periods,
        stats: traj.stats,
        frame_drift: traj.drift_before_projection,
    })
}

/// Relative conformality and orthogonality defects.
#[derive(Debug, Clone, Copy, Serialize, Default)]
pub struct ConformalityReport {
    pub fu_dot_fv: f64,
    pub metric_u: f64,
    pub metric_v: f64,
    pub fu_dot_n: f64,
    pub fv_dot_n: f64,
    pub unit_normal: f64,
    pub normal_vs_cross: f64,
}

impl ConformalityReport {
    pub fn max(&self) -> f64 {
        [self.fu_dot_fv, self.metric_u, self.metric_v, self.fu_dot_n, self.fv_dot_n, self.unit_normal, self.normal_vs_cross]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn conformality(s: &SampledSurface) -> ConformalityReport {
    let mut r = ConformalityReport::default();
    for j in 0..s.nv() {
        for i in 0..s.nu() {
            let (fu, fv, n, eh) = (s.fu[j][i], s.fv[j][i], s.normal[j][i], s.exp_h[j][i]);
            r.fu_dot_fv = r.fu_dot_fv.max(fu.dot(&fv).abs() / (eh * eh));
            r.metric_u = r.metric_u.max((fu.norm() / eh - 1.0).abs());
            r.metric_v = r.metric_v.max((fv.norm() / eh - 1.0).abs());
            r.fu_dot_n = r.fu_dot_n.max(fu.dot(&n).abs() / eh);
            r.fv_dot_n = r.fv_dot_n.max(fv.dot(&n).abs() / eh);
            r.unit_normal = r.unit_normal.max((n.norm() - 1.0).abs());
            r.normal_vs_cross = r.normal_vs_cross.max((fu.cross(&fv).normalized() - n).norm());
        }
    }
    r
}

/// Largest `|f(u + 2 pi, v) - f(u, v)|` relative to the diameter.
pub fn closure_defect<F: CurveFamily + ?Sized>(fam: &F, s: &SampledSurface) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for j in 0..s.nv() {
        for (i, &u) in s.u.iter().enumerate() {
            let p = s.node_at(fam, j, u + 2.0 * PI)?.f;
            worst = worst.max((p - s.points[j][i]).norm());
        }
    }
    Ok(worst / s.diameter())
}

/// Index `i + k`; stencils stay on interior nodes, since `u`-curves close only in the critical case.
fn off(i: usize, k: isize) -> usize {
    (i as isize + k) as usize
}

fn du4(g: &[Vec<Vec3>], j: usize, i: usize, h: f64) -> Vec3 {
    let at = |k: isize| g[j][off(i, k)];
    (at(-2) - at(-1) * 8.0 + at(1) * 8.0 - at(2)) / (12.0 * h)
}

fn dv4(g: &[Vec<Vec3>], j: usize, i: usize, h: f64) -> Vec3 {
    (g[j - 2][i] - g[j - 1][i] * 8.0 + g[j + 1][i] * 8.0 - g[j + 2][i]) / (12.0 * h)
}

/// Closed-form `f_u`, `f_v` against fourth-order differences of the points.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DerivativeReport {
    pub fu: f64,
    pub fv: f64,
}

pub fn derivative_consistency(s: &SampledSurface) -> DerivativeReport {
    let hu = s.u[1] - s.u[0];
    let hv = s.v[1] - s.v[0];
    let mut r = DerivativeReport { fu: 0.0, fv: 0.0 };
    for j in 2..s.nv() - 2 {
        for i in 2..s.nu() - 2 {
            let eh = s.exp_h[j][i];
            r.fu = r.fu.max((du4(&s.points, j, i, hu) - s.fu[j][i]).norm() / eh);
            r.fv = r.fv.max((dv4(&s.points, j, i, hv) - s.fv[j][i]).norm() / eh);
        }
    }
    r
}

/// Maximum absolute residuals of the Gauss and Codazzi equations and of the
/// third fundamental form relation, over interior nodes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaussCodazziReport {
    pub gauss: f64,
    pub codazzi_u: f64,
    pub codazzi_v: f64,
    pub third_ff: f64,
}

pub fn gauss_codazzi_residuals<F: CurveFamily + ?Sized>(fam: &F, s: &SampledSurface) -> Result<GaussCodazziReport> {
    let (nu, nv) = (s.nu(), s.nv());
    let hu = s.u[1] - s.u[0];
    let hv = s.v[1] - s.v[0];
    let h: Vec<Vec<f64>> = s.exp_h.iter().map(|r| r.iter().map(|x| x.ln()).collect()).collect();
    let (ui, vj) = (off, off);
    // k1 from f_uu on interior columns, k2 from n_v on interior rows
    let mut k1 = vec![vec![f64::NAN; nu]; nv];
    let mut k2 = vec![vec![f64::NAN; nu]; nv];
    for j in 0..nv {
        for i in 4..nu - 4 {
            let e2 = s.exp_h[j][i].powi(2);
            k1[j][i] = d1_central8(|k| s.fu[j][ui(i, k)], hu).dot(&s.normal[j][i]) / e2;
            if j >= 4 && j + 4 < nv {
                k2[j][i] = -d1_central8(|k| s.normal[vj(j, k)][i], hv).dot(&s.fv[j][i]) / e2;
            }
        }
    }
    let mut r = GaussCodazziReport { gauss: 0.0, codazzi_u: 0.0, codazzi_v: 0.0, third_ff: 0.0 };
    for j in 8..nv.saturating_sub(8) {
        for i in 4..nu - 4 {
            let h_u = d1_central8(|k| h[j][ui(i, k)], hu);
            let h_v = d1_central8(|k| h[vj(j, k)][i], hv);
            let h_uu = d2_central8(|k| h[j][ui(i, k)], hu);
            let h_vv = d2_central8(|k| h[vj(j, k)][i], hv);
            let e2 = s.exp_h[j][i].powi(2);
            r.gauss = r.gauss.max((h_uu + h_vv + k1[j][i] * k2[j][i] * e2).abs());
            let k2_u = d1_central8(|k| k2[j][ui(i, k)], hu);
            r.codazzi_u = r.codazzi_u.max((k2_u - h_u * (k1[j][i] - k2[j][i])).abs());
            let k1_v = d1_central8(|k| k1[vj(j, k)][i], hv);
            r.codazzi_v = r.codazzi_v.max((k1_v - h_v * (k2[j][i] - k1[j][i])).abs());
            let [_, h_w, _, _] = metric_gradient(fam, s.u[i], s.reparam[j].w)?;
            let p = h_w * s.reparam[j].root;
            r.third_ff = r.third_ff.max(((k1[j][i] * s.exp_h[j][i]).abs() - p.abs()).abs());
        }
    }
    Ok(r)
}

/// Residuals of the curve-family PDEs on a `(u, w)` grid using eighth-order stencils.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurvePdeReport {
    pub n: usize,
    pub harmonic: f64,
    pub cauchy_riemann: f64,
    pub riccati: f64,
}

/// `n x n` grid over `u in [0, 2 pi)` and `w in [w_lo, w_hi]`.
pub fn curve_pde_residuals(fam: &Family, n: usize, w_lo: f64, w_hi: f64) -> Result<CurvePdeReport> {
    let hu = 2.0 * PI / n as f64;
    let hw = (w_hi - w_lo) / (n - 1) as f64;
    // half-step offset keeps the nodes off the poles of U at odd multiples of pi/2
    let us: Vec<f64> = (0..n).map(|i| hu * (i as f64 + 0.5)).collect();
    let ws: Vec<f64> = (0..n).map(|j| w_lo + hw * j as f64).collect();
    let samples: Vec<Vec<C64>> = ws
        .par_iter()
        .map(|&w| us.iter().map(|&u| fam.gamma_u(u, w)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let cu: Vec<_> = us.iter().map(|&u| coeffs(u, fam)).collect::<Result<_>>()?;
    let mut r = CurvePdeReport { n, harmonic: 0.0, cauchy_riemann: 0.0, riccati: 0.0 };
    for j in 4..n - 4 {
        for i in 4..n - 4 {
            let base = samples[j][i];
            // log of ratios to the centre keeps sigma local, with no global unwrapping
            let along_u = |k: isize| (samples[j][off(i, k)] / base).ln();
            let along_w = |k: isize| (samples[off(j, k)][i] / base).ln();
            let du = d1_central8(along_u, hu);
            let dw = d1_central8(along_w, hw);
            let (h_u, s_u, h_w, s_w) = (du.re, du.im, dw.re, dw.im);
            let h_uu = d2_central8(along_u, hu).re;
            let h_ww = d2_central8(along_w, hw).re;
            r.harmonic = r.harmonic.max((h_uu + h_ww).abs());
            r.cauchy_riemann = r.cauchy_riemann.max((h_u - s_w).abs()).max((h_w + s_u).abs());
            let eh = base.norm();
            r.riccati = r.riccati.max((h_u - cu[i].u0 * eh - cu[i].u1 / eh).abs());
        }
    }
    Ok(r)
}

/// Best-fit plane of each `u`-curve, and how the planes sit together.
#[derive(Debug, Clone, Serialize)]
pub struct PlanarityReport {
    /// Largest out-of-plane distance relative to the curve diameter.
    pub max_deviation: f64,
    /// Largest standard deviation along `u` of the angle between `n` and the plane normal.
    pub angle_spread: f64,
    pub normal_singular_values: [f64; 3],
    pub normal_rank: usize,
    /// Largest `|m . k|` over the plane normals.
    pub max_k_component: f64,
    /// Common point of all planes, when the normals span space.
    pub cone_point: Option<Vec3>,
    pub cone_distance: f64,
    pub normals: Vec<Vec3>,
    pub centroids: Vec<Vec3>,
}

/// Centroid and unit normal of the least-squares plane through `pts`.
pub fn fit_plane(pts: &[Vec3]) -> (Vec3, Vec3, f64) {
    let n = pts.len() as f64;
    let c = pts.iter().fold(Vec3::zero(), |a, p| a + *p) / n;
    let mut cov = Matrix3::<f64>::zeros();
    for p in pts {
        let d = Vector3::new(p.x - c.x, p.y - c.y, p.z - c.z);
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov);
    let k = eig.eigenvalues.imin();
    let m = eig.eigenvectors.column(k);
    let normal = Vec3::new(m[0], m[1], m[2]).normalized();
    let dev = pts.iter().map(|p| (*p - c).dot(&normal).abs()).fold(0.0, f64::max);
    (c, normal, dev)
}

pub fn planarity_certificate(s: &SampledSurface) -> PlanarityReport {
    let mut normals: Vec<Vec3> = Vec::with_capacity(s.nv());
    let mut centroids = Vec::with_capacity(s.nv());
    let mut max_dev: f64 = 0.0;
    let mut spread: f64 = 0.0;
    for j in 0..s.nv() {
        let (c, mut m, dev) = fit_plane(&s.points[j]);
        if let Some(prev) = normals.last() {
            if m.dot(prev) < 0.0 {
                m = -m;
            }
        }
        let diam = s.points[j].iter().map(|p| (*p - c).norm()).fold(0.0, f64::max) * 2.0;
        max_dev = max_dev.max(dev / diam);
        let angles: Vec<f64> = s.normal[j].iter().map(|n| n.dot(&m).clamp(-1.0, 1.0).acos()).collect();
        let mean = angles.iter().sum::<f64>() / angles.len() as f64;
        let sd = (angles.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / angles.len() as f64).sqrt();
        spread = spread.max(sd);
        normals.push(m);
        centroids.push(c);
    }
    let mat = DMatrix::from_fn(normals.len(), 3, |r, c| normals[r].to_array()[c]);
    let svd = mat.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let rank = sv.iter().filter(|&&x| x > 1e-6 * sv[0]).count();
    let max_k = normals.iter().map(|m| m.z.abs()).fold(0.0, f64::max);
    let (cone_point, cone_distance) = if rank == 3 {
        let rhs = nalgebra::DVector::from_fn(normals.len(), |r, _| normals[r].dot(&centroids[r]));
        match mat.clone().svd(true, true).solve(&rhs, 1e-14) {
            Ok(b) => {
                let b = Vec3::new(b[0], b[1], b[2]);
                let d = normals.iter().zip(&centroids).map(|(m, c)| (b - *c).dot(m).abs()).fold(0.0, f64::max);
                (Some(b), d)
            }
            Err(_) => (None, f64::NAN),
        }
    } else {
        (None, f64::NAN)
    };
    PlanarityReport {
        max_deviation: max_dev,
        angle_spread: spread,
        normal_singular_values: [sv[0], sv[1], sv[2]],
        normal_rank: rank,
        max_k_component: max_k,
        cone_point,
        cone_distance,
        normals,
        centroids,
    }
}

/// Residuals of the inversion symmetry and the `u = omega` sphere.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct InversionReport {
    /// `max |-R^2 f^{-1}(u, v) - f(2 omega - u, v)| / |R|`.
    pub involution: f64,
    /// `max | |f(omega, v)| - |R| |`.
    pub sphere: f64,
    /// `max |f(omega, v)/R + f_u/|f_u||`.
    pub parallel: f64,
}

pub fn inversion_symmetry(fam: &Family, s: &SampledSurface) -> Result<InversionReport> {
    let r = fam.radius;
    let mut rep = InversionReport { involution: 0.0, sphere: 0.0, parallel: 0.0 };
    for j in 0..s.nv() {
        for (i, &u) in s.u.iter().enumerate() {
            let f = s.points[j][i];
            // for imaginary f, -R^2 f^{-1} = R^2 f / |f|^2
            let inv = f * (r * r / f.norm_sqr());
            let mirror = s.node_at(fam, j, 2.0 * fam.omega - u)?.f;
            rep.involution = rep.involution.max((inv - mirror).norm() / r.abs());
        }
        let at = s.node_at(fam, j, fam.omega)?;
        rep.sphere = rep.sphere.max((at.f.norm() - r.abs()).abs());
        rep.parallel = rep.parallel.max((at.f / r + at.fu / at.fu.norm()).norm());
    }
    Ok(rep)
}

/// Residuals of the Christoffel duality `f^*(u, v) = -f(pi - u, v)`, scaled by `e^h`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DualReport {
    pub du: f64,
    pub dv: f64,
}

pub fn dual_symmetry<F: CurveFamily + ?Sized>(fam: &F, s: &SampledSurface) -> Result<DualReport> {
    let mut rep = DualReport { du: 0.0, dv: 0.0 };
    for j in 0..s.nv() {
        for (i, &u) in s.u.iter().enumerate() {
            let m = s.node_at(fam, j, PI - u)?;
            let (fu, fv, eh) = (s.fu[j][i], s.fv[j][i], s.exp_h[j][i]);
            // d/du of -f(pi - u) is f_u(pi - u)
            rep.du = rep.du.max((m.fu - fu / fu.norm_sqr()).norm() * eh);
            rep.dv = rep.dv.max((-m.fv + fv / fv.norm_sqr()).norm() * eh);
        }
    }
    Ok(rep)
}

/// Vertex gap between the row at `periods * V` and the first row.
pub fn seam_gap(s: &SampledSurface, periods: usize) -> f64 {
    let row = periods * s.rows_per_period();
    s.points[row].iter().zip(&s.points[0]).map(|(a, b)| (*a - *b).norm()).fold(0.0, f64::max)
}

/// Convenience: convergence order between two residuals on grids `n` and `2n`.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}
