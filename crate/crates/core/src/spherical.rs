//! Spherical second family: the three-function linear system along `u`,
//! sphere centers `Z(u)`, their collinearity, and the closed-form axis `Z'(omega)`.

use std::cell::RefCell;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::curvefamily::{metric_gradient, CurveFamily};
use crate::elliptic::{coeffs, Family};
use crate::error::{Error, Result};
use crate::numerics::{d1_central4, Dopri};
use crate::quat::Vec3;
use crate::reparam::{s_of_w, SphericalReparam, SphericalSpec};
use crate::surface::SampledSurface;

/// Solution `(phi2, phi1, phi0)` of the linear system at `u`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhiTriple {
    pub u: f64,
    pub phi2: f64,
    pub phi1: f64,
    pub phi0: f64,
}

impl PhiTriple {
    /// Initial data at `u = omega` determined by `(delta, s1, s2)`.
    pub fn initial(spec: &SphericalSpec, omega: f64) -> Self {
        let [c0, c1, _] = spec.pair_poly();
        let d = spec.delta;
        Self { u: omega, phi2: 1.0 / d, phi1: c1 / d, phi0: c0 / d }
    }

    fn array(&self) -> [f64; 3] {
        [self.phi2, self.phi1, self.phi0]
    }

    /// `(alpha, beta)` with `alpha = U1 / D`, `beta = -phi2 / D`, `D = U1 phi0 + U phi2`.
    pub fn alpha_beta(&self, fam: &Family) -> Result<(f64, f64)> {
        let c = coeffs(self.u, fam)?;
        let den = c.u1 * self.phi0 + c.u0 * self.phi2;
        Ok((c.u1 / den, -self.phi2 / den))
    }

    /// Intersection angle `psi = atan2(-phi2, U1)`, defined modulo `pi`.
    pub fn psi(&self, fam: &Family) -> Result<f64> {
        Ok((-self.phi2).atan2(coeffs(self.u, fam)?.u1))
    }

    /// `p = phi2 e^{-h} + phi1 + phi0 e^h`.
    pub fn p(&self, exp_h: f64) -> f64 {
        self.phi2 / exp_h + self.phi1 + self.phi0 * exp_h
    }
}

/// Poles of `U`, `U1` on the real axis inside `[lo, hi]`.
fn real_poles(fam: &Family, lo: f64, hi: f64) -> Vec<f64> {
    if fam.companion != 2 {
        return Vec::new();
    }
    let k0 = ((lo - PI / 2.0) / PI).ceil() as i64;
    let k1 = ((hi - PI / 2.0) / PI).floor() as i64;
    (k0..=k1).map(|k| PI / 2.0 + k as f64 * PI).collect()
}

/// Waypoints from `from` to `to`, lifting into the upper half plane when a pole lies between.
fn path(fam: &Family, from: f64, to: f64) -> Result<Vec<C64>> {
    let (lo, hi) = (from.min(to), from.max(to));
    if let Some(&p) = real_poles(fam, lo - 1e-3, hi + 1e-3).iter().find(|&&p| (p - to).abs() < 1e-3 || (p - from).abs() < 1e-3) {
        return Err(Error::PoleProximity { at: p });
    }
    let a = C64::new(from, 0.0);
    let b = C64::new(to, 0.0);
    if real_poles(fam, lo, hi).is_empty() {
        return Ok(vec![a, b]);
    }
    let lift = C64::new(0.0, 0.3f64.min(PI * fam.lattice.tau.im / 3.0));
    Ok(vec![a, a + lift, b + lift, b])
}

fn transport(fam: &Family, y0: [f64; 3], from: f64, to: f64, tol: f64) -> Result<[f64; 3]> {
    transport_along(fam, y0, &path(fam, from, to)?, tol)
}

/// Integrate the complexified system along straight segments through `waypoints`;
/// returns the real part at the last waypoint.
fn transport_along(fam: &Family, y0: [f64; 3], waypoints: &[C64], tol: f64) -> Result<[f64; 3]> {
    let solver = Dopri::<6>::new(tol);
    let failure = RefCell::new(None);
    let mut y = [y0[0], 0.0, y0[1], 0.0, y0[2], 0.0];
    for seg in waypoints.windows(2) {
        let (z0, dz) = (seg[0], seg[1] - seg[0]);
        let rhs = |tau: f64, y: &[f64; 6]| -> [f64; 6] {
            let z = z0 + dz * tau;
            let (a, b) = match (fam.u_jet(z), fam.u1_jet(z)) {
                (Ok(a), Ok(b)) => (a.value, b.value),
                (Err(e), _) | (_, Err(e)) => {
                    failure.borrow_mut().get_or_insert(e);
                    return [f64::NAN; 6];
                }
            };
            let p2 = C64::new(y[0], y[1]);
            let p1 = C64::new(y[2], y[3]);
            let p0 = C64::new(y[4], y[5]);
            let d2 = dz * (-b * p1);
            let d1 = dz * (2.0 * a * p2 - 2.0 * b * p0);
            let d0 = dz * (a * p1);
            [d2.re, d2.im, d1.re, d1.im, d0.re, d0.im]
        };
        let (next, _) = solver.solve(rhs, |_| {}, 0.0, y, 1.0)?;
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        y = next;
    }
    Ok([y[0], y[2], y[4]])
}

/// Solve the system from `start` at `u = start.u` to each of `us`.
pub fn integrate_phis_from(start: PhiTriple, fam: &Family, us: &[f64], tol: f64) -> Result<Vec<PhiTriple>> {
    us.par_iter()
        .map(|&u| {
            let [phi2, phi1, phi0] = if u == start.u { start.array() } else { transport(fam, start.array(), start.u, u, tol)? };
            Ok(PhiTriple { u, phi2, phi1, phi0 })
        })
        .collect()
}

/// Solve the system launched at `u = omega` from the spherical initial data.
pub fn integrate_phis(spec: &SphericalSpec, fam: &Family, us: &[f64], tol: f64) -> Result<Vec<PhiTriple>> {
    integrate_phis_from(PhiTriple::initial(spec, fam.omega), fam, us, tol)
}

/// Least-squares sphere through `pts`: `(center, radius, max |dist - radius|)`.
pub fn fit_sphere(pts: &[Vec3]) -> Result<(Vec3, f64, f64)> {
    if pts.len() < 4 {
        return Err(Error::DegenerateFit("a sphere needs at least four points".into()));
    }
    let c = pts.iter().fold(Vec3::zero(), |a, p| a + *p) / pts.len() as f64;
    let scale = pts.iter().map(|p| (*p - c).norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let a = DMatrix::from_fn(pts.len(), 4, |i, k| {
        let d = (pts[i] - c) / scale;
        [2.0 * d.x, 2.0 * d.y, 2.0 * d.z, 1.0][k]
    });
    let b = DVector::from_fn(pts.len(), |i, _| ((pts[i] - c) / scale).norm_sqr());
    let svd = a.svd(true, true);
    let sv = &svd.singular_values;
    if sv.min() < 1e-9 * sv.max() {
        return Err(Error::DegenerateFit(format!("condition {:.3e}", sv.max() / sv.min())));
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::DegenerateFit(e.into()))?;
    let center = Vec3::new(x[0], x[1], x[2]);
    let radius = (x[3] + center.norm_sqr()).sqrt();
    let center = c + center * scale;
    let radius = radius * scale;
    let res = pts.iter().map(|p| ((*p - center).norm() - radius).abs()).fold(0.0, f64::max);
    Ok((center, radius, res))
}

/// Points of the `v`-curve at `u` over the first period of `s`.
fn v_curve<F: CurveFamily + ?Sized>(fam: &F, s: &SampledSurface, u: f64) -> Result<Vec<Vec3>> {
    (0..=s.rows_per_period()).map(|j| Ok(s.node_at(fam, j, u)?.f)).collect()
}

/// Best-fit sphere of one `v`-curve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SphereFit {
    pub u: f64,
    pub center: Vec3,
    pub radius: f64,
    pub max_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SphericalityReport {
    pub fits: Vec<SphereFit>,
    /// Largest fit residual divided by the fitted radius.
    pub max_relative_residual: f64,
}

/// Fit a sphere to the `v`-curve at each `u`; degenerate fits count as failures.
pub fn sphericality_certificate<F: CurveFamily + ?Sized>(fam: &F, s: &SampledSurface, us: &[f64]) -> Result<SphericalityReport> {
    let fits: Vec<SphereFit> = us
        .par_iter()
        .map(|&u| {
            let pts = v_curve(fam, s, u)?;
            Ok(match fit_sphere(&pts) {
                Ok((center, radius, max_residual)) => SphereFit { u, center, radius, max_residual },
                Err(_) => SphereFit { u, center: Vec3::zero(), radius: f64::INFINITY, max_residual: f64::INFINITY },
            })
        })
        .collect::<Result<_>>()?;
    let max_relative_residual = fits.iter().map(|f| f.max_residual / f.radius).fold(0.0, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) });
    let max_relative_residual = if fits.iter().any(|f| f.radius.is_infinite()) { f64::INFINITY } else { max_relative_residual };
    Ok(SphericalityReport { fits, max_relative_residual })
}

/// Residual of `e^h - alpha q + beta h_u` with `q = p_w / h_w` and `p = h_w sqrt(1 - w'^2)`.
pub fn characterization_residual(sp: &SphericalReparam, us: &[f64], ws: &[f64], tol: f64) -> Result<f64> {
    let fam = &sp.family;
    let phis = integrate_phis(&sp.spec, fam, us, tol)?;
    let p = |u: f64, w: f64| -> Result<f64> { Ok(metric_gradient(fam, u, w)?[1] * sp.signed_root(s_of_w(w, fam)?)) };
    let h = 1e-3;
    let mut worst = 0.0f64;
    for ph in &phis {
        let (alpha, beta) = ph.alpha_beta(fam)?;
        for &w in ws {
            let g = metric_gradient(fam, ph.u, w)?;
            let pw = d1_central4(p(ph.u, w - 2.0 * h)?, p(ph.u, w - h)?, p(ph.u, w + h)?, p(ph.u, w + 2.0 * h)?, h);
            let q = pw / g[1];
            let eh = fam.exp_h(ph.u, w)?;
            worst = worst.max((eh - alpha * q + beta * g[0]).abs());
        }
    }
    Ok(worst)
}

/// Spread of `p / h_w` over `us` at each `w`, and its largest gap from `sqrt(1 - w'^2)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RootConsistency {
    pub u_spread: f64,
    pub root_gap: f64,
}

pub fn root_consistency(sp: &SphericalReparam, us: &[f64], ws: &[f64], tol: f64) -> Result<RootConsistency> {
    let fam = &sp.family;
    let phis = integrate_phis(&sp.spec, fam, us, tol)?;
    let mut out = RootConsistency { u_spread: 0.0, root_gap: 0.0 };
    for &w in ws {
        let root = sp.signed_root(s_of_w(w, fam)?);
        let vals: Vec<f64> = phis
            .iter()
            .map(|ph| Ok(ph.p(fam.exp_h(ph.u, w)?) / metric_gradient(fam, ph.u, w)?[1]))
            .collect::<Result<_>>()?;
        let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        out.u_spread = out.u_spread.max(hi - lo);
        out.root_gap = out.root_gap.max(vals.iter().map(|x| (x - root).abs()).fold(0.0, f64::max));
    }
    Ok(out)
}

/// Sphere center of the `v`-curve at `u` from the linear system and from a fit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SphereCenter {
    pub u: f64,
    pub center: Vec3,
    /// `sqrt(alpha^2 + beta^2)`.
    pub radius: f64,
    pub psi: f64,
    /// Largest distance between `f + alpha n + beta fu/|fu|` along the curve and `center`.
    pub row_spread: f64,
    pub fit_center: Vec3,
    pub fit_radius: f64,
    pub fit_residual: f64,
    /// Angle of `Z - f` in the `(n, fu/|fu|)` plane at the first row of the fitted sphere.
    pub fit_psi: f64,
}

impl SphereCenter {
    /// `|center - fit_center| / radius`.
    pub fn center_gap(&self) -> f64 {
        (self.center - self.fit_center).norm() / self.radius
    }

    /// Difference of the two intersection angles modulo `pi`.
    pub fn psi_gap(&self) -> f64 {
        let d = (self.psi - self.fit_psi).rem_euclid(PI);
        d.min(PI - d)
    }
}

pub fn sphere_centers(s: &SampledSurface, sp: &SphericalReparam, us: &[f64], tol: f64) -> Result<Vec<SphereCenter>> {
    let fam = &sp.family;
    let phis = integrate_phis(&sp.spec, fam, us, tol)?;
    phis.par_iter()
        .map(|ph| {
            let (alpha, beta) = ph.alpha_beta(fam)?;
            let rows: Vec<_> = (0..=s.rows_per_period()).map(|j| s.node_at(fam, j, ph.u)).collect::<Result<_>>()?;
            let zs: Vec<Vec3> = rows.iter().map(|n| n.f + n.n * alpha + n.fu.normalized() * beta).collect();
            let center = zs[0];
            let row_spread = zs.iter().map(|z| (*z - center).norm()).fold(0.0, f64::max);
            let pts: Vec<Vec3> = rows.iter().map(|n| n.f).collect();
            let (fit_center, fit_radius, fit_residual) = fit_sphere(&pts)?;
            let d = fit_center - rows[0].f;
            let fit_psi = d.dot(&rows[0].fu.normalized()).atan2(d.dot(&rows[0].n));
            Ok(SphereCenter {
                u: ph.u,
                center,
                radius: alpha.hypot(beta),
                psi: ph.psi(fam)?,
                row_spread,
                fit_center,
                fit_radius,
                fit_residual,
                fit_psi,
            })
        })
        .collect()
}

/// Ratio of the second to the first singular value of the centered points, and the principal direction.
pub fn collinearity(pts: &[Vec3]) -> (f64, Vec3) {
    let c = pts.iter().fold(Vec3::zero(), |a, p| a + *p) / pts.len() as f64;
    let m = DMatrix::from_fn(pts.len(), 3, |i, k| (pts[i] - c).to_array()[k]);
    let svd = m.svd(false, true);
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let vt = svd.v_t.expect("requested");
    let row = vt.row(idx[0]);
    let ratio = svd.singular_values[idx[1]] / svd.singular_values[idx[0]];
    (ratio, Vec3::new(row[0], row[1], row[2]).normalized())
}

/// Components of `Z'(omega) / |Z'(omega)|` in the frame `(fu/e^h, fv/e^h, n)` at one row.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AxisSample {
    pub v: f64,
    pub s: f64,
    pub z: [f64; 3],
    /// `|z1^2 + z2^2 + z3^2 - 1|`.
    pub unit_defect: f64,
    /// `| |z2| |Z'| |delta| s / R - sqrt(Q(s)) |`.
    pub quartic_tie: f64,
    /// The assembled axis in space.
    pub direction: Vec3,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxisData {
    /// `Z'(omega)` from differentiating the computed centers.
    pub zprime_omega: Vec3,
    /// Closed-form `|Z'(omega)|^2`.
    pub norm_sq: f64,
    /// `|Z'(omega)|^2` from the differentiated centers.
    pub norm_sq_assembled: f64,
    pub samples: Vec<AxisSample>,
    /// Largest angle between directions assembled at different rows.
    pub v_spread: f64,
    /// Angle between the assembled direction and `zprime_omega` (as lines).
    pub derivative_angle: f64,
}

impl AxisData {
    pub fn norm_sq_rel_gap(&self) -> f64 {
        (self.norm_sq - self.norm_sq_assembled).abs() / self.norm_sq
    }

    pub fn direction(&self) -> Vec3 {
        self.samples[0].direction
    }
}

/// Center `Z(u)` at row `j` from the linear system.
fn center_at(s: &SampledSurface, sp: &SphericalReparam, ph: &PhiTriple, j: usize) -> Result<Vec3> {
    let (alpha, beta) = ph.alpha_beta(&sp.family)?;
    let n = s.node_at(&sp.family, j, ph.u)?;
    Ok(n.f + n.n * alpha + n.fu.normalized() * beta)
}

/// Closed-form axis at `u = omega` evaluated on the given rows, checked against
/// a fourth-order difference of `Z(u)` at `omega`.
pub fn axis(s: &SampledSurface, sp: &SphericalReparam, rows: &[usize], tol: f64) -> Result<AxisData> {
    let fam = &sp.family;
    let om = fam.omega;
    let c = coeffs(om, fam)?;
    let r = fam.radius;
    let [p0, p1, _] = sp.spec.pair_poly();
    let (sum, prod) = (-p1, p0);
    let delta = sp.spec.delta;
    let lin = c.u0_prime + prod * c.u1_prime;
    let norm_sq = r * r * (2.0 * sum * c.u1_prime + delta * delta * c.u1_prime * c.u1_prime - c.u2) + r.powi(4) * lin * lin;
    let norm = norm_sq.sqrt();

    let h = 1e-3;
    let us = [om - 2.0 * h, om - h, om + h, om + 2.0 * h];
    let phis = integrate_phis(&sp.spec, fam, &us, tol)?;
    let z: Vec<Vec3> = phis.iter().map(|ph| center_at(s, sp, ph, 0)).collect::<Result<_>>()?;
    let zprime = (z[0] - z[1] * 8.0 + z[2] * 8.0 - z[3]) / (12.0 * h);

    let samples: Vec<AxisSample> = rows
        .iter()
        .map(|&j| {
            let rs = &s.reparam[j];
            let sv = rs.s.ok_or_else(|| Error::SpecInvalid("axis needs a spherical surface".into()))?;
            let ds_dv = rs.w_prime * sp.cubic.eval(sv).sqrt();
            let z1 = (1.0 + sv * r * r * lin) / (sv * norm);
            let z2 = r * delta.signum() * ds_dv / (sv * norm);
            let z3 = r / delta * (-delta * delta * c.u1_prime * sv + (p0 + sv * (p1 + sv))) / (sv * norm);
            let nf = s.node_at(fam, j, om)?;
            let direction = (nf.fu * z1 + nf.fv * z2) / nf.exp_h + nf.n * z3;
            Ok(AxisSample {
                v: s.v[j],
                s: sv,
                z: [z1, z2, z3],
                unit_defect: (z1 * z1 + z2 * z2 + z3 * z3 - 1.0).abs(),
                quartic_tie: (z2.abs() * norm * delta.abs() * sv / r - sp.q(sv).max(0.0).sqrt()).abs(),
                direction,
            })
        })
        .collect::<Result<_>>()?;
    let first = samples.first().ok_or_else(|| Error::SpecInvalid("axis needs at least one row".into()))?.direction;
    let v_spread = samples.iter().map(|a| a.direction.line_angle(&first)).fold(0.0, f64::max);
    Ok(AxisData {
        zprime_omega: zprime,
        norm_sq,
        norm_sq_assembled: zprime.norm_sqr(),
        derivative_angle: first.line_angle(&zprime),
        samples,
        v_spread,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::solve_critical_omega;
    use crate::frame::{period_monodromy, FrameOptions};
    use crate::reparam::{build_spherical, ReparamSpec};
    use crate::surface::{build, planarity_certificate, GridSpec};
    use crate::theta::Lattice;
    use std::sync::OnceLock;

    fn critical(lambda: f64) -> Family {
        Family::from_critical(&solve_critical_omega(&Lattice::rhombic(lambda).unwrap()).unwrap()).unwrap()
    }

    fn spec() -> SphericalSpec {
        SphericalSpec { delta: 0.05, s1: C64::new(1.0, 0.1), s2: C64::new(1.0, -0.1) }
    }

    struct Fixture {
        sp: SphericalReparam,
        spec: ReparamSpec,
        surface: SampledSurface,
    }

    fn fixture() -> &'static Fixture {
        static F: OnceLock<Fixture> = OnceLock::new();
        F.get_or_init(|| {
            let sp = build_spherical(spec(), &critical(0.32)).unwrap();
            let rs = ReparamSpec::Spherical(Box::new(sp.clone()));
            let surface = build(&sp.family, &rs, &GridSpec::new(32, 81, 1), &FrameOptions::default()).unwrap();
            Fixture { sp, spec: rs, surface }
        })
    }

    const TOL: f64 = 1e-12;

    /// `w` values inside the oscillation interval.
    fn sample_ws(sp: &SphericalReparam) -> Vec<f64> {
        [0.2, 0.5, 0.8].iter().map(|x| sp.w_of_s(sp.s_a + x * (sp.s_b - sp.s_a)).unwrap()).collect()
    }

    #[test]
    fn initial_data_and_alpha_beta_at_omega() {
        let f = critical(0.32);
        let ph = PhiTriple::initial(&spec(), f.omega);
        assert_eq!(ph.phi2, 20.0);
        assert!((ph.phi1 + 40.0).abs() < 1e-12);
        assert!((ph.phi0 - 1.01 * 20.0).abs() < 1e-12);
        let (a, b) = ph.alpha_beta(&f).unwrap();
        assert!(a.abs() < 1e-12);
        assert!((b - f.radius).abs() < 1e-10, "beta {b} radius {}", f.radius);
    }

    #[test]
    fn linear_in_initial_data() {
        let f = critical(0.32);
        let us = [0.4, 1.2, 2.5];
        let a = PhiTriple::initial(&spec(), f.omega);
        let b = PhiTriple { phi2: 2.0 * a.phi2, phi1: 2.0 * a.phi1, phi0: 2.0 * a.phi0, ..a };
        let ya = integrate_phis_from(a, &f, &us, TOL).unwrap();
        let yb = integrate_phis_from(b, &f, &us, TOL).unwrap();
        for (p, q) in ya.iter().zip(&yb) {
            for (x, y) in p.array().iter().zip(q.array()) {
                assert!((2.0 * x - y).abs() < 1e-12 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn detour_side_does_not_matter() {
        // The solution is single-valued around the pole at pi/2.
        let f = critical(0.32);
        let y0 = PhiTriple::initial(&spec(), f.omega).array();
        let via = |lift: f64| {
            let pts = [C64::new(f.omega, 0.0), C64::new(f.omega, lift), C64::new(2.5, lift), C64::new(2.5, 0.0)];
            transport_along(&f, y0, &pts, TOL).unwrap()
        };
        let (up, down, high) = (via(0.3), via(-0.3), via(0.6));
        for k in 0..3 {
            assert!((up[k] - down[k]).abs() < 1e-9 * up[k].abs().max(1.0), "{up:?} vs {down:?}");
            assert!((up[k] - high[k]).abs() < 1e-9 * up[k].abs().max(1.0), "{up:?} vs {high:?}");
        }
    }

    #[test]
    fn p_over_hw_is_u_independent() {
        let sp = &fixture().sp;
        let ws = sample_ws(sp);
        let rc = root_consistency(sp, &[0.3, 1.0, 2.5], &ws, TOL).unwrap();
        assert!(rc.u_spread < 1e-7, "{rc:?}");
        assert!(rc.root_gap < 1e-7, "{rc:?}");
    }

    #[test]
    fn characterization_holds() {
        let sp = &fixture().sp;
        let res = characterization_residual(sp, &[0.3, 1.0, 2.5, 4.0], &sample_ws(sp), TOL).unwrap();
        assert!(res < 1e-7, "residual {res}");
    }

    #[test]
    fn centers_fit_and_align() {
        let fx = fixture();
        let om = fx.sp.family.omega;
        let us = [om, 0.4, 1.0, 2.5, 4.0];
        let cs = sphere_centers(&fx.surface, &fx.sp, &us, TOL).unwrap();
        assert!(cs[0].center.norm() < 1e-9 * cs[0].radius, "Z(omega) = {:?}", cs[0].center);
        for c in &cs {
            assert!(c.row_spread < 1e-7 * c.radius, "u {} spread {}", c.u, c.row_spread);
            assert!(c.fit_residual < 1e-6 * c.fit_radius, "u {} residual {}", c.u, c.fit_residual);
            assert!(c.center_gap() < 1e-6, "u {} gap {}", c.u, c.center_gap());
            assert!(c.psi_gap() < 1e-6, "u {} psi gap {}", c.u, c.psi_gap());
        }
        let (ratio, _) = collinearity(&cs.iter().map(|c| c.center).collect::<Vec<_>>());
        assert!(ratio < 1e-6, "collinearity {ratio}");
        let cone = planarity_certificate(&fx.surface);
        assert!(cone.cone_distance < 1e-7 * fx.surface.diameter(), "{}", cone.cone_distance);
    }

    #[test]
    fn non_spherical_spec_fails_certificate() {
        let f = critical(0.32);
        let rs = ReparamSpec::Analytic(crate::reparam::AnalyticReparam::new(PI * 0.32, 0.3, 2.0 * PI));
        let s = build(&f, &rs, &GridSpec::new(16, 41, 1), &FrameOptions::default()).unwrap();
        let rep = sphericality_certificate(&f, &s, &[0.4, 1.0, 2.5]).unwrap();
        assert!(rep.max_relative_residual > 1e-3, "{}", rep.max_relative_residual);
        let fx = fixture();
        let rep = sphericality_certificate(&fx.sp.family, &fx.surface, &[0.4, 1.0, 2.5]).unwrap();
        assert!(rep.max_relative_residual < 1e-6, "{}", rep.max_relative_residual);
    }

    #[test]
    fn closed_form_axis() {
        let fx = fixture();
        let rows: Vec<usize> = (1..80).step_by(7).collect();
        let ax = axis(&fx.surface, &fx.sp, &rows, TOL).unwrap();
        for smp in &ax.samples {
            assert!(smp.unit_defect < 1e-9, "{smp:?}");
            assert!(smp.quartic_tie < 1e-9, "{smp:?}");
        }
        assert!(ax.v_spread < 1e-7, "spread {}", ax.v_spread);
        assert!(ax.norm_sq_rel_gap() < 1e-8, "{} vs {}", ax.norm_sq, ax.norm_sq_assembled);
        assert!(ax.derivative_angle < 1e-7, "angle {}", ax.derivative_angle);
        let mono = period_monodromy(&fx.sp.family, &fx.spec, &FrameOptions::default()).unwrap();
        assert!(ax.direction().line_angle(&mono.axis) < 1e-6, "{}", ax.direction().line_angle(&mono.axis));
    }
}
