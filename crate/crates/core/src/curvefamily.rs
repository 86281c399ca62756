//! The holomorphic family of planar curves `gamma(u, w)`, its tangent data,
//! the frame generator `W1(w)`, the `omega -> 0` limit family and
//! hyperbolic-elastica diagnostics.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::elliptic::Family;
use crate::error::{Error, Result};
use crate::numerics::d1_central4;
use crate::theta::{Lattice, LatticeKind};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// A family of planar curves usable by the frame integrator and surface builder.
pub trait CurveFamily: Sync {
    fn lattice(&self) -> &Lattice;
    fn gamma(&self, u: f64, w: f64) -> Result<C64>;
    /// `d gamma / du = e^{h + i sigma}`.
    fn gamma_u(&self, u: f64, w: f64) -> Result<C64>;
    /// Complex coefficient `W1(w)` of the frame equation.
    fn generator(&self, w: f64) -> Result<C64>;
    /// Rate of the translational part of the frame; zero for the generic family.
    fn translation_rate(&self, _w: f64) -> Result<f64> {
        Ok(0.0)
    }
    /// `d/du log gamma_u = h_u + i sigma_u`.
    fn log_gamma_u_derivative(&self, u: f64, w: f64) -> Result<C64> {
        let h = 1e-3;
        let g0 = self.gamma_u(u, w)?;
        let r = |x: f64| -> Result<C64> { Ok(self.gamma_u(x, w)? / g0) };
        // ratios stay near 1, so the principal log is continuous here
        let (a, b, c, d) = (r(u - 2.0 * h)?.ln(), r(u - h)?.ln(), r(u + h)?.ln(), r(u + 2.0 * h)?.ln());
        Ok(C64::new(d1_central4(a.re, b.re, c.re, d.re, h), d1_central4(a.im, b.im, c.im, d.im, h)))
    }
    /// Open range `(0, w_max)` of admissible `w`, bounded by the first zero of `theta_1(i w)`.
    fn w_max(&self) -> f64 {
        match self.lattice().kind {
            LatticeKind::Rhombic => 2.0 * PI * self.lattice().lambda,
            LatticeKind::Rectangular => PI * self.lattice().lambda,
        }
    }
    fn check_w(&self, w: f64) -> Result<()> {
        let max = self.w_max();
        if w > 0.0 && w < max {
            Ok(())
        } else {
            Err(Error::DomainW { w, max })
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurveSample {
    pub u: f64,
    pub w: f64,
    #[serde(skip)]
    pub gamma: C64,
    #[serde(skip)]
    pub gamma_u: C64,
    pub exp_h: f64,
    #[serde(skip)]
    pub exp_isigma: C64,
    #[serde(skip)]
    pub w1: C64,
}

impl Family {
    fn half_args(&self, u: f64, w: f64) -> (C64, C64) {
        let z = C64::new(u, w);
        ((z - self.omega) / 2.0, (z + self.omega) / 2.0)
    }

    /// `e^h` from the product formula over `z` and `conj z`.
    pub fn exp_h(&self, u: f64, w: f64) -> Result<f64> {
        self.check_w(w)?;
        let lat = &self.lattice;
        let c = self.companion;
        let (a, b) = self.half_args(u, w);
        let (ac, bc) = self.half_args(u, -w);
        let v = lat.value(c, a)? * lat.value(c, ac)? / (lat.value(1, b)? * lat.value(1, bc)?)
            * (self.log_slope * u).exp();
        Ok(v.re)
    }

    /// `e^{i sigma}` from the quotient formula over `z` and `conj z`.
    pub fn exp_isigma(&self, u: f64, w: f64) -> Result<C64> {
        self.check_w(w)?;
        let lat = &self.lattice;
        let c = self.companion;
        let (a, b) = self.half_args(u, w);
        let (ac, bc) = self.half_args(u, -w);
        Ok(-I * lat.value(c, a)? * lat.value(1, bc)? / (lat.value(1, b)? * lat.value(c, ac)?)
            * (I * w * self.log_slope).exp())
    }

    pub fn frame_data(&self, u: f64, w: f64) -> Result<CurveSample> {
        let gamma = self.gamma(u, w)?;
        let gamma_u = self.gamma_u(u, w)?;
        let exp_h = self.exp_h(u, w)?;
        let exp_isigma = self.exp_isigma(u, w)?;
        Ok(CurveSample { u, w, gamma, gamma_u, exp_h, exp_isigma, w1: self.generator(w)? })
    }
}

impl CurveFamily for Family {
    fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn gamma(&self, u: f64, w: f64) -> Result<C64> {
        self.check_w(w)?;
        let z = C64::new(u, w);
        let den = self.lattice.value(1, (z + self.omega) / 2.0)?;
        if den.norm() < 1e-10 {
            return Err(Error::PoleProximity { at: u });
        }
        let num = self.lattice.value(1, (z - 3.0 * self.omega) / 2.0)?;
        Ok(-I * self.radius * num / den * (z * self.log_slope).exp())
    }

    fn gamma_u(&self, u: f64, w: f64) -> Result<C64> {
        self.check_w(w)?;
        let (a, b) = self.half_args(u, w);
        let den = self.lattice.value(1, b)?;
        if den.norm() < 1e-10 {
            return Err(Error::PoleProximity { at: u });
        }
        let q = self.lattice.value(self.companion, a)? / den;
        Ok(-I * q * q * (C64::new(u, w) * self.log_slope).exp())
    }

    fn generator(&self, w: f64) -> Result<C64> {
        self.check_w(w)?;
        let lat = &self.lattice;
        let iw = C64::new(0.0, w);
        Ok(I * self.t1p0 / (2.0 * self.tc_omega) * lat.value(self.companion, self.omega - iw)? / lat.value(1, iw)?
            * (iw * self.log_slope).exp())
    }

    fn log_gamma_u_derivative(&self, u: f64, w: f64) -> Result<C64> {
        self.check_w(w)?;
        let (a, b) = self.half_args(u, w);
        let ta = self.lattice.theta(self.companion, a)?;
        let tb = self.lattice.theta(1, b)?;
        Ok(ta.d1 / ta.value - tb.d1 / tb.value + self.log_slope)
    }
}

/// `W(w) = conj(W1(w))`.
pub fn w_conj<F: CurveFamily + ?Sized>(fam: &F, w: f64) -> Result<C64> {
    Ok(fam.generator(w)?.conj())
}

/// `(h_u, h_w, sigma_u, sigma_w)` from the holomorphic log-derivative.
pub fn metric_gradient<F: CurveFamily + ?Sized>(fam: &F, u: f64, w: f64) -> Result<[f64; 4]> {
    let d = fam.log_gamma_u_derivative(u, w)?;
    Ok([d.re, -d.im, d.im, d.re])
}

/// `d/dw log W1(w)`.
pub fn log_generator_derivative(fam: &Family, w: f64) -> Result<C64> {
    fam.check_w(w)?;
    let lat = &fam.lattice;
    let iw = C64::new(0.0, w);
    let a = lat.theta(fam.companion, fam.omega - iw)?;
    let b = lat.theta(1, iw)?;
    Ok(-I * a.d1 / a.value - I * b.d1 / b.value + I * fam.log_slope)
}

/// A curve rotated so that its axis of infinitesimal rotation is the real line.
#[derive(Debug, Clone)]
pub struct HyperbolicCurve {
    pub w: f64,
    /// Unit-modulus rotation applied to `gamma`.
    pub rotation: C64,
    /// Hyperbolic speed `2|W1(w)|`.
    pub speed: f64,
    pub points: Vec<C64>,
    pub tangents: Vec<C64>,
}

impl HyperbolicCurve {
    /// `Im gamma / |gamma_u|` at each node; constant `1/a` on a standardized curve.
    pub fn height_ratios(&self) -> Vec<f64> {
        self.points.iter().zip(&self.tangents).map(|(p, t)| p.im / t.norm()).collect()
    }
}

pub fn hyperbolic_standardize(us: &[f64], w: f64, fam: &Family) -> Result<HyperbolicCurve> {
    let w1 = fam.generator(w)?;
    let rotation = -w1.norm() / (I * w1);
    let mut points = Vec::with_capacity(us.len());
    let mut tangents = Vec::with_capacity(us.len());
    for &u in us {
        points.push(rotation * fam.gamma(u, w)?);
        tangents.push(rotation * fam.gamma_u(u, w)?);
    }
    Ok(HyperbolicCurve { w, rotation, speed: 2.0 * w1.norm(), points, tangents })
}

/// Geodesic curvature in the upper half-plane of the standardized curve.
pub fn kappa_hyp(u: f64, w: f64, fam: &Family) -> Result<f64> {
    let w1 = fam.generator(w)?;
    let a = 2.0 * w1.norm();
    let rotation = -w1.norm() / (I * w1);
    let t = rotation * fam.gamma_u(u, w)?;
    let sigma_u = fam.log_gamma_u_derivative(u, w)?.im;
    Ok(sigma_u / a + (t / t.norm()).re)
}

/// Constants of the first-order quartic ODE satisfied by the unit tangent.
#[derive(Debug, Clone, Serialize)]
pub struct ElasticaConstants {
    pub w: f64,
    pub a: f64,
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub mu: f64,
    pub mu_im: f64,
    /// Standard deviation of the per-point estimates of `mu`.
    pub mu_spread: f64,
    pub residual_max: f64,
    pub residual_mean: f64,
}

impl ElasticaConstants {
    pub fn lambda(&self) -> C64 {
        C64::new(self.lambda_re, self.lambda_im)
    }
}

/// Number of samples used for the elastica fit.
pub const ELASTICA_SAMPLES: usize = 200;
/// Finite-difference step for the quartic residual.
pub const ELASTICA_STEP: f64 = 1e-3;

/// Fit `mu` and report the residual of
/// `Q_s^2 + Q^4/4 + conj(Lambda) Q^3 + mu Q^2 + Lambda Q + 1/4 = 0` along one curve.
pub fn elastica_constants(w: f64, fam: &Family) -> Result<ElasticaConstants> {
    let w1 = fam.generator(w)?;
    let a = 2.0 * w1.norm();
    let rotation = -w1.norm() / (I * w1);
    let lambda = log_generator_derivative(fam, w)? / a;
    let tangent = |u: f64| -> Result<C64> {
        let t = rotation * fam.gamma_u(u, w)?;
        Ok(t / t.norm())
    };
    // With the speed normalized by `a` the quartic appears with all terms on one side.
    let rest = |q: C64, qs: C64| qs * qs + 0.25 * q.powi(4) + lambda.conj() * q.powi(3) + lambda * q + 0.25;

    let us: Vec<f64> = (0..ELASTICA_SAMPLES).map(|k| 2.0 * PI * k as f64 / ELASTICA_SAMPLES as f64).collect();
    let mut mus = Vec::with_capacity(us.len());
    for &u in &us {
        let q = tangent(u)?;
        let sigma_u = fam.log_gamma_u_derivative(u, w)?.im;
        let qs = I * sigma_u * q / a;
        mus.push(-rest(q, qs) / (q * q));
    }
    let n = mus.len() as f64;
    let mean = mus.iter().sum::<C64>() / n;
    let spread = (mus.iter().map(|m| (m - mean).norm_sqr()).sum::<f64>() / n).sqrt();

    let h = ELASTICA_STEP;
    let mut rmax: f64 = 0.0;
    let mut rsum = 0.0;
    for &u in &us {
        let q = tangent(u)?;
        let (a2, a1, b1, b2) = (tangent(u - 2.0 * h)?, tangent(u - h)?, tangent(u + h)?, tangent(u + 2.0 * h)?);
        let qu = (a2 - 8.0 * a1 + 8.0 * b1 - b2) / (12.0 * h);
        let qs = qu / a;
        let r = (rest(q, qs) + mean.re * q * q).norm();
        rmax = rmax.max(r);
        rsum += r;
    }
    Ok(ElasticaConstants {
        w,
        a,
        lambda_re: lambda.re,
        lambda_im: lambda.im,
        mu: mean.re,
        mu_im: mean.im,
        mu_spread: spread,
        residual_max: rmax,
        residual_mean: rsum / n,
    })
}

/// The `omega -> 0` limit of the family on a rhombic lattice.
#[derive(Debug, Clone)]
pub struct LimitFamily {
    pub lattice: Lattice,
    pub t1p0: C64,
    pub t2_0: C64,
    pub t2dd_0: C64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LimitCurveSample {
    pub u: f64,
    pub w: f64,
    #[serde(skip)]
    pub gamma_hat: C64,
    pub w_hat: f64,
    pub r: f64,
    /// Imaginary part of the translational constant.
    pub d: f64,
}

impl LimitFamily {
    pub fn new(lattice: Lattice) -> Result<Self> {
        let z0 = C64::new(0.0, 0.0);
        let t2 = lattice.theta(2, z0)?;
        Ok(Self { t1p0: lattice.theta(1, z0)?.d1, t2_0: t2.value, t2dd_0: t2.d2, lattice })
    }

    /// Slope of the aperiodic linear term; vanishes at `lambda0`.
    pub fn linear_coefficient(&self) -> C64 {
        -I * self.t2dd_0 * self.t2_0 / (self.t1p0 * self.t1p0)
    }

    fn log_coefficient(&self) -> C64 {
        2.0 * I * self.t2_0 * self.t2_0 / (self.t1p0 * self.t1p0)
    }

    /// Generator `W_hat(w)` as a complex number; real on rhombic lattices.
    pub fn w_hat(&self, w: f64) -> Result<C64> {
        self.check_w(w)?;
        let iw = C64::new(0.0, w);
        Ok(I * self.t1p0 * self.lattice.value(2, iw)? / (2.0 * self.t2_0 * self.lattice.value(1, iw)?))
    }

    /// Translation rate `r(w)` as a complex number; real on rhombic lattices.
    pub fn r(&self, w: f64) -> Result<C64> {
        self.check_w(w)?;
        let iw = C64::new(0.0, w);
        let t2 = self.lattice.theta(2, iw)?;
        let t1 = self.lattice.value(1, iw)?;
        Ok(self.t2_0 * t2.value / (self.t1p0 * t1) * (t2.d1 / t2.value - iw * self.t2dd_0 / self.t2_0))
    }

    pub fn sample(&self, u: f64, w: f64) -> Result<LimitCurveSample> {
        let wh = self.w_hat(w)?;
        let r = self.r(w)?;
        Ok(LimitCurveSample { u, w, gamma_hat: self.gamma(u, w)?, w_hat: wh.re, r: r.re, d: wh.im })
    }
}

impl CurveFamily for LimitFamily {
    fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    fn gamma(&self, u: f64, w: f64) -> Result<C64> {
        self.check_w(w)?;
        let z = C64::new(u, w);
        let t = self.lattice.theta(1, z / 2.0)?;
        Ok(self.linear_coefficient() * z + self.log_coefficient() * t.d1 / t.value)
    }

    fn gamma_u(&self, u: f64, w: f64) -> Result<C64> {
        self.check_w(w)?;
        let z = C64::new(u, w);
        let t = self.lattice.theta(1, z / 2.0)?;
        let l = t.d1 / t.value;
        Ok(self.linear_coefficient() + 0.5 * self.log_coefficient() * (t.d2 / t.value - l * l))
    }

    fn generator(&self, w: f64) -> Result<C64> {
        Ok(C64::new(self.w_hat(w)?.re, 0.0))
    }

    fn translation_rate(&self, w: f64) -> Result<f64> {
        Ok(self.r(w)?.re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{coeffs, solve_critical_omega, solve_lambda0};
    use proptest::prelude::*;

    fn critical(lambda: f64) -> Family {
        Family::from_critical(&solve_critical_omega(&Lattice::rhombic(lambda).unwrap()).unwrap()).unwrap()
    }

    fn fam() -> Family {
        critical(25.0 / 78.0)
    }

    #[test]
    fn closure_and_sphere_radius() {
        let f = fam();
        for (u, w) in [(0.3, 0.2), (1.9, 1.1), (4.0, 1.8)] {
            let a = f.gamma(u, w).unwrap();
            assert!((f.gamma(u + 2.0 * PI, w).unwrap() - a).norm() < 1e-10);
            assert!((f.gamma(f.omega, w).unwrap().norm() - f.radius.abs()).abs() < 1e-11);
        }
    }

    #[test]
    fn conjugation_symmetry() {
        // widen the strip so that negative w can be evaluated
        let f = fam();
        let g = Family::new(f.lattice.with_strip(4.0 * PI * f.lattice.lambda).unwrap(), f.omega).unwrap();
        let u = 0.7;
        let w = 0.5;
        let z = C64::new(u, -w);
        let num = g.lattice.value(1, (z - 3.0 * g.omega) / 2.0).unwrap();
        let den = g.lattice.value(1, (z + g.omega) / 2.0).unwrap();
        let minus_w = -I * g.radius * num / den;
        assert!((g.gamma(u, w).unwrap().conj() + minus_w).norm() < 1e-12);
    }

    #[test]
    fn gamma_u_matches_derivatives() {
        let f = fam();
        let (u, w) = (0.9, 0.7);
        let gu = f.gamma_u(u, w).unwrap();
        let fd = |h: f64| {
            let du = (f.gamma(u + h, w).unwrap() - f.gamma(u - h, w).unwrap()) / (2.0 * h);
            let dw = (f.gamma(u, w + h).unwrap() - f.gamma(u, w - h).unwrap()) / (2.0 * h);
            ((du - gu).norm(), (-I * dw - gu).norm())
        };
        let (a1, a2) = fd(1e-3);
        let (b1, b2) = fd(5e-4);
        assert!(b1 < 1e-6 && b2 < 1e-6);
        assert!((a1 / b1).log2() > 1.8 && (a2 / b2).log2() > 1.8);
    }

    #[test]
    fn tangent_decomposition() {
        let f = fam();
        for (u, w) in [(0.1, 0.3), (2.0, 1.0), (5.0, 1.9)] {
            let s = f.frame_data(u, w).unwrap();
            assert!((s.exp_isigma.norm() - 1.0).abs() < 1e-12);
            assert!((s.gamma_u - s.exp_h * s.exp_isigma).norm() < 1e-11 * s.exp_h);
        }
        let w = 0.8;
        let s = f.frame_data(f.omega, w).unwrap();
        assert!((s.exp_isigma + s.gamma / f.radius).norm() < 1e-11);
    }

    #[test]
    fn metric_as_real_part() {
        let f = fam();
        for k in 0..20 {
            let u = 0.31 * k as f64;
            let w = 0.1 + 0.09 * k as f64;
            let s = f.frame_data(u, w).unwrap();
            let rhs = 2.0 * (s.w1 * s.gamma.conj()).re;
            assert!((s.exp_h - rhs).abs() < 1e-9 * s.exp_h, "{u} {w}");
        }
    }

    #[test]
    fn generator_blows_up_at_zero() {
        let f = fam();
        let a = f.generator(1e-3).unwrap().norm();
        let b = f.generator(1e-2).unwrap().norm();
        let c = f.generator(1e-1).unwrap().norm();
        assert!(a > b && b > c);
        assert!(matches!(f.generator(0.0), Err(Error::DomainW { .. })));
        assert!(matches!(f.gamma(0.0, f.w_max()), Err(Error::DomainW { .. })));
    }

    #[test]
    fn sigma_riccati() {
        let f = fam();
        let (u, w) = (1.3, 0.9);
        let h = 1e-3;
        let e = |w: f64| f.exp_isigma(u, w).unwrap();
        let e0 = e(w);
        let rel = |x: C64| (x / e0).arg();
        let sw = d1_central4(rel(e(w - 2.0 * h)), rel(e(w - h)), rel(e(w + h)), rel(e(w + 2.0 * h)), h);
        let w1 = f.generator(w).unwrap();
        let rhs = w1.conj() * e0 + w1 * e0.conj();
        assert!((sw - rhs.re).abs() < 1e-8, "{sw} vs {rhs}");
        assert!(rhs.im.abs() < 1e-12);
    }

    #[test]
    fn metric_riccati_and_quartic_identity() {
        let f = critical(0.32);
        for (u, w) in [(0.4, 0.5), (2.2, 1.2), (3.9, 1.7)] {
            let [hu, hw, _, _] = metric_gradient(&f, u, w).unwrap();
            let eh = f.exp_h(u, w).unwrap();
            let c = coeffs(u, &f).unwrap();
            assert!((hu - c.u0 * eh - c.u1 / eh).abs() < 1e-8);
            let q = hw * hw + c.u1 * c.u1 / (eh * eh) - 2.0 * c.u1_prime / eh + c.u2 + 2.0 * c.u0_prime * eh
                + c.u0 * c.u0 * eh * eh;
            assert!(q.abs() < 1e-7, "{q}");
        }
    }

    #[test]
    fn analytic_log_derivative_matches_default() {
        let f = fam();
        let (u, w) = (2.1, 0.6);
        let a = f.log_gamma_u_derivative(u, w).unwrap();
        struct Plain<'a>(&'a Family);
        impl CurveFamily for Plain<'_> {
            fn lattice(&self) -> &Lattice {
                &self.0.lattice
            }
            fn gamma(&self, u: f64, w: f64) -> Result<C64> {
                self.0.gamma(u, w)
            }
            fn gamma_u(&self, u: f64, w: f64) -> Result<C64> {
                self.0.gamma_u(u, w)
            }
            fn generator(&self, w: f64) -> Result<C64> {
                self.0.generator(w)
            }
        }
        let b = Plain(&f).log_gamma_u_derivative(u, w).unwrap();
        assert!((a - b).norm() < 1e-9);
    }

    #[test]
    fn hyperbolic_speed_is_constant() {
        let f = fam();
        let us: Vec<f64> = (0..64).map(|k| 2.0 * PI * k as f64 / 64.0).collect();
        for w in [0.4, 1.0, 1.6] {
            let c = hyperbolic_standardize(&us, w, &f).unwrap();
            let r = c.height_ratios();
            let m = r.iter().sum::<f64>() / r.len() as f64;
            let sd = (r.iter().map(|x| (x - m).powi(2)).sum::<f64>() / r.len() as f64).sqrt();
            assert!(sd < 1e-9 * m.abs());
            assert!((m - 1.0 / c.speed).abs() < 1e-9 * m);
            assert!(c.points.iter().all(|p| p.im > 0.0));
            for (p, u) in c.points.iter().zip(&us) {
                assert!((p.norm() - f.gamma(*u, w).unwrap().norm()).abs() < 1e-12);
            }
        }
    }

    // Osculating circle in the Euclidean picture, converted to a hyperbolic radius.
    fn kappa_from_circle(f: &Family, u: f64, w: f64) -> f64 {
        let w1 = f.generator(w).unwrap();
        let rot = -w1.norm() / (I * w1);
        let g = rot * f.gamma(u, w).unwrap();
        let t = rot * f.gamma_u(u, w).unwrap();
        let e = t / t.norm();
        let sigma_u = f.log_gamma_u_derivative(u, w).unwrap().im;
        let radius = t.norm() / sigma_u;
        let center = g + I * e * radius;
        let (top, bottom) = (center.im + radius.abs(), center.im - radius.abs());
        let rh = 0.5 * (top / bottom).ln();
        radius.signum() / rh.tanh()
    }

    #[test]
    fn kappa_matches_osculating_circle() {
        let f = fam();
        let w = 1.0;
        let mut checked = 0;
        for k in 0..40 {
            let u = 2.0 * PI * k as f64 / 40.0;
            let kappa = kappa_hyp(u, w, &f).unwrap();
            // the circle construction needs a circle inside the half-plane
            if kappa.abs() <= 1.0 + 1e-3 {
                continue;
            }
            let oracle = kappa_from_circle(&f, u, w);
            assert!((kappa - oracle).abs() < 1e-6 * kappa.abs(), "{u}: {kappa} {oracle}");
            checked += 1;
        }
        assert!(checked >= 10, "{checked}");
    }

    #[test]
    fn elastica_fit() {
        let f = fam();
        for w in [0.4, 0.8, 1.2, 1.6] {
            let e = elastica_constants(w, &f).unwrap();
            assert!(e.mu_im.abs() < 1e-8, "{w}: {}", e.mu_im);
            assert!(e.mu_spread < 1e-7, "{w}: {}", e.mu_spread);
            assert!(e.residual_max < 1e-6, "{w}: {}", e.residual_max);
            let h = 1e-4;
            let l = |w: f64| f.generator(w).unwrap().ln();
            let fd = (l(w + h) - l(w - h)) / (2.0 * h) / e.a;
            assert!((fd - e.lambda()).norm() < 1e-6);
        }
    }

    #[test]
    fn limit_family_at_lambda0() {
        let l0 = solve_lambda0().unwrap();
        let lf = LimitFamily::new(Lattice::rhombic(l0).unwrap()).unwrap();
        for (u, w) in [(0.2, 0.3), (1.7, 1.0), (3.3, 1.9)] {
            let s = lf.sample(u, w).unwrap();
            assert!(s.d.abs() < 1e-12);
            assert!(lf.r(w).unwrap().im.abs() < 1e-11);
            assert!((lf.gamma(u + 2.0 * PI, w).unwrap() - s.gamma_hat).norm() < 1e-10);
            let e = lf.gamma_u(u, w).unwrap().norm();
            let m = 2.0 * s.w_hat * s.gamma_hat.re + s.r;
            assert!((e - m).abs() < 1e-9 * e, "{e} vs {m}");
        }
    }

    #[test]
    fn limit_family_defect_away_from_lambda0() {
        let lf = LimitFamily::new(Lattice::rhombic(0.3).unwrap()).unwrap();
        let (u, w) = (0.4, 0.7);
        let defect = lf.gamma(u + 2.0 * PI, w).unwrap() - lf.gamma(u, w).unwrap();
        let expected = 2.0 * PI * lf.linear_coefficient();
        assert!((defect - expected).norm() < 1e-10);
        assert!(expected.norm() > 1e-3);
        let h = 1e-4;
        let fd = (lf.gamma(u + h, w).unwrap() - lf.gamma(u - h, w).unwrap()) / (2.0 * h);
        assert!((fd - lf.gamma_u(u, w).unwrap()).norm() < 1e-7);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn periodic_and_metric_identity(u in -3.0f64..9.0, w in 0.05f64..1.95) {
            let f = fam();
            let g = f.gamma(u, w).unwrap();
            prop_assert!((f.gamma(u + 2.0 * PI, w).unwrap() - g).norm() < 1e-10 * (1.0 + g.norm()));
            let s = f.frame_data(u, w).unwrap();
            prop_assert!((s.exp_h - 2.0 * (s.w1 * g.conj()).re).abs() < 1e-9 * s.exp_h);
            prop_assert!((s.gamma_u.norm() - s.exp_h).abs() < 1e-10 * s.exp_h);
        }
    }
}
