//! Special lattice parameters and the Lamé coefficients `U`, `U1`, `U2`.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{brent, scan_roots};
use crate::theta::{Lattice, LatticeKind};

/// The rhombic value of `theta_1` and `theta_2` on the real axis is `e^{i pi/8}` times a real number.
fn rhombic_phase() -> C64 {
    C64::from_polar(1.0, -PI / 8.0)
}

/// `theta_2''(0 | 1/2 + i lambda)` rotated onto the real line.
pub fn theta2_dd_origin(lambda: f64) -> Result<f64> {
    let lat = Lattice::rhombic(lambda)?;
    Ok((lat.theta(2, C64::new(0.0, 0.0))?.d2 * rhombic_phase()).re)
}

/// The rhombic lattice parameter at which `theta_2''(0)` vanishes.
pub fn solve_lambda0() -> Result<f64> {
    brent(|l| theta2_dd_origin(l).unwrap_or(f64::NAN), 0.1, 0.6, 1e-15)
}

/// Rhombic lattice together with its unique critical `omega`.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalParams {
    pub lattice: Lattice,
    pub omega: f64,
    /// `|theta_2'(omega)|`.
    pub residual: f64,
}

/// Zero of `theta_2'` in `(0, pi/4)`; exists exactly when `lambda < lambda0`.
pub fn solve_critical_omega(lat: &Lattice) -> Result<CriticalParams> {
    if lat.kind != LatticeKind::Rhombic {
        return Err(Error::InvalidLattice("critical omega requires a rhombic lattice".into()));
    }
    let g = |w: f64| (lat.theta_unchecked(2, C64::new(w, 0.0)).d1 * rhombic_phase()).re;
    let roots = scan_roots(g, 1e-9, FRAC_PI_4, 786, 1e-16);
    match roots.first() {
        Some(&omega) => {
            let residual = lat.theta(2, C64::new(omega, 0.0))?.d1.norm();
            Ok(CriticalParams { lattice: lat.clone(), omega, residual })
        }
        None => Err(Error::NoCriticalOmega { lambda: lat.lambda, lambda0: solve_lambda0()? }),
    }
}

/// Constants shared by the curve-family formulas for a lattice and real `omega`.
///
/// Rhombic formulas use `theta_2` as the companion function, rectangular ones `theta_4`.
#[derive(Debug, Clone)]
pub struct Family {
    pub lattice: Lattice,
    pub omega: f64,
    /// Index of the companion theta function.
    pub companion: usize,
    /// `theta_1'(0)`.
    pub t1p0: C64,
    /// `theta_c(omega)`.
    pub tc_omega: C64,
    /// `theta_c'(omega) / theta_c(omega)`; zero at critical omega.
    pub log_slope: C64,
    /// `R(omega) = 2 theta_c(omega)^2 / (theta_1'(0) theta_1(2 omega))`.
    pub radius: f64,
    /// Lamé constant `C1` with `U''/U = C1 - 8 U U1`.
    pub c1: f64,
}

/// Lamé coefficients at a real point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoeffSample {
    pub u: f64,
    #[serde(rename = "U")]
    pub u0: f64,
    #[serde(rename = "U1")]
    pub u1: f64,
    #[serde(rename = "U2")]
    pub u2: f64,
    #[serde(rename = "Uprime")]
    pub u0_prime: f64,
    #[serde(rename = "U1prime")]
    pub u1_prime: f64,
}

/// `U` or `U1` with two derivatives at a complex point.
#[derive(Debug, Clone, Copy)]
pub struct Jet {
    pub value: C64,
    pub d1: C64,
    pub d2: C64,
}

impl Family {
    pub fn new(lattice: Lattice, omega: f64) -> Result<Self> {
        let companion = lattice.companion();
        let zero = C64::new(0.0, 0.0);
        let w = C64::new(omega, 0.0);
        let t1p0 = lattice.theta(1, zero)?.d1;
        let tc = lattice.theta(companion, w)?;
        let t1_2w = lattice.theta(1, 2.0 * w)?.value;
        let radius = (2.0 * tc.value * tc.value / (t1p0 * t1_2w)).re;
        let mut fam = Self {
            lattice,
            omega,
            companion,
            t1p0,
            tc_omega: tc.value,
            log_slope: tc.d1 / tc.value,
            radius,
            c1: 0.0,
        };
        // Lamé constant from the ODE at u = 0, where neither factor vanishes.
        let u = fam.u_jet(zero)?;
        let u1 = fam.u1_jet(zero)?;
        fam.c1 = (u.d2 / u.value + 8.0 * u.value * u1.value).re;
        Ok(fam)
    }

    pub fn from_critical(crit: &CriticalParams) -> Result<Self> {
        Self::new(crit.lattice.clone(), crit.omega)
    }

    fn ratio_jet(&self, shift: f64, z: C64, prefactor: C64, slope: C64) -> Result<Jet> {
        let n = self.lattice.theta(1, z + shift)?;
        let d = self.lattice.theta(self.companion, z)?;
        if d.value.norm() < 1e-8 {
            return Err(Error::PoleProximity { at: z.re });
        }
        let inv = 1.0 / d.value;
        let g = n.value * inv;
        let g1 = n.d1 * inv - n.value * d.d1 * inv * inv;
        let g2 = n.d2 * inv - 2.0 * n.d1 * d.d1 * inv * inv - n.value * d.d2 * inv * inv
            + 2.0 * n.value * d.d1 * d.d1 * inv * inv * inv;
        let e = (slope * z).exp() * prefactor;
        Ok(Jet { value: e * g, d1: e * (g1 + slope * g), d2: e * (g2 + 2.0 * slope * g1 + slope * slope * g) })
    }

    /// `U(z) = -theta_1'(0)/(2 theta_c(omega)) theta_1(z+omega)/theta_c(z) e^{-z theta_c'(omega)/theta_c(omega)}`.
    pub fn u_jet(&self, z: C64) -> Result<Jet> {
        let k = -self.t1p0 / (2.0 * self.tc_omega);
        self.ratio_jet(self.omega, z, k, -self.log_slope)
    }

    /// `U1(z) = theta_1'(0)/(2 theta_c(omega)) theta_1(z-omega)/theta_c(z) e^{z theta_c'(omega)/theta_c(omega)}`.
    pub fn u1_jet(&self, z: C64) -> Result<Jet> {
        let k = self.t1p0 / (2.0 * self.tc_omega);
        self.ratio_jet(-self.omega, z, k, self.log_slope)
    }

    /// Whether the exponential factors are trivial (closed curves).
    pub fn is_critical(&self, tol: f64) -> bool {
        self.log_slope.norm() < tol
    }
}

/// Lamé coefficients at real `u`.
pub fn coeffs(u: f64, fam: &Family) -> Result<CoeffSample> {
    let z = C64::new(u, 0.0);
    let a = fam.u_jet(z)?;
    let b = fam.u1_jet(z)?;
    let prod = (a.value * b.value).re;
    Ok(CoeffSample {
        u,
        u0: a.value.re,
        u1: b.value.re,
        u2: fam.c1 - 6.0 * prod,
        u0_prime: a.d1.re,
        u1_prime: b.d1.re,
    })
}

/// The cubic `Q3(s) = 2 U1'(w) s^3 - U2(w) s^2 - 2 U'(w) s - U(w)^2` at critical omega.
#[derive(Debug, Clone, Serialize)]
pub struct CubicQ3 {
    pub c3: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
    /// Leading factor of the factorized form.
    pub lead: f64,
    /// Roots from theta constants, ordered by real part then imaginary part.
    #[serde(skip)]
    pub roots: [C64; 3],
}

impl CubicQ3 {
    pub fn eval(&self, s: f64) -> f64 {
        ((self.c3 * s + self.c2) * s + self.c1) * s + self.c0
    }

    pub fn derivative(&self, s: f64) -> f64 {
        (3.0 * self.c3 * s + 2.0 * self.c2) * s + self.c1
    }

    pub fn eval_factorized(&self, s: f64) -> f64 {
        let p = self.roots.iter().fold(C64::new(self.lead, 0.0), |acc, r| acc * (s - r));
        p.re
    }

    /// The largest real root, below which `Q3` changes sign.
    pub fn real_root(&self) -> f64 {
        self.roots
            .iter()
            .filter(|r| r.im.abs() < 1e-9 * (1.0 + r.re.abs()))
            .map(|r| r.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Values of `U, U', U1', U2` at `u = omega` from the critical closed forms.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OmegaValues {
    pub u: f64,
    pub u_prime: f64,
    pub u1_prime: f64,
    pub u2: f64,
}

/// Closed forms valid at critical omega on a rhombic lattice.
pub fn omega_values(fam: &Family) -> Result<OmegaValues> {
    let lat = &fam.lattice;
    let z0 = C64::new(0.0, 0.0);
    let w = C64::new(fam.omega, 0.0);
    let t2w2 = fam.tc_omega * fam.tc_omega;
    let t1_2w = lat.theta(1, 2.0 * w)?;
    let ratio = |a: usize, b: usize| -> Result<C64> {
        let x = lat.value(a, w)?;
        let y = lat.value(b, z0)?;
        Ok(x * x / (y * y))
    };
    let sum = ratio(1, 2)? + ratio(4, 3)? + ratio(3, 4)?;
    Ok(OmegaValues {
        u: (-0.5 * fam.t1p0 * t1_2w.value / t2w2).re,
        u_prime: (-0.5 * fam.t1p0 * t1_2w.d1 / t2w2).re,
        u1_prime: (0.5 * fam.t1p0 * fam.t1p0 / t2w2).re,
        u2: (fam.t1p0 * fam.t1p0 / t2w2 * sum).re,
    })
}

/// Coefficient and factorized forms of `Q3`.
pub fn q3(fam: &Family) -> Result<CubicQ3> {
    if fam.lattice.kind != LatticeKind::Rhombic {
        return Err(Error::InvalidLattice("Q3 closed forms are stated for rhombic lattices".into()));
    }
    let ov = omega_values(fam)?;
    let lat = &fam.lattice;
    let z0 = C64::new(0.0, 0.0);
    let w = C64::new(fam.omega, 0.0);
    let sq = |a: usize, b: usize| -> Result<C64> {
        let x = lat.value(a, w)?;
        let y = lat.value(b, z0)?;
        Ok(x * x / (y * y))
    };
    let mut roots = [sq(1, 2)?, sq(3, 4)?, sq(4, 3)?];
    roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(CubicQ3 {
        c3: 2.0 * ov.u1_prime,
        c2: -ov.u2,
        c1: -2.0 * ov.u_prime,
        c0: -ov.u * ov.u,
        lead: (fam.t1p0 * fam.t1p0 / (fam.tc_omega * fam.tc_omega)).re,
        roots,
    })
}

/// Weierstrass invariants `(g2, g3)` of the quartic satisfied by `e^{-h(u0, w)}`.
/// Relative accuracy degrades as `u0` approaches a pole of `U`.
pub fn quartic_invariants(fam: &Family, u0: f64) -> Result<(f64, f64)> {
    let c = coeffs(u0, fam)?;
    let c0 = -c.u1 * c.u1;
    let c1 = c.u1_prime / 2.0;
    let c2 = -c.u2 / 6.0;
    let c3 = -c.u0_prime / 2.0;
    let c4 = -c.u0 * c.u0;
    let g2 = c0 * c4 - 4.0 * c1 * c3 + 3.0 * c2 * c2;
    let g3 = c0 * c2 * c4 + 2.0 * c1 * c2 * c3 - c2 * c2 * c2 - c0 * c3 * c3 - c1 * c1 * c4;
    Ok((g2, g3))
}
