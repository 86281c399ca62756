//! Admissible reparametrization functions `w(v)`: a closed-form sine family
//! and the numerically constructed spherical case.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::curvefamily::CurveFamily;
use crate::elliptic::{q3, CubicQ3, Family};
use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, Quadrature};

/// `w(v) = mean + amplitude * sin(2 pi v / period)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReparam {
    pub mean: f64,
    pub amplitude: f64,
    pub period: f64,
    /// Sign of `sqrt(1 - w'^2)`; the family never reaches `|w'| = 1`, so it is constant.
    pub root_sign: f64,
}

impl AnalyticReparam {
    pub fn new(mean: f64, amplitude: f64, period: f64) -> Self {
        Self { mean, amplitude, period, root_sign: 1.0 }
    }

    fn sample(&self, v: f64) -> ReparamSample {
        let k = 2.0 * PI / self.period;
        let w = self.mean + self.amplitude * (k * v).sin();
        let w_prime = self.amplitude * k * (k * v).cos();
        let root = self.root_sign * (1.0 - w_prime * w_prime).max(0.0).sqrt();
        ReparamSample { v, w, w_prime, root, dv_dt: 1.0, s: None }
    }
}

/// Parameters `(delta, s1, s2)` of a spherical second family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalSpec {
    pub delta: f64,
    pub s1: C64,
    pub s2: C64,
}

impl SphericalSpec {
    /// `(s - s1)(s - s2)` expanded; real when the pair is real or conjugate.
    pub fn pair_poly(&self) -> [f64; 3] {
        let sum = self.s1 + self.s2;
        let prod = self.s1 * self.s2;
        [prod.re, -sum.re, 1.0]
    }

    pub fn check(&self) -> Result<()> {
        let sum = self.s1 + self.s2;
        let prod = self.s1 * self.s2;
        if self.delta == 0.0 || !self.delta.is_finite() {
            return Err(Error::SpecInvalid("delta must be nonzero".into()));
        }
        if sum.im.abs() > 1e-12 || prod.im.abs() > 1e-12 {
            return Err(Error::SpecInvalid("s1, s2 must be real or a conjugate pair".into()));
        }
        Ok(())
    }
}

/// Closed-form `s(w) = e^{-h(omega, w)}` on a critical rhombic family.
pub fn s_of_w(w: f64, fam: &Family) -> Result<f64> {
    Ok(s_and_derivative(w, fam)?.0)
}

/// `(s(w), s'(w))`.
pub fn s_and_derivative(w: f64, fam: &Family) -> Result<(f64, f64)> {
    fam.check_w(w)?;
    let lat = &fam.lattice;
    let z0 = C64::new(0.0, 0.0);
    let om = C64::new(fam.omega, 0.0);
    let t20 = lat.value(2, z0)?;
    let k = fam.tc_omega * fam.tc_omega / (t20 * t20);
    let r0 = lat.value(1, om)? / fam.tc_omega;
    let z = C64::new(0.0, w / 2.0);
    let a = lat.theta(1, z)?;
    let b = lat.theta(2, z)?;
    let g = a.value / b.value;
    let gp = (a.d1 * b.value - a.value * b.d1) / (b.value * b.value);
    let s = k * (r0 * r0 - g * g);
    let ds = -C64::new(0.0, 1.0) * k * g * gp;
    Ok((s.re, ds.re))
}

/// One candidate interval `[a, b]` between adjacent real roots of `Q`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OscillationInterval {
    pub a: f64,
    pub b: f64,
    /// `Q > 0` inside and `Q3 > 0` on the interval.
    pub admissible: bool,
}

/// Spherical reparametrization built from the quartic `Q(s)`.
///
/// Uses the uniformizing parameter `t` with `s = s_a + (s_b - s_a) sin^2 t`,
/// which is `pi`-periodic and removes the square-root turning points.
#[derive(Debug, Clone)]
pub struct SphericalReparam {
    pub spec: SphericalSpec,
    pub family: Family,
    pub cubic: CubicQ3,
    /// Ascending coefficients of `Q = -(s - s1)^2 (s - s2)^2 + delta^2 Q3`.
    pub quartic: [f64; 5],
    pub roots: Vec<C64>,
    pub candidates: Vec<OscillationInterval>,
    pub s_a: f64,
    pub s_b: f64,
    /// Monic quadratic cofactor with `Q = (s - s_a)(s_b - s) P(s)`, ascending.
    pub cofactor: [f64; 3],
    pub period: f64,
    v_table: Vec<f64>,
    w_table: Vec<(f64, f64)>,
    quad: Quadrature,
}

const T_CELLS: usize = 64;

impl SphericalReparam {
    pub fn q(&self, s: f64) -> f64 {
        self.quartic.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    fn p(&self, s: f64) -> f64 {
        (s + self.cofactor[1]) * s + self.cofactor[0]
    }

    pub fn s_of_t(&self, t: f64) -> f64 {
        self.s_a + (self.s_b - self.s_a) * t.sin().powi(2)
    }

    fn dv_dt(&self, t: f64) -> f64 {
        2.0 * self.spec.delta.abs() / self.p(self.s_of_t(t)).sqrt()
    }

    /// `v(t)`, extended beyond one period by `v(t + pi) = v(t) + V`.
    pub fn v_of_t(&self, t: f64) -> f64 {
        let k = (t / PI).floor();
        let r = t - k * PI;
        let h = PI / T_CELLS as f64;
        let j = ((r / h) as usize).min(T_CELLS - 1);
        let base = self.v_table[j];
        let tail = self.quad.integrate(|x| self.dv_dt(x), j as f64 * h, r, 1);
        k * self.period + base + tail
    }

    /// Inverse of `v_of_t` by Newton's method.
    pub fn t_of_v(&self, v: f64) -> f64 {
        let k = (v / self.period).floor();
        let r = v - k * self.period;
        let j = self.v_table.partition_point(|&x| x <= r).clamp(1, T_CELLS) - 1;
        let h = PI / T_CELLS as f64;
        let frac = (r - self.v_table[j]) / (self.v_table[j + 1] - self.v_table[j]);
        let mut t = (j as f64 + frac) * h;
        for _ in 0..50 {
            let dt = (self.v_of_t(t) - r) / self.dv_dt(t);
            t -= dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        k * PI + t
    }

    /// `w` with `s(w) = s`, by safeguarded Newton on the monotone closed form.
    pub fn w_of_s(&self, s: f64) -> Result<f64> {
        let j = self.w_table.partition_point(|&(_, sj)| sj <= s);
        if j == 0 || j == self.w_table.len() {
            return Err(Error::DomainW { w: f64::NAN, max: self.family.w_max() });
        }
        let (mut lo, mut hi) = (self.w_table[j - 1].0, self.w_table[j].0);
        let mut w = 0.5 * (lo + hi);
        for _ in 0..100 {
            let (sv, ds) = s_and_derivative(w, &self.family)?;
            let f = sv - s;
            if f < 0.0 {
                lo = w;
            } else {
                hi = w;
            }
            let mut next = w - f / ds;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - w).abs() < 1e-15 * (1.0 + w) {
                return Ok(next);
            }
            w = next;
        }
        Ok(w)
    }

    /// Signed root `sqrt(1 - w'^2) = -(s - s1)(s - s2) / (delta sqrt(Q3(s)))`.
    pub fn signed_root(&self, s: f64) -> f64 {
        let [c0, c1, c2] = self.spec.pair_poly();
        -((c2 * s + c1) * s + c0) / (self.spec.delta * self.cubic.eval(s).sqrt())
    }

    fn sample_t(&self, t: f64) -> Result<ReparamSample> {
        let s = self.s_of_t(t);
        let dv_dt = self.dv_dt(t);
        let ds_dv = (self.s_b - self.s_a) * (2.0 * t).sin() / dv_dt;
        let w_prime = ds_dv / self.cubic.eval(s).sqrt();
        Ok(ReparamSample { v: self.v_of_t(t), w: self.w_of_s(s)?, w_prime, root: self.signed_root(s), dv_dt, s: Some(s) })
    }
}

/// Reparametrization data at one point.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReparamSample {
    pub v: f64,
    pub w: f64,
    pub w_prime: f64,
    /// Signed `sqrt(1 - w'^2)`.
    pub root: f64,
    /// `dv/dt` for the integration parameter `t`.
    pub dv_dt: f64,
    /// Value of `s = e^{-h(omega, w)}` in the spherical case.
    pub s: Option<f64>,
}

#[derive(Debug, Clone)]
pub enum ReparamSpec {
    Analytic(AnalyticReparam),
    Spherical(Box<SphericalReparam>),
}

impl ReparamSpec {
    /// Period `V` in `v`.
    pub fn period(&self) -> f64 {
        match self {
            Self::Analytic(a) => a.period,
            Self::Spherical(s) => s.period,
        }
    }

    /// Period of the integration parameter.
    pub fn param_period(&self) -> f64 {
        match self {
            Self::Analytic(a) => a.period,
            Self::Spherical(_) => PI,
        }
    }

    pub fn param_of_v(&self, v: f64) -> f64 {
        match self {
            Self::Analytic(_) => v,
            Self::Spherical(s) => s.t_of_v(v),
        }
    }

    pub fn sample_param(&self, t: f64) -> Result<ReparamSample> {
        match self {
            Self::Analytic(a) => Ok(a.sample(t)),
            Self::Spherical(s) => s.sample_t(t),
        }
    }

    pub fn sample(&self, v: f64) -> Result<ReparamSample> {
        self.sample_param(self.param_of_v(v))
    }

    pub fn as_spherical(&self) -> Option<&SphericalReparam> {
        match self {
            Self::Spherical(s) => Some(s),
            Self::Analytic(_) => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub w_min: f64,
    pub w_max: f64,
    pub w_bound: f64,
    pub max_abs_w_prime: f64,
    /// Parameter values where `|w'|` reaches 1.
    pub unit_slope_at: Vec<f64>,
    pub sign_flips: usize,
    /// Largest divided difference of the signed root between samples.
    pub root_lipschitz: f64,
    /// `max |w'^2 + root^2 - 1|`.
    pub unit_identity: f64,
    pub in_range: bool,
    pub slope_ok: bool,
    /// Constant `w` gives a surface of revolution, which is excluded.
    pub surface_of_revolution: bool,
    pub valid: bool,
}

const VALIDATION_SAMPLES: usize = 2000;

pub fn validate<F: CurveFamily + ?Sized>(spec: &ReparamSpec, fam: &F) -> ValidationReport {
    let bound = fam.w_max();
    let tp = spec.param_period();
    let mut r = ValidationReport {
        w_min: f64::INFINITY,
        w_max: f64::NEG_INFINITY,
        w_bound: bound,
        max_abs_w_prime: 0.0,
        unit_slope_at: Vec::new(),
        sign_flips: 0,
        root_lipschitz: 0.0,
        unit_identity: 0.0,
        in_range: true,
        slope_ok: true,
        surface_of_revolution: false,
        valid: false,
    };
    let mut prev: Option<ReparamSample> = None;
    for k in 0..=VALIDATION_SAMPLES {
        let t = tp * k as f64 / VALIDATION_SAMPLES as f64;
        let smp = match spec.sample_param(t) {
            Ok(s) => s,
            Err(_) => {
                r.in_range = false;
                continue;
            }
        };
        r.w_min = r.w_min.min(smp.w);
        r.w_max = r.w_max.max(smp.w);
        r.max_abs_w_prime = r.max_abs_w_prime.max(smp.w_prime.abs());
        if smp.w_prime.abs() > 1.0 + 1e-12 {
            r.slope_ok = false;
        } else if (smp.w_prime.abs() - 1.0).abs() < 1e-9 {
            r.unit_slope_at.push(t);
        }
        if r.slope_ok {
            r.unit_identity = r.unit_identity.max((smp.w_prime.powi(2) + smp.root.powi(2) - 1.0).abs());
        }
        if let Some(p) = prev {
            if p.root * smp.root < 0.0 {
                r.sign_flips += 1;
            }
            let dv = smp.v - p.v;
            if dv > 0.0 {
                r.root_lipschitz = r.root_lipschitz.max((smp.root - p.root).abs() / dv);
            }
        }
        prev = Some(smp);
    }
    r.in_range &= r.w_min > 0.0 && r.w_max < bound;
    r.surface_of_revolution = r.w_max - r.w_min < 1e-12;
    r.valid = r.in_range && r.slope_ok && r.unit_identity < 1e-8;
    r
}

/// Roots of a real quartic with ascending coefficients, via companion eigenvalues.
fn quartic_roots(c: &[f64; 5]) -> Vec<C64> {
    let lead = c[4];
    let mut m = Matrix4::<f64>::zeros();
    for i in 1..4 {
        m[(i, i - 1)] = 1.0;
    }
    let col = Vector4::new(-c[0] / lead, -c[1] / lead, -c[2] / lead, -c[3] / lead);
    m.set_column(3, &col);
    let mut roots: Vec<C64> = m.complex_eigenvalues().iter().copied().collect();
    // polish against the polynomial itself
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let (mut p, mut dp) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
            for &ci in c.iter().rev() {
                dp = dp * *r + p;
                p = p * *r + ci;
            }
            if dp.norm() > 0.0 {
                *r -= p / dp;
            }
        }
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re));
    roots
}

/// Construct the spherical reparametrization for `spec` on a critical family.
pub fn build_spherical(spec: SphericalSpec, fam: &Family) -> Result<SphericalReparam> {
    spec.check()?;
    let cubic = q3(fam)?;
    let [p0, p1, p2] = spec.pair_poly();
    // -(s^2 + p1 s + p0)^2
    let sq = [p0 * p0, 2.0 * p0 * p1, p1 * p1 + 2.0 * p0 * p2, 2.0 * p1 * p2, p2 * p2];
    let d2 = spec.delta * spec.delta;
    let quartic = [
        -sq[0] + d2 * cubic.c0,
        -sq[1] + d2 * cubic.c1,
        -sq[2] + d2 * cubic.c2,
        -sq[3] + d2 * cubic.c3,
        -sq[4],
    ];
    let roots = quartic_roots(&quartic);
    let q = |s: f64| quartic.iter().rev().fold(0.0, |acc, c| acc * s + c);
    let real: Vec<f64> =
        roots.iter().filter(|r| r.im.abs() <= 1e-10 * (1.0 + r.re.abs())).map(|r| r.re).collect();
    let s0 = cubic.real_root();
    let mut candidates = Vec::new();
    for pair in real.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let positive = q(0.5 * (a + b)) > 0.0;
        candidates.push(OscillationInterval { a, b, admissible: positive && a > s0 });
    }
    let chosen = candidates.iter().find(|c| c.admissible).copied().ok_or(Error::NoOscillation)?;
    let scale = 1.0 + chosen.b.abs();
    for r in &roots {
        for end in [chosen.a, chosen.b] {
            let d = (r - end).norm();
            if d > 0.0 && d < 1e-7 * scale {
                return Err(Error::SingularRoot { root: end });
            }
        }
    }
    if chosen.b - chosen.a < 1e-7 * scale {
        return Err(Error::SingularRoot { root: chosen.a });
    }
    // -Q / ((s - a)(s - b)) by synthetic division
    let lin = [chosen.a * chosen.b, -(chosen.a + chosen.b)];
    let neg: Vec<f64> = quartic.iter().map(|c| -c).collect();
    let c2 = neg[4];
    let c1 = neg[3] - lin[1] * c2;
    let c0 = neg[2] - lin[1] * c1 - lin[0] * c2;
    let cofactor = [c0 / c2, c1 / c2, 1.0];

    let mut sp = SphericalReparam {
        spec,
        family: fam.clone(),
        cubic,
        quartic,
        roots,
        candidates,
        s_a: chosen.a,
        s_b: chosen.b,
        cofactor,
        period: 0.0,
        v_table: Vec::new(),
        w_table: Vec::new(),
        quad: Quadrature::new(16),
    };
    let h = PI / T_CELLS as f64;
    let mut table = vec![0.0];
    for j in 0..T_CELLS {
        let cell = sp.quad.integrate(|x| sp.dv_dt(x), j as f64 * h, (j + 1) as f64 * h, 1);
        table.push(table[j] + cell);
    }
    sp.period = table[T_CELLS];
    sp.v_table = table;

    let wmax = fam.w_max();
    let n = 512;
    let mut wt = Vec::with_capacity(n);
    for k in 1..n {
        let w = wmax * k as f64 / n as f64;
        wt.push((w, s_of_w(w, fam)?));
    }
    if !wt.windows(2).all(|p| p[1].1 > p[0].1) {
        return Err(Error::SpecInvalid("s(w) is not monotone on the w-range".into()));
    }
    sp.w_table = wt;
    if chosen.a < sp.w_table[0].1 || chosen.b > sp.w_table[n - 2].1 {
        return Err(Error::SpecInvalid("oscillation interval leaves the admissible w-band".into()));
    }
    Ok(sp)
}

/// `V = 2 |delta| int ds / sqrt(Q)` over the interval, computed directly in `s`
/// with the `sin^2` substitution; used to cross-check the tabulated period.
pub fn period_by_quadrature(sp: &SphericalReparam, order: usize) -> f64 {
    let (x, wts) = gauss_legendre(order);
    let mut acc = 0.0;
    for (xi, wi) in x.iter().zip(&wts) {
        let t = FRAC_PI_2 * (xi + 1.0) / 2.0;
        let s = sp.s_of_t(t);
        let ds_dt = (sp.s_b - sp.s_a) * (2.0 * t).sin();
        acc += wi * FRAC_PI_2 / 2.0 * ds_dt / sp.q(s).sqrt();
    }
    2.0 * sp.spec.delta.abs() * acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::solve_critical_omega;
    use crate::numerics::d1_central4;
    use crate::theta::Lattice;

    fn critical(lambda: f64) -> Family {
        Family::from_critical(&solve_critical_omega(&Lattice::rhombic(lambda).unwrap()).unwrap()).unwrap()
    }

    pub(crate) fn example_spec() -> SphericalSpec {
        SphericalSpec { delta: 0.05, s1: C64::new(1.0, 0.1), s2: C64::new(1.0, -0.1) }
    }

    #[test]
    fn analytic_validation() {
        let f = critical(0.32);
        let l = 0.32;
        let ok = validate(&ReparamSpec::Analytic(AnalyticReparam::new(PI * l, 0.3, 2.0 * PI)), &f);
        assert!(ok.valid && !ok.surface_of_revolution);
        assert!((ok.max_abs_w_prime - 0.3).abs() < 1e-6);
        let bad = validate(&ReparamSpec::Analytic(AnalyticReparam::new(PI * l, 2.0, 2.0 * PI)), &f);
        assert!(!bad.valid && !bad.slope_ok);
        let flat = validate(&ReparamSpec::Analytic(AnalyticReparam::new(PI * l, 0.0, 2.0 * PI)), &f);
        assert!(flat.valid && flat.surface_of_revolution);
    }

    #[test]
    fn s_matches_metric_and_cubic() {
        let f = critical(0.32);
        let q = q3(&f).unwrap();
        // s blows up at the top of the w-range, so stay below it for the finite differences
        for k in 1..16 {
            let w = 0.1 * k as f64;
            let (s, ds) = s_and_derivative(w, &f).unwrap();
            let eh = f.exp_h(f.omega, w).unwrap();
            assert!((s - 1.0 / eh).abs() < 1e-10 * s, "{w}");
            assert!(ds > 0.0);
            assert!((ds * ds - q.eval(s)).abs() < 1e-8 * (1.0 + ds * ds));
            let h = 1e-3;
            let sf = |x: f64| s_of_w(x, &f).unwrap();
            let fd = d1_central4(sf(w - 2.0 * h), sf(w - h), sf(w + h), sf(w + 2.0 * h), h);
            assert!((fd - ds).abs() < 1e-8 * (1.0 + ds), "{w}: {fd} {ds}");
        }
        // the turning point at w -> 0 is the real root of Q3
        let s_small = s_of_w(1e-6, &f).unwrap();
        assert!(q.eval(s_small).abs() < 1e-9);
        assert!((s_small - q.real_root()).abs() < 1e-9);
    }

    #[test]
    fn spherical_build_identities() {
        let f = critical(0.32);
        let sp = build_spherical(example_spec(), &f).unwrap();
        // Q coefficient identity
        for s in [0.3, 0.9, 1.4] {
            let pair = (s - example_spec().s1) * (s - example_spec().s2);
            let direct = -(pair * pair).re + 0.05f64.powi(2) * sp.cubic.eval(s);
            assert!((sp.q(s) - direct).abs() < 1e-12);
        }
        assert!(sp.s_a < sp.s_b);
        assert!((sp.period - period_by_quadrature(&sp, 64)).abs() < 1e-10 * sp.period);
        let spec = ReparamSpec::Spherical(Box::new(sp.clone()));
        let rep = validate(&spec, &f);
        assert!(rep.valid, "{rep:?}");
        assert!(rep.unit_identity < 1e-8);
        // w'(v) = w'(s) s'(v) against finite differences of the built w(v)
        let h = 1e-4;
        for k in 1..8 {
            let v = sp.period * k as f64 / 8.3;
            let wv = |x: f64| spec.sample(x).unwrap().w;
            let fd = d1_central4(wv(v - 2.0 * h), wv(v - h), wv(v + h), wv(v + 2.0 * h), h);
            let smp = spec.sample(v).unwrap();
            assert!((smp.v - v).abs() < 1e-10);
            assert!((fd - smp.w_prime).abs() < 1e-6, "{v}: {fd} vs {}", smp.w_prime);
        }
        // periodicity
        for k in 0..10 {
            let v = sp.period * k as f64 / 10.0;
            let a = spec.sample(v).unwrap().w;
            let b = spec.sample(v + sp.period).unwrap().w;
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn spherical_failures() {
        let f = critical(0.32);
        let tiny = SphericalSpec { delta: 1e-9, ..example_spec() };
        assert!(matches!(build_spherical(tiny, &f), Err(Error::NoOscillation) | Err(Error::SingularRoot { .. })));
        let bad = SphericalSpec { s2: C64::new(2.0, 0.3), ..example_spec() };
        assert!(matches!(build_spherical(bad, &f), Err(Error::SpecInvalid(_))));
    }

    #[test]
    fn quartic_root_finder() {
        // (s-1)(s-2)(s-3)(s-4)
        let r = quartic_roots(&[24.0, -50.0, 35.0, -10.0, 1.0]);
        for (x, e) in r.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((x - e).norm() < 1e-12);
        }
    }
}
