//! Root finding, quadrature and an adaptive Runge-Kutta integrator.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Brent's method on a bracketing interval.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoBracket { lo, hi });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
    }
    Ok(b)
}

/// Scans `[lo, hi]` with `n` uniform cells and refines every sign change with Brent.
pub fn scan_roots<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, n: usize, xtol: f64) -> Vec<f64> {
    let h = (hi - lo) / n as f64;
    let mut roots = Vec::new();
    let mut x0 = lo;
    let mut f0 = f(x0);
    for k in 1..=n {
        let x1 = lo + k as f64 * h;
        let f1 = f(x1);
        if f0 == 0.0 {
            roots.push(x0);
        } else if f0.signum() != f1.signum() && f1 != 0.0 {
            if let Ok(r) = brent(&mut f, x0, x1, xtol) {
                roots.push(r);
            }
        }
        x0 = x1;
        f0 = f1;
    }
    roots
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss-Legendre rule over `[a, b]` with `panels` panels.
#[derive(Debug, Clone)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Quadrature {
    pub fn new(order: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        Self { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            let mut s = 0.0;
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                s += w * f(mid + 0.5 * h * x);
            }
            total += 0.5 * h * s;
        }
        total
    }
}

/// Counters collected by the adaptive integrator.
#[derive(Debug, Clone, Copy, Default, serde::Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Sum of accepted local error estimates, a crude global error bound.
    pub error_estimate: f64,
}

impl StepStats {
    pub fn merge(&mut self, other: &StepStats) {
        self.accepted += other.accepted;
        self.rejected += other.rejected;
        self.error_estimate += other.error_estimate;
    }
}

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Dormand-Prince 5(4) with a mixed absolute/relative error test.
///
/// `project` is applied after every accepted step; the frame integrator uses
/// it to renormalize onto the unit quaternions.
pub struct Dopri<const N: usize> {
    pub tol: f64,
    pub h_min: f64,
    pub h_init: f64,
}

impl<const N: usize> Dopri<N> {
    pub fn new(tol: f64) -> Self {
        Self { tol, h_min: 1e-14, h_init: 1e-2 }
    }

    pub fn solve<F, P>(&self, mut f: F, mut project: P, t0: f64, y0: [f64; N], t1: f64) -> Result<([f64; N], StepStats)>
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
        P: FnMut(&mut [f64; N]),
    {
        let mut stats = StepStats::default();
        let span = t1 - t0;
        if span == 0.0 {
            return Ok((y0, stats));
        }
        let dir = span.signum();
        let mut t = t0;
        let mut y = y0;
        let mut h = self.h_init.min(span.abs());
        let mut k = [[0.0; N]; 7];
        k[0] = f(t, &y);
        loop {
            let remaining = (t1 - t) * dir;
            if remaining <= 1e-15 * span.abs().max(1.0) {
                break;
            }
            let last = h >= remaining;
            if last {
                h = remaining;
            }
            let hs = h * dir;
            for s in 1..7 {
                let mut ys = y;
                for (i, yi) in ys.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (j, kj) in k.iter().enumerate().take(s) {
                        acc += DP_A[s][j] * kj[i];
                    }
                    *yi += hs * acc;
                }
                k[s] = f(t + DP_C[s] * hs, &ys);
            }
            let mut y_new = y;
            let mut err: f64 = 0.0;
            for i in 0..N {
                let mut acc = 0.0;
                let mut eacc = 0.0;
                for s in 0..7 {
                    acc += DP_B[s] * k[s][i];
                    eacc += DP_E[s] * k[s][i];
                }
                y_new[i] += hs * acc;
                let scale = self.tol * (1.0 + y[i].abs().max(y_new[i].abs()));
                err = err.max((hs * eacc).abs() / scale);
            }
            if err <= 1.0 || h <= self.h_min {
                if h <= self.h_min && err > 1.0 {
                    return Err(Error::StepFailure { t });
                }
                t = if last { t1 } else { t + hs };
                y = y_new;
                project(&mut y);
                stats.accepted += 1;
                stats.error_estimate += err * self.tol;
                k[0] = f(t, &y);
                if last {
                    break;
                }
            } else {
                stats.rejected += 1;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
            if h < self.h_min {
                h = self.h_min;
            }
        }
        Ok((y, stats))
    }
}

impl<const N: usize> Dopri<N> {
    /// The fifth-order solution with `steps` equal steps and no error control.
    pub fn solve_fixed<F, P>(&self, mut f: F, mut project: P, t0: f64, y0: [f64; N], t1: f64, steps: usize) -> [f64; N]
    where
        F: FnMut(f64, &[f64; N]) -> [f64; N],
        P: FnMut(&mut [f64; N]),
    {
        let h = (t1 - t0) / steps as f64;
        let mut y = y0;
        let mut k = [[0.0; N]; 7];
        for n in 0..steps {
            let t = t0 + n as f64 * h;
            k[0] = f(t, &y);
            for s in 1..7 {
                let mut ys = y;
                for (i, yi) in ys.iter_mut().enumerate() {
                    *yi += h * (0..s).map(|j| DP_A[s][j] * k[j][i]).sum::<f64>();
                }
                k[s] = f(t + DP_C[s] * h, &ys);
            }
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += h * (0..7).map(|s| DP_B[s] * k[s][i]).sum::<f64>();
            }
            project(&mut y);
        }
        y
    }
}

/// Fourth-order central first derivative with spacing `h`.
pub fn d1_central4(fm2: f64, fm1: f64, fp1: f64, fp2: f64, h: f64) -> f64 {
    (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h)
}

/// Fourth-order central second derivative with spacing `h`.
pub fn d2_central4(fm2: f64, fm1: f64, f0: f64, fp1: f64, fp2: f64, h: f64) -> f64 {
    (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h)
}

const D1_8: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
const D2_8: [f64; 5] = [-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0];

/// Eighth-order central first derivative from samples `at(k)`, `k = -4..=4`.
pub fn d1_central8<T, A>(at: A, h: f64) -> T
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
    A: Fn(isize) -> T,
{
    let mut acc = (at(1) - at(-1)) * D1_8[0];
    for k in 2..=4 {
        acc = acc + (at(k as isize) - at(-(k as isize))) * D1_8[k - 1];
    }
    acc * (1.0 / h)
}

/// Eighth-order central second derivative from samples `at(k)`, `k = -4..=4`.
pub fn d2_central8<T, A>(at: A, h: f64) -> T
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T>,
    A: Fn(isize) -> T,
{
    let mut acc = at(0) * D2_8[0];
    for (k, c) in (1..).zip(&D2_8[1..]) {
        acc = acc + (at(k) + at(-k)) * *c;
    }
    acc * (1.0 / (h * h))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eighth_order_stencils() {
        // exact on degree-8 polynomials
        let p = |x: f64| (0..=8).map(|k| (k as f64 + 1.0) * x.powi(k)).sum::<f64>();
        let dp = |x: f64| (1..=8).map(|k| (k as f64 + 1.0) * k as f64 * x.powi(k - 1)).sum::<f64>();
        let ddp = |x: f64| (2..=8).map(|k| (k as f64 + 1.0) * (k * (k - 1)) as f64 * x.powi(k - 2)).sum::<f64>();
        let (x, h) = (0.3, 0.1);
        assert!((d1_central8(|k| p(x + k as f64 * h), h) - dp(x)).abs() < 1e-10);
        assert!((d2_central8(|k| p(x + k as f64 * h), h) - ddp(x)).abs() < 1e-8);
        let err = |h: f64| (d1_central8(|k| (x + k as f64 * h).sin(), h) - x.cos()).abs();
        assert!((err(0.2) / err(0.1)).log2() > 7.5);
    }

    #[test]
    fn brent_finds_cos_root() {
        let r = brent(f64::cos, 1.0, 2.0, 1e-15).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }

    #[test]
    fn brent_rejects_missing_bracket() {
        assert!(matches!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12), Err(Error::NoBracket { .. })));
    }

    #[test]
    fn scan_finds_all_sine_roots() {
        let roots = scan_roots(f64::sin, 0.5, 10.0, 100, 1e-14);
        assert_eq!(roots.len(), 3);
        for (k, r) in roots.iter().enumerate() {
            assert!((r - (k + 1) as f64 * std::f64::consts::PI).abs() < 1e-12);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let q = Quadrature::new(8);
        // degree 15 is exact for 8 nodes
        let v = q.integrate(|x| x.powi(15) + x.powi(14), -1.0, 1.0, 1);
        assert!((v - 2.0 / 15.0).abs() < 1e-14);
        let (_, w) = gauss_legendre(5);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn dopri_matches_exponential() {
        let solver = Dopri::<2>::new(1e-12);
        let (y, stats) = solver
            .solve(|_, y| [y[1], -y[0]], |_| {}, 0.0, [0.0, 1.0], 3.0)
            .unwrap();
        assert!((y[0] - 3f64.sin()).abs() < 1e-10);
        assert!((y[1] - 3f64.cos()).abs() < 1e-10);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn dopri_integrates_backwards() {
        let solver = Dopri::<1>::new(1e-12);
        let (y, _) = solver.solve(|_, y| [y[0]], |_| {}, 1.0, [1.0], 0.0).unwrap();
        assert!((y[0] - (-1f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn stencils_are_fourth_order() {
        let f = f64::sin;
        let x = 0.7;
        let err = |h: f64| {
            let d1 = d1_central4(f(x - 2.0 * h), f(x - h), f(x + h), f(x + 2.0 * h), h);
            let d2 = d2_central4(f(x - 2.0 * h), f(x - h), f(x), f(x + h), f(x + 2.0 * h), h);
            ((d1 - x.cos()).abs(), (d2 + x.sin()).abs())
        };
        let (a1, a2) = err(0.1);
        let (b1, b2) = err(0.05);
        assert!((a1 / b1).log2() > 3.8);
        assert!((a2 / b2).log2() > 3.8);
    }
}
