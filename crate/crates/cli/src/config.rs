//! TOML run configuration. Unknown keys are rejected at every level.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, Context, Result};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use isoforge::reparam::{AnalyticReparam, SphericalSpec};
use isoforge::theta::LatticeKind;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub omega: OmegaConfig,
    #[serde(default)]
    pub reparam: ReparamConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub curves: CurvesConfig,
    #[serde(default)]
    pub torus: Option<TorusConfig>,
    #[serde(default)]
    pub outputs: OutputsConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KindConfig {
    Rhombic,
    Rectangular,
}

impl From<KindConfig> for LatticeKind {
    fn from(k: KindConfig) -> Self {
        match k {
            KindConfig::Rhombic => LatticeKind::Rhombic,
            KindConfig::Rectangular => LatticeKind::Rectangular,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub kind: KindConfig,
    pub lambda: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self { kind: KindConfig::Rhombic, lambda: 0.32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OmegaMode {
    /// The zero of the companion theta derivative in `(0, pi/4)`.
    Critical,
    /// A user-supplied `value`.
    Explicit,
    /// The `omega -> 0` limit family.
    Limit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaConfig {
    pub mode: OmegaMode,
    #[serde(default)]
    pub value: Option<f64>,
}

impl Default for OmegaConfig {
    fn default() -> Self {
        Self { mode: OmegaMode::Critical, value: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReparamKind {
    Sine,
    Spherical,
}

/// `w(v) = mean + amplitude sin(2 pi v / period)`, or the spherical construction from `(delta, s1, s2)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReparamConfig {
    pub kind: ReparamKind,
    /// Defaults to the middle of the admissible band: `pi * lambda` (rhombic) or `pi * lambda / 2` (rectangular).
    #[serde(default)]
    pub mean: Option<f64>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_period")]
    pub period: f64,
    /// Multiplies `sqrt(1 - w'^2)` in the frame equation; `-1` builds a deliberately inconsistent surface.
    #[serde(default = "one")]
    pub root_factor: f64,
    #[serde(default)]
    pub delta: Option<f64>,
    /// `[re, im]`.
    #[serde(default)]
    pub s1: Option<[f64; 2]>,
    /// `[re, im]`; defaults to the conjugate of `s1`.
    #[serde(default)]
    pub s2: Option<[f64; 2]>,
}

fn default_amplitude() -> f64 {
    0.27
}

fn default_period() -> f64 {
    2.0 * PI
}

fn one() -> f64 {
    1.0
}

impl Default for ReparamConfig {
    fn default() -> Self {
        Self {
            kind: ReparamKind::Sine,
            mean: None,
            amplitude: default_amplitude(),
            period: default_period(),
            root_factor: 1.0,
            delta: None,
            s1: None,
            s2: None,
        }
    }
}

impl ReparamConfig {
    pub fn analytic(&self, lattice: &LatticeConfig) -> AnalyticReparam {
        let mid = match lattice.kind {
            KindConfig::Rhombic => PI * lattice.lambda,
            KindConfig::Rectangular => 0.5 * PI * lattice.lambda,
        };
        AnalyticReparam::new(self.mean.unwrap_or(mid), self.amplitude, self.period)
    }

    pub fn spherical(&self) -> Result<SphericalSpec> {
        let (Some(delta), Some(s1)) = (self.delta, self.s1) else {
            bail!("spherical reparametrization needs reparam.delta and reparam.s1");
        };
        let s2 = self.s2.unwrap_or([s1[0], -s1[1]]);
        Ok(SphericalSpec { delta, s1: C64::new(s1[0], s1[1]), s2: C64::new(s2[0], s2[1]) })
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nu: usize,
    pub nv: usize,
    #[serde(default = "one_period")]
    pub periods: usize,
}

fn one_period() -> usize {
    1
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nu: 128, nv: 129, periods: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvesConfig {
    pub w: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "yes")]
    pub svg: bool,
}

fn default_samples() -> usize {
    256
}

fn yes() -> bool {
    true
}

impl Default for CurvesConfig {
    fn default() -> Self {
        Self { w: vec![0.3, 0.6, 0.9, 1.2, 1.5], samples: default_samples(), svg: true }
    }
}

/// Tune the sine amplitude so that the rotation angle is `2 pi p / q`, then assemble `q` pieces.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusConfig {
    pub p: u32,
    pub q: u32,
    #[serde(default = "default_range")]
    pub range: [f64; 2],
    #[serde(default = "default_scan")]
    pub scan: usize,
}

fn default_range() -> [f64; 2] {
    [0.05, 0.6]
}

fn default_scan() -> usize {
    11
}

impl TorusConfig {
    /// Target angle folded into `[0, pi]`, where the monodromy angle lives.
    pub fn target(&self) -> f64 {
        let t = (2.0 * PI * self.p as f64 / self.q as f64).rem_euclid(2.0 * PI);
        if t > PI {
            2.0 * PI - t
        } else {
            t
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    #[serde(default = "default_mesh")]
    pub mesh: String,
    #[serde(default = "default_curves_dir")]
    pub curves: String,
    #[serde(default = "default_report")]
    pub report: String,
}

fn default_mesh() -> String {
    "surface.obj".into()
}

fn default_curves_dir() -> String {
    "curves".into()
}

fn default_report() -> String {
    "report.json".into()
}

impl Default for OutputsConfig {
    fn default() -> Self {
        Self { mesh: default_mesh(), curves: default_curves_dir(), report: default_report() }
    }
}

/// Integrator tolerance and pass thresholds for the verification battery.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub frame: f64,
    pub conformality: f64,
    pub closure: f64,
    pub derivatives: f64,
    pub pde: f64,
    pub planarity: f64,
    pub symmetry: f64,
    pub metric: f64,
    pub seam: f64,
    pub sphere: f64,
    pub axis: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            frame: 1e-12,
            conformality: 1e-9,
            closure: 1e-9,
            derivatives: 1e-2,
            pde: 1e-4,
            planarity: 1e-8,
            symmetry: 1e-8,
            metric: 1e-9,
            seam: 1e-6,
            sphere: 1e-6,
            axis: 1e-6,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid configuration")?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.lattice.lambda > 0.0) {
            bail!("lattice.lambda must be positive");
        }
        if self.omega.mode == OmegaMode::Explicit && self.omega.value.is_none() {
            bail!("omega.mode = \"explicit\" needs omega.value");
        }
        if self.omega.mode != OmegaMode::Explicit && self.omega.value.is_some() {
            bail!("omega.value is only used with omega.mode = \"explicit\"");
        }
        if self.grid.nu < 8 || self.grid.nv < 5 || self.grid.periods == 0 {
            bail!("grid needs nu >= 8, nv >= 5 and periods >= 1");
        }
        if self.curves.samples < 4 {
            bail!("curves.samples must be at least 4");
        }
        if let Some(t) = &self.torus {
            if t.q < 2 || t.p == 0 {
                bail!("torus needs p >= 1 and q >= 2");
            }
            if !(t.range[0] < t.range[1]) {
                bail!("torus.range must be increasing");
            }
        }
        if self.reparam.kind == ReparamKind::Spherical {
            self.reparam.spherical()?;
        }
        Ok(())
    }

    /// Canonical JSON used for hashing and echoing into reports.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_unknown_keys() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg.lattice.kind, KindConfig::Rhombic);
        assert_eq!(cfg.grid.nu, 128);
        assert!(RunConfig::from_toml("[lattice]\nkind = \"rhombic\"\nlambda = 0.3\ncolour = 1\n").is_err());
        assert!(RunConfig::from_toml("[nonsense]\n").is_err());
        assert!(RunConfig::from_toml("[tolerances]\npde = 1e-3\nfoo = 2\n").is_err());
    }

    #[test]
    fn explicit_omega_requires_value() {
        assert!(RunConfig::from_toml("[omega]\nmode = \"explicit\"\n").is_err());
        assert!(RunConfig::from_toml("[omega]\nmode = \"explicit\"\nvalue = 0.3\n").is_ok());
        assert!(RunConfig::from_toml("[omega]\nmode = \"critical\"\nvalue = 0.3\n").is_err());
    }

    #[test]
    fn spherical_defaults_to_conjugate_pair() {
        let cfg = RunConfig::from_toml("[reparam]\nkind = \"spherical\"\ndelta = 0.05\ns1 = [1.0, 0.1]\n").unwrap();
        let s = cfg.reparam.spherical().unwrap();
        assert_eq!(s.s2, C64::new(1.0, -0.1));
        assert!(RunConfig::from_toml("[reparam]\nkind = \"spherical\"\n").is_err());
    }

    #[test]
    fn torus_target_folds_into_half_turn() {
        let t = TorusConfig { p: 2, q: 3, range: default_range(), scan: 11 };
        assert!((t.target() - 2.0 * PI / 3.0).abs() < 1e-15);
        let t = TorusConfig { p: 1, q: 3, ..t };
        assert!((t.target() - 2.0 * PI / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hash_input_is_stable() {
        let a = RunConfig::from_toml("[grid]\nnu = 32\nnv = 33\n").unwrap();
        let b = RunConfig::from_toml("[grid]\nnv = 33\nnu = 32\n").unwrap();
        assert_eq!(a.canonical_json(), b.canonical_json());
    }
}
