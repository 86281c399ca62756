//! Subcommand implementations. Each returns a report whose `pass` flag decides
//! the verification exit code.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use isoforge::curvefamily::{elastica_constants, hyperbolic_standardize, kappa_hyp, CurveFamily, LimitFamily};
use isoforge::elliptic::{quartic_invariants, solve_critical_omega, solve_lambda0, Family};
use isoforge::frame::{close_torus, extend_by_rotation, period_monodromy, FrameOptions, Monodromy, TorusTuning};
use isoforge::reparam::{build_spherical, validate, ReparamSpec, SphericalReparam};
use isoforge::spherical::{axis, collinearity, sphere_centers, sphericality_certificate};
use isoforge::surface::{
    build, closure_defect, conformality, curve_pde_residuals, derivative_consistency, dual_symmetry, gauss_codazzi_residuals,
    inversion_symmetry, planarity_certificate, seam_gap, GridSpec, SampledSurface,
};
use isoforge::theta::{Lattice, LatticeKind};

use crate::config::{OmegaMode, ReparamKind, RunConfig};
use crate::export::{write_csv, write_obj, write_svg};
use crate::report::Report;

/// Tolerance on `|theta - target|` after tuning.
const ANGLE_TOL: f64 = 1e-9;
/// Relative tolerance on the closed-form `|Z'(omega)|^2`.
const ZPRIME_TOL: f64 = 1e-8;
/// Absolute tolerance on the quartic residual of the unit tangent.
const ELASTICA_TOL: f64 = 1e-6;
/// Relative tolerance on the lattice invariants at two base points.
const INVARIANT_TOL: f64 = 1e-9;
/// Cone-point distance relative to the surface diameter.
const CONE_TOL: f64 = 1e-7;

/// The curve family selected by the configuration.
pub enum Curves {
    Generic(Family),
    Limit(LimitFamily),
}

impl Curves {
    pub fn as_dyn(&self) -> &dyn CurveFamily {
        match self {
            Curves::Generic(f) => f,
            Curves::Limit(f) => f,
        }
    }

    pub fn generic(&self) -> Option<&Family> {
        match self {
            Curves::Generic(f) => Some(f),
            Curves::Limit(_) => None,
        }
    }

    pub fn omega(&self) -> f64 {
        self.generic().map_or(0.0, |f| f.omega)
    }
}

pub fn lattice(cfg: &RunConfig) -> Result<Lattice> {
    Ok(Lattice::new(cfg.lattice.kind.into(), cfg.lattice.lambda)?)
}

pub fn curves(cfg: &RunConfig) -> Result<Curves> {
    let lat = lattice(cfg)?;
    Ok(match cfg.omega.mode {
        OmegaMode::Critical => Curves::Generic(Family::from_critical(&solve_critical_omega(&lat)?)?),
        OmegaMode::Explicit => Curves::Generic(Family::new(lat, cfg.omega.value.expect("checked in config"))?),
        OmegaMode::Limit => Curves::Limit(LimitFamily::new(lat)?),
    })
}

pub fn frame_options(cfg: &RunConfig) -> FrameOptions {
    FrameOptions { tol: cfg.tolerances.frame, root_factor: cfg.reparam.root_factor }
}

fn spherical_reparam(cfg: &RunConfig, c: &Curves) -> Result<SphericalReparam> {
    let Some(fam) = c.generic() else { bail!("the spherical construction needs a generic (non-limit) family") };
    Ok(build_spherical(cfg.reparam.spherical()?, fam)?)
}

pub fn reparam(cfg: &RunConfig, c: &Curves) -> Result<ReparamSpec> {
    Ok(match cfg.reparam.kind {
        ReparamKind::Sine => ReparamSpec::Analytic(cfg.reparam.analytic(&cfg.lattice)),
        ReparamKind::Spherical => ReparamSpec::Spherical(Box::new(spherical_reparam(cfg, c)?)),
    })
}

/// Everything produced by the surface pipeline.
pub struct Built {
    pub curves: Curves,
    pub spec: ReparamSpec,
    pub surface: SampledSurface,
    pub monodromy: Option<Monodromy>,
    pub torus: Option<TorusTuning>,
    /// Number of fundamental pieces in `surface`.
    pub pieces: usize,
}

pub fn build_surface(cfg: &RunConfig) -> Result<Built> {
    let c = curves(cfg)?;
    let opts = frame_options(cfg);
    let fam = c.as_dyn();
    let grid = GridSpec::new(cfg.grid.nu, cfg.grid.nv, cfg.grid.periods);
    if let Some(t) = &cfg.torus {
        if cfg.reparam.kind != ReparamKind::Sine {
            bail!("torus tuning adjusts the sine amplitude; set reparam.kind = \"sine\"");
        }
        let template = cfg.reparam.analytic(&cfg.lattice);
        let tuned = close_torus(template, fam, t.target(), (t.range[0], t.range[1]), t.scan, &opts)?;
        let spec = ReparamSpec::Analytic(tuned.spec);
        let piece = build(fam, &spec, &GridSpec { periods: 1, ..grid }, &opts)?;
        let mono = period_monodromy(fam, &spec, &opts)?;
        let pieces = t.q as usize;
        let surface = extend_by_rotation(&piece, &mono, pieces - 1);
        return Ok(Built { curves: c, spec, surface, monodromy: Some(mono), torus: Some(tuned), pieces });
    }
    let spec = reparam(cfg, &c)?;
    let surface = build(fam, &spec, &grid, &opts)?;
    let monodromy = period_monodromy(fam, &spec, &opts).ok();
    let pieces = grid.periods;
    Ok(Built { curves: c, spec, surface, monodromy, torus: None, pieces })
}

#[derive(Serialize)]
struct SurfaceSummary {
    nu: usize,
    nv: usize,
    pieces: usize,
    period: f64,
    omega: f64,
    diameter: f64,
    frame_steps: usize,
    frame_drift: f64,
    w_band: (f64, f64),
}

fn w_band(s: &SampledSurface) -> (f64, f64) {
    s.reparam.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r.w), hi.max(r.w)))
}

/// Checks that need only the sampled surface.
pub fn surface_checks(report: &mut Report, b: &Built, cfg: &RunConfig) -> Result<()> {
    let tol = &cfg.tolerances;
    let fam = b.curves.as_dyn();
    let s = &b.surface;
    report.result(
        "surface",
        &SurfaceSummary {
            nu: s.nu(),
            nv: s.nv(),
            pieces: b.pieces,
            period: s.period,
            omega: b.curves.omega(),
            diameter: s.diameter(),
            frame_steps: s.stats.accepted,
            frame_drift: s.frame_drift,
            w_band: w_band(s),
        },
    );
    report.result("reparam_validation", &validate(&b.spec, fam));
    if let Some(m) = &b.monodromy {
        report.result("monodromy", m);
    }
    if let Some(t) = &b.torus {
        report.result("torus", t);
    }

    let conf = conformality(s);
    let der = derivative_consistency(s);
    let closure = closure_defect(fam, s)?;
    let mut g = report.group("surface");
    g.below("conformality", conf.max(), tol.conformality)
        .below("fu_consistency", der.fu, tol.derivatives)
        .below("fv_consistency", der.fv, tol.derivatives)
        .below("u_closure", closure, tol.closure);
    drop(g);

    if s.nu() > 16 && s.nv() > 16 && b.pieces == 1 {
        let gc = gauss_codazzi_residuals(fam, s)?;
        report
            .group("structure_equations")
            .below("gauss", gc.gauss, tol.pde)
            .below("codazzi_u", gc.codazzi_u, tol.pde)
            .below("codazzi_v", gc.codazzi_v, tol.pde)
            .below("third_fundamental_form", gc.third_ff, tol.pde);
    }

    let p = planarity_certificate(s);
    let mut g = report.group("planarity");
    g.below("plane_deviation", p.max_deviation, tol.planarity).below("angle_spread", p.angle_spread, tol.planarity);
    match &b.curves {
        Curves::Limit(_) => {
            g.equal("normal_rank", p.normal_rank as f64, 2.0).below("normal_k_component", p.max_k_component, tol.planarity);
        }
        Curves::Generic(_) => {
            g.equal("normal_rank", p.normal_rank as f64, 3.0).below("cone_distance", p.cone_distance / s.diameter(), CONE_TOL);
        }
    }
    drop(g);

    if let Curves::Generic(f) = &b.curves {
        if f.lattice.kind == LatticeKind::Rhombic && f.is_critical(1e-12) {
            let inv = inversion_symmetry(f, s)?;
            let dual = dual_symmetry(f, s)?;
            report
                .group("symmetry")
                .below("inversion", inv.involution, tol.symmetry)
                .below("symmetry_sphere", inv.sphere, tol.symmetry)
                .below("sphere_tangency", inv.parallel, tol.symmetry)
                .below("dual_u", dual.du, tol.symmetry)
                .below("dual_v", dual.dv, tol.symmetry);
        }
    }

    if let (Some(t), Some(cfg_t)) = (&b.torus, &cfg.torus) {
        report
            .group("torus")
            .below("angle_error", (t.theta - cfg_t.target()).abs(), ANGLE_TOL)
            .below("seam_gap", seam_gap(s, b.pieces), tol.seam);
    }
    Ok(())
}

/// Identities of the curve family itself, on the band of `w` used by the surface.
pub fn curve_checks(report: &mut Report, b: &Built, cfg: &RunConfig) -> Result<()> {
    let Curves::Generic(f) = &b.curves else { return Ok(()) };
    let tol = &cfg.tolerances;
    let (mut lo, mut hi) = w_band(&b.surface);
    if hi - lo < 0.1 {
        let mid = 0.5 * (lo + hi);
        (lo, hi) = ((mid - 0.05).max(1e-3), (mid + 0.05).min(f.w_max() - 1e-3));
    }
    let mut metric: f64 = 0.0;
    for j in 0..16 {
        let w = lo + (hi - lo) * j as f64 / 15.0;
        for i in 0..64 {
            let smp = f.frame_data(2.0 * PI * (i as f64 + 0.5) / 64.0, w)?;
            metric = metric.max((smp.exp_h - 2.0 * (smp.w1 * smp.gamma.conj()).re).abs() / smp.exp_h);
        }
    }
    let pde = curve_pde_residuals(f, cfg.grid.nu.max(32), lo, hi)?;
    let mut g = report.group("curve_family");
    g.below("metric_identity", metric, tol.metric)
        .below("harmonic", pde.harmonic, tol.pde)
        .below("cauchy_riemann", pde.cauchy_riemann, tol.pde)
        .below("riccati", pde.riccati, tol.pde);
    drop(g);

    if f.lattice.kind == LatticeKind::Rhombic && f.is_critical(1e-12) {
        let (a2, a3) = quartic_invariants(f, 0.4)?;
        let (b2, b3) = quartic_invariants(f, 2.3)?;
        let mut elastica: f64 = 0.0;
        let mut mu_im: f64 = 0.0;
        for k in 0..5 {
            let e = elastica_constants(lo + (hi - lo) * k as f64 / 4.0, f)?;
            elastica = elastica.max(e.residual_max);
            mu_im = mu_im.max(e.mu_im.abs());
        }
        report
            .group("elliptic")
            .below("g2_invariance", (a2 - b2).abs() / a2.abs().max(b2.abs()), INVARIANT_TOL)
            .below("g3_invariance", (a3 - b3).abs() / a3.abs().max(b3.abs()), INVARIANT_TOL)
            .below("elastica_residual", elastica, ELASTICA_TOL)
            .below("elastica_mu_imaginary", mu_im, ELASTICA_TOL);
    }
    Ok(())
}

/// Sphericality, center collinearity and the closed-form axis.
pub fn spherical_checks(report: &mut Report, b: &Built, cfg: &RunConfig) -> Result<()> {
    let Some(sp) = b.spec.as_spherical() else { bail!("spherical checks need reparam.kind = \"spherical\"") };
    let tol = &cfg.tolerances;
    let fam = &sp.family;
    let s = &b.surface;
    let us: Vec<f64> = [0.4, 1.0, 2.5, 4.0, 5.5].to_vec();
    let cert = sphericality_certificate(fam, s, &us)?;
    let mut at = vec![fam.omega];
    at.extend(&us);
    let centers = sphere_centers(s, sp, &at, tol.frame)?;
    let (ratio, line) = collinearity(&centers.iter().map(|c| c.center).collect::<Vec<_>>());
    let rows: Vec<usize> = (1..s.rows_per_period()).step_by((s.rows_per_period() / 8).max(1)).collect();
    let ax = axis(s, sp, &rows, tol.frame)?;
    let center_gap = centers.iter().map(|c| c.center_gap()).fold(0.0, f64::max);
    let unit = ax.samples.iter().map(|a| a.unit_defect).fold(0.0, f64::max);
    let tie = ax.samples.iter().map(|a| a.quartic_tie).fold(0.0, f64::max);
    report.result("sphere_centers", &centers);
    report.result("center_line", &line);
    report.result("axis", &ax);
    let mut g = report.group("spherical");
    g.below("sphere_fit", cert.max_relative_residual, tol.sphere)
        .below("center_agreement", center_gap, tol.sphere)
        .below("origin_center", centers[0].center.norm() / centers[0].radius, tol.sphere)
        .below("collinearity", ratio, tol.sphere)
        .below("axis_unit", unit, tol.metric)
        .below("axis_quartic_tie", tie, tol.metric)
        .below("axis_v_spread", ax.v_spread, tol.axis)
        .below("zprime_norm", ax.norm_sq_rel_gap(), ZPRIME_TOL);
    if let Some(m) = &b.monodromy {
        g.below("axis_vs_monodromy", ax.direction().line_angle(&m.axis), tol.axis);
    }
    Ok(())
}

fn out_path(out_dir: &Path, name: &str) -> PathBuf {
    out_dir.join(name)
}

fn write_report(report: &Report, out_dir: &Path, cfg: &RunConfig) -> Result<PathBuf> {
    let path = out_path(out_dir, &cfg.outputs.report);
    std::fs::write(&path, report.to_json()).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

fn write_mesh(report: &mut Report, b: &Built, out_dir: &Path, cfg: &RunConfig) -> Result<()> {
    let path = out_path(out_dir, &cfg.outputs.mesh);
    let closes_u = closure_defect(b.curves.as_dyn(), &b.surface)? < cfg.tolerances.closure;
    let closes_v = b.torus.is_some() && seam_gap(&b.surface, b.pieces) < cfg.tolerances.seam;
    let stats = write_obj(&path, &b.surface, closes_u, closes_v)?;
    report.result("mesh", &stats);
    println!("mesh: {} ({} vertices, {} faces, euler characteristic {})", path.display(), stats.vertices, stats.faces, stats.euler);
    Ok(())
}

pub struct Solved {
    pub lines: Vec<String>,
}

/// `lambda0`, or the critical `omega` for a rhombic lattice.
pub fn solve(lambda: Option<f64>, want_lambda0: bool, kind: LatticeKind) -> Result<Solved> {
    let mut lines = Vec::new();
    if want_lambda0 || lambda.is_none() {
        lines.push(format!("lambda0 = {:.15}", solve_lambda0()?));
    }
    if let Some(l) = lambda {
        let c = solve_critical_omega(&Lattice::new(kind, l)?)?;
        lines.push(format!("lambda = {l}"));
        lines.push(format!("omega = {:.15}", c.omega));
        lines.push(format!("residual = {:.3e}", c.residual));
        let fam = Family::from_critical(&c)?;
        lines.push(format!("sphere radius R(omega) = {:.15}", fam.radius));
    }
    Ok(Solved { lines })
}

pub fn cmd_curves(cfg: &RunConfig, out_dir: &Path) -> Result<Report> {
    let c = curves(cfg)?;
    let fam = c.as_dyn();
    let mut report = Report::new("curves", cfg);
    let dir = out_path(out_dir, &cfg.outputs.curves);
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let n = cfg.curves.samples;
    let us: Vec<f64> = (0..=n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
    let closed = c.generic().is_some_and(|f| f.lattice.kind == LatticeKind::Rhombic && f.is_critical(1e-12)) || matches!(c, Curves::Limit(_));
    let mut svg = Vec::new();
    let mut nonfinite = 0usize;
    let mut closure: f64 = 0.0;
    let mut elastica = Vec::new();
    for (k, &w) in cfg.curves.w.iter().enumerate() {
        fam.check_w(w)?;
        let std = match &c {
            Curves::Generic(f) => Some(hyperbolic_standardize(&us, w, f)?),
            Curves::Limit(_) => None,
        };
        let mut rows = Vec::with_capacity(us.len());
        let mut poly = Vec::with_capacity(us.len());
        for (i, &u) in us.iter().enumerate() {
            let g = fam.gamma(u, w)?;
            let gu = fam.gamma_u(u, w)?;
            let t = gu / gu.norm();
            let (kappa, sx, sy) = match (&c, &std) {
                (Curves::Generic(f), Some(h)) => (kappa_hyp(u, w, f)?, h.points[i].re, h.points[i].im),
                _ => (f64::NAN, f64::NAN, f64::NAN),
            };
            let row = vec![u, g.re, g.im, gu.norm(), t.re, t.im, kappa, sx, sy];
            nonfinite += row[..6].iter().filter(|x| !x.is_finite()).count();
            rows.push(row);
            poly.push((g.re, g.im));
        }
        let gap = (fam.gamma(us[n], w)? - fam.gamma(us[0], w)?).norm();
        closure = closure.max(gap);
        println!("w = {w}: closure defect {gap:.3e}");
        let path = dir.join(format!("curve_{k:02}.csv"));
        write_csv(&path, &["u", "gamma_re", "gamma_im", "exp_h", "tangent_x", "tangent_y", "kappa_hyp", "standard_re", "standard_im"], &rows)?;
        svg.push((format!("w = {w}"), poly));
        if let Curves::Generic(f) = &c {
            if f.lattice.kind == LatticeKind::Rhombic && f.is_critical(1e-12) {
                elastica.push(elastica_constants(w, f)?);
            }
        }
    }
    if cfg.curves.svg {
        write_svg(&dir.join("curves.svg"), &svg)?;
    }
    report.result("closure_defect", &closure);
    report.result("elastica", &elastica);
    let mut g = report.group("curves");
    g.equal("nonfinite_samples", nonfinite as f64, 0.0);
    if closed {
        g.below("closure", closure, cfg.tolerances.closure);
    }
    drop(g);
    let path = write_report(&report, out_dir, cfg)?;
    println!("report: {}", path.display());
    Ok(report)
}

fn run_surface(cfg: &RunConfig, out_dir: &Path, command: &str, full: bool, mesh: bool) -> Result<Report> {
    let b = build_surface(cfg)?;
    let mut report = Report::new(command, cfg);
    surface_checks(&mut report, &b, cfg)?;
    if full {
        curve_checks(&mut report, &b, cfg)?;
        if b.spec.as_spherical().is_some() {
            spherical_checks(&mut report, &b, cfg)?;
        }
    }
    if let Some(m) = &b.monodromy {
        println!("monodromy angle theta = {:.15} rad, axis = ({:.12}, {:.12}, {:.12})", m.theta, m.axis.x, m.axis.y, m.axis.z);
    }
    if let Some(t) = &b.torus {
        println!("tuned amplitude = {:.15}, theta = {:.15}", t.amplitude, t.theta);
    }
    if mesh {
        write_mesh(&mut report, &b, out_dir, cfg)?;
    }
    let path = write_report(&report, out_dir, cfg)?;
    println!("report: {}", path.display());
    Ok(report)
}

pub fn cmd_surface(cfg: &RunConfig, out_dir: &Path) -> Result<Report> {
    run_surface(cfg, out_dir, "surface", false, true)
}

pub fn cmd_verify(cfg: &RunConfig, out_dir: &Path) -> Result<Report> {
    run_surface(cfg, out_dir, "verify", true, false)
}

pub fn cmd_close_torus(cfg: &RunConfig, out_dir: &Path) -> Result<Report> {
    if cfg.torus.is_none() {
        bail!("close-torus needs a [torus] section");
    }
    run_surface(cfg, out_dir, "close-torus", false, true)
}

pub fn cmd_spherical(cfg: &RunConfig, out_dir: &Path) -> Result<Report> {
    if cfg.reparam.kind != ReparamKind::Spherical {
        bail!("spherical needs reparam.kind = \"spherical\"");
    }
    let b = build_surface(cfg)?;
    let mut report = Report::new("spherical", cfg);
    surface_checks(&mut report, &b, cfg)?;
    spherical_checks(&mut report, &b, cfg)?;
    let sp = b.spec.as_spherical().expect("spherical spec");
    println!("oscillation interval s in [{:.12}, {:.12}], period V = {:.12}", sp.s_a, sp.s_b, sp.period);
    if let Some(m) = &b.monodromy {
        println!("monodromy angle theta = {:.15} rad, axis = ({:.12}, {:.12}, {:.12})", m.theta, m.axis.x, m.axis.y, m.axis.z);
    }
    if let Some(ax) = report.results.get("axis") {
        if let Some(d) = ax.get("zprime_omega") {
            println!("Z'(omega) = {d}");
        }
    }
    write_mesh(&mut report, &b, out_dir, cfg)?;
    let path = write_report(&report, out_dir, cfg)?;
    println!("report: {}", path.display());
    Ok(report)
}
