//! Ready-made problems for the standard nonlinear fractional equations.
//!
//! Each builder validates the parameter window of the existence result
//! that backs it and records the outcome in a [`Certificate`]. Building
//! outside the window fails unless `uncertified` is set.

use std::sync::Arc;

use log::warn;

use crate::calculus::Calculus;
use crate::error::{Error, Result};
use crate::grid::{lp_norm, radial_defect, Field, Grid};
use crate::ladder::SampleLadder;
use crate::report::KvBlock;
use crate::solvers::{Growth, Nonlinearity, Problem};
use crate::symbols::{check_ellipticity, fractional_symbol, pure_fractional_symbol};

/// Existence result a preset relies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Radial solutions for the massive symbol `(t + m^2)^{γ/2}`, needs `s > 4n/γ`.
    MassiveRadial,
    /// Radial solutions in `H^{2,2}` for `(1/κ) t^{γ/2}` under ellipticity only.
    L2Ellipticity,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::MassiveRadial => "massive_radial",
            Regime::L2Ellipticity => "l2_ellipticity",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub regime: Regime,
    /// Human-readable window, e.g. `s > 4n/gamma`.
    pub window: String,
    pub satisfied: bool,
    pub details: KvBlock,
}

impl Certificate {
    pub fn to_kv(&self) -> KvBlock {
        let mut kv = KvBlock::new();
        kv.text("regime", self.regime.name()).text("window", &self.window).flag("window_satisfied", self.satisfied);
        kv.extend(&self.details);
        kv
    }
}

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: String,
    pub problem: Problem,
    pub certificate: Certificate,
}

/// Names accepted by [`preset_names`] consumers such as the CLI.
pub fn preset_names() -> &'static [&'static str] {
    &["gp", "allen_cahn", "power", "benjamin_ono", "peierls_nabarro", "cubic", "fnls"]
}

fn enforce(window_ok: bool, window: &str, uncertified: bool) -> Result<()> {
    if window_ok {
        return Ok(());
    }
    if uncertified {
        warn!("building outside the window {window}; the result is not certified");
        Ok(())
    } else {
        Err(Error::Window(format!("parameters violate {window}")))
    }
}

/// Smooth bump `amplitude * exp(1 - 1/(1 - (r/radius)^2))` supported in `|x| < radius`.
pub fn bump_field(grid: Grid, amplitude: f64, radius: f64) -> Result<Field> {
    if !(radius > 0.0 && radius < grid.half_width()) {
        return Err(Error::InvalidParameter(format!(
            "bump radius must lie in (0, L) = (0, {}), got {radius}",
            grid.half_width()
        )));
    }
    Ok(Field::from_radial(grid, |r| {
        let q = r / radius;
        if q < 1.0 {
            amplitude * (1.0 - 1.0 / (1.0 - q * q)).exp()
        } else {
            0.0
        }
    }))
}

/// Rescales `f` so that `||f||_p = target`.
pub fn with_lp_norm(f: &Field, p: f64, target: f64) -> Result<Field> {
    let norm = lp_norm(f, p)?;
    if norm == 0.0 {
        return Err(Error::InvalidParameter("cannot rescale a zero field".into()));
    }
    Ok(f.scale(target / norm))
}

/// Maps node coordinates back to flat indices, so closures over `(x, y)`
/// can read grid fields.
#[derive(Clone)]
struct NodeLookup {
    grid: Grid,
}

impl NodeLookup {
    fn index(&self, x: &[f64]) -> usize {
        let n = self.grid.points_per_axis();
        let (l, h) = (self.grid.half_width(), self.grid.spacing());
        let idx: Vec<usize> = x.iter().map(|&xi| (((xi + l) / h).round() as usize).min(n - 1)).collect();
        self.grid.ravel(&idx)
    }
}

/// A field read at grid nodes inside nonlinearity closures.
fn field_reader(f: &Field) -> impl Fn(&[f64]) -> f64 + Send + Sync + Clone {
    let lookup = NodeLookup { grid: *f.grid() };
    let vals: Arc<[f64]> = f.values().into();
    move |x: &[f64]| vals[lookup.index(x)]
}

/// Checks that a forcing profile is radial and vanishes on the box boundary.
fn check_profile(f: &Field, grid: &Grid, what: &str) -> Result<()> {
    f.ensure_grid(grid)?;
    let scale = f.max_abs();
    if scale > 0.0 && radial_defect(f) > 1e-12 * scale {
        return Err(Error::InvalidParameter(format!("{what} must be radial")));
    }
    let n = grid.points_per_axis();
    let mut idx = [0usize; 3];
    for (j, v) in f.values().iter().enumerate() {
        grid.unravel(j, &mut idx);
        if *v != 0.0 && idx[..grid.dim()].iter().any(|&i| i == 0 || i == n - 1) {
            return Err(Error::InvalidParameter(format!("{what} must vanish on the box boundary")));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassiveParams {
    pub mass: f64,
    pub gamma: f64,
    pub s: f64,
    pub p: f64,
}

fn massive_certificate(grid: &Grid, mp: &MassiveParams, uncertified: bool) -> Result<Certificate> {
    let n = grid.dim() as f64;
    let bound = 4.0 * n / mp.gamma;
    let ok = mp.s > bound;
    let window = "s > 4n/gamma (the order s = 2 is not admissible for the massive symbol)".to_string();
    enforce(ok, &window, uncertified)?;
    let mut details = KvBlock::new();
    details.num("s", mp.s).num("four_n_over_gamma", bound);
    Ok(Certificate { regime: Regime::MassiveRadial, window, satisfied: ok, details })
}

/// Radial problem `[1 + (-Δ + m^2)^{γ/2}]^{s/2} u = V(x, u)` with caller-supplied
/// nonlinearity and growth witnesses.
pub fn preset_gp(grid: Grid, mp: MassiveParams, v: Nonlinearity, growth: Growth, uncertified: bool) -> Result<Preset> {
    let certificate = massive_certificate(&grid, &mp, uncertified)?;
    let calc = Calculus::new(fractional_symbol(mp.gamma, mp.mass)?, mp.s, grid)?;
    let problem = Problem::new(calc, mp.p, v)?.with_growth(growth)?.radial()?;
    Ok(Preset { name: "gp".into(), problem, certificate })
}

/// `V = κ u^3 + ρ(|x|)`, `α = 3`, `C = max(1, 3|κ|)`, `h = ρ`, `g = 0`.
pub fn preset_allen_cahn(grid: Grid, mp: MassiveParams, kappa: f64, rho: &Field, uncertified: bool) -> Result<Preset> {
    check_profile(rho, &grid, "rho")?;
    if !kappa.is_finite() {
        return Err(Error::InvalidParameter("kappa must be finite".into()));
    }
    let read = field_reader(rho);
    let v = Nonlinearity::new(
        format!("{kappa}*u^3+rho"),
        Arc::new(move |x: &[f64], y: f64| kappa * y * y * y + read(x)),
        Arc::new(move |_: &[f64], y: f64| 3.0 * kappa * y * y),
    );
    let growth = Growth { alpha: 3.0, c: (3.0 * kappa.abs()).max(1.0), h: rho.clone(), g: Field::zeros(grid) };
    let mut preset = preset_gp(grid, mp, v, growth, uncertified)?;
    preset.name = "allen_cahn".into();
    preset.certificate.details.num("kappa", kappa);
    Ok(preset)
}

/// `V = |u|^β u + ρ(|x|)`, `α = β + 1`, `C = β + 1`, `h = ρ`, `g = 0`.
pub fn preset_power(grid: Grid, mp: MassiveParams, beta_pow: f64, rho: &Field, uncertified: bool) -> Result<Preset> {
    check_profile(rho, &grid, "rho")?;
    if !(beta_pow > 0.0 && beta_pow.is_finite()) {
        return Err(Error::InvalidParameter(format!("power must be positive, got {beta_pow}")));
    }
    let read = field_reader(rho);
    let v = Nonlinearity::new(
        format!("|u|^{beta_pow}*u+rho"),
        Arc::new(move |x: &[f64], y: f64| y.abs().powf(beta_pow) * y + read(x)),
        Arc::new(move |_: &[f64], y: f64| (beta_pow + 1.0) * y.abs().powf(beta_pow)),
    );
    let growth = Growth { alpha: beta_pow + 1.0, c: beta_pow + 1.0, h: rho.clone(), g: Field::zeros(grid) };
    let mut preset = preset_gp(grid, mp, v, growth, uncertified)?;
    preset.name = "power".into();
    preset.certificate.details.num("beta_pow", beta_pow);
    Ok(preset)
}

/// Nonlinearity and growth witnesses for the L² regime.
#[derive(Debug, Clone)]
pub struct L2Nonlinearity {
    pub name: String,
    pub v: Nonlinearity,
    pub growth: Growth,
}

/// `V = u^2 + f`: `α = 2`, `C = 2`, `h = |f|`, `g = 0`.
pub fn benjamin_ono_nonlinearity(forcing: &Field) -> Result<L2Nonlinearity> {
    polynomial_nonlinearity("benjamin_ono", 2, forcing)
}

/// `V = u^3 + f`: `α = 3`, `C = 3`, `h = |f|`, `g = 0`.
pub fn cubic_nonlinearity(forcing: &Field) -> Result<L2Nonlinearity> {
    polynomial_nonlinearity("cubic", 3, forcing)
}

fn polynomial_nonlinearity(name: &str, degree: i32, forcing: &Field) -> Result<L2Nonlinearity> {
    let grid = *forcing.grid();
    check_profile(forcing, &grid, "forcing")?;
    let read = field_reader(forcing);
    let d = degree as f64;
    let v = Nonlinearity::new(
        format!("u^{degree}+f"),
        Arc::new(move |x: &[f64], y: f64| y.powi(degree) + read(x)),
        Arc::new(move |_: &[f64], y: f64| d * y.powi(degree - 1)),
    );
    let growth = Growth { alpha: d, c: d, h: forcing.map(f64::abs), g: Field::zeros(grid) };
    Ok(L2Nonlinearity { name: name.into(), v, growth })
}

/// `V = (1/κ) d(|x|) sin(u) + f`: `C = 1`, `h = |d|/κ + |f|`, `g = |d|/κ`,
/// valid for any growth exponent `α = 1 + δ`.
pub fn peierls_nabarro_nonlinearity(kappa: f64, d: &Field, forcing: &Field, delta_growth: f64) -> Result<L2Nonlinearity> {
    let grid = *d.grid();
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
    }
    if !(delta_growth > 0.0 && delta_growth.is_finite()) {
        return Err(Error::InvalidParameter(format!("growth slack must be positive, got {delta_growth}")));
    }
    check_profile(d, &grid, "d")?;
    check_profile(forcing, &grid, "forcing")?;
    let (rd, rf) = (field_reader(d), field_reader(forcing));
    let rd2 = rd.clone();
    let v = Nonlinearity::new(
        format!("d*sin(u)/{kappa}+f"),
        Arc::new(move |x: &[f64], y: f64| rd(x) * y.sin() / kappa + rf(x)),
        Arc::new(move |x: &[f64], y: f64| rd2(x) * y.cos() / kappa),
    );
    let g = d.map(|v| v.abs() / kappa);
    let h = g.add(&forcing.map(f64::abs))?;
    Ok(L2Nonlinearity { name: "peierls_nabarro".into(), v, growth: Growth { alpha: 1.0 + delta_growth, c: 1.0, h, g } })
}

/// `[1 + (1/κ)(-Δ)^{γ/2}] u = V(x, u)` on `H^{2,2}`, the `-u` of
/// `(1/κ)(-Δ)^{γ/2} u = -u + V` moved to the left. Needs
/// `γ > (n/2) δ/(1+δ)` with `α = 1 + δ`.
pub fn preset_l2_theory(grid: Grid, gamma: f64, kappa: f64, nl: L2Nonlinearity, uncertified: bool) -> Result<Preset> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa must be positive, got {kappa}")));
    }
    let delta = nl.growth.alpha - 1.0;
    let n = grid.dim() as f64;
    let bound = 0.5 * n * delta / (1.0 + delta);
    let ok = gamma > bound && gamma < 1.0;
    let window = "(n/2) delta/(1+delta) < gamma < 1 with alpha = 1 + delta".to_string();
    enforce(ok, &window, uncertified)?;
    let sym = pure_fractional_symbol(gamma)?.scaled(1.0 / kappa)?;
    let elliptic = check_ellipticity(&sym, &SampleLadder::default()).pass();
    warn!("t^(gamma/2) has singular derivatives at t = 0: class checks skipped, Mikhlin certification excludes the origin ball");
    let calc = Calculus::new(sym, 2.0, grid)?;
    let problem = Problem::new(calc, 2.0, nl.v)?.with_growth(nl.growth)?.radial()?;
    let mut details = KvBlock::new();
    details
        .num("gamma", gamma)
        .num("kappa", kappa)
        .num("delta_growth", delta)
        .num("gamma_lower_bound", bound)
        .flag("ellipticity_pass", elliptic);
    Ok(Preset {
        name: nl.name,
        problem,
        certificate: Certificate { regime: Regime::L2Ellipticity, window, satisfied: ok && elliptic, details },
    })
}

/// Placement of the linear terms `-m^{2σ} u + μ u` of the fractional NLS
/// `[(-Δ + m^2)^σ - m^{2σ}] u + μ u = |u|^{q-2} u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FnlsRoute {
    /// Massive symbol: `[1 + (-Δ+m^2)^σ]^{s/2}`-type left side with the
    /// linear terms `(1 + m^{2σ} - μ) u` moved to the right.
    Massive,
    /// Pure symbol `t^σ` (small mass limit, `m = 0`), `μ` normalized to 1
    /// and absorbed into the left side.
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FnlsParams {
    pub mass: f64,
    /// Fractional power `σ ∈ (0, 1/2)`; the symbol exponent is `γ = 2σ`.
    pub sigma: f64,
    pub mu: f64,
    /// Nonlinearity `|u|^{q-2} u`, `q > 2`; power `β = q - 2`.
    pub q: f64,
    pub route: FnlsRoute,
    /// Smoothing order for the massive route.
    pub s: f64,
}

/// Fractional NLS with the split of its linear terms chosen by `route`.
pub fn preset_fnls(grid: Grid, fp: FnlsParams, uncertified: bool) -> Result<Preset> {
    if !(fp.q > 2.0 && fp.q.is_finite()) {
        return Err(Error::InvalidParameter(format!("power q must exceed 2, got {}", fp.q)));
    }
    let beta = fp.q - 2.0;
    let gamma = 2.0 * fp.sigma;
    let q = fp.q;
    let n = grid.dim() as f64;
    match fp.route {
        FnlsRoute::L2 => {
            if !(fp.mu > 0.0) {
                return Err(Error::InvalidParameter(format!("mu must be positive, got {}", fp.mu)));
            }
            // μ^{-1}(-Δ)^σ u + u = μ^{-1}|u|^{q-2}u, i.e. κ = μ.
            let mu = fp.mu;
            let v = Nonlinearity::new(
                format!("|u|^{beta}*u/{mu}"),
                Arc::new(move |_: &[f64], y: f64| y.abs().powf(q - 2.0) * y / mu),
                Arc::new(move |_: &[f64], y: f64| (q - 1.0) * y.abs().powf(q - 2.0) / mu),
            );
            let c = (q - 1.0) / mu;
            let growth = Growth { alpha: q - 1.0, c: c.max(1.0 / mu), h: Field::zeros(grid), g: Field::zeros(grid) };
            let window = "n beta/(2(beta+1)) < gamma < 1".to_string();
            let bound = 0.5 * n * beta / (beta + 1.0);
            let ok = gamma > bound && gamma < 1.0;
            enforce(ok, &window, uncertified)?;
            let mut preset =
                preset_l2_theory(grid, gamma, mu, L2Nonlinearity { name: "fnls".into(), v, growth }, true)?;
            preset.certificate.window = window;
            preset.certificate.satisfied = ok && preset.certificate.satisfied;
            preset.certificate.details.text("route", "l2").num("beta_pow", beta);
            Ok(preset)
        }
        FnlsRoute::Massive => {
            let mp = MassiveParams { mass: fp.mass, gamma, s: fp.s, p: 2.0 };
            let shift = 1.0 + fp.mass.abs().powf(gamma) - fp.mu;
            let v = Nonlinearity::new(
                format!("{shift}*u+|u|^{beta}*u"),
                Arc::new(move |_: &[f64], y: f64| shift * y + y.abs().powf(q - 2.0) * y),
                Arc::new(move |_: &[f64], y: f64| shift + (q - 1.0) * y.abs().powf(q - 2.0)),
            );
            if shift != 0.0 {
                warn!("massive route keeps a linear term {shift}*u on the right; the growth bound does not cover it");
            }
            let growth = Growth { alpha: q - 1.0, c: q - 1.0, h: Field::zeros(grid), g: Field::zeros(grid) };
            let mut preset = preset_gp(grid, mp, v, growth, uncertified)?;
            preset.name = "fnls".into();
            preset.certificate.satisfied &= shift == 0.0;
            preset.certificate.details.text("route", "massive").num("linear_shift", shift).num("beta_pow", beta);
            Ok(preset)
        }
    }
}
