//! INI run configuration: `[grid]`, `[symbol]`, `[equation]`, `[solver]`,
//! `[output]`, `[multiplier]`, `[kernel]` and `[norms]`. Unknown sections
//! and keys are rejected; `#` and `;` start comments.

use std::path::{Path, PathBuf};

use ini::{Ini, Properties};

use crate::error::{Error, Result};
use crate::grid::{make_grid, Grid};
use crate::solvers::Epsilon;
use crate::symbols::{exp_symbol, fractional_symbol, laplace_symbol, oscillatory_symbol, pure_fractional_symbol, Symbol};

const SECTIONS: &[(&str, &[&str])] = &[
    ("grid", &["n", "N", "L"]),
    ("symbol", &["kind", "gamma", "m", "c", "kappa", "q", "beta", "s"]),
    (
        "equation",
        &[
            "preset",
            "p",
            "delta",
            "alpha",
            "source",
            "source_width",
            "forcing_norm",
            "forcing_radius",
            "kappa",
            "beta_pow",
            "d_amplitude",
            "d_radius",
            "delta_growth",
            "cutoff_radius",
            "mu",
            "q",
            "route",
        ],
    ),
    (
        "solver",
        &[
            "step_tol",
            "residual_tol",
            "max_iter",
            "damping",
            "damping_floor",
            "epsilon",
            "seed",
            "trials",
            "n_emb",
            "c_emb",
            "m_reg",
        ],
    ),
    ("output", &["directory", "solution", "history", "constants"]),
    ("multiplier", &["kind", "mu", "r", "c", "seed"]),
    ("kernel", &["oversample", "stability"]),
    ("norms", &["p", "r", "trials", "seed"]),
];

/// Typed access to one section.
struct Section<'a> {
    name: &'static str,
    props: Option<&'a Properties>,
}

impl<'a> Section<'a> {
    fn raw(&self, key: &str) -> Option<&'a str> {
        self.props.and_then(|p| p.get(key)).map(str::trim)
    }

    fn bad(&self, key: &str, value: &str, want: &str) -> Error {
        Error::Config(format!("[{}] {key} = {value:?}: expected {want}", self.name))
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| self.bad(key, v, "a finite number")))
            .transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.raw(key).map(|v| v.parse::<usize>().map_err(|_| self.bad(key, v, "a nonnegative integer"))).transpose()
    }

    fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.raw(key).map(|v| v.parse::<u64>().map_err(|_| self.bad(key, v, "an unsigned integer"))).transpose()
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.raw(key)
            .map(|v| match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(self.bad(key, v, "true or false")),
            })
            .transpose()
    }

    fn string(&self, key: &str) -> Option<String> {
        self.raw(key).map(str::to_string)
    }

    fn require_f64(&self, key: &str) -> Result<f64> {
        self.f64(key)?.ok_or_else(|| Error::Config(format!("[{}] {key} is required", self.name)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub n: usize,
    pub points: Option<usize>,
    pub half_width: Option<f64>,
}

impl GridConfig {
    pub fn grid(&self) -> Result<Grid> {
        match (self.points, self.half_width) {
            (Some(points), Some(l)) => make_grid(self.n, points, l),
            _ => Err(Error::Config("[grid] N and L are required for this command".into())),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SymbolConfig {
    pub kind: String,
    pub symbol: Symbol,
    pub gamma: Option<f64>,
    pub mass: Option<f64>,
    pub kappa: f64,
    pub s: Option<f64>,
}

impl SymbolConfig {
    pub fn order(&self) -> Result<f64> {
        self.s.ok_or_else(|| Error::Config("[symbol] s is required for this command".into()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquationConfig {
    pub preset: Option<String>,
    pub p: f64,
    pub delta: f64,
    pub alpha: Option<f64>,
    pub source: String,
    pub source_width: f64,
    pub forcing_norm: f64,
    pub forcing_radius: Option<f64>,
    pub kappa: f64,
    pub beta_pow: f64,
    pub d_amplitude: f64,
    pub d_radius: Option<f64>,
    pub delta_growth: f64,
    pub cutoff_radius: Option<f64>,
    pub mu: f64,
    pub q: f64,
    pub route: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub step_tol: f64,
    pub residual_tol: f64,
    pub max_iter: Option<usize>,
    pub damping: f64,
    pub damping_floor: f64,
    pub epsilon: Epsilon,
    pub seed: u64,
    pub trials: usize,
    pub n_emb: Option<f64>,
    pub c_emb: Option<f64>,
    pub m_reg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub solution: bool,
    pub history: bool,
    pub constants: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierConfig {
    pub kind: String,
    pub mu: Option<f64>,
    pub r: Option<f64>,
    pub c: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub oversample: usize,
    pub stability: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormsConfig {
    pub p: f64,
    pub r: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: Option<GridConfig>,
    pub symbol: Option<SymbolConfig>,
    pub equation: EquationConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    pub multiplier: MultiplierConfig,
    pub kernel: KernelConfig,
    pub norms: NormsConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(Error::Config(format!("key {k:?} outside any section")));
                }
                continue;
            };
            let allowed = SECTIONS
                .iter()
                .find(|(s, _)| *s == name)
                .map(|(_, keys)| *keys)
                .ok_or_else(|| Error::Config(format!("unknown section [{name}]")))?;
            for (k, _) in props.iter() {
                if !allowed.contains(&k) {
                    return Err(Error::Config(format!("unknown key {k:?} in [{name}]")));
                }
            }
        }
        let sect = |name: &'static str| Section { name, props: ini.section(Some(name)) };
        let grid = parse_grid(&sect("grid"))?;
        let symbol = parse_symbol(&sect("symbol"))?;
        let equation = parse_equation(&sect("equation"))?;
        let solver = parse_solver(&sect("solver"))?;
        let o = sect("output");
        let output = OutputConfig {
            directory: o.string("directory").map_or_else(|| PathBuf::from("."), PathBuf::from),
            solution: o.bool("solution")?.unwrap_or(true),
            history: o.bool("history")?.unwrap_or(true),
            constants: o.bool("constants")?.unwrap_or(true),
        };
        let m = sect("multiplier");
        let multiplier = MultiplierConfig {
            kind: m.string("kind").unwrap_or_else(|| "m_mu".into()),
            mu: m.f64("mu")?,
            r: m.f64("r")?,
            c: m.f64("c")?,
            seed: m.u64("seed")?.unwrap_or(0),
        };
        if !["m_mu", "varphi", "exp_m"].contains(&multiplier.kind.as_str()) {
            return Err(Error::Config(format!("[multiplier] kind {:?}: expected m_mu, varphi or exp_m", multiplier.kind)));
        }
        let k = sect("kernel");
        let kernel = KernelConfig {
            oversample: k.usize("oversample")?.unwrap_or(1),
            stability: k.bool("stability")?.unwrap_or(true),
        };
        if kernel.oversample == 0 {
            return Err(Error::Config("[kernel] oversample must be >= 1".into()));
        }
        let nm = sect("norms");
        let norms = NormsConfig {
            p: nm.f64("p")?.unwrap_or(2.0),
            r: nm.f64("r")?,
            trials: nm.usize("trials")?.unwrap_or(200),
            seed: nm.u64("seed")?.unwrap_or(0),
        };
        Ok(RunConfig { grid, symbol, equation, solver, output, multiplier, kernel, norms })
    }

    pub fn grid_config(&self) -> Result<GridConfig> {
        self.grid.ok_or_else(|| Error::Config("[grid] section is required".into()))
    }

    pub fn symbol_config(&self) -> Result<&SymbolConfig> {
        self.symbol.as_ref().ok_or_else(|| Error::Config("[symbol] section is required".into()))
    }
}

fn parse_grid(sec: &Section) -> Result<Option<GridConfig>> {
    if sec.props.is_none() {
        return Ok(None);
    }
    let n = sec.usize("n")?.ok_or_else(|| Error::Config("[grid] n is required".into()))?;
    let cfg = GridConfig { n, points: sec.usize("N")?, half_width: sec.f64("L")? };
    if !(1..=3).contains(&n) {
        return Err(Error::Config(format!("[grid] n must be 1, 2 or 3, got {n}")));
    }
    if cfg.points.is_some() || cfg.half_width.is_some() {
        cfg.grid().map_err(|e| Error::Config(format!("[grid] {e}")))?;
    }
    Ok(Some(cfg))
}

fn parse_symbol(sec: &Section) -> Result<Option<SymbolConfig>> {
    if sec.props.is_none() {
        return Ok(None);
    }
    let kind = sec.string("kind").ok_or_else(|| Error::Config("[symbol] kind is required".into()))?;
    let gamma = sec.f64("gamma")?;
    let mass = sec.f64("m")?;
    let kappa = sec.f64("kappa")?.unwrap_or(1.0);
    let wrap = |e: Error| Error::Config(format!("[symbol] {e}"));
    let base = match kind.as_str() {
        "laplace" => laplace_symbol(),
        "fractional" => fractional_symbol(sec.require_f64("gamma")?, sec.require_f64("m")?).map_err(wrap)?,
        "pure_fractional" => pure_fractional_symbol(sec.require_f64("gamma")?).map_err(wrap)?,
        "exp" => exp_symbol(sec.require_f64("c")?).map_err(wrap)?,
        "oscillatory" => {
            let q = sec.usize("q")?.unwrap_or(3);
            oscillatory_symbol(u32::try_from(q).map_err(|_| Error::Config("[symbol] q too large".into()))?).map_err(wrap)?
        }
        other => {
            return Err(Error::Config(format!(
                "[symbol] kind {other:?}: expected laplace, fractional, pure_fractional, exp or oscillatory"
            )))
        }
    };
    let symbol = if kappa == 1.0 { base } else { base.scaled(1.0 / kappa).map_err(wrap)? };
    if let Some(beta) = sec.f64("beta")? {
        if beta != symbol.beta() {
            return Err(Error::Config(format!("[symbol] beta = {beta} but {} has beta = {}", symbol.label(), symbol.beta())));
        }
    }
    let s = sec.f64("s")?;
    if let Some(s) = s {
        if !(s > 0.0) {
            return Err(Error::Config(format!("[symbol] s must be positive, got {s}")));
        }
    }
    Ok(Some(SymbolConfig { kind, symbol, gamma, mass, kappa, s }))
}

fn parse_equation(sec: &Section) -> Result<EquationConfig> {
    let cfg = EquationConfig {
        preset: sec.string("preset"),
        p: sec.f64("p")?.unwrap_or(2.0),
        delta: sec.f64("delta")?.unwrap_or(1.0),
        alpha: sec.f64("alpha")?,
        source: sec.string("source").unwrap_or_else(|| "gaussian".into()),
        source_width: sec.f64("source_width")?.unwrap_or(1.0),
        forcing_norm: sec.f64("forcing_norm")?.unwrap_or(0.0),
        forcing_radius: sec.f64("forcing_radius")?,
        kappa: sec.f64("kappa")?.unwrap_or(1.0),
        beta_pow: sec.f64("beta_pow")?.unwrap_or(2.0),
        d_amplitude: sec.f64("d_amplitude")?.unwrap_or(0.0),
        d_radius: sec.f64("d_radius")?,
        delta_growth: sec.f64("delta_growth")?.unwrap_or(1.0),
        cutoff_radius: sec.f64("cutoff_radius")?,
        mu: sec.f64("mu")?.unwrap_or(1.0),
        q: sec.f64("q")?.unwrap_or(4.0),
        route: sec.string("route").unwrap_or_else(|| "l2".into()),
    };
    if !(cfg.p >= 1.0) {
        return Err(Error::Config(format!("[equation] p must be >= 1, got {}", cfg.p)));
    }
    if cfg.delta < 0.0 {
        return Err(Error::Config(format!("[equation] delta must be >= 0, got {}", cfg.delta)));
    }
    if cfg.forcing_norm < 0.0 {
        return Err(Error::Config(format!("[equation] forcing_norm must be >= 0, got {}", cfg.forcing_norm)));
    }
    if !["gaussian", "random"].contains(&cfg.source.as_str()) {
        return Err(Error::Config(format!("[equation] source {:?}: expected gaussian or random", cfg.source)));
    }
    if !["l2", "massive"].contains(&cfg.route.as_str()) {
        return Err(Error::Config(format!("[equation] route {:?}: expected l2 or massive", cfg.route)));
    }
    if let Some(p) = &cfg.preset {
        if !SOLVE_PRESETS.contains(&p.as_str()) {
            return Err(Error::Config(format!("[equation] preset {p:?}: expected one of {}", SOLVE_PRESETS.join(", "))));
        }
    }
    Ok(cfg)
}

/// Values accepted by `[equation] preset`.
pub const SOLVE_PRESETS: &[&str] =
    &["linear", "gauss_cos", "quad_gauss", "allen_cahn", "power", "benjamin_ono", "peierls_nabarro", "cubic", "fnls"];

fn parse_solver(sec: &Section) -> Result<SolverConfig> {
    let epsilon = match sec.raw("epsilon") {
        None | Some("auto") => Epsilon::Auto,
        Some(v) => match v.parse::<f64>() {
            Ok(e) if e > 0.0 && e.is_finite() => Epsilon::Fixed(e),
            _ => return Err(sec.bad("epsilon", v, "auto or a positive number")),
        },
    };
    let cfg = SolverConfig {
        step_tol: sec.f64("step_tol")?.unwrap_or(1e-10),
        residual_tol: sec.f64("residual_tol")?.unwrap_or(1e-8),
        max_iter: sec.usize("max_iter")?,
        damping: sec.f64("damping")?.unwrap_or(1.0),
        damping_floor: sec.f64("damping_floor")?.unwrap_or(1.0 / 16.0),
        epsilon,
        seed: sec.u64("seed")?.unwrap_or(0),
        trials: sec.usize("trials")?.unwrap_or(200),
        n_emb: sec.f64("n_emb")?,
        c_emb: sec.f64("c_emb")?,
        m_reg: sec.f64("m_reg")?,
    };
    if !(cfg.step_tol > 0.0 && cfg.residual_tol > 0.0) {
        return Err(Error::Config("[solver] tolerances must be positive".into()));
    }
    if !(cfg.damping_floor > 0.0 && cfg.damping_floor <= cfg.damping && cfg.damping <= 1.0) {
        return Err(Error::Config("[solver] need 0 < damping_floor <= damping <= 1".into()));
    }
    Ok(cfg)
}
