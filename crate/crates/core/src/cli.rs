//! Command-line front end. Exit codes: 0 ok, 1 usage or precondition error,
//! 2 check failed, 3 converged but uncertified, 4 nonconvergence.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::calculus::{embedding_audit, random_band_limited, Calculus};
use crate::config::{RunConfig, SymbolConfig};
use crate::error::{Error, Result};
use crate::field_io::write_field_csv;
use crate::grid::{lp_norm, Field, Grid};
use crate::ladder::SampleLadder;
use crate::multipliers::{mikhlin_certify, MultiplierSpec};
use crate::presets::{
    benjamin_ono_nonlinearity, bump_field, cubic_nonlinearity, peierls_nabarro_nonlinearity, preset_allen_cahn,
    preset_fnls, preset_l2_theory, preset_power, with_lp_norm, FnlsParams, FnlsRoute, MassiveParams, Preset,
};
use crate::report::KvBlock;
use crate::solvers::{
    solve_contraction, solve_linear, solve_localized, solve_radial, Growth, Nonlinearity, Problem, SolveResult,
    SolverOptions,
};
use crate::symbols::check_class;

#[derive(Debug, Parser)]
#[command(name = "fraccalc", version, about = "Spectral calculus for [1 + a(-Δ)]^{s/2} on periodic grids")]
pub struct Cli {
    /// INI run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `[output] directory`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for every random stream, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Build presets outside their parameter windows.
    #[arg(long, global = true)]
    pub uncertified: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check class membership of `[symbol]` at order `s` in dimension `[grid] n`.
    CheckSymbol,
    /// Certify the Mikhlin-type bounds of `[multiplier]`.
    VerifyMultiplier,
    /// Solve the equation selected by `[equation] preset`.
    Solve,
    /// Tabulate the convolution kernel of `T_s`.
    Kernel,
    /// Run the embedding audit.
    Norms,
    /// List presets, or build and audit the configured one.
    Presets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    Usage = 1,
    CheckFailed = 2,
    Uncertified = 3,
    NonConvergence = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitStatus::Usage.code() } else { ExitStatus::Ok.code() };
        }
    };
    match dispatch(&cli) {
        Ok(status) => status.code(),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Diverged { .. } | Error::DampingFloor { .. } => ExitStatus::NonConvergence.code(),
                _ => ExitStatus::Usage.code(),
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<ExitStatus> {
    if matches!(cli.command, Command::Presets) && cli.config.is_none() {
        print!("{}", preset_listing());
        return Ok(ExitStatus::Ok);
    }
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
        cfg.multiplier.seed = seed;
        cfg.norms.seed = seed;
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    fs::create_dir_all(&out)?;
    match cli.command {
        Command::CheckSymbol => cmd_check_symbol(&cfg, &out),
        Command::VerifyMultiplier => cmd_verify_multiplier(&cfg, &out),
        Command::Solve => cmd_solve(&cfg, &out, cli.uncertified),
        Command::Kernel => cmd_kernel(&cfg, &out),
        Command::Norms => cmd_norms(&cfg, &out),
        Command::Presets => cmd_presets(&cfg, &out, cli.uncertified),
    }
}

fn write_kv(dir: &Path, name: &str, kv: &KvBlock) -> Result<()> {
    fs::write(dir.join(name), kv.render())?;
    Ok(())
}

fn preset_listing() -> String {
    [
        ("linear", "u = T_s g for a Gaussian or random source", "none"),
        ("gauss_cos", "V = e^{-|x|^2} cos u, contraction regime", "delta < 1/(2 C ||h||_inf)"),
        ("quad_gauss", "V = u^2 + e^{-|x|^2} with a bump cutoff, localized regime", "n/(alpha p) < m < s beta/(4 alpha)"),
        ("allen_cahn", "V = kappa u^3 + rho(|x|), massive symbol", "s > 4n/gamma"),
        ("power", "V = |u|^b u + rho(|x|), massive symbol", "s > 4n/gamma"),
        ("benjamin_ono", "V = u^2 + f, pure fractional symbol, s = 2", "gamma > n/4"),
        ("peierls_nabarro", "V = d(|x|) sin(u)/kappa + f, pure fractional symbol, s = 2", "gamma > (n/2) delta/(1+delta)"),
        ("cubic", "V = u^3 + f, pure fractional symbol, s = 2", "gamma > n/3"),
        ("fnls", "fractional NLS, route l2 or massive", "n b/(2(b+1)) < gamma < 1, or s > 4n/gamma"),
    ]
    .iter()
    .map(|(name, what, window)| format!("{name:<16} {what}; window: {window}\n"))
    .collect()
}

fn cmd_check_symbol(cfg: &RunConfig, out: &Path) -> Result<ExitStatus> {
    let sym = cfg.symbol_config()?;
    let n = cfg.grid_config()?.n;
    let report = check_class(&sym.symbol, sym.order()?, n, &SampleLadder::default())?;
    write_kv(out, "class_report.txt", &report.to_kv())?;
    Ok(if report.verdict { ExitStatus::Ok } else { ExitStatus::CheckFailed })
}

fn cmd_verify_multiplier(cfg: &RunConfig, out: &Path) -> Result<ExitStatus> {
    let n = cfg.grid_config()?.n;
    let mc = &cfg.multiplier;
    let (spec, in_scope) = match mc.kind.as_str() {
        "exp_m" => {
            let c = mc.c.or_else(|| cfg.symbol.as_ref().and_then(|s| s.symbol.params().iter().find(|p| p.0 == "c").map(|p| p.1)));
            (MultiplierSpec::exp_m(c.unwrap_or(1.0))?, true)
        }
        "varphi" => {
            let sym = cfg.symbol_config()?;
            let r = mc.r.ok_or_else(|| Error::Config("[multiplier] r is required for varphi".into()))?;
            (MultiplierSpec::varphi(sym.symbol.clone(), r, sym.order()?)?, true)
        }
        _ => {
            let sym = cfg.symbol_config()?;
            let s = sym.order()?;
            let mu = mc.mu.unwrap_or(s);
            (MultiplierSpec::m_mu(sym.symbol.clone(), mu)?, mu >= s)
        }
    };
    let report = mikhlin_certify(&spec, n, &SampleLadder::default(), mc.seed)?;
    let mut kv = report.to_kv();
    kv.flag("in_scope", in_scope).flag("certified", in_scope && report.pass);
    write_kv(out, "multiplier_report.txt", &kv)?;
    Ok(if !in_scope || report.pass { ExitStatus::Ok } else { ExitStatus::CheckFailed })
}

fn calculus(cfg: &RunConfig) -> Result<Calculus> {
    let sym = cfg.symbol_config()?;
    Calculus::new(sym.symbol.clone(), sym.order()?, cfg.grid_config()?.grid()?)
}

fn cmd_kernel(cfg: &RunConfig, out: &Path) -> Result<ExitStatus> {
    let calc = calculus(cfg)?;
    let over = cfg.kernel.oversample;
    let kernel_of = |c: &Calculus| if over > 1 { c.kernel_k_refined(over) } else { c.kernel_k() };
    let k = kernel_of(&calc)?;
    write_field_csv(&out.join("kernel.csv"), &k)?;
    let norm = lp_norm(&k, 2.0)?;
    let mut kv = KvBlock::new();
    kv.text("symbol", calc.symbol().label()).num("s", calc.order()).text("oversample", over).num("kernel_l2_norm", norm);
    if cfg.kernel.stability {
        let g = calc.grid();
        let fine = Grid::new(g.dim(), 2 * g.points_per_axis(), 2.0 * g.half_width())?;
        let norm2 = lp_norm(&kernel_of(&Calculus::new(calc.symbol().clone(), calc.order(), fine)?)?, 2.0)?;
        kv.num("kernel_l2_norm_doubled", norm2).num("refinement_ratio", norm2 / norm);
    }
    write_kv(out, "constants.txt", &kv)?;
    Ok(ExitStatus::Ok)
}

fn cmd_norms(cfg: &RunConfig, out: &Path) -> Result<ExitStatus> {
    let calc = calculus(cfg)?;
    let nc = cfg.norms;
    let n = calc.grid().dim() as f64;
    let r = nc.r.unwrap_or(n / nc.p + 0.5);
    let audit = embedding_audit(&calc, nc.p, r, nc.trials, nc.seed)?;
    let ok = audit.rows().iter().all(|row| row.bounded() && row.stable(0.1));
    let mut kv = audit.to_kv();
    kv.flag("pass", ok);
    write_kv(out, "norms_report.txt", &kv)?;
    Ok(if ok { ExitStatus::Ok } else { ExitStatus::CheckFailed })
}

fn cmd_presets(cfg: &RunConfig, out: &Path, uncertified: bool) -> Result<ExitStatus> {
    let built = build(cfg, uncertified)?;
    let Built::Preset(preset) = built else {
        return Err(Error::Config("[equation] preset must name a radial preset for this command".into()));
    };
    let audit = preset.problem.growth_audit(10_000, cfg.solver.seed)?;
    let mut kv = KvBlock::new();
    kv.text("preset", &preset.name).text("nonlinearity", preset.problem.nonlinearity().label());
    kv.extend(&preset.certificate.to_kv());
    kv.num("growth_c_declared", audit.c_declared)
        .num("growth_c_fitted_value", audit.c_value)
        .num("growth_c_fitted_dy", audit.c_dy)
        .text("growth_samples", audit.samples)
        .flag("growth_pass", audit.pass);
    write_kv(out, "preset_report.txt", &kv)?;
    Ok(if !audit.pass {
        ExitStatus::CheckFailed
    } else if !preset.certificate.satisfied {
        ExitStatus::Uncertified
    } else {
        ExitStatus::Ok
    })
}

enum Built {
    Linear(Calculus, Field),
    Contraction(Problem),
    Localized(Problem),
    Preset(Box<Preset>),
}

fn forcing(cfg: &RunConfig, grid: Grid) -> Result<Field> {
    let eq = &cfg.equation;
    if eq.forcing_norm == 0.0 {
        return Ok(Field::zeros(grid));
    }
    let radius = eq.forcing_radius.unwrap_or(grid.half_width() / 4.0);
    with_lp_norm(&bump_field(grid, 1.0, radius)?, eq.p, eq.forcing_norm)
}

fn massive_params(sym: &SymbolConfig, p: f64) -> Result<MassiveParams> {
    if sym.kind != "fractional" {
        return Err(Error::Config("this preset needs [symbol] kind = fractional".into()));
    }
    Ok(MassiveParams { mass: sym.mass.unwrap_or(1.0), gamma: sym.gamma.unwrap_or(0.5), s: sym.order()?, p })
}

fn pure_params(sym: &SymbolConfig) -> Result<(f64, f64)> {
    if sym.kind != "pure_fractional" {
        return Err(Error::Config("this preset needs [symbol] kind = pure_fractional".into()));
    }
    if sym.s.is_some_and(|s| s != 2.0) {
        return Err(Error::Config("this preset fixes s = 2".into()));
    }
    Ok((sym.gamma.unwrap_or(0.5), sym.kappa))
}

fn gaussian(grid: Grid, width: f64) -> Field {
    Field::from_radial(grid, |r| (-(r * r) / (2.0 * width * width)).exp())
}

fn build(cfg: &RunConfig, uncertified: bool) -> Result<Built> {
    let eq = &cfg.equation;
    let preset = eq.preset.as_deref().ok_or_else(|| Error::Config("[equation] preset is required".into()))?;
    let grid = cfg.grid_config()?.grid()?;
    let sym = cfg.symbol_config()?;
    let built = match preset {
        "linear" => {
            let calc = calculus(cfg)?;
            let g = if eq.source == "random" {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.seed);
                random_band_limited(&grid, grid.points_per_axis() / 4, &mut rng)
            } else {
                gaussian(grid, eq.source_width)
            };
            Built::Linear(calc, g)
        }
        "gauss_cos" => {
            let v = Nonlinearity::new(
                "exp(-|x|^2)*cos(u)",
                Arc::new(|x: &[f64], y: f64| (-x.iter().map(|c| c * c).sum::<f64>()).exp() * y.cos()),
                Arc::new(|x: &[f64], y: f64| -(-x.iter().map(|c| c * c).sum::<f64>()).exp() * y.sin()),
            );
            let h = gaussian(grid, std::f64::consts::FRAC_1_SQRT_2);
            Built::Contraction(Problem::new(calculus(cfg)?, eq.p, v)?.with_lipschitz(h)?.with_delta(eq.delta)?)
        }
        "quad_gauss" => {
            let v = Nonlinearity::new(
                "u^2+exp(-|x|^2)",
                Arc::new(|x: &[f64], y: f64| y * y + (-x.iter().map(|c| c * c).sum::<f64>()).exp()),
                Arc::new(|_: &[f64], y: f64| 2.0 * y),
            );
            let h = gaussian(grid, std::f64::consts::FRAC_1_SQRT_2);
            let growth = Growth { alpha: 2.0, c: 2.0, h, g: Field::zeros(grid) };
            let phi = bump_field(grid, 1.0, eq.cutoff_radius.unwrap_or(grid.half_width() / 2.0))?;
            Built::Localized(
                Problem::new(calculus(cfg)?, eq.p, v)?.with_growth(growth)?.with_cutoff(phi)?.with_delta(eq.delta)?,
            )
        }
        "allen_cahn" => {
            Built::Preset(Box::new(preset_allen_cahn(grid, massive_params(sym, eq.p)?, eq.kappa, &forcing(cfg, grid)?, uncertified)?))
        }
        "power" => {
            Built::Preset(Box::new(preset_power(grid, massive_params(sym, eq.p)?, eq.beta_pow, &forcing(cfg, grid)?, uncertified)?))
        }
        "benjamin_ono" | "cubic" => {
            let (gamma, kappa) = pure_params(sym)?;
            let f = forcing(cfg, grid)?;
            let nl = if preset == "cubic" { cubic_nonlinearity(&f)? } else { benjamin_ono_nonlinearity(&f)? };
            Built::Preset(Box::new(preset_l2_theory(grid, gamma, kappa, nl, uncertified)?))
        }
        "peierls_nabarro" => {
            let (gamma, kappa) = pure_params(sym)?;
            let d = bump_field(grid, eq.d_amplitude, eq.d_radius.unwrap_or(grid.half_width() / 4.0))?;
            let nl = peierls_nabarro_nonlinearity(kappa, &d, &forcing(cfg, grid)?, eq.delta_growth)?;
            Built::Preset(Box::new(preset_l2_theory(grid, gamma, kappa, nl, uncertified)?))
        }
        "fnls" => {
            let route = if eq.route == "massive" { FnlsRoute::Massive } else { FnlsRoute::L2 };
            let (gamma, mass, s) = match route {
                FnlsRoute::L2 => (pure_params(sym)?.0, 0.0, 2.0),
                FnlsRoute::Massive => {
                    let mp = massive_params(sym, 2.0)?;
                    (mp.gamma, mp.mass, mp.s)
                }
            };
            let fp = FnlsParams { mass, sigma: gamma / 2.0, mu: eq.mu, q: eq.q, route, s };
            Built::Preset(Box::new(preset_fnls(grid, fp, uncertified)?))
        }
        other => return Err(Error::Config(format!("unknown preset {other:?}"))),
    };
    if let (Some(alpha), Built::Preset(p)) = (eq.alpha, &built) {
        let declared = p.problem.growth().map(|g| g.alpha);
        if declared != Some(alpha) {
            return Err(Error::Config(format!("[equation] alpha = {alpha} but the preset declares {declared:?}")));
        }
    }
    Ok(built)
}

fn solver_options(cfg: &RunConfig) -> SolverOptions {
    let sc = &cfg.solver;
    SolverOptions {
        step_tol: sc.step_tol,
        residual_tol: sc.residual_tol,
        max_iter: sc.max_iter,
        damping: sc.damping,
        damping_floor: sc.damping_floor,
        seed: sc.seed,
        embedding_trials: sc.trials,
        epsilon: sc.epsilon,
        n_emb: sc.n_emb,
        c_emb: sc.c_emb,
        m_reg: sc.m_reg,
        // The certificate status is reported through the exit code.
        uncertified: true,
        ..SolverOptions::default()
    }
}

fn cmd_solve(cfg: &RunConfig, out: &Path, uncertified: bool) -> Result<ExitStatus> {
    let opts = solver_options(cfg);
    let (result, extra, window_ok) = match build(cfg, uncertified)? {
        Built::Linear(calc, g) => (solve_linear(&calc, &g, cfg.equation.p)?, KvBlock::new(), true),
        Built::Contraction(prob) => (solve_contraction(&prob, &opts)?, KvBlock::new(), true),
        Built::Localized(prob) => (solve_localized(&prob, &opts)?, KvBlock::new(), true),
        Built::Preset(preset) => {
            let mut kv = KvBlock::new();
            kv.text("preset", &preset.name);
            kv.extend(&preset.certificate.to_kv());
            (solve_radial(&preset.problem, &opts)?, kv, preset.certificate.satisfied)
        }
    };
    write_outputs(cfg, out, &result, &extra, window_ok)?;
    info!("solve finished: {} iterations, residual {:e}", result.iterations, result.final_residual());
    Ok(if !result.converged {
        ExitStatus::NonConvergence
    } else if !(result.certified && window_ok) {
        ExitStatus::Uncertified
    } else {
        ExitStatus::Ok
    })
}

fn write_outputs(cfg: &RunConfig, out: &Path, r: &SolveResult, extra: &KvBlock, window_ok: bool) -> Result<()> {
    if cfg.output.solution {
        write_field_csv(&out.join("solution.csv"), &r.u)?;
    }
    if cfg.output.history {
        r.write_history_csv(&out.join("history.csv"))?;
    }
    if cfg.output.constants {
        let mut kv = r.constants.clone();
        kv.extend(extra);
        kv.text("seed", cfg.solver.seed)
            .text("iterations", r.iterations)
            .num("final_residual", r.final_residual())
            .flag("converged", r.converged)
            .flag("certificate", r.certified && window_ok);
        write_kv(out, "constants.txt", &kv)?;
    }
    Ok(())
}
