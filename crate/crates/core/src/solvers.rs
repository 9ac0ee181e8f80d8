//! Fixed-point solvers for `[1 + a(-Δ)]^{s/2} u = δ φ V(·, u)`.
//!
//! * [`solve_linear`]: `u = T_s g` in one step.
//! * [`solve_contraction`]: Picard iteration under a Lipschitz witness.
//! * [`solve_localized`]: damped Picard with a cutoff `φ` and a Bessel-ball constraint.
//! * [`solve_radial`]: damped Picard on radial fields inside an `L^{αp}` ball.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{estimate_lp_embedding_constant, random_radial, sobolev_norm, Calculus};
use crate::error::{Error, Result};
use crate::field_io::fmt17;
use crate::grid::{check_exponent, lp_norm, radial_defect, radial_project, Field, Grid};
use crate::report::KvBlock;

pub type PointFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;

/// `V(x, y)` together with `∂V/∂y`.
#[derive(Clone)]
pub struct Nonlinearity {
    label: String,
    value: Arc<PointFn>,
    dy: Arc<PointFn>,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Nonlinearity({})", self.label)
    }
}

impl Nonlinearity {
    pub fn new(label: impl Into<String>, value: Arc<PointFn>, dy: Arc<PointFn>) -> Self {
        Nonlinearity { label: label.into(), value, dy }
    }

    pub fn zero() -> Self {
        Nonlinearity::new("0", Arc::new(|_, _| 0.0), Arc::new(|_, _| 0.0))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, x: &[f64], y: f64) -> f64 {
        (self.value)(x, y)
    }

    pub fn dy(&self, x: &[f64], y: f64) -> f64 {
        (self.dy)(x, y)
    }
}

/// Witnesses of `|V(x,y)| <= C(|h(x)| + |y|^α)` and
/// `|∂_y V(x,y)| <= C(|g(x)| + |y|^(α-1))`.
#[derive(Debug, Clone)]
pub struct Growth {
    pub alpha: f64,
    pub c: f64,
    pub h: Field,
    pub g: Field,
}

#[derive(Debug, Clone)]
pub struct Problem {
    calc: Calculus,
    p: f64,
    v: Nonlinearity,
    growth: Option<Growth>,
    lipschitz: Option<Field>,
    cutoff: Option<Field>,
    delta: f64,
    radial: bool,
    coords: Vec<f64>,
}

impl Problem {
    pub fn new(calc: Calculus, p: f64, v: Nonlinearity) -> Result<Self> {
        check_exponent(p)?;
        if p.is_infinite() {
            return Err(Error::InvalidParameter("solvers need a finite exponent".into()));
        }
        let coords = calc.grid().node_coordinates();
        Ok(Problem { calc, p, v, growth: None, lipschitz: None, cutoff: None, delta: 1.0, radial: false, coords })
    }

    pub fn with_growth(mut self, growth: Growth) -> Result<Self> {
        if !(growth.alpha > 1.0 && growth.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("growth exponent must exceed 1, got {}", growth.alpha)));
        }
        if !(growth.c > 0.0 && growth.c.is_finite()) {
            return Err(Error::InvalidParameter(format!("growth constant must be positive, got {}", growth.c)));
        }
        growth.h.ensure_grid(self.grid())?;
        growth.g.ensure_grid(self.grid())?;
        if !(growth.h.is_finite() && growth.g.is_finite()) {
            return Err(Error::NonFinite("growth witness"));
        }
        self.growth = Some(growth);
        Ok(self)
    }

    /// `h` with `|V(x,y1) - V(x,y2)| <= h(x)|y1 - y2|`.
    pub fn with_lipschitz(mut self, h: Field) -> Result<Self> {
        h.ensure_grid(self.grid())?;
        if !h.is_finite() {
            return Err(Error::NonFinite("Lipschitz witness"));
        }
        self.lipschitz = Some(h);
        Ok(self)
    }

    pub fn with_cutoff(mut self, phi: Field) -> Result<Self> {
        phi.ensure_grid(self.grid())?;
        if !phi.is_finite() {
            return Err(Error::NonFinite("cutoff"));
        }
        self.cutoff = Some(phi);
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("coupling must be >= 0, got {delta}")));
        }
        self.delta = delta;
        Ok(self)
    }

    /// Marks the problem radial after checking that `V(x, y)` depends on
    /// `x` only through `|x|` on the grid.
    pub fn radial(mut self) -> Result<Self> {
        let defect = self.radial_defect_of_v();
        if defect > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "nonlinearity is not radial in x (relative defect {defect:e})"
            )));
        }
        self.radial = true;
        Ok(self)
    }

    fn radial_defect_of_v(&self) -> f64 {
        let grid = *self.grid();
        let n = grid.points_per_axis();
        let dim = grid.dim();
        let mut idx = [0usize; 3];
        let mut groups: std::collections::BTreeMap<Vec<usize>, Vec<usize>> = Default::default();
        for flat in 0..grid.len() {
            grid.unravel(flat, &mut idx);
            let mut key: Vec<usize> = idx[..dim].iter().map(|&i| i.abs_diff(n / 2)).collect();
            key.sort_unstable();
            groups.entry(key).or_default().push(flat);
        }
        let mut worst = 0.0f64;
        for y in [-2.0, -0.5, 0.0, 0.3, 1.7] {
            for members in groups.values() {
                let vals: Vec<f64> = members.iter().map(|&j| self.v.eval(self.node(j), y)).collect();
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                worst = worst.max((hi - lo) / (1.0 + hi.abs().max(lo.abs())));
            }
        }
        worst
    }

    pub fn calc(&self) -> &Calculus {
        &self.calc
    }

    pub fn grid(&self) -> &Grid {
        self.calc.grid()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.v
    }

    pub fn growth(&self) -> Option<&Growth> {
        self.growth.as_ref()
    }

    pub fn lipschitz(&self) -> Option<&Field> {
        self.lipschitz.as_ref()
    }

    pub fn cutoff(&self) -> Option<&Field> {
        self.cutoff.as_ref()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_radial(&self) -> bool {
        self.radial
    }

    fn node(&self, j: usize) -> &[f64] {
        let d = self.grid().dim();
        &self.coords[j * d..(j + 1) * d]
    }

    /// `α` of the growth witness, or 1 when none is declared.
    fn alpha_or_one(&self) -> f64 {
        self.growth.as_ref().map_or(1.0, |g| g.alpha)
    }

    /// `δ φ(x) V(x, u(x))`.
    pub fn rhs(&self, u: &Field) -> Result<Field> {
        u.ensure_grid(self.grid())?;
        let vals: Vec<f64> = u
            .values()
            .iter()
            .enumerate()
            .map(|(j, &y)| {
                let phi = self.cutoff.as_ref().map_or(1.0, |c| c.values()[j]);
                if self.delta == 0.0 || phi == 0.0 {
                    0.0
                } else {
                    self.delta * phi * self.v.eval(self.node(j), y)
                }
            })
            .collect();
        Field::new(*self.grid(), vals).map_err(|_| Error::NonFinite("nonlinearity"))
    }

    /// Samples the growth inequalities at `samples` random `(node, y)`
    /// pairs with `y` uniform in `[-5, 5]`.
    pub fn growth_audit(&self, samples: usize, seed: u64) -> Result<GrowthAudit> {
        let growth = self
            .growth
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("problem has no growth witness".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut c_value, mut c_dy) = (0.0f64, 0.0f64);
        for _ in 0..samples {
            let j = rng.random_range(0..self.grid().len());
            let y: f64 = rng.random_range(-5.0..=5.0);
            let x = self.node(j);
            let bound_v = growth.h.values()[j].abs() + y.abs().powf(growth.alpha);
            let bound_dy = growth.g.values()[j].abs() + y.abs().powf(growth.alpha - 1.0);
            let v = self.v.eval(x, y).abs();
            let dv = self.v.dy(x, y).abs();
            c_value = c_value.max(if v == 0.0 { 0.0 } else { v / bound_v });
            c_dy = c_dy.max(if dv == 0.0 { 0.0 } else { dv / bound_dy });
        }
        let fitted = c_value.max(c_dy);
        Ok(GrowthAudit {
            samples,
            c_value,
            c_dy,
            c_declared: growth.c,
            pass: fitted.is_finite() && fitted <= growth.c * (1.0 + 1e-12),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthAudit {
    pub samples: usize,
    /// `max |V| / (|h| + |y|^α)` over the samples.
    pub c_value: f64,
    /// `max |∂_y V| / (|g| + |y|^(α-1))` over the samples.
    pub c_dy: f64,
    pub c_declared: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    /// Maximizer of `ρ_ε`, `(1 / (α K))^(1/(α-1))` with `K = 2^p C^p N`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub step_tol: f64,
    pub residual_tol: f64,
    /// Defaults to 500 for the contraction solver and 1000 otherwise.
    pub max_iter: Option<usize>,
    pub damping: f64,
    pub damping_floor: f64,
    /// Consecutive residual increases that count as divergence.
    pub divergence_window: usize,
    pub initial: Option<Field>,
    pub seed: u64,
    pub embedding_trials: usize,
    pub epsilon: Epsilon,
    /// Supplied `N` of `||u||_{αp} <= N ||u||_{H^{s,p}(a)}`; estimated when `None`.
    pub n_emb: Option<f64>,
    /// Supplied `L^p` embedding constant; estimated when `None`.
    pub c_emb: Option<f64>,
    /// Auxiliary exponent `m` of the localized regime; window midpoint when `None`.
    pub m_reg: Option<f64>,
    /// Run even when the certificate fails.
    pub uncertified: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            step_tol: 1e-10,
            residual_tol: 1e-8,
            max_iter: None,
            damping: 1.0,
            damping_floor: 1.0 / 16.0,
            divergence_window: 10,
            initial: None,
            seed: 0,
            embedding_trials: 200,
            epsilon: Epsilon::Auto,
            n_emb: None,
            c_emb: None,
            m_reg: None,
            uncertified: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    pub residual: f64,
    pub h_norm: f64,
    pub lp_alpha_norm: f64,
    pub damping: f64,
    pub projection: bool,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: Field,
    pub history: Vec<HistoryRow>,
    pub iterations: usize,
    pub converged: bool,
    pub certified: bool,
    pub constants: KvBlock,
    pub projection_events: usize,
}

impl SolveResult {
    pub fn final_residual(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |r| r.residual)
    }

    pub fn constant(&self, key: &str) -> Option<f64> {
        self.constants.get(key).and_then(|v| v.parse().ok())
    }

    /// Columns `iter,residual,h_norm,lp_alpha_norm,damping,projection_flag`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("iter,residual,h_norm,lp_alpha_norm,damping,projection_flag\n");
        for r in &self.history {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iter,
                fmt17(r.residual),
                fmt17(r.h_norm),
                fmt17(r.lp_alpha_norm),
                fmt17(r.damping),
                u8::from(r.projection)
            );
        }
        out
    }

    pub fn write_history_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.history_csv())?;
        Ok(())
    }
}

/// `||A u - δ φ V(·, u)||_p`.
pub fn residual(prob: &Problem, u: &Field) -> Result<f64> {
    let au = prob.calc.apply_a(u)?;
    lp_norm(&au.sub(&prob.rhs(u)?)?, prob.p)
}

fn history_row(prob: &Problem, u: &Field, iter: usize, damping: f64, projection: bool) -> Result<HistoryRow> {
    Ok(HistoryRow {
        iter,
        residual: residual(prob, u)?,
        h_norm: prob.calc.h_norm(u, prob.p)?,
        lp_alpha_norm: lp_norm(u, prob.alpha_or_one() * prob.p)?,
        damping,
        projection,
    })
}

/// `u = T_s g`, verified by its residual `||A u - g||_p`.
pub fn solve_linear(calc: &Calculus, g: &Field, p: f64) -> Result<SolveResult> {
    check_exponent(p)?;
    let u = calc.apply_ts(g)?;
    let res = lp_norm(&calc.apply_a(&u)?.sub(g)?, p)?;
    let g_norm = lp_norm(g, p)?;
    let h = calc.h_norm(&u, p)?;
    let converged = res <= 1e-11 * g_norm.max(f64::MIN_POSITIVE) || res == 0.0;
    let mut constants = KvBlock::new();
    constants.text("mode", "linear").num("p", p).num("g_lp_norm", g_norm).num("u_h_norm", h);
    Ok(SolveResult {
        history: vec![HistoryRow {
            iter: 1,
            residual: res,
            h_norm: h,
            lp_alpha_norm: lp_norm(&u, p)?,
            damping: 1.0,
            projection: false,
        }],
        u,
        iterations: 1,
        converged,
        certified: true,
        constants,
        projection_events: 0,
    })
}

/// Empirical `N` with `||u||_{αp} <= N ||u||_{H^{s,p}(a)}` over random radial
/// fields, inflated by a safety factor of 2.
pub fn estimate_embedding_constant(calc: &Calculus, p: f64, alpha: f64, trials: usize, seed: u64) -> Result<f64> {
    check_exponent(p)?;
    if trials < 100 {
        return Err(Error::InvalidParameter(format!("need at least 100 trials, got {trials}")));
    }
    if !(alpha > 1.0) {
        return Err(Error::InvalidParameter(format!("growth exponent must exceed 1, got {alpha}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..trials {
        let u = random_radial(calc.grid(), &mut rng);
        let h = calc.h_norm(&u, p)?;
        if h > 0.0 {
            best = best.max(lp_norm(&u, alpha * p)? / h);
        }
    }
    Ok(2.0 * best)
}

/// Picard iteration `u <- T_s(δ V(·, u))` under the Lipschitz witness `h`.
/// The certificate requires `δ < 1 / (2 C ||h||_inf)` with `C` the empirical
/// `L^p` embedding constant (safety factor 2).
pub fn solve_contraction(prob: &Problem, opts: &SolverOptions) -> Result<SolveResult> {
    let h = prob
        .lipschitz
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("contraction solver needs a Lipschitz witness".into()))?;
    let h_inf = h.max_abs();
    let c = match opts.c_emb {
        Some(c) => c,
        None => estimate_lp_embedding_constant(&prob.calc, prob.p, opts.embedding_trials, opts.seed)?,
    };
    let threshold = if h_inf > 0.0 { 1.0 / (2.0 * c * h_inf) } else { f64::INFINITY };
    let certified = prob.delta < threshold;
    if !certified {
        let why = format!("coupling {} is not below the contraction threshold {threshold}", prob.delta);
        if !opts.uncertified {
            return Err(Error::Certification(why));
        }
        warn!("running uncertified: {why}");
    }
    let rate_bound = prob.delta * c * h_inf;
    let max_iter = opts.max_iter.unwrap_or(500);
    let mut u = opts.initial.clone().unwrap_or_else(|| Field::zeros(*prob.grid()));
    u.ensure_grid(prob.grid())?;
    let mut history = Vec::new();
    let mut prev_step: Option<f64> = None;
    let mut rate = 0.0f64;
    let mut growing = 0usize;
    let mut last_res = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=max_iter {
        let next = prob.calc.apply_ts(&prob.rhs(&u)?)?;
        let step = prob.calc.h_norm(&next.sub(&u)?, prob.p)?;
        if let Some(ps) = prev_step {
            if ps > 1e3 * f64::EPSILON * (1.0 + prob.calc.h_norm(&u, prob.p)?) {
                rate = rate.max(step / ps);
            }
        }
        prev_step = Some(step);
        u = next;
        iterations = k;
        let row = history_row(prob, &u, k, 1.0, false)?;
        let res = row.residual;
        history.push(row);
        growing = if res > last_res { growing + 1 } else { 0 };
        last_res = res;
        if growing >= opts.divergence_window {
            return Err(Error::Diverged { iterations: k, residual: res });
        }
        if step <= opts.step_tol && res <= opts.residual_tol {
            converged = true;
            break;
        }
    }
    let mut constants = KvBlock::new();
    constants
        .text("mode", "contraction")
        .num("p", prob.p)
        .num("delta", prob.delta)
        .num("C_emb", c)
        .num("lipschitz_sup", h_inf)
        .num("delta_threshold", threshold)
        .num("rate_bound", rate_bound)
        .num("contraction_rate", rate)
        .flag("certified", certified);
    info!("contraction solve: {iterations} iterations, rate {rate:e} (bound {rate_bound:e})");
    Ok(SolveResult { u, history, iterations, converged, certified, constants, projection_events: 0 })
}

/// Parameters of the localized regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizedParams {
    /// `n(α-1)/(pα)`.
    pub r_alpha: f64,
    pub m_reg: f64,
    /// `s/2 - 2(r_α + m)/β`.
    pub reg_slack: f64,
    /// Window `n/(αp) < m < sβ/(4α)`.
    pub m_window: (f64, f64),
}

pub fn localized_params(n: usize, p: f64, alpha: f64, s: f64, beta: f64, m_reg: Option<f64>) -> Result<LocalizedParams> {
    let nf = n as f64;
    let r_alpha = nf * (alpha - 1.0) / (p * alpha);
    let lo = nf / (alpha * p);
    let hi = s * beta / (4.0 * alpha);
    if !(lo < hi) {
        return Err(Error::Window(format!(
            "empty window for m: need n/(αp) = {lo} < sβ/(4α) = {hi}"
        )));
    }
    let m = m_reg.unwrap_or(0.5 * (lo + hi));
    if !(m > lo && m < hi) {
        return Err(Error::Window(format!("m = {m} outside ({lo}, {hi})")));
    }
    Ok(LocalizedParams { r_alpha, m_reg: m, reg_slack: s / 2.0 - 2.0 * (r_alpha + m) / beta, m_window: (lo, hi) })
}

/// Damped Picard iteration state shared by the localized and radial solvers.
struct Damped {
    theta: f64,
    floor: f64,
    growing: usize,
    window: usize,
    last_res: f64,
}

impl Damped {
    fn new(opts: &SolverOptions) -> Result<Self> {
        if !(opts.damping > 0.0 && opts.damping <= 1.0) || !(opts.damping_floor > 0.0 && opts.damping_floor <= opts.damping) {
            return Err(Error::InvalidParameter("damping must satisfy 0 < floor <= damping <= 1".into()));
        }
        Ok(Damped { theta: opts.damping, floor: opts.damping_floor, growing: 0, window: opts.divergence_window, last_res: f64::INFINITY })
    }

    /// Updates damping after a residual; errors when stuck at the floor.
    fn observe(&mut self, res: f64, iter: usize) -> Result<()> {
        if res > self.last_res {
            if self.theta > self.floor {
                self.theta = (self.theta / 2.0).max(self.floor);
                self.growing = 0;
            } else {
                self.growing += 1;
                if self.growing >= self.window {
                    return Err(Error::DampingFloor { iterations: iter, residual: res });
                }
            }
        } else {
            self.growing = 0;
        }
        self.last_res = res;
        Ok(())
    }
}

/// Localized regime: `u <- (1-θ) u + θ T_s(δ φ V(·, u))`, kept inside the
/// ball `||u||_{H^{r_α + m, p}} <= 1` by rescaling.
pub fn solve_localized(prob: &Problem, opts: &SolverOptions) -> Result<SolveResult> {
    let growth = prob
        .growth
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("localized solver needs growth witnesses".into()))?;
    let phi = prob
        .cutoff
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("localized solver needs a cutoff".into()))?;
    let support_edge = edge_max(phi);
    if support_edge > 0.0 {
        return Err(Error::InvalidParameter(format!(
            "cutoff must vanish on the box boundary (max |φ| there = {support_edge:e})"
        )));
    }
    let grid = *prob.grid();
    let params = localized_params(grid.dim(), prob.p, growth.alpha, prob.calc.order(), prob.calc.symbol().beta(), opts.m_reg)?;
    let ball_order = params.r_alpha + params.m_reg;
    let mut damp = Damped::new(opts)?;
    let max_iter = opts.max_iter.unwrap_or(1000);
    let mut u = opts.initial.clone().unwrap_or_else(|| Field::zeros(grid));
    u.ensure_grid(&grid)?;
    let mut history = Vec::new();
    let mut events = 0usize;
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=max_iter {
        let target = prob.calc.apply_ts(&prob.rhs(&u)?)?;
        let mut next = u.scale(1.0 - damp.theta).axpy(damp.theta, &target)?;
        let ball = sobolev_norm(&grid, &next, ball_order, prob.p)?;
        let projected = ball > 1.0;
        if projected {
            next = next.scale(1.0 / ball);
            events += 1;
        }
        u = next;
        iterations = k;
        let row = history_row(prob, &u, k, damp.theta, projected)?;
        let res = row.residual;
        history.push(row);
        if res <= opts.residual_tol {
            converged = true;
            break;
        }
        damp.observe(res, k)?;
    }
    if !converged {
        warn!("localized solve stopped after {iterations} iterations; existence holds by a compactness argument, not Picard convergence");
    }
    let mut constants = KvBlock::new();
    constants
        .text("mode", "localized")
        .num("p", prob.p)
        .num("delta", prob.delta)
        .num("alpha", growth.alpha)
        .num("C", growth.c)
        .num("r_alpha", params.r_alpha)
        .num("m_reg", params.m_reg)
        .num("m_window_lo", params.m_window.0)
        .num("m_window_hi", params.m_window.1)
        .num("reg_slack", params.reg_slack)
        .num("ball_sobolev_order", ball_order)
        .text("projection_events", events)
        .flag("certified", true);
    Ok(SolveResult { u, history, iterations, converged, certified: true, constants, projection_events: events })
}

/// Largest `|f|` on nodes touching the box boundary.
fn edge_max(f: &Field) -> f64 {
    let grid = f.grid();
    let n = grid.points_per_axis();
    let mut idx = [0usize; 3];
    let mut worst = 0.0f64;
    for (j, v) in f.values().iter().enumerate() {
        grid.unravel(j, &mut idx);
        if idx[..grid.dim()].iter().any(|&i| i == 0 || i == n - 1) {
            worst = worst.max(v.abs());
        }
    }
    worst
}

/// Constants of the radial regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialConstants {
    pub p: f64,
    pub alpha: f64,
    pub c: f64,
    pub n_emb: f64,
    /// `2^p C^p N`.
    pub k: f64,
    /// `K^(1/(1-α))`; `ρ_ε > 0` iff `ε < ε*`.
    pub eps_star: f64,
    pub epsilon: f64,
    pub rho_eps: f64,
}

impl RadialConstants {
    pub fn new(p: f64, alpha: f64, c: f64, n_emb: f64, epsilon: Epsilon) -> Result<Self> {
        let k = 2f64.powf(p) * c.powf(p) * n_emb;
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!("2^p C^p N must be positive and finite, got {k}")));
        }
        let eps_star = k.powf(1.0 / (1.0 - alpha));
        let epsilon = match epsilon {
            Epsilon::Auto => (1.0 / (alpha * k)).powf(1.0 / (alpha - 1.0)),
            Epsilon::Fixed(e) if e > 0.0 && e.is_finite() => e,
            Epsilon::Fixed(e) => return Err(Error::InvalidParameter(format!("ball radius must be positive, got {e}"))),
        };
        Ok(RadialConstants { p, alpha, c, n_emb, k, eps_star, epsilon, rho_eps: rho_epsilon(epsilon, k, alpha) })
    }
}

/// `ε / K - ε^α`.
pub fn rho_epsilon(epsilon: f64, k: f64, alpha: f64) -> f64 {
    epsilon / k - epsilon.powf(alpha)
}

/// Radial regime: `u <- P((1-θ) u + θ T_s(δ φ V(·, u)))` with `P` the radial
/// projection, rescaled into `||u||_{αp} <= ε`. Certified when
/// `‖h‖_p < ρ_ε` (which needs `ε < ε*`).
pub fn solve_radial(prob: &Problem, opts: &SolverOptions) -> Result<SolveResult> {
    if !prob.radial {
        return Err(Error::InvalidParameter("radial solver needs a radial problem".into()));
    }
    let growth = prob
        .growth
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("radial solver needs growth witnesses".into()))?;
    let grid = *prob.grid();
    let n_emb = match opts.n_emb {
        Some(v) => v,
        None => estimate_embedding_constant(&prob.calc, prob.p, growth.alpha, opts.embedding_trials, opts.seed)?,
    };
    let consts = RadialConstants::new(prob.p, growth.alpha, growth.c, n_emb, opts.epsilon)?;
    let h_norm = lp_norm(&growth.h, prob.p)?;
    let certified = consts.rho_eps > 0.0 && h_norm < consts.rho_eps;
    if !certified {
        let why = if consts.rho_eps <= 0.0 {
            format!("ρ_ε = {} <= 0 for ε = {} (ε* = {})", consts.rho_eps, consts.epsilon, consts.eps_star)
        } else {
            format!("||h||_p = {h_norm} is not below ρ_ε = {}", consts.rho_eps)
        };
        if !opts.uncertified {
            return Err(Error::Certification(why));
        }
        warn!("running uncertified: {why}");
    }
    let lap = prob.p * growth.alpha;
    let mut damp = Damped::new(opts)?;
    let max_iter = opts.max_iter.unwrap_or(1000);
    let mut u = radial_project(&opts.initial.clone().unwrap_or_else(|| Field::zeros(grid)));
    u.ensure_grid(&grid)?;
    let mut history = Vec::new();
    let mut events = 0usize;
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=max_iter {
        let target = radial_project(&prob.calc.apply_ts(&prob.rhs(&u)?)?);
        let mut next = u.scale(1.0 - damp.theta).axpy(damp.theta, &target)?;
        let norm = lp_norm(&next, lap)?;
        let projected = norm > consts.epsilon;
        if projected {
            next = next.scale(consts.epsilon / norm);
            events += 1;
        }
        u = next;
        iterations = k;
        let row = history_row(prob, &u, k, damp.theta, projected)?;
        let res = row.residual;
        history.push(row);
        if res <= opts.residual_tol {
            converged = true;
            break;
        }
        damp.observe(res, k)?;
    }
    let mut constants = KvBlock::new();
    constants
        .text("mode", "radial")
        .num("p", consts.p)
        .num("alpha", consts.alpha)
        .num("C", consts.c)
        .num("N_emb", consts.n_emb)
        .num("K", consts.k)
        .num("eps_star", consts.eps_star)
        .num("ball_radius", consts.epsilon)
        .num("rho_eps", consts.rho_eps)
        .num("h_lp_norm", h_norm)
        .num("u_lp_alpha_norm", lp_norm(&u, lap)?)
        .num("radial_defect", radial_defect(&u))
        .text("projection_events", events)
        .flag("certified", certified);
    Ok(SolveResult { u, history, iterations, converged, certified, constants, projection_events: events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::symbols::{fractional_symbol, laplace_symbol};
    use approx::assert_relative_eq;

    fn lap_calc(points: usize, l: f64) -> Calculus {
        Calculus::new(laplace_symbol(), 2.0, make_grid(1, points, l).unwrap()).unwrap()
    }

    #[test]
    fn linear_zero_and_single_mode() {
        let calc = lap_calc(32, 4.0);
        let g = *calc.grid();
        let r = solve_linear(&calc, &Field::zeros(g), 2.0).unwrap();
        assert_eq!(r.u.max_abs(), 0.0);
        assert!(r.converged);
        let xi = 2.0 * g.frequency_spacing();
        let gm = Field::from_fn(g, |x| (xi * x[0]).cos());
        let r = solve_linear(&calc, &gm, 2.0).unwrap();
        for (u, v) in r.u.values().iter().zip(gm.values()) {
            assert!((u - v / (1.0 + xi * xi)).abs() < 1e-14);
        }
        assert_eq!(r.history.len(), 1);
    }

    #[test]
    fn linear_scaling_is_exact_in_the_factor() {
        let calc = lap_calc(64, 6.0);
        let g = Field::from_fn(*calc.grid(), |x| (-x[0] * x[0]).exp() * (1.0 + x[0]));
        let u1 = solve_linear(&calc, &g, 2.0).unwrap().u;
        let u3 = solve_linear(&calc, &g.scale(3.0), 2.0).unwrap().u;
        for (a, b) in u1.values().iter().zip(u3.values()) {
            assert!((3.0 * a - b).abs() <= 1e-15 * (1.0 + b.abs()) * 4.0);
        }
    }

    #[test]
    fn radial_constants_arithmetic() {
        // p = 2, C = 1, N = 1, α = 3: ε* = 4^(-1/2) = 0.5; ε = 0.4 gives 0.036
        let c = RadialConstants::new(2.0, 3.0, 1.0, 1.0, Epsilon::Fixed(0.4)).unwrap();
        assert_relative_eq!(c.eps_star, 0.5, epsilon = 1e-15);
        assert_relative_eq!(c.rho_eps, 0.036, epsilon = 1e-15);
        let auto = RadialConstants::new(2.0, 3.0, 1.0, 1.0, Epsilon::Auto).unwrap();
        assert!(auto.epsilon < auto.eps_star && auto.rho_eps > c.rho_eps);
        let above = RadialConstants::new(2.0, 3.0, 1.0, 1.0, Epsilon::Fixed(0.6)).unwrap();
        assert!(above.rho_eps < 0.0);
    }

    #[test]
    fn localized_parameter_arithmetic() {
        let lp = localized_params(1, 2.0, 3.0, 9.0, 0.5, None).unwrap();
        assert_relative_eq!(lp.r_alpha, 1.0 / 3.0, epsilon = 1e-15);
        assert!(lp.reg_slack > 0.0);
        assert!(localized_params(1, 2.0, 3.0, 9.0, 0.5, Some(0.1)).is_err());
        assert!(localized_params(1, 2.0, 3.0, 0.5, 0.5, None).is_err());
    }

    #[test]
    fn contraction_with_zero_coupling() {
        let calc = lap_calc(32, 5.0);
        let g = *calc.grid();
        let v = Nonlinearity::new("cos", Arc::new(|x: &[f64], y: f64| (-x[0] * x[0]).exp() * y.cos()), Arc::new(|x: &[f64], y: f64| -(-x[0] * x[0]).exp() * y.sin()));
        let prob = Problem::new(calc, 2.0, v)
            .unwrap()
            .with_lipschitz(Field::from_fn(g, |x| (-x[0] * x[0]).exp()))
            .unwrap()
            .with_delta(0.0)
            .unwrap();
        let r = solve_contraction(&prob, &SolverOptions { c_emb: Some(2.0), ..Default::default() }).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.u.max_abs(), 0.0);
    }

    #[test]
    fn radial_solve_of_zero_nonlinearity() {
        let g = make_grid(1, 64, 10.0).unwrap();
        let calc = Calculus::new(fractional_symbol(0.5, 1.0).unwrap(), 9.0, g).unwrap();
        let prob = Problem::new(calc, 2.0, Nonlinearity::zero())
            .unwrap()
            .with_growth(Growth { alpha: 3.0, c: 1.0, h: Field::zeros(g), g: Field::zeros(g) })
            .unwrap()
            .radial()
            .unwrap();
        let r = solve_radial(&prob, &SolverOptions { n_emb: Some(1.0), ..Default::default() }).unwrap();
        assert!(r.converged && r.certified);
        assert_eq!(r.iterations, 1);
        assert_eq!(r.u.max_abs(), 0.0);
    }

    #[test]
    fn non_radial_nonlinearity_is_rejected() {
        let g = make_grid(2, 8, 2.0).unwrap();
        let calc = Calculus::new(laplace_symbol(), 2.0, g).unwrap();
        let v = Nonlinearity::new("x1", Arc::new(|x: &[f64], _| x[0]), Arc::new(|_, _| 0.0));
        assert!(Problem::new(calc, 2.0, v).unwrap().radial().is_err());
    }

    #[test]
    fn history_csv_layout() {
        let calc = lap_calc(16, 3.0);
        let g = Field::from_fn(*calc.grid(), |x| (-x[0] * x[0]).exp());
        let csv = solve_linear(&calc, &g, 2.0).unwrap().history_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "iter,residual,h_norm,lp_alpha_norm,damping,projection_flag");
        assert!(lines.next().unwrap().starts_with("1,"));
    }
}
