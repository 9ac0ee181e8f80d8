//! Symbols `a(t)` with analytic derivatives, and numeric certification of
//! the admissible class: nonnegativity (G1), ellipticity of order `beta`
//! (G2) and polynomially controlled derivatives (G3).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ladder::{FitMode, LadderFit, SampleLadder};
use crate::report::KvBlock;

pub type ScalarFn = dyn Fn(f64) -> f64 + Send + Sync;
pub type DerivFn = dyn Fn(usize, f64) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum SymbolKind {
    /// `a(t) = t`.
    Laplace,
    /// `a(t) = (|t| + m^2)^(gamma/2)`.
    Fractional { gamma: f64, mass: f64 },
    /// `a(t) = |t|^(gamma/2)`; derivatives blow up at `t = 0`.
    PureFractional { gamma: f64 },
    /// `a(t) = t e^(c t)`.
    Exponential { rate: f64 },
    /// `a(t) = t (2 + sin(t^q))`, derivatives supplied up to order 3.
    Oscillatory { power: u32 },
    Custom { eval: Arc<ScalarFn>, deriv: Arc<DerivFn>, max_order: usize },
}

impl fmt::Debug for SymbolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymbolKind::Laplace => write!(f, "Laplace"),
            SymbolKind::Fractional { gamma, mass } => write!(f, "Fractional(gamma={gamma}, m={mass})"),
            SymbolKind::PureFractional { gamma } => write!(f, "PureFractional(gamma={gamma})"),
            SymbolKind::Exponential { rate } => write!(f, "Exponential(c={rate})"),
            SymbolKind::Oscillatory { power } => write!(f, "Oscillatory(q={power})"),
            SymbolKind::Custom { max_order, .. } => write!(f, "Custom(max_order={max_order})"),
        }
    }
}

/// A symbol together with its ellipticity order and an overall positive
/// scale factor (`a -> scale * a`).
#[derive(Clone, Debug)]
pub struct Symbol {
    label: String,
    kind: SymbolKind,
    beta: f64,
    scale: f64,
}

/// `prod_{j<k} (c - j)`.
pub(crate) fn falling(c: f64, k: usize) -> f64 {
    (0..k).map(|j| c - j as f64).product()
}

pub fn fractional_symbol(gamma: f64, mass: f64) -> Result<Symbol> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0,1), got {gamma}")));
    }
    if mass == 0.0 || !mass.is_finite() {
        return Err(Error::InvalidParameter(
            "mass must be nonzero; use the pure fractional symbol for m = 0".into(),
        ));
    }
    Ok(Symbol {
        label: format!("fractional(gamma={gamma},m={mass})"),
        kind: SymbolKind::Fractional { gamma, mass },
        beta: gamma,
        scale: 1.0,
    })
}

pub fn laplace_symbol() -> Symbol {
    Symbol { label: "laplace".into(), kind: SymbolKind::Laplace, beta: 2.0, scale: 1.0 }
}

/// `t e^(ct)`. Carries `beta = 2` for bookkeeping only; it is not a class symbol.
pub fn exp_symbol(rate: f64) -> Result<Symbol> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidParameter(format!("rate must be positive, got {rate}")));
    }
    Ok(Symbol {
        label: format!("exp(c={rate})"),
        kind: SymbolKind::Exponential { rate },
        beta: 2.0,
        scale: 1.0,
    })
}

pub fn pure_fractional_symbol(gamma: f64) -> Result<Symbol> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must lie in (0,1), got {gamma}")));
    }
    Ok(Symbol {
        label: format!("pure_fractional(gamma={gamma})"),
        kind: SymbolKind::PureFractional { gamma },
        beta: gamma,
        scale: 1.0,
    })
}

/// `t (2 + sin(t^q))` with `beta = 2`. For `q = 1` the derivative grows like
/// `t`, which the G3 bound at `beta*s = 4n` still absorbs; `q >= 2` grows
/// faster than any admissible bound.
pub fn oscillatory_symbol(power: u32) -> Result<Symbol> {
    if power == 0 {
        return Err(Error::InvalidParameter("oscillation power must be >= 1".into()));
    }
    Ok(Symbol {
        label: format!("oscillatory(q={power})"),
        kind: SymbolKind::Oscillatory { power },
        beta: 2.0,
        scale: 1.0,
    })
}

pub fn custom_symbol(
    label: impl Into<String>,
    beta: f64,
    max_order: usize,
    eval: Arc<ScalarFn>,
    deriv: Arc<DerivFn>,
) -> Result<Symbol> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    Ok(Symbol { label: label.into(), kind: SymbolKind::Custom { eval, deriv, max_order }, beta, scale: 1.0 })
}

impl Symbol {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> &SymbolKind {
        &self.kind
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn scale_factor(&self) -> f64 {
        self.scale
    }

    /// `factor * a(t)`.
    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {factor}")));
        }
        self.scale *= factor;
        self.label = format!("{}*{}", factor, self.label);
        Ok(self)
    }

    /// Highest derivative order available, `None` for unlimited.
    pub fn max_order(&self) -> Option<usize> {
        match &self.kind {
            SymbolKind::Oscillatory { .. } => Some(3),
            SymbolKind::Custom { max_order, .. } => Some(*max_order),
            _ => None,
        }
    }

    pub fn derivative_singular_at_zero(&self) -> bool {
        matches!(self.kind, SymbolKind::PureFractional { .. })
    }

    /// Named constants of the symbol.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        let mut out = match &self.kind {
            SymbolKind::Fractional { gamma, mass } => vec![("gamma", *gamma), ("m", *mass)],
            SymbolKind::PureFractional { gamma } => vec![("gamma", *gamma)],
            SymbolKind::Exponential { rate } => vec![("c", *rate)],
            SymbolKind::Oscillatory { power } => vec![("q", *power as f64)],
            _ => vec![],
        };
        if self.scale != 1.0 {
            out.push(("scale", self.scale));
        }
        out
    }

    fn raw_eval(&self, t: f64) -> f64 {
        match &self.kind {
            SymbolKind::Laplace => t,
            SymbolKind::Fractional { gamma, mass } => (t.abs() + mass * mass).powf(gamma / 2.0),
            SymbolKind::PureFractional { gamma } => t.abs().powf(gamma / 2.0),
            SymbolKind::Exponential { rate } => t * (rate * t).exp(),
            SymbolKind::Oscillatory { power } => t * (2.0 + t.powi(*power as i32).sin()),
            SymbolKind::Custom { eval, .. } => eval(t),
        }
    }

    fn raw_deriv(&self, k: usize, t: f64) -> f64 {
        match &self.kind {
            SymbolKind::Laplace => match k {
                1 => 1.0,
                _ => 0.0,
            },
            SymbolKind::Fractional { gamma, mass } => {
                falling(gamma / 2.0, k) * (t + mass * mass).powf((gamma - 2.0 * k as f64) / 2.0)
            }
            SymbolKind::PureFractional { gamma } => {
                if t == 0.0 {
                    f64::INFINITY * falling(gamma / 2.0, k).signum()
                } else {
                    falling(gamma / 2.0, k) * t.powf(gamma / 2.0 - k as f64)
                }
            }
            SymbolKind::Exponential { rate } => {
                rate.powi(k as i32 - 1) * (rate * t).exp() * (rate * t + k as f64)
            }
            SymbolKind::Oscillatory { power } => oscillatory_deriv(*power, k, t),
            SymbolKind::Custom { deriv, .. } => deriv(k, t),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.scale * self.raw_eval(t)
    }

    /// `a^(k)(t)`; `k = 0` returns `a(t)`.
    pub fn deriv(&self, k: usize, t: f64) -> Result<f64> {
        if k == 0 {
            return Ok(self.eval(t));
        }
        if let Some(max) = self.max_order() {
            if k > max {
                return Err(Error::MissingDerivative { label: self.label.clone(), order: k });
            }
        }
        Ok(self.scale * self.raw_deriv(k, t))
    }

    /// `ln(1 + a(t))`, stable when `a` overflows.
    pub fn log_one_plus(&self, t: f64) -> f64 {
        match &self.kind {
            SymbolKind::Exponential { rate } if rate * t > 30.0 => {
                rate * t + (self.scale * t + (-rate * t).exp()).ln()
            }
            _ => self.eval(t).ln_1p(),
        }
    }

    /// `a^(k)(t) / (1 + a(t))`, stable when both overflow.
    pub fn deriv_over_one_plus(&self, k: usize, t: f64) -> Result<f64> {
        match &self.kind {
            SymbolKind::Exponential { rate } if rate * t > 30.0 && k >= 1 => {
                self.deriv(k, 0.0)?; // order check
                Ok(self.scale * rate.powi(k as i32 - 1) * (rate * t + k as f64)
                    / ((-rate * t).exp() + self.scale * t))
            }
            _ => Ok(self.deriv(k, t)? / (1.0 + self.eval(t))),
        }
    }
}

fn oscillatory_deriv(q: u32, k: usize, t: f64) -> f64 {
    let qf = q as f64;
    let u = t.powi(q as i32);
    let (su, cu) = u.sin_cos();
    let du = if q == 1 { 1.0 } else { qf * t.powi(q as i32 - 1) };
    let ddu = if q == 1 {
        0.0
    } else if q == 2 {
        2.0
    } else {
        qf * (qf - 1.0) * t.powi(q as i32 - 2)
    };
    let inner = (1.0 + qf) * cu - qf * u * su;
    match k {
        1 => 2.0 + su + qf * u * cu,
        2 => du * inner,
        3 => ddu * inner - du * du * ((1.0 + 2.0 * qf) * su + qf * u * cu),
        _ => f64::NAN,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct G2Fit {
    pub m: f64,
    pub r: f64,
    pub fit: LadderFit,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct G3Fit {
    pub k: usize,
    pub exponent: f64,
    pub n: f64,
    pub rho: f64,
    pub fit: LadderFit,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub label: String,
    pub s_used: f64,
    pub n_used: usize,
    pub beta_used: f64,
    pub g1_pass: bool,
    pub g1_min: f64,
    pub g2: G2Fit,
    pub g3: Vec<G3Fit>,
    pub sample_spec: String,
    pub verdict: bool,
}

impl ClassReport {
    pub fn to_kv(&self) -> KvBlock {
        let mut kv = KvBlock::new();
        kv.text("symbol", &self.label)
            .num("s_used", self.s_used)
            .text("n_used", self.n_used)
            .num("beta_used", self.beta_used)
            .text("sample_spec", &self.sample_spec)
            .flag("g1_pass", self.g1_pass)
            .num("g1_min", self.g1_min)
            .num("g2_M", self.g2.m)
            .num("g2_R", self.g2.r)
            .num("g2_ratio", self.g2.fit.ratio)
            .num("g2_stable_from", self.g2.fit.stable_from)
            .flag("g2_pass", self.g2.pass);
        for g in &self.g3 {
            kv.num(format!("g3_k{}_exponent", g.k), g.exponent)
                .num(format!("g3_k{}_N", g.k), g.n)
                .num(format!("g3_k{}_rho", g.k), g.rho)
                .num(format!("g3_k{}_ratio", g.k), g.fit.ratio)
                .num(format!("g3_k{}_stable_from", g.k), g.fit.stable_from)
                .flag(format!("g3_k{}_pass", g.k), g.pass);
        }
        kv.flag("verdict", self.verdict);
        kv
    }
}

/// Nonnegativity (G1) and ellipticity of order `beta` (G2).
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipticity {
    pub g1_pass: bool,
    pub g1_min: f64,
    pub g2: G2Fit,
}

impl Ellipticity {
    pub fn pass(&self) -> bool {
        self.g1_pass && self.g2.pass
    }
}

/// G1 and G2 alone; these need no relation between `beta`, `s` and `n`.
pub fn check_ellipticity(sym: &Symbol, ladder: &SampleLadder) -> Ellipticity {
    let beta = sym.beta();
    let inner = ladder.inner_radius();

    // G1: t -> a(t^2) >= 0, including the core |t| <= R.
    let core = (0..=64).map(|i| inner * i as f64 / 64.0);
    let outer = (1..ladder.num_rungs()).flat_map(|j| ladder.rung_samples(j).collect::<Vec<_>>());
    let g1_min = core.chain(outer).map(|t| sym.eval(t * t)).fold(f64::INFINITY, |m, v| if v.is_nan() { f64::NAN } else { m.min(v) });
    let g1_pass = g1_min >= 0.0;

    // G2: M = inf a(|x|^2) / (1+|x|^2)^(beta/2) over |x| > R.
    let g2_rungs: Vec<f64> = (1..ladder.num_rungs())
        .map(|j| {
            ladder.rung_samples(j).fold(f64::INFINITY, |m, r| {
                let t = r * r;
                let v = sym.eval(t) / (1.0 + t).powf(beta / 2.0);
                if v.is_nan() { f64::NAN } else { m.min(v) }
            })
        })
        .collect();
    let g2_fit = LadderFit::from_rungs(ladder, &g2_rungs, FitMode::Inf);
    let m = g2_fit.value();
    let g2 = G2Fit { m, r: inner, pass: m > 0.0 && g2_fit.stable(), fit: g2_fit };

    Ellipticity { g1_pass, g1_min, g2 }
}

/// Checks membership of `sym` in the class of order `s` on `R^n`, sampling
/// `|x|` along `ladder` with `R = rho = ladder.inner_radius()`.
pub fn check_class(sym: &Symbol, s: f64, n: usize, ladder: &SampleLadder) -> Result<ClassReport> {
    let beta = sym.beta();
    if n == 0 || !(s >= 0.0) {
        return Err(Error::InvalidParameter(format!("need n >= 1 and s >= 0 (n={n}, s={s})")));
    }
    if beta * s < 4.0 * n as f64 {
        return Err(Error::ClassPrecondition { beta_s: beta * s, four_n: 4.0 * n as f64 });
    }
    if let Some(max) = sym.max_order() {
        if max < n {
            return Err(Error::MissingDerivative { label: sym.label().into(), order: n });
        }
    }
    let inner = ladder.inner_radius();
    let Ellipticity { g1_pass, g1_min, g2 } = check_ellipticity(sym, ladder);

    // G3: N(k) = sup |a^(k)(|x|^2)| / (1+|x|^2)^(k(beta s/4n - 1) + beta/2) over |x| > rho.
    let mut g3 = Vec::with_capacity(n);
    for k in 1..=n {
        let exponent = k as f64 * (beta * s / (4.0 * n as f64) - 1.0) + beta / 2.0;
        let mut rungs = Vec::with_capacity(ladder.num_rungs() - 1);
        for j in 1..ladder.num_rungs() {
            let mut sup = 0.0f64;
            for r in ladder.rung_samples(j) {
                let t = r * r;
                let v = sym.deriv(k, t)?.abs() / (1.0 + t).powf(exponent);
                sup = if v.is_nan() || sup.is_nan() { f64::NAN } else { sup.max(v) };
            }
            rungs.push(sup);
        }
        let fit = LadderFit::from_rungs(ladder, &rungs, FitMode::Sup);
        g3.push(G3Fit { k, exponent, n: fit.value(), rho: inner, pass: fit.stable(), fit });
    }

    let verdict = g1_pass && g2.pass && g3.iter().all(|g| g.pass);
    Ok(ClassReport {
        label: sym.label().into(),
        s_used: s,
        n_used: n,
        beta_used: beta,
        g1_pass,
        g1_min,
        g2,
        g3,
        sample_spec: ladder.to_string(),
        verdict,
    })
}

/// Checks that passing the class test at `s1` implies passing at `s2 > s1`
/// on the same ladder.
pub fn class_nesting_check(sym: &Symbol, s1: f64, s2: f64, n: usize, ladder: &SampleLadder) -> Result<bool> {
    if !(s1 >= 0.0 && s1 < s2) {
        return Err(Error::InvalidParameter(format!("need 0 <= s1 < s2, got s1={s1}, s2={s2}")));
    }
    let low = check_class(sym, s1, n, ladder)?;
    if !low.verdict {
        return Ok(true);
    }
    Ok(check_class(sym, s2, n, ladder)?.verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fractional_values() {
        let a = fractional_symbol(0.5, 1.0).unwrap();
        assert_eq!(a.eval(0.0), 1.0);
        assert_relative_eq!(a.eval(3.0), 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(a.deriv(1, 0.0).unwrap(), 0.25, epsilon = 1e-15);
        assert_eq!(a.beta(), 0.5);
    }

    #[test]
    fn fractional_rejects_bad_parameters() {
        assert!(fractional_symbol(1.0, 1.0).is_err());
        assert!(fractional_symbol(0.0, 1.0).is_err());
        assert!(fractional_symbol(0.5, 0.0).is_err());
    }

    #[test]
    fn laplace_and_exp_values() {
        let l = laplace_symbol();
        assert_eq!(l.eval(5.0), 5.0);
        assert_eq!(l.deriv(1, 3.0).unwrap(), 1.0);
        assert_eq!(l.deriv(2, 3.0).unwrap(), 0.0);
        let e = exp_symbol(1.0).unwrap();
        assert_relative_eq!(e.eval(1.0), std::f64::consts::E, epsilon = 1e-15);
        assert_relative_eq!(e.deriv(1, 0.0).unwrap(), 1.0);
        assert!(exp_symbol(0.0).is_err());
    }

    #[test]
    fn exp_stable_ratios_match_direct_formula() {
        let e = exp_symbol(1.0).unwrap();
        for t in [31.0, 50.0, 200.0] {
            let direct = e.deriv(2, t).unwrap() / (1.0 + e.eval(t));
            assert_relative_eq!(e.deriv_over_one_plus(2, t).unwrap(), direct, max_relative = 1e-12);
            assert_relative_eq!(e.log_one_plus(t), e.eval(t).ln_1p(), max_relative = 1e-12);
        }
        assert!(e.deriv_over_one_plus(1, 1e6).unwrap().is_finite());
    }

    #[test]
    fn oscillatory_derivatives_match_finite_differences() {
        for q in [1u32, 2, 3] {
            let a = oscillatory_symbol(q).unwrap();
            for &t in &[0.3, 0.9, 1.4] {
                for k in 1..=3 {
                    let h = 1e-5;
                    let fd = (a.deriv(k - 1, t + h).unwrap() - a.deriv(k - 1, t - h).unwrap()) / (2.0 * h);
                    let exact = a.deriv(k, t).unwrap();
                    assert!((fd - exact).abs() < 1e-6 * exact.abs().max(1.0), "q={q} k={k} t={t}");
                }
            }
            assert!(a.deriv(4, 1.0).is_err());
        }
    }

    #[test]
    fn fractional_class_membership() {
        let a = fractional_symbol(0.5, 1.0).unwrap();
        let r = check_class(&a, 72.0, 1, &SampleLadder::default()).unwrap();
        assert!(r.verdict, "{:?}", r);
        assert_relative_eq!(r.g2.m, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn laplace_class_at_borderline_order() {
        let r = check_class(&laplace_symbol(), 2.0, 1, &SampleLadder::default()).unwrap();
        assert!(r.verdict);
        assert_relative_eq!(r.g3[0].exponent, 1.0);
        // sup of 1/(1+|x|^2) over |x| > 1 approaches 1/2
        assert!(r.g3[0].n <= 0.5 && r.g3[0].n > 0.49);
    }

    #[test]
    fn sine_symbol_is_absorbed_at_first_power() {
        // |a'| ~ t |cos t| against the G3 bound (1+|x|^2)^1 ~ t stays bounded.
        let r = check_class(&oscillatory_symbol(1).unwrap(), 2.0, 1, &SampleLadder::default()).unwrap();
        assert!(r.g3[0].pass);
        assert!(r.g3[0].fit.ratio < 2.0);
    }

    #[test]
    fn chirped_symbol_fails_g3() {
        let r = check_class(&oscillatory_symbol(3).unwrap(), 2.0, 1, &SampleLadder::default()).unwrap();
        assert!(r.g1_pass && r.g2.pass);
        assert!(!r.g3[0].pass);
        assert!(r.g3[0].fit.ratio > 4.0, "ratio {}", r.g3[0].fit.ratio);
        assert!(!r.verdict);
    }

    #[test]
    fn class_precondition_errors() {
        let a = fractional_symbol(0.5, 1.0).unwrap();
        assert!(matches!(
            check_class(&a, 7.0, 1, &SampleLadder::default()),
            Err(Error::ClassPrecondition { .. })
        ));
        let custom = custom_symbol("c", 2.0, 1, Arc::new(|t| t), Arc::new(|_, _| 1.0)).unwrap();
        assert!(matches!(
            check_class(&custom, 4.0, 2, &SampleLadder::default()),
            Err(Error::MissingDerivative { .. })
        ));
    }

    #[test]
    fn nesting_examples() {
        let l = SampleLadder::default();
        let a = fractional_symbol(0.5, 1.0).unwrap();
        assert!(class_nesting_check(&a, 8.0, 16.0, 1, &l).unwrap());
        assert!(check_class(&a, 8.0, 1, &l).unwrap().verdict);
        assert!(check_class(&a, 16.0, 1, &l).unwrap().verdict);
        assert!(class_nesting_check(&laplace_symbol(), 2.0, 4.0, 1, &l).unwrap());
        assert!(class_nesting_check(&a, 8.0, 8.0, 1, &l).is_err());
    }

    #[test]
    fn report_serializes_flat() {
        let r = check_class(&laplace_symbol(), 4.0, 2, &SampleLadder::default()).unwrap();
        let text = r.to_kv().render();
        assert!(text.contains("verdict = true"));
        assert!(text.contains("g3_k2_N = 0.0000000000000000e0"));
        assert!(text.lines().all(|l| l.contains(" = ")));
    }
}
