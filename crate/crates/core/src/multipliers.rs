//! Radial Fourier multipliers `m_{a,mu}(x) = (1 + a(|x|^2))^(-mu/2)` and
//! `phi(x) = (1+|x|^2)^(r/2) m_{a, s + 2r/beta}(x)` with exact partial
//! derivatives along distinct axes, plus a sampled Mikhlin-condition check
//! `sup |x^alpha D^alpha m(x)| < inf` over `alpha <= (1,..,1)`.
//!
//! Partials come from the chain rule over set partitions of the axis set:
//! for `I` with distinct axes, `d_B a(|x|^2) = 2^|B| prod_{j in B} x_j a^(|B|)(|x|^2)`
//! (mixed second derivatives of `|x|^2` vanish), and
//! `d_I psi(a) = sum_partitions psi^(r)(a) prod_B d_B a` with
//! `psi^(r)(y) = (-mu/2)_r (1+y)^(-mu/2 - r)` (falling factorial).

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ladder::{FitMode, LadderFit, SampleLadder};
use crate::report::KvBlock;
use crate::symbols::{exp_symbol, falling, Symbol};

/// Radius of the ball around the origin skipped for symbols whose
/// derivatives are singular at zero.
pub const ORIGIN_EXCLUSION: f64 = 1e-6;

fn check_axes(axes: &[usize], dim: usize) -> Result<()> {
    for (i, &a) in axes.iter().enumerate() {
        if a >= dim {
            return Err(Error::InvalidParameter(format!("axis {a} out of range for dimension {dim}")));
        }
        if axes[..i].contains(&a) {
            return Err(Error::RepeatedAxis(a));
        }
    }
    Ok(())
}

fn check_order(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("multiplier order must be positive, got {mu}")));
    }
    Ok(())
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Calls `visit` once per set partition of `items`.
pub(crate) fn for_each_partition(items: &[usize], visit: &mut dyn FnMut(&[Vec<usize>])) {
    fn rec(items: &[usize], blocks: &mut Vec<Vec<usize>>, visit: &mut dyn FnMut(&[Vec<usize>])) {
        let Some((&first, rest)) = items.split_first() else {
            visit(blocks);
            return;
        };
        for b in 0..blocks.len() {
            blocks[b].push(first);
            rec(rest, blocks, visit);
            blocks[b].pop();
        }
        blocks.push(vec![first]);
        rec(rest, blocks, visit);
        blocks.pop();
    }
    rec(items, &mut Vec::new(), visit);
}

pub fn eval_m_mu(sym: &Symbol, mu: f64, x: &[f64]) -> Result<f64> {
    check_order(mu)?;
    Ok((-0.5 * mu * sym.log_one_plus(norm_sq(x))).exp())
}

/// `D^I m_{a,mu}(x)` for a set `I` of distinct axes.
pub fn partial_m_mu(sym: &Symbol, mu: f64, axes: &[usize], x: &[f64]) -> Result<f64> {
    check_order(mu)?;
    check_axes(axes, x.len())?;
    let t = norm_sq(x);
    let base = (-0.5 * mu * sym.log_one_plus(t)).exp();
    if axes.is_empty() {
        return Ok(base);
    }
    // a^(k)/(1+a) for k = 1..|I|
    let ratios: Vec<f64> =
        (1..=axes.len()).map(|k| sym.deriv_over_one_plus(k, t)).collect::<Result<_>>()?;
    let mut total = 0.0;
    for_each_partition(axes, &mut |blocks| {
        let mut term = falling(-0.5 * mu, blocks.len());
        for b in blocks {
            let xs: f64 = b.iter().map(|&j| 2.0 * x[j]).product();
            term *= xs * ratios[b.len() - 1];
        }
        total += term;
    });
    Ok(total * base)
}

fn varphi_order(sym: &Symbol, r: f64, s: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("Sobolev order r must be positive, got {r}")));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidParameter(format!("order s must be nonnegative, got {s}")));
    }
    Ok(s + 2.0 * r / sym.beta())
}

/// `phi(x) = (1+|x|^2)^(r/2) / (1 + a(|x|^2))^((s + 2r/beta)/2)`.
pub fn eval_varphi(sym: &Symbol, r: f64, s: f64, x: &[f64]) -> Result<f64> {
    let nu = varphi_order(sym, r, s)?;
    let t = norm_sq(x);
    Ok((0.5 * r * t.ln_1p() - 0.5 * nu * sym.log_one_plus(t)).exp())
}

/// `D^I phi(x)` by the Leibniz rule over subsets of `I`.
pub fn partial_varphi(sym: &Symbol, r: f64, s: f64, axes: &[usize], x: &[f64]) -> Result<f64> {
    let nu = varphi_order(sym, r, s)?;
    check_axes(axes, x.len())?;
    let t = norm_sq(x);
    let k = axes.len();
    let ratios: Vec<f64> = (1..=k).map(|j| sym.deriv_over_one_plus(j, t)).collect::<Result<_>>()?;
    // exp(r/2 ln(1+t) - nu/2 ln(1+a)) carries both power factors; the
    // remaining pieces are ratios that stay bounded.
    let base = (0.5 * r * t.ln_1p() - 0.5 * nu * sym.log_one_plus(t)).exp();
    let mut total = 0.0;
    for mask in 0u32..(1 << k) {
        let (left, right): (Vec<usize>, Vec<usize>) =
            (0..k).partition(|&i| mask & (1 << i) != 0);
        let j = left.len();
        let poly: f64 = falling(0.5 * r, j)
            * left.iter().map(|&i| 2.0 * x[axes[i]]).product::<f64>()
            / (1.0 + t).powi(j as i32);
        let rest: Vec<usize> = right.iter().map(|&i| axes[i]).collect();
        let mut mpart = 0.0;
        if rest.is_empty() {
            mpart = 1.0;
        } else {
            for_each_partition(&rest, &mut |blocks| {
                let mut term = falling(-0.5 * nu, blocks.len());
                for b in blocks {
                    let xs: f64 = b.iter().map(|&i| 2.0 * x[i]).product();
                    term *= xs * ratios[b.len() - 1];
                }
                mpart += term;
            });
        }
        total += poly * mpart;
    }
    Ok(total * base)
}

pub type MultiplierEval = dyn Fn(&[f64]) -> f64 + Send + Sync;
pub type MultiplierPartial = dyn Fn(&[usize], &[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub enum MultiplierSpec {
    MMu { sym: Symbol, mu: f64 },
    Varphi { sym: Symbol, r: f64, s: f64 },
    Custom {
        label: String,
        eval: Arc<MultiplierEval>,
        partial: Arc<MultiplierPartial>,
        singular_at_origin: bool,
    },
}

impl fmt::Debug for MultiplierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl MultiplierSpec {
    pub fn m_mu(sym: Symbol, mu: f64) -> Result<Self> {
        check_order(mu)?;
        Ok(MultiplierSpec::MMu { sym, mu })
    }

    pub fn varphi(sym: Symbol, r: f64, s: f64) -> Result<Self> {
        varphi_order(&sym, r, s)?;
        Ok(MultiplierSpec::Varphi { sym, r, s })
    }

    /// `1 / (1 + |x|^2 e^(c|x|^2))`, i.e. `m_{a,2}` for `a(t) = t e^(ct)`.
    pub fn exp_m(rate: f64) -> Result<Self> {
        Self::m_mu(exp_symbol(rate)?, 2.0)
    }

    pub fn label(&self) -> String {
        match self {
            MultiplierSpec::MMu { sym, mu } => format!("m_mu({}, mu={mu})", sym.label()),
            MultiplierSpec::Varphi { sym, r, s } => format!("varphi({}, r={r}, s={s})", sym.label()),
            MultiplierSpec::Custom { label, .. } => label.clone(),
        }
    }

    pub fn singular_at_origin(&self) -> bool {
        match self {
            MultiplierSpec::MMu { sym, .. } | MultiplierSpec::Varphi { sym, .. } => {
                sym.derivative_singular_at_zero()
            }
            MultiplierSpec::Custom { singular_at_origin, .. } => *singular_at_origin,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            MultiplierSpec::MMu { sym, mu } => eval_m_mu(sym, *mu, x),
            MultiplierSpec::Varphi { sym, r, s } => eval_varphi(sym, *r, *s, x),
            MultiplierSpec::Custom { eval, .. } => Ok(eval(x)),
        }
    }

    pub fn partial(&self, axes: &[usize], x: &[f64]) -> Result<f64> {
        match self {
            MultiplierSpec::MMu { sym, mu } => partial_m_mu(sym, *mu, axes, x),
            MultiplierSpec::Varphi { sym, r, s } => partial_varphi(sym, *r, *s, axes, x),
            MultiplierSpec::Custom { partial, .. } => {
                check_axes(axes, x.len())?;
                Ok(partial(axes, x))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaBound {
    /// Axes of the multi-index `alpha <= (1,..,1)`.
    pub axes: Vec<usize>,
    /// Sup over samples with `x != 0` (outside the exclusion ball when singular).
    pub sup_without_origin: f64,
    /// Value at `x = 0`; `None` when the origin is excluded.
    pub at_origin: Option<f64>,
    pub fit: LadderFit,
    pub pass: bool,
}

impl AlphaBound {
    pub fn sup(&self) -> f64 {
        self.at_origin.map_or(self.sup_without_origin, |o| o.max(self.sup_without_origin))
    }

    fn key(&self) -> String {
        if self.axes.is_empty() {
            "alpha_0".into()
        } else {
            let ids: Vec<String> = self.axes.iter().map(|a| (a + 1).to_string()).collect();
            format!("alpha_{}", ids.join(""))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierReport {
    pub label: String,
    pub n: usize,
    pub bounds: Vec<AlphaBound>,
    /// `max_alpha sup |x^alpha D^alpha m|` including the origin when it is sampled.
    pub constant: f64,
    /// Same maximum over `x != 0`.
    pub constant_without_origin: f64,
    pub origin_excluded_radius: f64,
    pub sample_spec: String,
    pub seed: u64,
    pub pass: bool,
}

impl MultiplierReport {
    pub fn to_kv(&self) -> KvBlock {
        let mut kv = KvBlock::new();
        kv.text("multiplier", &self.label)
            .text("n", self.n)
            .text("sample_spec", &self.sample_spec)
            .text("seed", self.seed)
            .num("origin_excluded_radius", self.origin_excluded_radius);
        for b in &self.bounds {
            let k = b.key();
            kv.num(format!("{k}_sup"), b.sup())
                .num(format!("{k}_sup_without_origin"), b.sup_without_origin);
            match b.at_origin {
                Some(v) => kv.num(format!("{k}_at_origin"), v),
                None => kv.text(format!("{k}_at_origin"), "excluded"),
            };
            kv.num(format!("{k}_ratio"), b.fit.ratio)
                .num(format!("{k}_stable_from"), b.fit.stable_from)
                .flag(format!("{k}_pass"), b.pass);
        }
        kv.num("C", self.constant)
            .num("C_without_origin", self.constant_without_origin)
            .flag("pass", self.pass);
        kv
    }
}

/// Unit directions: coordinate axes with both signs, the main diagonals in
/// `n >= 2`, and `extra` seeded Gaussian directions.
fn sample_directions(n: usize, extra: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for axis in 0..n {
        for sign in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[axis] = sign;
            dirs.push(d);
        }
    }
    if n >= 2 {
        for mask in 0..(1u32 << n) {
            let norm = (n as f64).sqrt();
            dirs.push((0..n).map(|i| if mask & (1 << i) != 0 { -1.0 / norm } else { 1.0 / norm }).collect());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..extra {
            let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = norm_sq(&v).sqrt();
            dirs.push(v.into_iter().map(|c| c / norm).collect());
        }
    }
    dirs
}

/// Radii inside the inner ladder radius: geometric from `2^-20` (or the
/// exclusion radius) plus a fine linear shell over `[1/2, 1]`.
fn inner_radii(inner: f64, singular: bool) -> Vec<f64> {
    let lo: f64 = if singular { ORIGIN_EXCLUSION * 1.000001 } else { 2f64.powi(-20) };
    let steps = 160;
    let q = (inner / lo).powf(1.0 / steps as f64);
    let mut radii: Vec<f64> = (0..=steps).map(|i| lo * q.powi(i)).collect();
    radii.extend((0..=256).map(|i| inner * (0.5 + 0.5 * i as f64 / 256.0)));
    radii
}

/// Samples `|x^alpha D^alpha m(x)|` for every `alpha <= (1,..,1)` and fits
/// each supremum along `ladder` (outer rungs) after seeding the running sup
/// with the inner ball and the shell near `|x| = 1`.
pub fn mikhlin_certify(spec: &MultiplierSpec, n: usize, ladder: &SampleLadder, seed: u64) -> Result<MultiplierReport> {
    if !(1..=3).contains(&n) {
        return Err(Error::InvalidParameter(format!("dimension {n} not in {{1,2,3}}")));
    }
    let singular = spec.singular_at_origin();
    let dirs = sample_directions(n, 24, seed);
    let inner = inner_radii(ladder.inner_radius(), singular);
    let mut bounds = Vec::with_capacity(1 << n);
    let mut x = vec![0.0; n];
    for mask in 0u32..(1 << n) {
        let axes: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let probe = |x: &[f64]| -> Result<f64> {
            let xa: f64 = axes.iter().map(|&i| x[i]).product();
            Ok((xa * spec.partial(&axes, x)?).abs())
        };
        let sup_max = |radii: &mut dyn Iterator<Item = f64>, x: &mut [f64]| -> Result<f64> {
            let mut sup = 0.0f64;
            for r in radii {
                for d in &dirs {
                    for (xi, di) in x.iter_mut().zip(d) {
                        *xi = r * di;
                    }
                    let v = probe(x)?;
                    sup = if v.is_nan() || sup.is_nan() { f64::NAN } else { sup.max(v) };
                }
            }
            Ok(sup)
        };
        let core = sup_max(&mut inner.iter().copied(), &mut x)?;
        let mut rungs = Vec::with_capacity(ladder.num_rungs() - 1);
        for j in 1..ladder.num_rungs() {
            rungs.push(sup_max(&mut ladder.rung_samples(j), &mut x)?);
        }
        if let Some(first) = rungs.first_mut() {
            *first = if core.is_nan() { f64::NAN } else { first.max(core) };
        }
        let fit = LadderFit::from_rungs(ladder, &rungs, FitMode::Sup);
        let at_origin = if singular {
            None
        } else {
            let zero = vec![0.0; n];
            let xa: f64 = axes.iter().map(|&i| zero[i]).product();
            Some((xa * spec.partial(&axes, &zero)?).abs())
        };
        let origin_ok = at_origin.is_none_or(|v| v.is_finite());
        let pass = fit.stable() && origin_ok;
        bounds.push(AlphaBound { axes, sup_without_origin: fit.value(), at_origin, fit, pass });
    }
    let constant = bounds.iter().map(|b| b.sup()).fold(0.0, f64::max);
    let constant_without_origin = bounds.iter().map(|b| b.sup_without_origin).fold(0.0, f64::max);
    let pass = bounds.iter().all(|b| b.pass);
    Ok(MultiplierReport {
        label: spec.label(),
        n,
        bounds,
        constant,
        constant_without_origin,
        origin_excluded_radius: if singular { ORIGIN_EXCLUSION } else { 0.0 },
        sample_spec: format!("{ladder}; inner radii to 2^-20, shell [0.5,1]; {} directions", dirs.len()),
        seed,
        pass,
    })
}
