//! The operators `T_s = [1 + a(-Δ)]^{-s/2}` and `A = T_s^{-1}` on a grid,
//! the convolution kernel of `T_s`, the symbol-adapted and Bessel norms,
//! and empirical audits of the embedding constants.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::{check_exponent, lp_norm, lp_norm_unchecked, radial_project, Field, Grid, SpectralField};
use crate::multipliers::eval_varphi;
use crate::report::KvBlock;
use crate::symbols::Symbol;
use crate::transform::{apply_multiplier, fft_nd, inverse_transform};

/// Upper bound on fine-lattice evaluations for [`Calculus::kernel_k_refined`].
const MAX_REFINED_NODES: usize = 1 << 26;

#[derive(Debug, Clone)]
pub struct Calculus {
    sym: Symbol,
    s: f64,
    grid: Grid,
    /// `(1 + a(|xi|^2))^(s/2)` in FFT order.
    weight: Vec<f64>,
    /// `(1 + a(|xi|^2))^(-s/2)` in FFT order.
    inv_weight: Vec<f64>,
}

impl Calculus {
    pub fn new(sym: Symbol, s: f64, grid: Grid) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("order s must be positive, got {s}")));
        }
        let norms = grid.frequency_norms_sq();
        if let Some(t) = norms.iter().find(|&&t| !(sym.eval(t) >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "symbol {} is negative or undefined at |xi|^2 = {t}",
                sym.label()
            )));
        }
        let logs: Vec<f64> = norms.iter().map(|&t| sym.log_one_plus(t)).collect();
        let weight = logs.iter().map(|l| (0.5 * s * l).exp()).collect();
        let inv_weight = logs.iter().map(|l| (-0.5 * s * l).exp()).collect();
        Ok(Calculus { sym, s, grid, weight, inv_weight })
    }

    /// Same symbol and grid at another order.
    pub fn with_order(&self, s: f64) -> Result<Self> {
        Calculus::new(self.sym.clone(), s, self.grid)
    }

    pub fn symbol(&self) -> &Symbol {
        &self.sym
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Spectral weight `w(xi)` in FFT order.
    pub fn weight(&self) -> &[f64] {
        &self.weight
    }

    pub fn apply_ts(&self, g: &Field) -> Result<Field> {
        g.ensure_grid(&self.grid)?;
        let v = apply_multiplier(&self.grid, g.values(), &self.inv_weight).map_err(Error::Unresolved)?;
        Field::new(self.grid, v)
    }

    /// Fails with [`Error::Unresolved`] when `w(xi) * u_hat(xi)` overflows.
    pub fn apply_a(&self, u: &Field) -> Result<Field> {
        u.ensure_grid(&self.grid)?;
        let v = apply_multiplier(&self.grid, u.values(), &self.weight).map_err(Error::Unresolved)?;
        Field::new(self.grid, v).map_err(|_| Error::Unresolved(0))
    }

    /// `w^-2 ~ |xi|^(-beta s)` is integrable iff `beta s > n`.
    fn check_kernel_order(&self) -> Result<()> {
        let beta_s = self.sym.beta() * self.s;
        let n = self.grid.dim();
        if beta_s <= n as f64 {
            return Err(Error::KernelPrecondition { beta_s, n });
        }
        Ok(())
    }

    /// `K = F^-1(w^-1)` on the grid's own frequency lattice. Discrete
    /// convolution with this kernel reproduces `apply_ts` exactly.
    pub fn kernel_k(&self) -> Result<Field> {
        self.check_kernel_order()?;
        let coeffs = self.inv_weight.iter().map(|&w| Complex64::new(w, 0.0)).collect();
        inverse_transform(&SpectralField::new(self.grid, coeffs)?)
    }

    /// Kernel sampled on the same nodes but with the frequency sum extended
    /// to `oversample * N` lattice points per axis, which removes most of
    /// the truncation error of [`Calculus::kernel_k`] near a kink at `x = 0`.
    pub fn kernel_k_refined(&self, oversample: usize) -> Result<Field> {
        self.check_kernel_order()?;
        let n = self.grid.points_per_axis();
        let dim = self.grid.dim();
        if oversample == 0 {
            return Err(Error::InvalidParameter("oversample must be >= 1".into()));
        }
        let fine = n * oversample;
        let total = fine.checked_pow(dim as u32).filter(|&t| t <= MAX_REFINED_NODES).ok_or_else(|| {
            Error::InvalidParameter(format!("refined lattice too large: ({fine})^{dim} > {MAX_REFINED_NODES}"))
        })?;
        let dxi = self.grid.frequency_spacing();
        let half = (fine / 2) as i64;
        let mut folded = vec![0.0f64; self.grid.len()];
        let mut idx = [0usize; 3];
        for flat in 0..total {
            let mut rem = flat;
            let mut t = 0.0;
            for axis in (0..dim).rev() {
                let k = (rem % fine) as i64 - half;
                rem /= fine;
                idx[axis] = k.rem_euclid(n as i64) as usize;
                let xi = dxi * k as f64;
                t += xi * xi;
            }
            folded[self.grid.ravel(&idx[..dim])] += (-0.5 * self.s * self.sym.log_one_plus(t)).exp();
        }
        let coeffs = folded.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        inverse_transform(&SpectralField::new(self.grid, coeffs)?)
    }

    /// Periodic quadrature convolution `sum_j K(x_i - x_j) g_j h^n`, computed
    /// directly in `O(N^(2n))`.
    pub fn convolve_with_kernel(&self, g: &Field) -> Result<Field> {
        g.ensure_grid(&self.grid)?;
        let k = self.kernel_k()?;
        let n = self.grid.points_per_axis();
        let dim = self.grid.dim();
        let cell = self.grid.cell_volume();
        let mut out = vec![0.0; self.grid.len()];
        let (mut ii, mut jj, mut mm) = ([0usize; 3], [0usize; 3], [0usize; 3]);
        for (i, slot) in out.iter_mut().enumerate() {
            self.grid.unravel(i, &mut ii);
            let mut acc = 0.0;
            for (j, gj) in g.values().iter().enumerate() {
                if *gj == 0.0 {
                    continue;
                }
                self.grid.unravel(j, &mut jj);
                for a in 0..dim {
                    // x_i - x_j = (i - j) h sits at node index i - j + N/2
                    mm[a] = (ii[a] + n + n / 2 - jj[a]) % n;
                }
                acc += k.values()[self.grid.ravel(&mm[..dim])] * gj;
            }
            *slot = acc * cell;
        }
        Field::new(self.grid, out)
    }

    /// `||A u||_p`.
    pub fn h_norm(&self, u: &Field, p: f64) -> Result<f64> {
        check_exponent(p)?;
        lp_norm(&self.apply_a(u)?, p)
    }
}

/// Bessel norm `||F^-1((1+|xi|^2)^(r/2) u_hat)||_p`; `r = 0` is `lp_norm`.
pub fn sobolev_norm(grid: &Grid, u: &Field, r: f64, p: f64) -> Result<f64> {
    check_exponent(p)?;
    u.ensure_grid(grid)?;
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::InvalidParameter(format!("Sobolev order must be >= 0, got {r}")));
    }
    if r == 0.0 {
        return lp_norm(u, p);
    }
    let weight: Vec<f64> = grid.frequency_norms_sq().iter().map(|t| (1.0 + t).powf(0.5 * r)).collect();
    let v = apply_multiplier(grid, u.values(), &weight).map_err(Error::Unresolved)?;
    Ok(lp_norm_unchecked(&v, grid.cell_volume(), p))
}

/// Random real field whose spectrum is supported on `|k_i| <= band` with
/// independent Gaussian coefficients.
pub fn random_band_limited(grid: &Grid, band: usize, rng: &mut impl Rng) -> Field {
    let noise = (0..grid.len()).map(|_| StandardNormal.sample(rng)).collect();
    band_limit(&Field::from_parts_unchecked(*grid, noise), band)
}

/// Band-limited wave packet `e^(-|x-c|^2/(2 sigma^2)) cos(k.(x-c))` with
/// random center in the inner half of the box, log-uniform width in
/// `[h, L/4]` and, with even odds, zero carrier or a random carrier below
/// `band`; truncated to `|k_i| <= band`.
pub fn random_packet(grid: &Grid, band: usize, rng: &mut impl Rng) -> Field {
    let n = grid.dim();
    let l = grid.half_width();
    let center: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5 * l..0.5 * l)).collect();
    let sigma = (rng.random_range(grid.spacing().ln()..(0.25 * l).ln())).exp();
    let kmax = band as f64 * grid.frequency_spacing();
    let modulated = rng.random_bool(0.5);
    let carrier: Vec<f64> =
        (0..n).map(|_| if modulated { rng.random_range(-kmax..=kmax) } else { 0.0 }).collect();
    let f = Field::from_fn(*grid, |x| {
        let (mut r2, mut phase) = (0.0, 0.0);
        for i in 0..n {
            let d = x[i] - center[i];
            r2 += d * d;
            phase += carrier[i] * d;
        }
        (-r2 / (2.0 * sigma * sigma)).exp() * phase.cos()
    });
    band_limit(&f, band)
}

fn band_limit(f: &Field, band: usize) -> Field {
    let grid = *f.grid();
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&grid, &mut data, rustfft::FftDirection::Forward);
    let n = grid.points_per_axis();
    let mut idx = [0usize; 3];
    for (flat, c) in data.iter_mut().enumerate() {
        grid.unravel(flat, &mut idx);
        let inside = idx[..grid.dim()].iter().all(|&i| {
            let k = if i >= n / 2 { n - i } else { i };
            k <= band
        });
        if !inside {
            *c = Complex64::new(0.0, 0.0);
        }
    }
    fft_nd(&grid, &mut data, rustfft::FftDirection::Inverse);
    let scale = 1.0 / grid.len() as f64;
    Field::from_parts_unchecked(grid, data.into_iter().map(|c| c.re * scale).collect())
}

/// Random radial field: a sum of three Gaussian bumps `c e^(-|x|^2 / (2 sigma^2))`
/// with log-uniform widths in `[2h, 0.3 L]`, projected onto radial bins.
pub fn random_radial(grid: &Grid, rng: &mut impl Rng) -> Field {
    let l = grid.half_width();
    let (lo, hi) = ((2.0 * grid.spacing()).ln(), (0.3 * l).ln());
    let terms: Vec<(f64, f64)> =
        (0..3).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(lo..hi).exp())).collect();
    let f = Field::from_radial(*grid, |r| {
        terms.iter().map(|(c, sg)| c * (-(r * r) / (2.0 * sg * sg)).exp()).sum()
    });
    radial_project(&f)
}

/// Max ratio over the first half and over all trials, with their relative drift.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioStat {
    pub name: &'static str,
    pub max_half: f64,
    pub max_all: f64,
    pub drift: f64,
    pub samples: usize,
}

impl RatioStat {
    fn from_ratios(name: &'static str, ratios: &[f64]) -> Self {
        let half = ratios.len() / 2;
        let max_half = ratios[..half.max(1)].iter().copied().fold(0.0, f64::max);
        let max_all = ratios.iter().copied().fold(0.0, f64::max);
        let drift = if max_all > 0.0 { (max_all - max_half) / max_all } else { 0.0 };
        RatioStat { name, max_half, max_all, drift, samples: ratios.len() }
    }

    pub fn bounded(&self) -> bool {
        self.max_all.is_finite()
    }

    /// Bounded and within `tol` relative drift under trial doubling.
    pub fn stable(&self, tol: f64) -> bool {
        self.bounded() && self.drift < tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingAudit {
    pub p: f64,
    pub r: f64,
    pub s: f64,
    pub trials: usize,
    pub seed: u64,
    /// `||u||_p / ||u||_{H^{s,p}(a)}`.
    pub lp: RatioStat,
    /// `||u||_{H^{r,p}} / ||u||_{H^{s+2r/beta,p}(a)}`.
    pub sobolev: RatioStat,
    /// `||u||_inf / ||u||_{H^{s+2r/beta,p}(a)}`, meaningful for `r > n/p`.
    pub linf: RatioStat,
    /// `||u||_{H^{s,p}(a)} / ||u||_{H^{2s,p}(a)}`.
    pub nested: RatioStat,
    /// `||F^-1(phi u_hat)||_p / ||u||_p` with `phi = (1+|xi|^2)^(r/2) (1+a)^(-(s+2r/beta)/2)`.
    pub lambda: RatioStat,
}

impl EmbeddingAudit {
    pub fn rows(&self) -> [&RatioStat; 5] {
        [&self.lp, &self.sobolev, &self.linf, &self.nested, &self.lambda]
    }

    pub fn to_kv(&self) -> KvBlock {
        let mut kv = KvBlock::new();
        kv.num("p", self.p).num("r", self.r).num("s", self.s).text("trials", self.trials).text("seed", self.seed);
        for row in self.rows() {
            kv.num(format!("{}_max", row.name), row.max_all)
                .num(format!("{}_max_half", row.name), row.max_half)
                .num(format!("{}_drift", row.name), row.drift);
        }
        kv
    }
}

/// Empirical embedding constants. Each trial draws a random `g`, with equal
/// odds either band-limited noise of bandwidth uniform in `0..=N/4` or a
/// [`random_packet`], and measures every embedding on `u = T(g)` for the
/// `T` of its source space, so the source norm is `||g||_p`. Requires
/// `r > n/p` so that every row has a finite target.
pub fn embedding_audit(calc: &Calculus, p: f64, r: f64, trials: usize, seed: u64) -> Result<EmbeddingAudit> {
    check_exponent(p)?;
    if p.is_infinite() {
        return Err(Error::InvalidParameter("audits need a finite exponent".into()));
    }
    let grid = *calc.grid();
    let n = grid.dim() as f64;
    if !(r > n / p) {
        return Err(Error::InvalidParameter(format!("need r > n/p = {}, got r = {r}", n / p)));
    }
    if trials < 2 {
        return Err(Error::InvalidParameter("need at least 2 trials".into()));
    }
    let s = calc.order();
    let s0 = s + 2.0 * r / calc.symbol().beta();
    let high = calc.with_order(s0)?;
    let double = calc.with_order(2.0 * s)?;
    let phi: Vec<f64> = grid
        .frequency_norms_sq()
        .iter()
        .map(|t| eval_varphi(calc.symbol(), r, s, &[t.sqrt()]))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = grid.points_per_axis() / 4;
    let mut cols: [Vec<f64>; 5] = Default::default();
    for _ in 0..trials {
        let g = random_audit_field(&grid, band, &mut rng);
        let lp_g = lp_norm(&g, p)?;
        let u_s = calc.apply_ts(&g)?;
        cols[0].push(lp_norm(&u_s, p)? / calc.h_norm(&u_s, p)?);
        let u_s0 = high.apply_ts(&g)?;
        let h_s0 = high.h_norm(&u_s0, p)?;
        cols[1].push(sobolev_norm(&grid, &u_s0, r, p)? / h_s0);
        cols[2].push(u_s0.max_abs() / h_s0);
        let u_2s = double.apply_ts(&g)?;
        cols[3].push(calc.h_norm(&u_2s, p)? / double.h_norm(&u_2s, p)?);
        let lam = apply_multiplier(&grid, g.values(), &phi).map_err(Error::Unresolved)?;
        cols[4].push(lp_norm_unchecked(&lam, grid.cell_volume(), p) / lp_g);
    }
    let [c0, c1, c2, c3, c4] = cols;
    Ok(EmbeddingAudit {
        p,
        r,
        s,
        trials,
        seed,
        lp: RatioStat::from_ratios("lp", &c0),
        sobolev: RatioStat::from_ratios("sobolev", &c1),
        linf: RatioStat::from_ratios("linf", &c2),
        nested: RatioStat::from_ratios("nested", &c3),
        lambda: RatioStat::from_ratios("lambda", &c4),
    })
}

/// Band-limited noise of random bandwidth in `0..=band`, or a [`random_packet`].
fn random_audit_field(grid: &Grid, band: usize, rng: &mut impl Rng) -> Field {
    if rng.random_bool(0.5) {
        let b = rng.random_range(0..=band);
        random_band_limited(grid, b, rng)
    } else {
        random_packet(grid, band, rng)
    }
}

/// Empirical `sup ||u||_p / ||u||_{H^{s,p}(a)}` over the audit sampling
/// family, times a safety factor of 2.
pub fn estimate_lp_embedding_constant(calc: &Calculus, p: f64, trials: usize, seed: u64) -> Result<f64> {
    check_exponent(p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let band = calc.grid().points_per_axis() / 4;
    let mut best = 0.0f64;
    for _ in 0..trials.max(1) {
        let u = random_audit_field(calc.grid(), band, &mut rng);
        let h = calc.h_norm(&u, p)?;
        if h > 0.0 {
            best = best.max(lp_norm(&u, p)? / h);
        }
    }
    Ok(2.0 * best)
}
