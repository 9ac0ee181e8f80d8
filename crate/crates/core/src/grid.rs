//! Periodic tensor grids on `[-L, L)^n`, real-space fields and their
//! frequency-space coefficients.
//!
//! Node `j` on each axis sits at `-L + j * (2L/N)`. The frequency lattice is
//! `xi_k = (pi/L) * k` for `k` in `[-N/2, N/2)`. Flat arrays are row-major with
//! the last axis varying fastest; spectral arrays use FFT ordering
//! (`k` stored at index `k mod N`).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    points: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, points: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1,2,3}}")));
        }
        if points < 4 || !points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and >= 4, got {points}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!("half-width must be positive, got {half_width}")));
        }
        Ok(Grid { dim, points, half_width })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Quadrature weight of one node, `(2L/N)^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Spacing of the frequency lattice, `pi/L`.
    pub fn frequency_spacing(&self) -> f64 {
        PI / self.half_width
    }

    /// Total number of nodes, `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn axis_nodes(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.points).map(|j| -self.half_width + j as f64 * h).collect()
    }

    /// Signed lattice integers `k` in FFT order: `0, 1, .., N/2-1, -N/2, .., -1`.
    pub fn axis_wavenumbers(&self) -> Vec<i64> {
        let n = self.points as i64;
        (0..n).map(|i| if i < n / 2 { i } else { i - n }).collect()
    }

    /// Frequencies `xi_k` in FFT order.
    pub fn axis_frequencies(&self) -> Vec<f64> {
        let dk = self.frequency_spacing();
        self.axis_wavenumbers().into_iter().map(|k| k as f64 * dk).collect()
    }

    /// Per-axis indices of flat index `flat`.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for axis in (0..self.dim).rev() {
            out[axis] = flat % self.points;
            flat /= self.points;
        }
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points + i)
    }

    /// Coordinates of node `flat`.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut idx = [0usize; 3];
        self.unravel(flat, &mut idx);
        let h = self.spacing();
        idx[..self.dim].iter().map(|&j| -self.half_width + j as f64 * h).collect()
    }

    /// Coordinates of every node, flattened (`len() * dim` entries).
    pub fn node_coordinates(&self) -> Vec<f64> {
        let axis = self.axis_nodes();
        let mut idx = [0usize; 3];
        let mut out = Vec::with_capacity(self.len() * self.dim);
        for flat in 0..self.len() {
            self.unravel(flat, &mut idx);
            out.extend(idx[..self.dim].iter().map(|&j| axis[j]));
        }
        out
    }

    /// `|x|` of every node.
    pub fn node_radii(&self) -> Vec<f64> {
        self.node_coordinates()
            .chunks(self.dim)
            .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }

    /// `|xi|^2` for every spectral node (FFT order).
    pub fn frequency_norms_sq(&self) -> Vec<f64> {
        let freqs = self.axis_frequencies();
        let mut idx = [0usize; 3];
        (0..self.len())
            .map(|flat| {
                self.unravel(flat, &mut idx);
                idx[..self.dim].iter().map(|&i| freqs[i] * freqs[i]).sum()
            })
            .collect()
    }

    /// Radial bin of every node: `round(|x| / spacing)`.
    pub fn radial_bins(&self) -> Vec<usize> {
        let h = self.spacing();
        self.node_radii().into_iter().map(|r| (r / h).round() as usize).collect()
    }

    /// Flat index of the node obtained by cyclically shifting node `flat`
    /// by `shift[axis]` positions.
    pub fn shifted(&self, flat: usize, shift: &[isize]) -> usize {
        let mut idx = [0usize; 3];
        self.unravel(flat, &mut idx);
        let n = self.points as isize;
        for axis in 0..self.dim {
            idx[axis] = (idx[axis] as isize + shift[axis]).rem_euclid(n) as usize;
        }
        self.ravel(&idx[..self.dim])
    }

    fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Builds a validated grid; see [`Grid::new`].
pub fn make_grid(dim: usize, points: usize, half_width: f64) -> Result<Grid> {
    Grid::new(dim, points, half_width)
}

/// A real scalar function sampled on the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field construction"));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Field { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Field { grid, values: vec![value; grid.len()] }
    }

    /// Samples `f(x)` at every node.
    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Grid, f: F) -> Self {
        let coords = grid.node_coordinates();
        let values = coords.chunks(grid.dim()).map(f).collect();
        Field { grid, values }
    }

    /// Samples a radial profile `f(|x|)` at every node.
    pub fn from_radial<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Self {
        Self::from_fn(grid, |x| f(x.iter().map(|v| v * v).sum::<f64>().sqrt()))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| factor * v)
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: f64, other: &Field) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + factor * b).collect();
        Ok(Field { grid: self.grid, values })
    }

    pub fn sub(&self, other: &Field) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &Field) -> Result<Self> {
        self.axpy(1.0, other)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(Field { grid: self.grid, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Cyclic shift by whole nodes along each axis.
    pub fn shift(&self, shift: &[isize]) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for (flat, v) in self.values.iter().enumerate() {
            values[self.grid.shifted(flat, shift)] = *v;
        }
        Field { grid: self.grid, values }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub(crate) fn from_parts_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        Field { grid, values }
    }

    pub(crate) fn ensure_grid(&self, grid: &Grid) -> Result<()> {
        self.grid.check_same(grid)
    }
}

/// Coefficients of a field on the frequency lattice, in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for a grid of {} nodes",
                coeffs.len(),
                grid.len()
            )));
        }
        Ok(SpectralField { grid, coeffs })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient at signed lattice integers `k` (each in `[-N/2, N/2)`).
    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        let n = self.grid.points_per_axis() as i64;
        let idx: Vec<usize> = k.iter().map(|&ki| ki.rem_euclid(n) as usize).collect();
        self.coeffs[self.grid.ravel(&idx)]
    }

    /// Largest `|c(-k) - conj(c(k))|` relative to the largest coefficient.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.points_per_axis();
        let dim = self.grid.dim();
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut idx = [0usize; 3];
        let mut worst = 0.0f64;
        for flat in 0..self.coeffs.len() {
            self.grid.unravel(flat, &mut idx);
            let mut mirror = [0usize; 3];
            for a in 0..dim {
                mirror[a] = (n - idx[a]) % n;
            }
            let m = self.grid.ravel(&mirror[..dim]);
            worst = worst.max((self.coeffs[m] - self.coeffs[flat].conj()).norm());
        }
        worst / scale
    }
}

/// Discrete `L^p` norm `(sum |f_j|^p h^n)^(1/p)`; `p = f64::INFINITY` gives
/// the max norm. Rejects `p <= 1`.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    check_exponent(p)?;
    Ok(lp_norm_unchecked(f.values(), f.grid().cell_volume(), p))
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p.is_nan() || p <= 1.0 {
        return Err(Error::InvalidParameter(format!("Lebesgue exponent must exceed 1, got {p}")));
    }
    Ok(())
}

pub(crate) fn lp_norm_unchecked(values: &[f64], cell: f64, p: f64) -> f64 {
    let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if p.is_infinite() || peak == 0.0 {
        return peak;
    }
    let sum: f64 = values.iter().map(|v| (v.abs() / peak).powf(p)).sum();
    peak * (sum * cell).powf(1.0 / p)
}

/// Replaces each value by the mean over all nodes sharing its radial bin
/// (`round(|x| / spacing)`). Bins whose values are already identical are
/// left untouched, so the projection is exactly idempotent.
pub fn radial_project(f: &Field) -> Field {
    let bins = f.grid().radial_bins();
    radial_project_with_bins(f, &bins)
}

pub(crate) fn radial_project_with_bins(f: &Field, bins: &[usize]) -> Field {
    let nbins = bins.iter().copied().max().unwrap_or(0) + 1;
    let mut sum = vec![0.0; nbins];
    let mut count = vec![0usize; nbins];
    let mut first = vec![f64::NAN; nbins];
    let mut uniform = vec![true; nbins];
    for (&b, &v) in bins.iter().zip(f.values()) {
        if count[b] == 0 {
            first[b] = v;
        } else if v.to_bits() != first[b].to_bits() {
            uniform[b] = false;
        }
        sum[b] += v;
        count[b] += 1;
    }
    let mean: Vec<f64> = (0..nbins)
        .map(|b| if uniform[b] { first[b] } else { sum[b] / count[b] as f64 })
        .collect();
    Field::from_parts_unchecked(*f.grid(), bins.iter().map(|&b| mean[b]).collect())
}

/// `max |f - radial_project(f)|`.
pub fn radial_defect(f: &Field) -> f64 {
    let p = radial_project(f);
    f.values().iter().zip(p.values()).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_nodes_and_frequencies() {
        let g = make_grid(1, 8, PI).unwrap();
        let nodes = g.axis_nodes();
        assert_relative_eq!(nodes[0], -PI);
        assert_relative_eq!(nodes[7], 3.0 * PI / 4.0, epsilon = 1e-15);
        let mut ks = g.axis_wavenumbers();
        ks.sort();
        assert_eq!(ks, vec![-4, -3, -2, -1, 0, 1, 2, 3]);
        let mut xi = g.axis_frequencies();
        xi.sort_by(f64::total_cmp);
        assert_relative_eq!(xi[0], -4.0, epsilon = 1e-15);
        assert_relative_eq!(xi[7], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn two_dimensional_grid() {
        let g = make_grid(2, 4, 1.0).unwrap();
        assert_eq!(g.len(), 16);
        let mut xi = g.axis_frequencies();
        xi.sort_by(f64::total_cmp);
        for (got, k) in xi.iter().zip([-2.0, -1.0, 0.0, 1.0]) {
            assert_relative_eq!(*got, PI * k, epsilon = 1e-15);
        }
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(make_grid(1, 7, 1.0).is_err());
        assert!(make_grid(1, 2, 1.0).is_err());
        assert!(make_grid(1, 8, 0.0).is_err());
        assert!(make_grid(1, 8, -1.0).is_err());
        assert!(make_grid(4, 8, 1.0).is_err());
        assert!(make_grid(0, 8, 1.0).is_err());
    }

    #[test]
    fn lp_norm_of_constants() {
        for n in [8, 16, 64] {
            let g = make_grid(1, n, PI).unwrap();
            let one = Field::constant(g, 1.0);
            assert_relative_eq!(lp_norm(&one, 2.0).unwrap(), (2.0 * PI).sqrt(), epsilon = 1e-14);
            let zero = Field::zeros(g);
            for p in [1.5, 2.0, 3.0, f64::INFINITY] {
                assert_eq!(lp_norm(&zero, p).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn lp_norm_of_gaussian() {
        let g = make_grid(1, 256, 10.0).unwrap();
        let f = Field::from_fn(g, |x| (-x[0] * x[0] / 2.0).exp());
        assert!((lp_norm(&f, 2.0).unwrap() - PI.powf(0.25)).abs() < 1e-8);
    }

    #[test]
    fn lp_norm_rejects_small_exponents() {
        let g = make_grid(1, 8, 1.0).unwrap();
        let f = Field::constant(g, 1.0);
        assert!(lp_norm(&f, 1.0).is_err());
        assert!(lp_norm(&f, 0.5).is_err());
        assert!(lp_norm(&f, f64::NAN).is_err());
    }

    #[test]
    fn radial_projection_examples() {
        let g = make_grid(1, 64, 5.0).unwrap();
        let radial = Field::from_fn(g, |x| (-x[0] * x[0]).exp());
        let p = radial_project(&radial);
        for (a, b) in radial.values().iter().zip(p.values()) {
            assert!((a - b).abs() < 1e-12);
        }

        let g2 = make_grid(2, 16, 3.0).unwrap();
        // periodic odd extension of x_1: oddness forces the value 0 at the
        // unpaired node x_1 = -L
        let odd = Field::from_fn(g2, |x| if x[0] == -3.0 { 0.0 } else { x[0] });
        assert!(radial_project(&odd).max_abs() < 1e-12);

        let g3 = make_grid(2, 32, 7.0).unwrap();
        let base = Field::from_fn(g3, |x| (-(x[0] * x[0] + x[1] * x[1])).exp());
        let pert = Field::from_fn(g3, |x| x[0] * (-(x[0] * x[0] + x[1] * x[1])).exp());
        let lhs = radial_project(&base.add(&pert).unwrap());
        let rhs = radial_project(&base);
        for (a, b) in lhs.values().iter().zip(rhs.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_projection_is_idempotent_bitwise() {
        let g = make_grid(2, 16, 3.0).unwrap();
        let f = Field::from_fn(g, |x| (x[0] * 1.3).sin() + x[1] * x[1] * 0.1 + 0.3 * x[0] * x[1]);
        let once = radial_project(&f);
        let twice = radial_project(&once);
        assert_eq!(once, twice);
    }

    #[test]
    fn hermitian_coefficient_lookup() {
        let g = make_grid(2, 4, 1.0).unwrap();
        let coeffs = (0..16).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let s = SpectralField::new(g, coeffs).unwrap();
        assert_eq!(s.coeff(&[0, 0]).re, 0.0);
        assert_eq!(s.coeff(&[-1, 0]).re, 12.0);
        assert_eq!(s.coeff(&[0, -2]).re, 2.0);
    }
}
