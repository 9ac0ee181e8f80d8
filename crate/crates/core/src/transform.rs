//! Discrete Fourier pair on a [`Grid`].
//!
//! Conventions:
//! `F(xi_k) = sum_j f(x_j) exp(-i xi_k . x_j) h^n` and
//! `f(x_j) = (2 pi)^-n sum_k F(xi_k) exp(i xi_k . x_j) (pi/L)^n`.
//! Because `x_j = -L + j h`, both reduce to a plain FFT times `(-1)^(k_1+..+k_n)`.

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::Result;
use crate::grid::{Field, Grid, SpectralField};

/// In-place n-dimensional FFT (unnormalized) over the flat row-major buffer.
pub(crate) fn fft_nd(grid: &Grid, data: &mut [Complex64], direction: FftDirection) {
    let n = grid.points_per_axis();
    let dim = grid.dim();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft(n, direction);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let total = data.len();
    for axis in 0..dim {
        let stride = n.pow((dim - 1 - axis) as u32);
        let block = stride * n;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
}

/// `(-1)^(k_1 + .. + k_n)` for every spectral node in FFT order.
pub(crate) fn parity_signs(grid: &Grid) -> Vec<f64> {
    let mut idx = [0usize; 3];
    (0..grid.len())
        .map(|flat| {
            grid.unravel(flat, &mut idx);
            let s: usize = idx[..grid.dim()].iter().sum();
            if s.is_multiple_of(2) {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

pub fn forward_transform(f: &Field) -> SpectralField {
    let grid = *f.grid();
    let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(&grid, &mut data, FftDirection::Forward);
    let cell = grid.cell_volume();
    for (c, s) in data.iter_mut().zip(parity_signs(&grid)) {
        *c *= s * cell;
    }
    SpectralField::new(grid, data).expect("length matches grid")
}

/// Inverse transform; the imaginary part (roundoff for Hermitian input) is
/// discarded.
pub fn inverse_transform(spec: &SpectralField) -> Result<Field> {
    let grid = *spec.grid();
    let mut data = spec.coeffs().to_vec();
    inverse_in_place(&grid, &mut data);
    Field::new(grid, data.into_iter().map(|c| c.re).collect())
}

pub(crate) fn inverse_in_place(grid: &Grid, data: &mut [Complex64]) {
    for (c, s) in data.iter_mut().zip(parity_signs(grid)) {
        *c *= s;
    }
    fft_nd(grid, data, FftDirection::Inverse);
    let scale = 1.0 / (2.0 * grid.half_width()).powi(grid.dim() as i32);
    for c in data.iter_mut() {
        *c *= scale;
    }
}

/// `F^-1(weight * F(f))` for a real, even spectral weight given in FFT
/// order. Returns the number of nodes where the weighted coefficient is not
/// finite as the error value.
pub(crate) fn apply_multiplier(grid: &Grid, values: &[f64], weight: &[f64]) -> std::result::Result<Vec<f64>, usize> {
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_nd(grid, &mut data, FftDirection::Forward);
    let norm = 1.0 / grid.len() as f64;
    let mut bad = 0usize;
    for (c, w) in data.iter_mut().zip(weight) {
        if *c != Complex64::new(0.0, 0.0) {
            *c *= w * norm;
            if !(c.re.is_finite() && c.im.is_finite()) {
                bad += 1;
            }
        }
    }
    if bad > 0 {
        return Err(bad);
    }
    fft_nd(grid, &mut data, FftDirection::Inverse);
    Ok(data.into_iter().map(|c| c.re).collect())
}
