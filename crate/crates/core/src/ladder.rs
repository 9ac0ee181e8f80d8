//! Geometric sample ladders that turn "there exists a constant" statements
//! into falsifiable fits: a constant is accepted when its running supremum
//! (or infimum) stays within a factor of two across the last two rungs.

use std::fmt;

/// Accepted band for the growth ratio between the last two rungs.
pub const STABLE_BAND: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Clone, PartialEq)]
pub struct SampleLadder {
    /// Increasing radii `|x|`; samples of rung `j` lie in `(rungs[j-1], rungs[j]]`.
    pub rungs: Vec<f64>,
    /// Geometrically spaced samples per rung.
    pub per_rung: usize,
}

impl Default for SampleLadder {
    fn default() -> Self {
        SampleLadder::geometric(14, 64)
    }
}

impl SampleLadder {
    /// Rungs `1, 2, 4, .., 2^max_exp`.
    pub fn geometric(max_exp: u32, per_rung: usize) -> Self {
        SampleLadder { rungs: (0..=max_exp).map(|e| 2f64.powi(e as i32)).collect(), per_rung }
    }

    /// Radii of rung `j >= 1`.
    pub fn rung_samples(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let lo = self.rungs[j - 1];
        let hi = self.rungs[j];
        let q = (hi / lo).powf(1.0 / self.per_rung as f64);
        (1..=self.per_rung).map(move |i| if i == self.per_rung { hi } else { lo * q.powi(i as i32) })
    }

    pub fn num_rungs(&self) -> usize {
        self.rungs.len()
    }

    pub fn inner_radius(&self) -> f64 {
        self.rungs[0]
    }
}

impl fmt::Display for SampleLadder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "geometric |x| in [{}, {}], {} rungs x {} samples",
            self.rungs[0],
            self.rungs[self.rungs.len() - 1],
            self.rungs.len() - 1,
            self.per_rung
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMode {
    Sup,
    Inf,
}

/// Running extremum of a sampled quantity along the ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderFit {
    /// Running extremum after each rung (`len = rungs - 1`).
    pub running: Vec<f64>,
    /// Fine-over-coarse ratio across the last two rungs.
    pub ratio: f64,
    /// Smallest rung radius from which the running value stays in band.
    pub stable_from: f64,
}

impl LadderFit {
    /// `per_rung_values[j]` is the extremum over rung `j + 1` alone.
    pub fn from_rungs(ladder: &SampleLadder, per_rung_values: &[f64], mode: FitMode) -> Self {
        let mut running = Vec::with_capacity(per_rung_values.len());
        let mut acc = match mode {
            FitMode::Sup => f64::NEG_INFINITY,
            FitMode::Inf => f64::INFINITY,
        };
        for &v in per_rung_values {
            acc = if v.is_nan() {
                f64::NAN
            } else {
                match mode {
                    FitMode::Sup => acc.max(v),
                    FitMode::Inf => acc.min(v),
                }
            };
            running.push(acc);
        }
        let k = running.len();
        let ratio = if k >= 2 { growth_ratio(running[k - 2], running[k - 1]) } else { 1.0 };
        let mut start = k.saturating_sub(1);
        while start > 0 && (0..k).skip(start - 1).all(|j| in_band(growth_ratio(running[start - 1], running[j]))) {
            start -= 1;
        }
        LadderFit { running, ratio, stable_from: ladder.rungs[start + 1] }
    }

    pub fn value(&self) -> f64 {
        *self.running.last().unwrap_or(&f64::NAN)
    }

    pub fn stable(&self) -> bool {
        self.value().is_finite() && in_band(self.ratio)
    }
}

/// `fine / coarse`, with `0/0 = 1`.
pub fn growth_ratio(coarse: f64, fine: f64) -> f64 {
    if coarse == fine {
        1.0
    } else {
        fine / coarse
    }
}

pub fn in_band(ratio: f64) -> bool {
    ratio.is_finite() && ratio >= STABLE_BAND.0 && ratio <= STABLE_BAND.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rung_samples_cover_interval() {
        let l = SampleLadder::geometric(3, 4);
        let s: Vec<f64> = l.rung_samples(1).collect();
        assert_eq!(s.len(), 4);
        assert!(s[0] > 1.0 && s[3] == 2.0);
        let s3: Vec<f64> = l.rung_samples(3).collect();
        assert_eq!(*s3.last().unwrap(), 8.0);
    }

    #[test]
    fn bounded_sequence_is_stable() {
        let l = SampleLadder::geometric(4, 2);
        let fit = LadderFit::from_rungs(&l, &[1.0, 0.5, 0.2, 0.1], FitMode::Sup);
        assert!(fit.stable());
        assert_eq!(fit.value(), 1.0);
        assert_eq!(fit.stable_from, 2.0);
    }

    #[test]
    fn growing_sequence_is_unstable() {
        let l = SampleLadder::geometric(4, 2);
        let fit = LadderFit::from_rungs(&l, &[1.0, 4.0, 16.0, 64.0], FitMode::Sup);
        assert!(!fit.stable());
        assert_eq!(fit.ratio, 4.0);
    }

    #[test]
    fn zero_sequence_counts_as_stable() {
        let l = SampleLadder::geometric(3, 2);
        let fit = LadderFit::from_rungs(&l, &[0.0, 0.0, 0.0], FitMode::Sup);
        assert!(fit.stable());
    }

    #[test]
    fn nan_poisons_the_fit() {
        let l = SampleLadder::geometric(3, 2);
        let fit = LadderFit::from_rungs(&l, &[1.0, f64::NAN, 1.0], FitMode::Sup);
        assert!(!fit.stable());
    }
}
