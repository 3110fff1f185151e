//! Automatic initial-parameter generation for multi-Lorentzian spectra.

use super::{FitError, FitModel};
use crate::num::Real;
use crate::odmr::OdmrSpectrum;

/// Seed parameters for a `MultiLorentzian(n_peaks)` fit of a spectrum.
///
/// Centers are placed at the deepest local minima of the moving-average
/// smoothed counts (window 5 bins); contrasts come from dip depth relative to
/// the baseline and widths from the half-depth crossings.
pub fn seed_multi_lorentzian<S: Real>(
    spec: &OdmrSpectrum<S>,
    n_peaks: usize,
) -> Result<Vec<S>, FitError<S>> {
    if n_peaks == 0 || spec.freqs.len() < 10 * n_peaks {
        return Err(FitError::DimensionMismatch);
    }
    let smoothed = moving_average(&spec.counts, 5);
    let n = smoothed.len();

    let baseline = {
        // top decile of smoothed counts as baseline estimate
        let mut sorted = smoothed.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = (n * 9) / 10;
        sorted[k.min(n - 1)]
    };

    // local minima of the smoothed trace
    let mut minima: Vec<(usize, S)> = Vec::new();
    for i in 1..n - 1 {
        if smoothed[i] < smoothed[i - 1] && smoothed[i] <= smoothed[i + 1] {
            minima.push((i, smoothed[i]));
        }
    }
    if minima.len() < n_peaks {
        return Err(FitError::TooFewDips { needed: n_peaks });
    }
    minima.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let mut picked: Vec<usize> = minima.iter().take(n_peaks).map(|&(i, _)| i).collect();
    picked.sort_unstable();

    let span = *spec.freqs.last().unwrap() - spec.freqs[0];
    let mut params = vec![baseline];
    for &i in &picked {
        let depth = baseline - smoothed[i];
        let half = smoothed[i] + depth / S::of(2.0);
        let mut left = i;
        while left > 0 && smoothed[left] < half {
            left -= 1;
        }
        let mut right = i;
        while right < n - 1 && smoothed[right] < half {
            right += 1;
        }
        let mut fwhm = spec.freqs[right] - spec.freqs[left];
        if !(fwhm > S::zero()) {
            fwhm = span / S::of(10.0);
        }
        let contrast = (depth / baseline)
            .max(S::of(1e-4))
            .min(S::of(0.999));
        params.push(spec.freqs[i]);
        params.push(fwhm);
        params.push(contrast);
    }

    // keep every seed inside the model's default bounds
    let bounds = FitModel::MultiLorentzian(n_peaks).default_bounds::<S>();
    for (p, b) in params.iter_mut().zip(&bounds) {
        *p = b.clamp(*p);
    }
    Ok(params)
}

fn moving_average<S: Real>(data: &[S], window: usize) -> Vec<S> {
    let half = window / 2;
    let n = data.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let sum: S = data[lo..hi].iter().copied().sum();
            sum / S::of((hi - lo) as f64)
        })
        .collect()
}
