//! Synthetic six-axis force/torque traces and the preprocessing applied
//! before classification: per-channel zero-centering followed by a centred
//! moving average.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bt::TimeSeries;

use super::SimError;

pub const FT_CHANNELS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FtSynthParams {
    pub rate_hz: f64,
    pub noise_std: f64,
    /// Linear drift per second, scaled per channel.
    pub drift_per_s: f64,
    /// Peak of the contact bump on the axial force channel, newtons.
    pub contact_amplitude: f64,
}

impl Default for FtSynthParams {
    fn default() -> Self {
        Self {
            rate_hz: 60.0,
            noise_std: 0.05,
            drift_per_s: 0.02,
            contact_amplitude: 5.0,
        }
    }
}

/// `round(duration · rate)` samples of 6 channels: drift + white noise, plus a
/// Gaussian contact bump when `in_contact`.
pub fn synth_ft_trace<R: Rng + ?Sized>(
    duration: f64,
    params: &FtSynthParams,
    in_contact: bool,
    rng: &mut R,
) -> Result<TimeSeries, SimError> {
    let valid =
        duration.is_finite() && duration >= 0.0 && params.rate_hz > 0.0 && params.noise_std >= 0.0;
    if !valid {
        return Err(SimError::Param(
            "trace duration, rate and noise must be valid".into(),
        ));
    }
    let n = (duration * params.rate_hz).round() as usize;
    let period = 1.0 / params.rate_hz;
    let noise = Normal::new(0.0, params.noise_std).map_err(|e| SimError::Param(e.to_string()))?;
    let amplitude = if in_contact {
        params.contact_amplitude
    } else {
        0.0
    };
    let slopes: Vec<f64> = (0..FT_CHANNELS)
        .map(|c| params.drift_per_s * (1.0 - 0.3 * c as f64))
        .collect();
    let centre = duration / 2.0;
    let width = (duration / 6.0).max(period);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * period;
        let bump = amplitude * (-((t - centre) / width).powi(2) / 2.0).exp();
        let row = (0..FT_CHANNELS)
            .map(|c| {
                let axial = match c {
                    2 => bump,
                    5 => 0.1 * bump,
                    _ => 0.0,
                };
                slopes[c] * t + axial + noise.sample(rng)
            })
            .collect();
        samples.push(row);
    }
    Ok(TimeSeries { period, samples })
}

/// Subtracts each channel's mean.
pub fn zero_center(series: &TimeSeries) -> TimeSeries {
    let n = series.len();
    let mut out = series.clone();
    if n == 0 {
        return out;
    }
    for c in 0..series.channels() {
        let mean = series.samples.iter().map(|r| r[c]).sum::<f64>() / n as f64;
        for row in &mut out.samples {
            row[c] -= mean;
        }
    }
    out
}

/// Zero-centres each channel, then applies a centred moving average of
/// `window` samples whose support shrinks at the edges, then re-centres.
/// A window of 1 returns the zero-centred input unchanged.
pub fn preprocess_ft(series: &TimeSeries, window: usize) -> Result<TimeSeries, SimError> {
    let n = series.len();
    if window == 0 || window > n {
        return Err(SimError::Window { window, len: n });
    }
    let centred = zero_center(series);
    if window == 1 {
        return Ok(centred);
    }
    let left = (window - 1) / 2;
    let right = window - 1 - left;
    let mut smoothed = centred.clone();
    for c in 0..series.channels() {
        let col = centred.channel(c);
        let mut prefix = vec![0.0; n + 1];
        for i in 0..n {
            prefix[i + 1] = prefix[i] + col[i];
        }
        for i in 0..n {
            let lo = i.saturating_sub(left);
            let hi = (i + right + 1).min(n);
            smoothed.samples[i][c] = (prefix[hi] - prefix[lo]) / (hi - lo) as f64;
        }
    }
    Ok(zero_center(&smoothed))
}
