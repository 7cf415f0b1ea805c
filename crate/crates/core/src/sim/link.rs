use rand::Rng;

use crate::channel::{
    sample_awgn, sample_rayleigh_gain, sample_rician_gain, AwgnParams, ComplexSample,
};

use super::FadingSpec;

/// Logistic slope of the loss curve, per dB of SNR.
pub const PER_SLOPE_PER_DB: f64 = 1.0;

/// Probability that a transmission is lost at linear SNR `snr_linear`:
/// `1 / (1 + exp(slope * (snr_db - threshold_db)))`.
pub fn per_packet_error_probability(snr_linear: f64, threshold_db: f64) -> f64 {
    let snr_db = 10.0 * snr_linear.log10();
    let x = PER_SLOPE_PER_DB * (snr_db - threshold_db);
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Per-leg radio model: one fading draw per transmission, mapped to a loss
/// probability through the SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel {
    pub fading: FadingSpec,
    pub noise_n0: f64,
    pub threshold_db: Option<f64>,
}

impl LinkModel {
    /// Channel gain and noise power seen by one transmission. Each call
    /// consumes exactly two normal draws for the faded kinds.
    pub fn draw_channel<R: Rng + ?Sized>(&self, rng: &mut R) -> (ComplexSample, f64) {
        let unit = ComplexSample::new(1.0, 0.0);
        match self.fading {
            FadingSpec::None => (unit, 0.0),
            FadingSpec::Awgn(p) => {
                // the noise sample itself does not enter the SNR
                let _ = sample_awgn(&AwgnParams { n0: p.n0 }, rng);
                (unit, p.n0)
            }
            FadingSpec::Rayleigh(p) => (
                sample_rayleigh_gain(&p, rng).expect("validated fading"),
                self.noise_n0,
            ),
            FadingSpec::Rician(p) => (
                sample_rician_gain(&p, rng).expect("validated fading"),
                self.noise_n0,
            ),
        }
    }

    /// Probability that a transmission over gain `h` with noise power `n0`
    /// gets through.
    pub fn success_probability(&self, h: ComplexSample, n0: f64) -> f64 {
        match (self.fading, self.threshold_db) {
            (FadingSpec::None, _) | (_, None) => 1.0,
            (_, Some(th)) => 1.0 - per_packet_error_probability(h.norm_sqr() / n0, th),
        }
    }

    /// One transmission: fading draw, then a uniform draw decides delivery.
    pub fn attempt<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        if matches!(self.fading, FadingSpec::None) {
            return true;
        }
        let (h, n0) = self.draw_channel(rng);
        let p = self.success_probability(h, n0);
        rng.random::<f64>() < p
    }
}
