//! Complex-baseband channel models: AWGN, Rayleigh and Rician fading.
//!
//! Samplers draw one complex coefficient per call (block fading). The
//! closed-form densities, the Jakes Doppler spectrum and the Rician
//! autocorrelation are provided for validation of the samplers.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{bessel_i0e, bessel_j0, integrate};

/// A complex baseband sample (`re` = in-phase, `im` = quadrature).
pub type ComplexSample = Complex64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("invalid channel parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, ChannelError>;

fn default_doppler() -> f64 {
    10.0
}

/// Additive white Gaussian noise, `n ~ CN(0, n0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AwgnParams {
    pub n0: f64,
}

impl Default for AwgnParams {
    fn default() -> Self {
        AwgnParams { n0: 1.0 }
    }
}

impl AwgnParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.n0 > 0.0 && self.n0.is_finite()) {
            return Err(ChannelError::InvalidParameter(format!(
                "n0 must be positive and finite, got {}",
                self.n0
            )));
        }
        Ok(())
    }
}

/// Rayleigh fading with per-quadrature standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RayleighParams {
    pub sigma: f64,
    pub doppler_hz: f64,
}

impl Default for RayleighParams {
    fn default() -> Self {
        RayleighParams {
            sigma: 1.0,
            doppler_hz: default_doppler(),
        }
    }
}

impl RayleighParams {
    pub fn validate(&self) -> Result<()> {
        check_sigma(self.sigma)?;
        check_doppler(self.doppler_hz)
    }
}

/// Rician fading: line-of-sight `amplitude * e^{j phase}` plus a scattered
/// component `CN(0, 2 sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RicianParams {
    pub amplitude: f64,
    pub phase: f64,
    pub sigma: f64,
    pub doppler_hz: f64,
}

impl Default for RicianParams {
    fn default() -> Self {
        RicianParams {
            amplitude: 1.0,
            phase: 0.0,
            sigma: 1.0,
            doppler_hz: default_doppler(),
        }
    }
}

impl RicianParams {
    /// Parameters with a given K-factor and total mean power `A^2 + 2 sigma^2`.
    pub fn from_k_factor(k: f64, total_power: f64) -> Result<Self> {
        if !(k >= 0.0 && total_power > 0.0) {
            return Err(ChannelError::InvalidParameter(format!(
                "need k >= 0 and total power > 0, got k={k}, power={total_power}"
            )));
        }
        let sigma = (total_power / (2.0 * (k + 1.0))).sqrt();
        let amplitude = (2.0 * k).sqrt() * sigma;
        Ok(RicianParams {
            amplitude,
            sigma,
            ..Default::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_sigma(self.sigma)?;
        check_doppler(self.doppler_hz)?;
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(ChannelError::InvalidParameter(format!(
                "amplitude must be >= 0, got {}",
                self.amplitude
            )));
        }
        if !self.phase.is_finite() {
            return Err(ChannelError::InvalidParameter(
                "phase must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn mean_power(&self) -> f64 {
        self.amplitude * self.amplitude + 2.0 * self.sigma * self.sigma
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(ChannelError::InvalidParameter(format!(
            "sigma must be positive and finite, got {sigma}"
        )))
    }
}

fn check_doppler(fd: f64) -> Result<()> {
    if fd > 0.0 && fd.is_finite() {
        Ok(())
    } else {
        Err(ChannelError::InvalidParameter(format!(
            "doppler_hz must be positive, got {fd}"
        )))
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, std_per_quadrature: f64) -> ComplexSample {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * std_per_quadrature, im * std_per_quadrature)
}

/// Draws `n ~ CN(0, N0)` (variance `N0/2` per quadrature).
pub fn sample_awgn<R: Rng + ?Sized>(params: &AwgnParams, rng: &mut R) -> Result<ComplexSample> {
    params.validate()?;
    Ok(complex_gaussian(rng, (params.n0 / 2.0).sqrt()))
}

/// Draws `h = h_I + j h_Q` with `h_I, h_Q ~ N(0, sigma^2)`.
pub fn sample_rayleigh_gain<R: Rng + ?Sized>(
    params: &RayleighParams,
    rng: &mut R,
) -> Result<ComplexSample> {
    check_sigma(params.sigma)?;
    Ok(complex_gaussian(rng, params.sigma))
}

/// Draws `h = A e^{j theta} + h_NLOS`, `h_NLOS ~ CN(0, 2 sigma^2)`.
pub fn sample_rician_gain<R: Rng + ?Sized>(
    params: &RicianParams,
    rng: &mut R,
) -> Result<ComplexSample> {
    check_sigma(params.sigma)?;
    if !(params.amplitude >= 0.0) {
        return Err(ChannelError::InvalidParameter(format!(
            "amplitude must be >= 0, got {}",
            params.amplitude
        )));
    }
    let los = Complex64::from_polar(params.amplitude, params.phase);
    Ok(los + complex_gaussian(rng, params.sigma))
}

/// Rayleigh density `(r / sigma^2) exp(-r^2 / (2 sigma^2))`.
pub fn rayleigh_pdf(r: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if r < 0.0 {
        return Err(ChannelError::Domain(format!(
            "magnitude must be >= 0, got {r}"
        )));
    }
    let s2 = sigma * sigma;
    Ok(r / s2 * (-r * r / (2.0 * s2)).exp())
}

/// Rayleigh CDF `1 - exp(-r^2 / (2 sigma^2))`.
pub fn rayleigh_cdf(r: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if r <= 0.0 {
        return Ok(0.0);
    }
    Ok(-(-r * r / (2.0 * sigma * sigma)).exp_m1())
}

/// Rician density `(r/sigma^2) exp(-(r^2+A^2)/(2 sigma^2)) I0(r A / sigma^2)`.
///
/// Evaluated with the scaled Bessel function so large `r A / sigma^2` does
/// not overflow.
pub fn rician_pdf(r: f64, params: &RicianParams) -> Result<f64> {
    check_sigma(params.sigma)?;
    if r < 0.0 {
        return Err(ChannelError::Domain(format!(
            "magnitude must be >= 0, got {r}"
        )));
    }
    Ok(rician_pdf_unchecked(r, params.amplitude, params.sigma))
}

fn rician_pdf_unchecked(r: f64, a: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    let d = r - a;
    r / s2 * (-d * d / (2.0 * s2)).exp() * bessel_i0e(r * a / s2)
}

/// Upper end of the support used for numerical work: `A + 12 sigma`.
pub fn rician_support_end(params: &RicianParams) -> f64 {
    params.amplitude + 12.0 * params.sigma
}

/// Rician CDF by Gauss-Legendre integration of [`rician_pdf`].
pub fn rician_cdf(r: f64, params: &RicianParams) -> Result<f64> {
    check_sigma(params.sigma)?;
    if r <= 0.0 {
        return Ok(0.0);
    }
    let end = r.min(rician_support_end(params));
    let panels = ((end / params.sigma) * 8.0).ceil() as usize;
    let (a, s) = (params.amplitude, params.sigma);
    Ok(integrate(|x| rician_pdf_unchecked(x, a, s), 0.0, end, panels).min(1.0))
}

/// Tabulated Rician CDF for evaluating many points (KS tests).
///
/// The CDF is integrated on a uniform grid and interpolated with cubic
/// Hermite segments whose slopes are the exact density.
#[derive(Debug, Clone)]
pub struct RicianCdfTable {
    step: f64,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
}

impl RicianCdfTable {
    pub fn new(params: &RicianParams) -> Result<Self> {
        params.validate()?;
        let end = rician_support_end(params);
        let cells = 8192;
        let step = end / cells as f64;
        let (a, s) = (params.amplitude, params.sigma);
        let mut cdf = Vec::with_capacity(cells + 1);
        let mut pdf = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        pdf.push(rician_pdf_unchecked(0.0, a, s));
        for i in 0..cells {
            let x0 = i as f64 * step;
            acc += integrate(|x| rician_pdf_unchecked(x, a, s), x0, x0 + step, 1);
            cdf.push(acc);
            pdf.push(rician_pdf_unchecked(x0 + step, a, s));
        }
        Ok(RicianCdfTable { step, cdf, pdf })
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let pos = r / self.step;
        let i = pos.floor() as usize;
        if i + 1 >= self.cdf.len() {
            return self.cdf[self.cdf.len() - 1].min(1.0);
        }
        let t = pos - i as f64;
        let h = self.step;
        let (y0, y1) = (self.cdf[i], self.cdf[i + 1]);
        let (m0, m1) = (self.pdf[i] * h, self.pdf[i + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        v.clamp(0.0, 1.0)
    }
}

/// Jakes Doppler spectrum `1 / (pi f_D sqrt(1 - (f/f_D)^2))` for `|f| < f_D`.
pub fn jakes_psd(f: f64, doppler: f64) -> Result<f64> {
    check_doppler(doppler)?;
    let ratio = f / doppler;
    if ratio.abs() >= 1.0 {
        return Err(ChannelError::Domain(format!(
            "|f| must be below the maximum Doppler shift {doppler} Hz, got {f}"
        )));
    }
    Ok(1.0 / (PI * doppler * (1.0 - ratio * ratio).sqrt()))
}

/// Rician autocorrelation `A^2 + 2 sigma^2 J0(2 pi f_D tau)`.
pub fn rician_autocorrelation(tau: f64, params: &RicianParams) -> Result<f64> {
    params.validate()?;
    let a2 = params.amplitude * params.amplitude;
    Ok(a2 + 2.0 * params.sigma * params.sigma * bessel_j0(2.0 * PI * params.doppler_hz * tau))
}

/// Rician K-factor `A^2 / (2 sigma^2)`.
pub fn k_factor(params: &RicianParams) -> Result<f64> {
    check_sigma(params.sigma)?;
    Ok(params.amplitude * params.amplitude / (2.0 * params.sigma * params.sigma))
}

/// Moment-based K-factor estimate from complex gain samples.
///
/// Uses `gamma = Var(|h|^2) / E[|h|^2]^2 = (2K + 1) / (K + 1)^2`, inverted as
/// `K = sqrt(1 - gamma) / (1 - sqrt(1 - gamma))`.
pub fn estimate_k_factor(gains: &[ComplexSample]) -> f64 {
    let n = gains.len() as f64;
    let p: Vec<f64> = gains.iter().map(|h| h.norm_sqr()).collect();
    let m1 = p.iter().sum::<f64>() / n;
    let m2 = p.iter().map(|x| x * x).sum::<f64>() / n;
    let gamma = ((m2 - m1 * m1) / (m1 * m1)).clamp(0.0, 1.0);
    let root = (1.0 - gamma).sqrt();
    if root >= 1.0 {
        f64::INFINITY
    } else {
        root / (1.0 - root)
    }
}

/// Received sample `y = h x + n`.
pub fn apply_channel(x: ComplexSample, h: ComplexSample, n: ComplexSample) -> ComplexSample {
    h * x + n
}
