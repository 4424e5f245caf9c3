//! FSO channel: fog attenuation, the rate lower bound and the service
//! radius.
//!
//! Attenuation follows the Beer-Lambert law with the visibility-based
//! extinction coefficient `β̃ = (3.91/V)·(λ/550 nm)^(−p)` in dB/km, where the
//! size-distribution exponent `p` comes from the Kruse model. The achievable
//! rate at slant range `d` is the intensity-modulation lower bound
//!
//! ```text
//! R = B/(2 ln 2) · ln(1 + k1·exp(−k2·d)),   k2 = 2β
//! ```
//!
//! where `k1` depends on the average optical SNR `γ` and the average-to-peak
//! ratio `α`.

use core::f64::consts::{E, LN_10, LN_2, PI};

use thiserror::Error;

use crate::math;
use crate::Vec2;

/// Reference wavelength of the visibility definition.
const VISIBILITY_REFERENCE_NM: f64 = 550.0;

/// Absolute tolerance on μ* for the bisection.
const MU_STAR_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ChannelError {
    #[error("visibility must be positive, got {0} km")]
    NonPositiveVisibility(f64),
    #[error("wavelength must be positive, got {0} nm")]
    NonPositiveWavelength(f64),
    #[error("average optical SNR must be positive, got {0}")]
    NonPositiveSnr(f64),
    #[error("average-to-peak ratio must lie in (0, 1/2) ∪ (1/2, 1), got {0}")]
    AprOutOfRange(f64),
    #[error("μ* is defined only for 0 < α < 1/2, got {0}")]
    MuStarDomain(f64),
    #[error("bandwidth must be positive, got {0} Hz")]
    NonPositiveBandwidth(f64),
    #[error("UAV altitude {uav} m must exceed terminal altitude {terminal} m")]
    AltitudeOrder { uav: f64, terminal: f64 },
    #[error("rate threshold must be positive, got {0} bit/s")]
    NonPositiveThreshold(f64),
    #[error("rate threshold {threshold} bit/s exceeds the rate {peak} bit/s available directly overhead")]
    RateInfeasible { threshold: f64, peak: f64 },
}

/// Weather state seen by the optical beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atmosphere {
    visibility_km: f64,
    wavelength_nm: f64,
}

impl Atmosphere {
    pub const DEFAULT_WAVELENGTH_NM: f64 = 1550.0;

    pub fn new(visibility_km: f64, wavelength_nm: f64) -> Result<Self, ChannelError> {
        if !(visibility_km > 0.0) {
            return Err(ChannelError::NonPositiveVisibility(visibility_km));
        }
        if !(wavelength_nm > 0.0) {
            return Err(ChannelError::NonPositiveWavelength(wavelength_nm));
        }
        Ok(Atmosphere { visibility_km, wavelength_nm })
    }

    /// Atmosphere at the default 1550 nm wavelength.
    pub fn with_visibility(visibility_km: f64) -> Result<Self, ChannelError> {
        Atmosphere::new(visibility_km, Self::DEFAULT_WAVELENGTH_NM)
    }

    pub fn visibility_km(&self) -> f64 {
        self.visibility_km
    }

    pub fn wavelength_nm(&self) -> f64 {
        self.wavelength_nm
    }
}

/// Extinction coefficient in both customary units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attenuation {
    pub db_per_km: f64,
    pub per_m: f64,
}

/// Kruse size-distribution exponent `p` for a visibility in km.
pub fn kruse_exponent(visibility_km: f64) -> Result<f64, ChannelError> {
    if !(visibility_km > 0.0) {
        return Err(ChannelError::NonPositiveVisibility(visibility_km));
    }
    Ok(if visibility_km > 50.0 {
        1.6
    } else if visibility_km > 6.0 {
        1.3
    } else {
        0.585 * math::cbrt(visibility_km)
    })
}

pub fn attenuation(atmosphere: &Atmosphere) -> Attenuation {
    // The constructor already rejected non-positive visibility.
    let p = kruse_exponent(atmosphere.visibility_km).unwrap_or(0.0);
    let ratio = atmosphere.wavelength_nm / VISIBILITY_REFERENCE_NM;
    let db_per_km = 3.91 / atmosphere.visibility_km * math::powf(ratio, -p);
    Attenuation { db_per_km, per_m: db_per_km * LN_10 / 1e4 }
}

/// Average-to-peak ratio as a function of the auxiliary parameter μ:
/// `α(μ) = 1/μ − e^(−μ)/(1 − e^(−μ))`.
///
/// Strictly decreasing from 1/2 (μ → 0) to 0 (μ → ∞).
pub fn apr_of_mu(mu: f64) -> f64 {
    1.0 / mu - 1.0 / math::expm1(mu)
}

/// Unique μ* > 0 with `α(μ*) = alpha`.
///
/// Bisection on a bracket that starts at `[1e-8, 1]` and doubles its upper
/// end until the sign changes.
pub fn solve_mu_star(alpha: f64) -> Result<f64, ChannelError> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(ChannelError::MuStarDomain(alpha));
    }
    let f = |mu: f64| apr_of_mu(mu) - alpha;
    let mut lo = 1e-8;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > MU_STAR_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Convert an SNR given in dB to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    math::powf(10.0, db / 10.0)
}

/// The `k1` coefficient of the rate bound.
pub fn compute_k1(gamma_linear: f64, alpha: f64) -> Result<f64, ChannelError> {
    if !(gamma_linear > 0.0) {
        return Err(ChannelError::NonPositiveSnr(gamma_linear));
    }
    let gamma_sq = gamma_linear * gamma_linear;
    if alpha > 0.0 && alpha < 0.5 {
        let mu = solve_mu_star(alpha)?;
        let shape = -math::expm1(-mu) / mu;
        Ok(math::exp(2.0 * alpha * mu) / (2.0 * PI * E) * shape * shape * gamma_sq / (alpha * alpha))
    } else if alpha > 0.5 && alpha < 1.0 {
        Ok(gamma_sq / (2.0 * PI * E * alpha * alpha))
    } else {
        Err(ChannelError::AprOutOfRange(alpha))
    }
}

/// Raw link parameters, before the derived constants are computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub atmosphere: Atmosphere,
    /// Average optical SNR γ = ε/σ, linear.
    pub gamma_linear: f64,
    /// Average-to-peak optical power ratio α = ε/Λ.
    pub alpha: f64,
    pub bandwidth_hz: f64,
    pub h_uav_m: f64,
    pub h_term_m: f64,
}

impl LinkParams {
    /// The reference link (30 dB, α = 1/4, 1 MHz, 1550 nm, 100 m altitude
    /// difference) at the given visibility.
    pub fn reference(visibility_km: f64) -> Result<Self, ChannelError> {
        Ok(LinkParams {
            atmosphere: Atmosphere::with_visibility(visibility_km)?,
            gamma_linear: db_to_linear(30.0),
            alpha: 0.25,
            bandwidth_hz: 1e6,
            h_uav_m: 110.0,
            h_term_m: 10.0,
        })
    }
}

/// A point-to-point air-to-ground FSO link with its derived constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsoLink {
    params: LinkParams,
    kruse_p: f64,
    attenuation: Attenuation,
    k1: f64,
    k2: f64,
    mu_star: Option<f64>,
}

impl FsoLink {
    pub fn new(params: LinkParams) -> Result<Self, ChannelError> {
        if !(params.bandwidth_hz > 0.0) {
            return Err(ChannelError::NonPositiveBandwidth(params.bandwidth_hz));
        }
        if !(params.h_uav_m > params.h_term_m) {
            return Err(ChannelError::AltitudeOrder { uav: params.h_uav_m, terminal: params.h_term_m });
        }
        let kruse_p = kruse_exponent(params.atmosphere.visibility_km())?;
        let attenuation = attenuation(&params.atmosphere);
        let k1 = compute_k1(params.gamma_linear, params.alpha)?;
        let mu_star = if params.alpha < 0.5 { Some(solve_mu_star(params.alpha)?) } else { None };
        Ok(FsoLink { params, kruse_p, attenuation, k1, k2: 2.0 * attenuation.per_m, mu_star })
    }

    pub fn params(&self) -> &LinkParams {
        &self.params
    }

    pub fn kruse_p(&self) -> f64 {
        self.kruse_p
    }

    pub fn attenuation(&self) -> Attenuation {
        self.attenuation
    }

    pub fn beta_per_m(&self) -> f64 {
        self.attenuation.per_m
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    pub fn mu_star(&self) -> Option<f64> {
        self.mu_star
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.params.bandwidth_hz
    }

    /// `H_U − H_T`.
    pub fn height_difference_m(&self) -> f64 {
        self.params.h_uav_m - self.params.h_term_m
    }

    /// Rate prefactor `B / (2 ln 2)`.
    pub fn rate_scale(&self) -> f64 {
        self.params.bandwidth_hz / (2.0 * LN_2)
    }

    /// Slant range to the terminal from horizontal position `q`.
    pub fn slant_range_m(&self, q: Vec2) -> f64 {
        math::hypot(self.height_difference_m(), q.norm())
    }

    pub fn rate_bps(&self, q: Vec2) -> f64 {
        let d = self.slant_range_m(q);
        self.rate_scale() * math::ln_1p(self.k1 * math::exp(-self.k2 * d))
    }

    /// High-SNR linearization `B/(2 ln 2)·(ln k1 − k2·d)`. Not clipped at
    /// zero.
    pub fn rate_high_snr_bps(&self, q: Vec2) -> f64 {
        let d = self.slant_range_m(q);
        self.rate_scale() * (math::ln(self.k1) - self.k2 * d)
    }

    pub fn spectral_efficiency(&self, q: Vec2) -> f64 {
        self.rate_bps(q) / self.params.bandwidth_hz
    }

    /// Horizontal radius `d(R_th)` inside which the rate meets `threshold_bps`.
    pub fn service_radius_m(&self, threshold_bps: f64) -> Result<f64, ChannelError> {
        if !(threshold_bps > 0.0) {
            return Err(ChannelError::NonPositiveThreshold(threshold_bps));
        }
        // Solve R(d) = threshold for the slant range first.
        let gain = math::expm1(2.0 * LN_2 * threshold_bps / self.params.bandwidth_hz) / self.k1;
        let slant = -math::ln(gain) / self.k2;
        let h = self.height_difference_m();
        let radicand = slant * slant - h * h;
        // ln(gain) < 0 means the threshold sits below the peak rate; a
        // positive log would put the solution on the wrong branch.
        if !(gain < 1.0) || radicand < 0.0 {
            let peak = self.rate_bps(Vec2::ZERO);
            if threshold_bps <= peak && radicand > -1e-9 * h * h {
                return Ok(0.0);
            }
            return Err(ChannelError::RateInfeasible { threshold: threshold_bps, peak });
        }
        Ok(math::sqrt(radicand))
    }
}
