//! Spatial model: interferer placement on the annulus `[eps, R]`, path-loss
//! power mapping, and the Poisson number of active links.
//!
//! Distances are measured in units of the tagged link length by default
//! (`c0 = 1`) and powers are normalized to unit noise variance.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{invalid, Result};
use crate::scalar::{db_to_linear, Real};
use crate::seed::rng_from_seed;

/// Receiver used by the tagged link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Detector {
    Mmse,
    ZeroForcing,
    PartialCsi,
}

impl Detector {
    pub fn as_str(self) -> &'static str {
        match self {
            Detector::Mmse => "mmse",
            Detector::ZeroForcing => "zf",
            Detector::PartialCsi => "partial-csi",
        }
    }
}

impl fmt::Display for Detector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Detector {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mmse" => Ok(Detector::Mmse),
            "zf" | "zero-forcing" => Ok(Detector::ZeroForcing),
            "partial-csi" | "partial_csi" | "pcsi" => Ok(Detector::PartialCsi),
            other => Err(invalid(format!("unknown detector {other:?} (expected mmse, zf or partial-csi)"))),
        }
    }
}

/// Physical and network parameters of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario<T> {
    /// Antennas per node.
    pub m: usize,
    /// Tagged link length.
    pub c0: T,
    /// Radius beyond which interference is neglected.
    pub radius: T,
    /// Minimum interferer distance.
    pub eps: T,
    /// Path-loss exponent.
    pub theta: T,
    /// Received SNR of the tagged link, `10 log10(α0 p0)` with unit noise.
    pub snr_db: T,
    /// Decoding threshold in dB.
    pub sinr_th_db: T,
    pub detector: Detector,
    /// Distance within which interferer channels are known (partial CSI).
    pub csi_range: Option<T>,
}

impl<T: Real> Default for Scenario<T> {
    /// `m = 4`, 20 dB SNR, 10 dB threshold, `c0 = 1`, `R = 3`, `eps = 0.1`,
    /// `theta = 4`, MMSE receiver, CSI range 2.
    fn default() -> Self {
        Self {
            m: 4,
            c0: T::one(),
            radius: T::lit(3.0),
            eps: T::lit(0.1),
            theta: T::lit(4.0),
            snr_db: T::lit(20.0),
            sinr_th_db: T::lit(10.0),
            detector: Detector::Mmse,
            csi_range: Some(T::lit(2.0)),
        }
    }
}

impl<T: Real> Scenario<T> {
    pub fn with_antennas(mut self, m: usize) -> Self {
        self.m = m;
        self
    }

    pub fn with_detector(mut self, detector: Detector) -> Self {
        self.detector = detector;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(invalid("m must be at least 1"));
        }
        let finite = [self.c0, self.radius, self.eps, self.theta, self.snr_db, self.sinr_th_db]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(invalid("scenario parameters must be finite"));
        }
        if !(self.eps > T::zero() && self.eps < self.c0 && self.c0 <= self.radius) {
            return Err(invalid(format!(
                "need 0 < eps < c0 <= R, got eps={}, c0={}, R={}",
                self.eps, self.c0, self.radius
            )));
        }
        if self.theta < T::lit(2.0) {
            return Err(invalid(format!("path-loss exponent theta must be >= 2, got {}", self.theta)));
        }
        if let Some(r) = self.csi_range {
            if !(r >= T::zero()) || !r.is_finite() {
                return Err(invalid(format!("csi_range must be a finite nonnegative distance, got {r}")));
            }
        }
        if self.detector == Detector::PartialCsi && self.csi_range.is_none() {
            return Err(invalid("partial-csi detector requires csi_range"));
        }
        Ok(())
    }

    /// `α0 p0`, the received power of the tagged link.
    pub fn signal_power(&self) -> T {
        db_to_linear(self.snr_db)
    }

    /// Linear decoding threshold.
    pub fn sinr_threshold(&self) -> T {
        db_to_linear(self.sinr_th_db)
    }

    /// `R² − eps²`.
    pub fn annulus_span(&self) -> T {
        self.radius * self.radius - self.eps * self.eps
    }

    /// Area `π R²` over which interferers are counted.
    pub fn disc_area(&self) -> T {
        T::PI() * self.radius * self.radius
    }

    /// Support `[(c0/R)^θ α0p0, (c0/eps)^θ α0p0]` of the interferer power.
    pub fn power_support(&self) -> (T, T) {
        let p0 = self.signal_power();
        (
            (self.c0 / self.radius).powf(self.theta) * p0,
            (self.c0 / self.eps).powf(self.theta) * p0,
        )
    }
}

/// Interferer distances with their received powers.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfererSet<T> {
    pub distances: Vec<T>,
    pub powers: Vec<T>,
}

impl<T: Real> InterfererSet<T> {
    pub fn sample(k: usize, scenario: &Scenario<T>, seed: u64) -> Result<Self> {
        let distances = sample_distances(k, scenario, seed);
        let powers = distances
            .iter()
            .map(|&c| received_power(c, scenario))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { distances, powers })
    }

    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }
}

/// `K` i.i.d. distances with density `2x / (R² − eps²)` on `[eps, R]`.
pub fn sample_distances<T: Real>(k: usize, scenario: &Scenario<T>, seed: u64) -> Vec<T> {
    sample_distances_with(k, scenario, &mut rng_from_seed(seed))
}

pub(crate) fn sample_distances_with<T: Real, R: Rng + ?Sized>(
    k: usize,
    scenario: &Scenario<T>,
    rng: &mut R,
) -> Vec<T> {
    let e2 = scenario.eps * scenario.eps;
    let span = scenario.annulus_span();
    (0..k)
        .map(|_| {
            let u = T::unit_uniform(rng);
            (e2 + u * span).sqrt().max(scenario.eps).min(scenario.radius)
        })
        .collect()
}

/// CDF of the interferer distance, `(x² − eps²) / (R² − eps²)` on its support.
pub fn distance_cdf<T: Real>(x: T, scenario: &Scenario<T>) -> T {
    if x <= scenario.eps {
        T::zero()
    } else if x >= scenario.radius {
        T::one()
    } else {
        (x * x - scenario.eps * scenario.eps) / scenario.annulus_span()
    }
}

/// `(c0 / ck)^θ · α0 p0`.
pub fn received_power<T: Real>(ck: T, scenario: &Scenario<T>) -> Result<T> {
    if !(ck >= scenario.eps && ck <= scenario.radius) {
        return Err(invalid(format!(
            "interferer distance {ck} outside [{}, {}]",
            scenario.eps, scenario.radius
        )));
    }
    Ok((scenario.c0 / ck).powf(scenario.theta) * scenario.signal_power())
}

/// Density of a single interferer's received power for general `theta`.
pub fn interference_power_density<T: Real>(x: T, scenario: &Scenario<T>) -> T {
    let (lo, hi) = scenario.power_support();
    if !(x >= lo && x <= hi) {
        return T::zero();
    }
    let theta = scenario.theta;
    let two = T::lit(2.0);
    two * scenario.signal_power().powf(two / theta) * scenario.c0 * scenario.c0
        / (theta * scenario.annulus_span() * x.powf((theta + two) / theta))
}

/// The `theta = 4` specialization of [`interference_power_density`]:
/// `sqrt(α0p0) c0² / (2 (R² − eps²) x^{3/2})`.
pub fn interference_power_density_theta4<T: Real>(x: T, scenario: &Scenario<T>) -> T {
    let p0 = scenario.signal_power();
    let c0 = scenario.c0;
    let lo = (c0 / scenario.radius).powi(4) * p0;
    let hi = (c0 / scenario.eps).powi(4) * p0;
    if !(x >= lo && x <= hi) {
        return T::zero();
    }
    p0.sqrt() * c0 * c0 / (T::lit(2.0) * scenario.annulus_span() * x * x.sqrt())
}

/// Poisson probability mass `mean^n e^{-mean} / n!`.
pub fn poisson_pmf<T: Real>(n: usize, mean: T) -> T {
    if mean <= T::zero() {
        return if n == 0 { T::one() } else { T::zero() };
    }
    let ln_fact: T = (2..=n).map(|k| T::from_usize_lossy(k).ln()).sum();
    (T::from_usize_lossy(n) * mean.ln() - mean - ln_fact).exp()
}

/// Expected number of active links in the disc, `K0 = rho0 π R²`.
pub fn mean_active_count<T: Real>(rho0: T, scenario: &Scenario<T>) -> T {
    rho0 * scenario.disc_area()
}

/// Total number of active links in the disc (tagged link included), Poisson
/// with mean `rho0 π R²`; a count `n ≥ 1` means `n − 1` interferers.
///
/// Drawn by CDF inversion of a single uniform, so for a fixed seed the count
/// is nondecreasing in `rho0`.
pub fn sample_active_count<T: Real>(rho0: T, scenario: &Scenario<T>, seed: u64) -> Result<usize> {
    if !(rho0 >= T::zero()) || !rho0.is_finite() {
        return Err(invalid(format!("density rho0 must be finite and >= 0, got {rho0}")));
    }
    let mean = mean_active_count(rho0, scenario);
    let u: f64 = rng_from_seed(seed).random();
    Ok(poisson_inverse_cdf(u, mean.to_f64_lossy()))
}

pub(crate) fn poisson_inverse_cdf(u: f64, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    // Start at the mode and walk outward in probability; the sum is always
    // formed from the left to keep the inversion monotone in `u`.
    let mut n = 0usize;
    let mut p = (-mean).exp();
    if p > 0.0 {
        let mut cdf = p;
        while u >= cdf {
            n += 1;
            p *= mean / n as f64;
            cdf += p;
            if p == 0.0 && n as f64 > mean {
                break;
            }
        }
        return n;
    }
    // e^{-mean} underflows: fall back to log-space terms.
    let mut cdf = 0.0;
    loop {
        cdf += poisson_pmf(n, mean);
        if u < cdf || (n as f64 > mean + 40.0 * mean.sqrt() + 50.0) {
            return n;
        }
        n += 1;
    }
}
