//! Complex Gaussian channel matrices, their dominant singular mode, and the
//! moments of the largest squared singular value.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::{OnceLock, RwLock};

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_eigenvalues, norm_sqr, real_determinant, ComplexMatrix};
use crate::quad;
use crate::scalar::{complex_gaussian, Real};
use crate::seed::{mix, rng_from_seed};

/// Default Monte Carlo sample count for [`lambda_moments`].
pub const DEFAULT_MOMENT_SAMPLES: u64 = 1_000_000;
/// Default seed for [`lambda_moments`].
pub const DEFAULT_MOMENT_SEED: u64 = 0x5EED_1A4B_DA00_0001;
/// Smallest sample count accepted by the Monte Carlo backend.
pub const MIN_MOMENT_SAMPLES: u64 = 10_000;

/// Draws an `m × m` matrix with i.i.d. unit-variance circularly-symmetric
/// complex Gaussian entries. Identical seeds give bit-identical matrices.
pub fn sample_channel<T: Real>(m: usize, seed: u64) -> Result<ComplexMatrix<T>> {
    if m == 0 {
        return Err(invalid("antenna count m must be at least 1"));
    }
    Ok(sample_channel_with(m, &mut rng_from_seed(seed)))
}

pub(crate) fn sample_channel_with<T: Real, R: Rng + ?Sized>(m: usize, rng: &mut R) -> ComplexMatrix<T> {
    ComplexMatrix::from_fn(m, m, |_, _| complex_gaussian(rng))
}

/// Largest singular value with its left/right singular vectors.
///
/// The phase of `u1` is fixed so that its first nonzero entry is real and
/// nonnegative; `v1` carries the matching phase so that `H v1 = lambda1 u1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DominantMode<T> {
    pub lambda1: T,
    pub u1: Vec<Complex<T>>,
    pub v1: Vec<Complex<T>>,
}

impl<T: Real> DominantMode<T> {
    pub fn m(&self) -> usize {
        self.u1.len()
    }

    /// `lambda1²`, the largest eigenvalue of `H H^H`.
    pub fn gain(&self) -> T {
        self.lambda1 * self.lambda1
    }
}

pub fn dominant_mode<T: Real>(h: &ComplexMatrix<T>) -> Result<DominantMode<T>> {
    if !h.is_square() {
        return Err(invalid(format!(
            "channel matrix must be square, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    if !h.is_finite() {
        return Err(invalid("channel matrix has non-finite entries"));
    }
    let m = h.rows();
    let eig = hermitian_eigen(&h.gram_outer())?;
    let top = eig.values[0].max(T::zero());
    let lambda1 = top.sqrt();
    let mut u1 = eig.vectors.column(0);

    let threshold = T::epsilon();
    if let Some(first) = u1.iter().find(|z| z.norm() > threshold).copied() {
        let rotate = first.conj() / first.norm();
        for z in u1.iter_mut() {
            *z = *z * rotate;
        }
    }
    let nrm = norm_sqr(&u1).sqrt();
    for z in u1.iter_mut() {
        *z = *z / nrm;
    }

    let v1 = if lambda1 > T::zero() {
        let mut v = h.adjoint().matvec(&u1);
        let nv = norm_sqr(&v).sqrt();
        for z in v.iter_mut() {
            *z = *z / nv;
        }
        v
    } else {
        let mut v = vec![Complex::new(T::zero(), T::zero()); m];
        v[0] = Complex::new(T::one(), T::zero());
        v
    };
    Ok(DominantMode { lambda1, u1, v1 })
}

/// How a [`LambdaMoments`] value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMethod {
    MonteCarlo { samples: u64, seed: u64 },
    Exact,
}

/// `E[λ²]` and `E[λ⁴]` for the dominant singular value of an `m × m`
/// unit-variance complex Gaussian matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaMoments<T> {
    pub m: usize,
    pub moment1: T,
    pub moment2: T,
    pub method: MomentMethod,
}

impl<T: Real> LambdaMoments<T> {
    /// Default backend: cached Monte Carlo with [`DEFAULT_MOMENT_SAMPLES`].
    pub fn for_antennas(m: usize) -> Result<Self> {
        Self::monte_carlo(m, DEFAULT_MOMENT_SAMPLES, DEFAULT_MOMENT_SEED)
    }

    pub fn monte_carlo(m: usize, samples: u64, seed: u64) -> Result<Self> {
        Ok(Self {
            m,
            moment1: lambda_moments(m, 1, samples, seed)?,
            moment2: lambda_moments(m, 2, samples, seed)?,
            method: MomentMethod::MonteCarlo { samples, seed },
        })
    }

    pub fn exact(m: usize) -> Result<Self> {
        Ok(Self {
            m,
            moment1: lambda_moment_exact(m, 1)?,
            moment2: lambda_moment_exact(m, 2)?,
            method: MomentMethod::Exact,
        })
    }

    /// `Var(λ²) = E[λ⁴] − E[λ²]²`.
    pub fn gain_variance(&self) -> T {
        self.moment2 - self.moment1 * self.moment1
    }
}

/// Monte Carlo estimate of `E[(λ²)^tau]`, `tau ∈ {1, 2}`.
///
/// Sample `i` is the matrix drawn from `mix(seed, i)`; the estimate is
/// computed in `f64`, cached per `(m, tau, samples, seed)` in the process-wide
/// [`MomentCache`], and independent of the rayon thread count.
pub fn lambda_moments<T: Real>(m: usize, tau: u32, samples: u64, seed: u64) -> Result<T> {
    if !(1..=2).contains(&tau) {
        return Err(Error::UnsupportedMoment(tau));
    }
    if m == 0 {
        return Err(invalid("antenna count m must be at least 1"));
    }
    if samples < MIN_MOMENT_SAMPLES {
        return Err(invalid(format!(
            "Monte Carlo moment backend needs at least {MIN_MOMENT_SAMPLES} samples, got {samples}"
        )));
    }
    let cache = MomentCache::global();
    let key = MomentKey { m, tau, samples, seed };
    if let Some(v) = cache.get(&key) {
        return Ok(T::lit(v));
    }
    let (s1, s2) = sample_gain_moments(m, samples, seed)?;
    cache.insert(MomentKey { tau: 1, ..key }, s1);
    cache.insert(MomentKey { tau: 2, ..key }, s2);
    Ok(T::lit(if tau == 1 { s1 } else { s2 }))
}

const MOMENT_CHUNK: u64 = 4096;

fn sample_gain_moments(m: usize, samples: u64, seed: u64) -> Result<(f64, f64)> {
    let chunks = samples.div_ceil(MOMENT_CHUNK);
    let partial: Vec<Result<(f64, f64)>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * MOMENT_CHUNK;
            let hi = (lo + MOMENT_CHUNK).min(samples);
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for i in lo..hi {
                let mut rng = rng_from_seed(mix(seed, i));
                let h: ComplexMatrix<f64> = sample_channel_with(m, &mut rng);
                let x = largest_gain(&h)?;
                s1 += x;
                s2 += x * x;
            }
            Ok((s1, s2))
        })
        .collect();
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for p in partial {
        let (a, b) = p?;
        s1 += a;
        s2 += b;
    }
    let n = samples as f64;
    Ok((s1 / n, s2 / n))
}

/// Largest eigenvalue of `H H^H`.
pub(crate) fn largest_gain<T: Real>(h: &ComplexMatrix<T>) -> Result<T> {
    if h.rows() == 1 {
        return Ok(h[(0, 0)].norm_sqr());
    }
    Ok(hermitian_eigenvalues(&h.gram_outer())?[0])
}

/// Regularized lower incomplete gamma `P(s, x)` for integer `s ≥ 1`.
fn lower_gamma_regularized_int<T: Real>(s: usize, x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    let sf = T::from_usize_lossy(s);
    if x < sf {
        // P = e^{-x} Σ_{k≥s} x^k / k!
        let ln_fact: T = (2..=s).map(|k| T::from_usize_lossy(k).ln()).sum();
        let mut term = (-x + sf * x.ln() - ln_fact).exp();
        let mut sum = term;
        let mut k = s;
        loop {
            k += 1;
            term = term * x / T::from_usize_lossy(k);
            sum = sum + term;
            if term <= sum * T::epsilon() || k > s + 10_000 {
                break;
            }
        }
        sum.min(T::one())
    } else {
        // P = 1 − e^{-x} Σ_{k<s} x^k / k!
        let mut term = T::one();
        let mut sum = T::one();
        for k in 1..s {
            term = term * x / T::from_usize_lossy(k);
            sum = sum + term;
        }
        (T::one() - (-x).exp() * sum).max(T::zero())
    }
}

/// CDF of the largest eigenvalue of `H H^H` for an `m × m` unit-variance
/// complex Gaussian `H` (Khatri's determinant form with `n = m`).
pub fn largest_gain_cdf<T: Real>(m: usize, x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    let mut entries = Vec::with_capacity(m * m);
    for i in 1..=m {
        for j in 1..=m {
            let s = i + j - 1;
            let gamma_s: T = (1..s).map(T::from_usize_lossy).fold(T::one(), |a, b| a * b);
            entries.push(gamma_s * lower_gamma_regularized_int(s, x));
        }
    }
    let det = real_determinant(entries, m);
    let mut norm = T::one();
    for k in 1..=m {
        let f: T = (1..=(m - k)).map(T::from_usize_lossy).fold(T::one(), |a, b| a * b);
        norm = norm * f * f;
    }
    (det / norm).max(T::zero()).min(T::one())
}

/// Exact `E[(λ²)^tau]` by integrating the survival function of
/// [`largest_gain_cdf`]: `E[X^τ] = ∫ τ x^{τ−1} (1 − F(x)) dx`.
pub fn lambda_moment_exact<T: Real>(m: usize, tau: u32) -> Result<T> {
    if !(1..=2).contains(&tau) {
        return Err(Error::UnsupportedMoment(tau));
    }
    if m == 0 {
        return Err(invalid("antenna count m must be at least 1"));
    }
    let upper = T::from_usize_lossy(60 + 12 * m);
    let tau_t = T::from_usize_lossy(tau as usize);
    let tol = T::lit(1e-11).max(T::epsilon() * T::lit(100.0)) * T::from_usize_lossy(m * m);
    let r = quad::integrate(
        |x: T| {
            let weight = if tau == 1 { T::one() } else { tau_t * x };
            weight * (T::one() - largest_gain_cdf(m, x))
        },
        T::zero(),
        upper,
        tol,
    );
    Ok(r.value)
}

/// Moments of the squared modulus of entries of a uniformly distributed unit
/// vector in `C^m`: `(E|u_i|², E|u_i|⁴, E|u_i|²|u_j|²)`.
///
/// The cross moment is undefined for `m = 1` and returned as 0.
pub fn sphere_entry_moments<T: Real>(m: usize) -> (T, T, T) {
    let mf = T::from_usize_lossy(m);
    let e2 = T::one() / mf;
    let denom = mf * (mf + T::one());
    let e4 = T::lit(2.0) / denom;
    let cross = if m >= 2 { T::one() / denom } else { T::zero() };
    (e2, e4, cross)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MomentKey {
    pub m: usize,
    pub tau: u32,
    pub samples: u64,
    pub seed: u64,
}

/// Cache of Monte Carlo moment estimates.
///
/// Values are deterministic for a key, so concurrent writers racing on the
/// same key store identical values.
#[derive(Debug, Default)]
pub struct MomentCache {
    values: RwLock<HashMap<MomentKey, f64>>,
}

impl MomentCache {
    pub fn global() -> &'static MomentCache {
        static CACHE: OnceLock<MomentCache> = OnceLock::new();
        CACHE.get_or_init(MomentCache::default)
    }

    pub fn get(&self, key: &MomentKey) -> Option<f64> {
        self.values.read().ok()?.get(key).copied()
    }

    pub fn insert(&self, key: MomentKey, value: f64) {
        if let Ok(mut guard) = self.values.write() {
            guard.insert(key, value);
        }
    }

    pub fn len(&self) -> usize {
        self.values.read().map(|g| g.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Serializes as one `m,tau,samples,seed,value` record per line, sorted
    /// by key.
    pub fn to_text(&self) -> String {
        let guard = match self.values.read() {
            Ok(g) => g,
            Err(_) => return String::new(),
        };
        let mut keys: Vec<_> = guard.keys().copied().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            let _ = writeln!(out, "{},{},{},{},{:?}", k.m, k.tau, k.samples, k.seed, guard[&k]);
        }
        out
    }

    /// Merges records parsed from `text` into the cache.
    pub fn merge_text(&self, text: &str) -> Result<usize> {
        let mut n = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::Cache(format!("malformed record on line {}: {line:?}", lineno + 1));
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(bad());
            }
            let key = MomentKey {
                m: fields[0].parse().map_err(|_| bad())?,
                tau: fields[1].parse().map_err(|_| bad())?,
                samples: fields[2].parse().map_err(|_| bad())?,
                seed: fields[3].parse().map_err(|_| bad())?,
            };
            let value: f64 = fields[4].parse().map_err(|_| bad())?;
            if !value.is_finite() {
                return Err(bad());
            }
            self.insert(key, value);
            n += 1;
        }
        Ok(n)
    }

    /// Loads records from `path`; a missing file is not an error.
    pub fn load(&self, path: &Path) -> Result<usize> {
        match std::fs::read_to_string(path) {
            Ok(text) => self.merge_text(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(0),
            Err(e) => Err(Error::Cache(format!("{}: {e}", path.display()))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_antennas_rejected() {
        assert!(matches!(sample_channel::<f64>(0, 1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn channel_is_deterministic() {
        let a = sample_channel::<f64>(4, 7).unwrap();
        let b = sample_channel::<f64>(4, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_channel::<f64>(4, 8).unwrap());
    }

    #[test]
    fn identity_mode() {
        let d = dominant_mode(&ComplexMatrix::<f64>::identity(3)).unwrap();
        assert!((d.lambda1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rank_one_mode() {
        let u = [Complex::new(0.6, 0.0), Complex::new(0.0, 0.8)];
        let s = 0.5f64.sqrt();
        let v = [Complex::new(s, 0.0), Complex::new(0.0, -s)];
        let h = ComplexMatrix::from_fn(2, 2, |i, j| u[i] * v[j].conj() * 2.0);
        let d = dominant_mode(&h).unwrap();
        assert!((d.lambda1 - 2.0).abs() < 1e-12);
        // first entry of u is already real positive, so the phase matches exactly
        for (a, b) in d.u1.iter().zip(&u) {
            assert!((a - b).norm() < 1e-12);
        }
        let hv = h.matvec(&d.v1);
        for (x, y) in hv.iter().zip(&d.u1) {
            assert!((x - y * d.lambda1).norm() < 1e-12);
        }
    }

    #[test]
    fn phase_convention() {
        for seed in 0..20 {
            let h = sample_channel::<f64>(4, seed).unwrap();
            let d = dominant_mode(&h).unwrap();
            assert!(d.u1[0].im.abs() < 1e-14 && d.u1[0].re >= 0.0);
        }
    }

    #[test]
    fn unsupported_tau() {
        assert_eq!(lambda_moments::<f64>(2, 3, 10_000, 1), Err(Error::UnsupportedMoment(3)));
        assert_eq!(lambda_moment_exact::<f64>(2, 0), Err(Error::UnsupportedMoment(0)));
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(lambda_moments::<f64>(2, 1, 100, 1), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn exact_single_antenna() {
        // |h|² ~ Exp(1)
        let e1: f64 = lambda_moment_exact(1, 1).unwrap();
        let e2: f64 = lambda_moment_exact(1, 2).unwrap();
        assert!((e1 - 1.0).abs() < 1e-10);
        assert!((e2 - 2.0).abs() < 1e-10);
    }

    #[test]
    fn exact_two_antennas() {
        // Closed forms for the 2×2 case: E[λ²] = 7/2, E[λ⁴] = 31/2.
        let e1: f64 = lambda_moment_exact(2, 1).unwrap();
        let e2: f64 = lambda_moment_exact(2, 2).unwrap();
        assert!((e1 - 3.5).abs() < 1e-9, "{e1}");
        assert!((e2 - 15.5).abs() < 1e-8, "{e2}");
    }

    #[test]
    fn cdf_is_monotone() {
        let mut prev = 0.0;
        for i in 0..200 {
            let f = largest_gain_cdf(4, i as f64 * 0.2);
            assert!(f >= prev - 1e-13 && (0.0..=1.0).contains(&f));
            prev = f;
        }
        assert!(prev > 1.0 - 1e-9);
    }

    #[test]
    fn sphere_moments_values() {
        let (a, b, c) = sphere_entry_moments::<f64>(2);
        assert!((a - 0.5).abs() < 1e-15 && (b - 1.0 / 3.0).abs() < 1e-15 && (c - 1.0 / 6.0).abs() < 1e-15);
        let (a, b, c) = sphere_entry_moments::<f64>(4);
        assert!((a - 0.25).abs() < 1e-15 && (b - 0.1).abs() < 1e-15 && (c - 0.05).abs() < 1e-15);
        assert_eq!(sphere_entry_moments::<f64>(1).2, 0.0);
    }

    #[test]
    fn cache_text_roundtrip() {
        let cache = MomentCache::default();
        cache.insert(MomentKey { m: 2, tau: 1, samples: 10_000, seed: 3 }, 3.4999);
        cache.insert(MomentKey { m: 2, tau: 2, samples: 10_000, seed: 3 }, 15.2);
        let text = cache.to_text();
        assert_eq!(text, "2,1,10000,3,3.4999\n2,2,10000,3,15.2\n");
        let other = MomentCache::default();
        assert_eq!(other.merge_text(&text).unwrap(), 2);
        assert_eq!(other.to_text(), text);
        assert!(other.merge_text("1,2,3\n").is_err());
    }
}
