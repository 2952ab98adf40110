//! Post-detection SINR of the tagged stream for MMSE, zero-forcing and
//! partial-CSI linear receivers.
//!
//! The tagged transmitter beamforms on the dominant right singular vector of
//! its own channel, so the tagged stream arrives along `λ1 u1`. Each
//! interferer beamforms on its own link, which makes its effective channel at
//! the tagged receiver an i.i.d. unit-variance Gaussian vector `ĥ_k`.

use num_complex::Complex;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::geometry::{received_power, sample_distances_with, Detector, Scenario};
use crate::linalg::{hermitian_eigen, inner, norm_sqr, orthonormal_basis, Cholesky, ComplexMatrix};
use crate::randmat::{dominant_mode, sample_channel_with, DominantMode};
use crate::scalar::{complex_gaussian, Real};
use crate::seed::{mix, rng_from_seed};

/// Conditioning limit beyond which SINR evaluation reports a numeric failure.
pub const CONDITION_LIMIT: f64 = 1e14;

/// One random draw of the tagged link and its `K` interferers.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkRealization<T> {
    pub tagged: DominantMode<T>,
    /// `α0 p0`.
    pub signal_power: T,
    pub interferer_channels: Vec<Vec<Complex<T>>>,
    /// `α_k p_k`, noise-normalized.
    pub interferer_powers: Vec<T>,
    pub distances: Vec<T>,
}

impl<T: Real> NetworkRealization<T> {
    pub fn k(&self) -> usize {
        self.interferer_channels.len()
    }

    pub fn m(&self) -> usize {
        self.tagged.m()
    }

    /// Received power of the tagged stream after beamforming, `α0 p0 λ1²`.
    pub fn tagged_gain(&self) -> T {
        self.signal_power * self.tagged.gain()
    }

    /// Appends an interferer at distance `distance` with effective channel
    /// `channel`.
    pub fn push_interferer(&mut self, channel: Vec<Complex<T>>, distance: T, scenario: &Scenario<T>) -> Result<()> {
        if channel.len() != self.m() {
            return Err(invalid("interferer channel length must equal m"));
        }
        let p = received_power(distance, scenario)?;
        self.interferer_channels.push(channel);
        self.interferer_powers.push(p);
        self.distances.push(distance);
        Ok(())
    }

    /// Power-scaled equivalent channel `[√(α0p0) λ1 u1, √(α1p1) ĥ1, …]`.
    pub fn equivalent_channel(&self) -> ComplexMatrix<T> {
        let m = self.m();
        let lead = (self.signal_power).sqrt() * self.tagged.lambda1;
        ComplexMatrix::from_fn(m, self.k() + 1, |i, j| {
            if j == 0 {
                self.tagged.u1[i] * lead
            } else {
                self.interferer_channels[j - 1][i] * self.interferer_powers[j - 1].sqrt()
            }
        })
    }

    /// Interference covariance `Σ_k α_k p_k ĥ_k ĥ_k^H` restricted to the
    /// interferers selected by `keep`.
    fn interference_covariance(&self, keep: impl Fn(usize) -> bool) -> ComplexMatrix<T> {
        let m = self.m();
        let mut c = ComplexMatrix::zeros(m, m);
        for (k, (h, &p)) in self.interferer_channels.iter().zip(&self.interferer_powers).enumerate() {
            if !keep(k) {
                continue;
            }
            for i in 0..m {
                let hi = h[i] * p;
                for j in 0..m {
                    c[(i, j)] = c[(i, j)] + hi * h[j].conj();
                }
            }
        }
        c
    }
}

/// Draws a realization with `K` interferers.
///
/// Sub-streams `mix(seed, 0..3)` feed the tagged channel, the distances and
/// the interferer vectors, so the first `K` interferers of a realization with
/// more interferers coincide with those of the `K`-interferer draw.
pub fn build_realization<T: Real>(scenario: &Scenario<T>, k: usize, seed: u64) -> Result<NetworkRealization<T>> {
    scenario.validate()?;
    let m = scenario.m;
    let h0 = sample_channel_with(m, &mut rng_from_seed(mix(seed, 0)));
    let tagged = dominant_mode(&h0)?;
    let distances = sample_distances_with(k, scenario, &mut rng_from_seed(mix(seed, 1)));
    let mut rng = rng_from_seed(mix(seed, 2));
    let interferer_channels = (0..k).map(|_| sample_vector(m, &mut rng)).collect();
    let interferer_powers = distances
        .iter()
        .map(|&c| received_power(c, scenario))
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkRealization {
        tagged,
        signal_power: scenario.signal_power(),
        interferer_channels,
        interferer_powers,
        distances,
    })
}

fn sample_vector<T: Real, R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<Complex<T>> {
    (0..m).map(|_| complex_gaussian(rng)).collect()
}

fn check_condition<T: Real>(cond: T) -> Result<()> {
    if !(cond <= T::lit(CONDITION_LIMIT)) {
        return Err(Error::NumericFailure(format!(
            "condition estimate {cond} exceeds {CONDITION_LIMIT:e}"
        )));
    }
    Ok(())
}

/// MMSE SINR as `1 / [(I + G̃^H G̃)^{-1}]_{11} − 1`, evaluated on the full
/// `(K+1) × (K+1)` Gram matrix.
pub fn mmse_sinr<T: Real>(r: &NetworkRealization<T>) -> Result<T> {
    let g = r.equivalent_channel();
    let n = g.cols();
    let mut a = g.adjoint().matmul(&g);
    for i in 0..n {
        a[(i, i)] = a[(i, i)] + Complex::one();
    }
    let ch = Cholesky::new(&a)?;
    check_condition(ch.condition_estimate())?;
    let mut e1 = vec![Complex::zero(); n];
    e1[0] = Complex::one();
    let x11 = ch.solve(&e1)[0].re;
    Ok((T::one() / x11 - T::one()).max(T::zero()))
}

/// MMSE SINR through the Schur complement: `α0p0 λ1² u1^H B u1` with
/// `B = W (I + D D^H)^{-1} W^H` from the decomposition `G̃_{-1} = W D Z`.
///
/// `W` and `d_i²` are taken from the eigen-decomposition of the `m × m`
/// matrix `G̃_{-1} G̃_{-1}^H`.
pub fn mmse_sinr_schur<T: Real>(r: &NetworkRealization<T>) -> Result<T> {
    let spectrum = interference_spectrum(r)?;
    let hi = spectrum.values.first().copied().unwrap_or(T::zero());
    let lo = spectrum.values.last().copied().unwrap_or(T::zero());
    check_condition((T::one() + hi) / (T::one() + lo))?;
    let u = &r.tagged.u1;
    let quad: T = (0..r.m())
        .map(|i| {
            let w = spectrum.vectors.column(i);
            inner(&w, u).norm_sqr() / (T::one() + spectrum.values[i])
        })
        .sum();
    Ok((r.tagged_gain() * quad).max(T::zero()))
}

/// Eigenvalues `d_i²` (descending, clamped at 0) and vectors `W` of
/// `G̃_{-1} G̃_{-1}^H`.
pub fn interference_spectrum<T: Real>(r: &NetworkRealization<T>) -> Result<crate::linalg::HermitianEigen<T>> {
    let mut eig = hermitian_eigen(&r.interference_covariance(|_| true))?;
    for v in eig.values.iter_mut() {
        *v = v.max(T::zero());
    }
    Ok(eig)
}

/// `[A^{-1}]_{11}` via the Schur complement of the leading entry,
/// `(a11 − a^H A_{-1,-1}^{-1} a)^{-1}`.
pub fn schur_inverse_entry<T: Real>(a: &ComplexMatrix<T>) -> Result<T> {
    if !a.is_square() || a.rows() == 0 {
        return Err(invalid("schur_inverse_entry needs a non-empty square matrix"));
    }
    let n = a.rows();
    let a11 = a[(0, 0)].re;
    if n == 1 {
        if !(a11 > T::zero()) {
            return Err(invalid("matrix is not positive definite"));
        }
        return Ok(T::one() / a11);
    }
    let tail = ComplexMatrix::from_fn(n - 1, n - 1, |i, j| a[(i + 1, j + 1)]);
    let col: Vec<Complex<T>> = (1..n).map(|i| a[(i, 0)]).collect();
    let ch = Cholesky::new(&tail)?;
    let y = ch.solve(&col);
    let s = a11 - inner(&col, &y).re;
    if !(s > T::zero()) {
        return Err(invalid("matrix is not positive definite (Schur complement <= 0)"));
    }
    Ok(T::one() / s)
}

/// Combining weights for the tagged stream.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFilter<T> {
    w: Vec<Complex<T>>,
}

impl<T: Real> LinearFilter<T> {
    pub fn new(w: Vec<Complex<T>>) -> Result<Self> {
        if !(norm_sqr(&w) > T::zero()) {
            return Err(invalid("filter must be nonzero"));
        }
        Ok(Self { w })
    }

    pub fn weights(&self) -> &[Complex<T>] {
        &self.w
    }

    pub fn scaled(&self, c: Complex<T>) -> Result<Self> {
        Self::new(self.w.iter().map(|z| z * c).collect())
    }
}

/// SINR of an arbitrary linear filter under the true channel:
/// `α0p0 λ² |w^H u|² / (‖w‖² + Σ_k α_k p_k |w^H ĥ_k|²)`.
pub fn realized_sinr<T: Real>(filter: &LinearFilter<T>, r: &NetworkRealization<T>) -> Result<T> {
    let w = filter.weights();
    if w.len() != r.m() {
        return Err(invalid("filter length must equal m"));
    }
    let signal = r.tagged_gain() * inner(w, &r.tagged.u1).norm_sqr();
    let mut denom = norm_sqr(w);
    for (h, &p) in r.interferer_channels.iter().zip(&r.interferer_powers) {
        denom = denom + p * inner(w, h).norm_sqr();
    }
    Ok(signal / denom)
}

/// MMSE combining vector `(I + Σ_k α_k p_k ĥ_k ĥ_k^H)^{-1} u1`.
pub fn mmse_filter<T: Real>(r: &NetworkRealization<T>) -> Result<LinearFilter<T>> {
    whitened_filter(r, T::one(), |_| true)
}

/// MMSE SINR from the `m × m` form `α0p0 λ² u^H (I + Σ α_k p_k ĥ_k ĥ_k^H)^{-1} u`.
/// Same quantity as [`mmse_sinr`] at `O(m² K)` cost; used by the simulator.
pub fn mmse_sinr_receiver<T: Real>(r: &NetworkRealization<T>) -> Result<T> {
    let mut c = r.interference_covariance(|_| true);
    for i in 0..r.m() {
        c[(i, i)] = c[(i, i)] + Complex::one();
    }
    let ch = Cholesky::new(&c)?;
    check_condition(ch.condition_estimate())?;
    let x = ch.solve(&r.tagged.u1);
    Ok((r.tagged_gain() * inner(&r.tagged.u1, &x).re).max(T::zero()))
}

fn whitened_filter<T: Real>(
    r: &NetworkRealization<T>,
    noise: T,
    known: impl Fn(usize) -> bool,
) -> Result<LinearFilter<T>> {
    let mut c = r.interference_covariance(known);
    for i in 0..r.m() {
        c[(i, i)] = c[(i, i)] + Complex::new(noise, T::zero());
    }
    let ch = Cholesky::new(&c)?;
    check_condition(ch.condition_estimate())?;
    LinearFilter::new(ch.solve(&r.tagged.u1))
}

/// Zero-forcing: null the `min(K, m−1)` strongest interferers by projecting
/// onto the orthogonal complement of their channels, then match-filter the
/// tagged direction. Remaining interferers stay in the denominator.
pub fn zf_sinr<T: Real>(r: &NetworkRealization<T>) -> Result<T> {
    let m = r.m();
    let nulls = r.k().min(m.saturating_sub(1));
    let mut order: Vec<usize> = (0..r.k()).collect();
    order.sort_by(|&a, &b| {
        r.interferer_powers[b]
            .partial_cmp(&r.interferer_powers[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let selected: Vec<Vec<Complex<T>>> = order[..nulls]
        .iter()
        .map(|&k| r.interferer_channels[k].clone())
        .collect();
    let basis = orthonormal_basis(&selected);
    let mut w = r.tagged.u1.clone();
    for q in &basis {
        let c = inner(q, &w);
        for (wi, qi) in w.iter_mut().zip(q) {
            *wi = *wi - qi * c;
        }
    }
    if !(norm_sqr(&w) > T::epsilon() * T::epsilon()) {
        return Ok(T::zero());
    }
    realized_sinr(&LinearFilter::new(w)?, r)
}

/// Partial CSI: the receiver knows `ĥ_k` only for interferers within
/// `csi_range`; the rest are folded into white noise of per-antenna variance
/// `1 + Σ_unknown α_k p_k`. The resulting MMSE filter is scored under the true
/// channel with every interferer present.
pub fn partial_csi_sinr<T: Real>(r: &NetworkRealization<T>, csi_range: T) -> Result<T> {
    let known = |k: usize| r.distances[k] <= csi_range;
    let unknown_power: T = (0..r.k())
        .filter(|&k| !known(k))
        .map(|k| r.interferer_powers[k])
        .sum();
    let filter = whitened_filter(r, T::one() + unknown_power, known)?;
    realized_sinr(&filter, r)
}

/// SINR for the scenario's configured detector.
pub fn detector_sinr<T: Real>(scenario: &Scenario<T>, r: &NetworkRealization<T>) -> Result<T> {
    match scenario.detector {
        Detector::Mmse => mmse_sinr_receiver(r),
        Detector::ZeroForcing => zf_sinr(r),
        Detector::PartialCsi => {
            let range = scenario
                .csi_range
                .ok_or_else(|| invalid("partial-csi detector requires csi_range"))?;
            partial_csi_sinr(r, range)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(m: usize) -> Scenario<f64> {
        Scenario::default().with_antennas(m)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn empty_interference() {
        let r = build_realization(&scenario(4), 0, 1).unwrap();
        let expected = 100.0 * r.tagged.gain();
        assert!(rel(mmse_sinr(&r).unwrap(), expected) < 1e-12);
        assert!(rel(mmse_sinr_schur(&r).unwrap(), expected) < 1e-12);
        assert!(rel(zf_sinr(&r).unwrap(), expected) < 1e-12);
        assert!(rel(mmse_sinr_receiver(&r).unwrap(), expected) < 1e-12);
    }

    #[test]
    fn scalar_single_interferer() {
        let r = build_realization(&scenario(1), 1, 5).unwrap();
        let h0 = r.tagged.gain();
        let h1 = r.interferer_channels[0][0].norm_sqr();
        let p1 = r.interferer_powers[0];
        let expected = 100.0 * h0 / (1.0 + p1 * h1);
        assert!(rel(mmse_sinr(&r).unwrap(), expected) < 1e-10);
    }

    #[test]
    fn deterministic_build() {
        let a = build_realization(&scenario(4), 20, 77).unwrap();
        let b = build_realization(&scenario(4), 20, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn interferer_prefix_is_stable() {
        let small = build_realization(&scenario(4), 3, 9).unwrap();
        let big = build_realization(&scenario(4), 8, 9).unwrap();
        assert_eq!(small.interferer_channels[..], big.interferer_channels[..3]);
        assert_eq!(small.distances[..], big.distances[..3]);
    }

    #[test]
    fn schur_matches_direct() {
        let r = build_realization(&scenario(4), 6, 3).unwrap();
        assert!(rel(mmse_sinr_schur(&r).unwrap(), mmse_sinr(&r).unwrap()) < 1e-8);
    }

    #[test]
    fn schur_entry_hand_values() {
        assert_eq!(schur_inverse_entry(&ComplexMatrix::<f64>::identity(3)).unwrap(), 1.0);
        let a = ComplexMatrix::from_fn(2, 2, |i, j| Complex::new(if i == j { 2.0f64 } else { 1.0 }, 0.0));
        assert!((schur_inverse_entry(&a).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let mut bad = ComplexMatrix::<f64>::identity(2);
        bad[(0, 1)] = Complex::new(2.0, 0.0);
        bad[(1, 0)] = Complex::new(2.0, 0.0);
        assert!(matches!(schur_inverse_entry(&bad), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn matched_filter_and_orthogonal_filter() {
        let r = build_realization(&scenario(3), 0, 4).unwrap();
        let f = LinearFilter::new(r.tagged.u1.clone()).unwrap();
        assert!(rel(realized_sinr(&f, &r).unwrap(), r.tagged_gain()) < 1e-12);
        // A vector orthogonal to u1.
        let u = &r.tagged.u1;
        let w = vec![u[1].conj(), -u[0].conj(), Complex::zero()];
        let f = LinearFilter::new(w).unwrap();
        assert!(realized_sinr(&f, &r).unwrap() < 1e-25);
    }

    #[test]
    fn zero_filter_rejected() {
        assert!(LinearFilter::<f64>::new(vec![Complex::zero(); 3]).is_err());
    }

    #[test]
    fn mmse_filter_attains_mmse_sinr() {
        let r = build_realization(&scenario(4), 12, 21).unwrap();
        let f = mmse_filter(&r).unwrap();
        assert!(rel(realized_sinr(&f, &r).unwrap(), mmse_sinr(&r).unwrap()) < 1e-8);
    }

    #[test]
    fn zf_orthogonal_interferer_is_harmless() {
        let mut r = build_realization(&scenario(2), 0, 2).unwrap();
        let u = r.tagged.u1.clone();
        let orth = vec![u[1].conj(), -u[0].conj()];
        r.push_interferer(orth, 0.5, &scenario(2)).unwrap();
        assert!(rel(zf_sinr(&r).unwrap(), r.tagged_gain()) < 1e-10);
    }

    #[test]
    fn partial_csi_limits() {
        let s = scenario(4);
        let r = build_realization(&s, 15, 8).unwrap();
        let full = mmse_sinr(&r).unwrap();
        assert!(rel(partial_csi_sinr(&r, 3.0).unwrap(), full) < 1e-8);
        let none = partial_csi_sinr(&r, 0.05).unwrap();
        let matched = realized_sinr(&LinearFilter::new(r.tagged.u1.clone()).unwrap(), &r).unwrap();
        assert!(rel(none, matched) < 1e-10);
        assert!(none <= full * (1.0 + 1e-9));
    }

    #[test]
    fn strong_interference_limit_is_projection() {
        // With K < m interferers of enormous power, MMSE converges to nulling
        // them, i.e. α0p0 λ² ‖P⊥ u‖².
        let s = scenario(4);
        let mut r = build_realization(&s, 2, 13).unwrap();
        for p in r.interferer_powers.iter_mut() {
            *p *= 1e6;
        }
        let sch = mmse_sinr_schur(&r).unwrap();
        let basis = orthonormal_basis(&r.interferer_channels);
        let mut w = r.tagged.u1.clone();
        for q in &basis {
            let c = inner(q, &w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= qi * c;
            }
        }
        let limit = r.tagged_gain() * norm_sqr(&w);
        assert!(rel(sch, limit) < 1e-4, "{sch} vs {limit}");
    }
}
