//! Link-level Monte Carlo engine.
//!
//! Trial `i` of a run with master seed `s` always uses seed `mix(s, i)`, so a
//! trial can be replayed in isolation and results do not depend on the number
//! of worker threads. Seeds do not depend on `K` or on the detector: runs that
//! differ only in those share their random draws.

use std::collections::HashMap;
use std::sync::RwLock;

use rayon::prelude::*;

use crate::analysis::SinrModel;
use crate::capacity::{rate_from_threshold, OutageSource};
use crate::detectors::{build_realization, detector_sinr};
use crate::error::{invalid, Result};
use crate::geometry::{sample_active_count, Scenario};
use crate::scalar::Real;
use crate::seed::mix;

pub const DEFAULT_TRIALS: usize = 10_000;
pub const DEFAULT_OUTER_DRAWS: usize = 2_000;

const OUTER_STREAM: u64 = u64::MAX;

/// Seed of trial `i`.
pub fn trial_seed(master: u64, i: u64) -> u64 {
    mix(master, i)
}

/// `n` SINR samples with `K` interferers under the scenario's detector.
pub fn sample_sinr<T: Real>(scenario: &Scenario<T>, k: usize, n: usize, master: u64) -> Result<Vec<T>> {
    if n == 0 {
        return Err(invalid("n_trials must be >= 1"));
    }
    scenario.validate()?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let r = build_realization(scenario, k, trial_seed(master, i))?;
            detector_sinr(scenario, &r)
        })
        .collect()
}

/// Empirical CDF of a finite sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf<T> {
    sorted: Vec<T>,
}

impl<T: Real> EmpiricalCdf<T> {
    pub fn new(mut samples: Vec<T>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("empirical CDF needs at least one sample"));
        }
        if samples.iter().any(|x| x.is_nan()) {
            return Err(invalid("empirical CDF samples contain NaN"));
        }
        samples.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
        Ok(Self { sorted: samples })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[T] {
        &self.sorted
    }

    pub fn min(&self) -> T {
        self.sorted[0]
    }

    pub fn max(&self) -> T {
        self.sorted[self.sorted.len() - 1]
    }

    /// Fraction of samples `<= x`.
    pub fn eval(&self, x: T) -> T {
        let rank = self.sorted.partition_point(|&s| s <= x);
        T::from_usize_lossy(rank) / T::from_usize_lossy(self.sorted.len())
    }

    /// Fraction of samples strictly below `x`.
    pub fn below(&self, x: T) -> T {
        let rank = self.sorted.partition_point(|&s| s < x);
        T::from_usize_lossy(rank) / T::from_usize_lossy(self.sorted.len())
    }

    pub fn mean(&self) -> T {
        self.sorted.iter().copied().sum::<T>() / T::from_usize_lossy(self.sorted.len())
    }

    pub fn second_moment(&self) -> T {
        self.sorted.iter().map(|&x| x * x).sum::<T>() / T::from_usize_lossy(self.sorted.len())
    }

    /// `sup_x |F_n(x) − F(x)|` against a continuous CDF.
    pub fn ks_distance(&self, mut cdf: impl FnMut(T) -> T) -> T {
        let n = T::from_usize_lossy(self.sorted.len());
        let mut d = T::zero();
        for (i, &x) in self.sorted.iter().enumerate() {
            let f = cdf(x);
            let lo = T::from_usize_lossy(i) / n;
            let hi = T::from_usize_lossy(i + 1) / n;
            d = d.max((hi - f).abs()).max((f - lo).abs());
        }
        d
    }

    /// Two-sample KS statistic.
    pub fn ks_two_sample(&self, other: &Self) -> T {
        let (a, b) = (&self.sorted, &other.sorted);
        let (na, nb) = (T::from_usize_lossy(a.len()), T::from_usize_lossy(b.len()));
        let (mut i, mut j) = (0, 0);
        let mut d = T::zero();
        while i < a.len() && j < b.len() {
            let x = if a[i] <= b[j] { a[i] } else { b[j] };
            while i < a.len() && a[i] <= x {
                i += 1;
            }
            while j < b.len() && b[j] <= x {
                j += 1;
            }
            let diff = T::from_usize_lossy(i) / na - T::from_usize_lossy(j) / nb;
            d = d.max(diff.abs());
        }
        d
    }
}

/// Fraction of `n` simulated SINR samples below the scenario's threshold.
pub fn empirical_outage<T: Real>(scenario: &Scenario<T>, k: usize, n: usize, master: u64) -> Result<T> {
    let samples = sample_sinr(scenario, k, n, master)?;
    Ok(outage_fraction(&samples, scenario.sinr_threshold()))
}

fn outage_fraction<T: Real>(samples: &[T], threshold: T) -> T {
    let below = samples.iter().filter(|&&x| x < threshold).count();
    T::from_usize_lossy(below) / T::from_usize_lossy(samples.len())
}

/// Per-`K` empirical outage probabilities, computed on first use and kept.
#[derive(Debug)]
pub struct EmpiricalOutage<T> {
    scenario: Scenario<T>,
    trials: usize,
    master: u64,
    table: RwLock<HashMap<usize, T>>,
}

impl<T: Real> EmpiricalOutage<T> {
    pub fn new(scenario: Scenario<T>, trials: usize, master: u64) -> Result<Self> {
        scenario.validate()?;
        if trials == 0 {
            return Err(invalid("n_trials must be >= 1"));
        }
        Ok(Self {
            scenario,
            trials,
            master,
            table: RwLock::new(HashMap::new()),
        })
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn cached(&self) -> usize {
        self.table.read().expect("outage table poisoned").len()
    }
}

impl<T: Real> OutageSource<T> for EmpiricalOutage<T> {
    fn outage(&self, k: usize) -> Result<T> {
        if let Some(&p) = self.table.read().expect("outage table poisoned").get(&k) {
            return Ok(p);
        }
        let p = empirical_outage(&self.scenario, k, self.trials, self.master)?;
        self.table.write().expect("outage table poisoned").insert(k, p);
        Ok(p)
    }

    fn scenario(&self) -> &Scenario<T> {
        &self.scenario
    }
}

/// Monte Carlo network capacity: `n_outer` Poisson draws of the active-link
/// count, each scored with the empirical per-`K` outage.
pub fn empirical_capacity<T: Real>(
    scenario: &Scenario<T>,
    rho0: T,
    n_outer: usize,
    n_trials_per_k: usize,
    master: u64,
) -> Result<T> {
    let table = EmpiricalOutage::new(*scenario, n_trials_per_k, master)?;
    empirical_capacity_with(&table, rho0, n_outer, master)
}

/// As [`empirical_capacity`], reusing an outage table across densities.
///
/// Outer draw `j` uses seed `mix(mix(master, u64::MAX), j)`; since counts are
/// drawn by CDF inversion, the same draw gives a nondecreasing count as
/// `rho0` grows.
pub fn empirical_capacity_with<T: Real>(
    table: &EmpiricalOutage<T>,
    rho0: T,
    n_outer: usize,
    master: u64,
) -> Result<T> {
    if n_outer == 0 {
        return Err(invalid("n_outer must be >= 1"));
    }
    let scenario = table.scenario();
    let outer = mix(master, OUTER_STREAM);
    let counts = (0..n_outer as u64)
        .map(|j| sample_active_count(rho0, scenario, mix(outer, j)))
        .collect::<Result<Vec<usize>>>()?;
    let q = rate_from_threshold(scenario.sinr_th_db);
    let mut total = T::zero();
    for &n in &counts {
        if n == 0 {
            continue;
        }
        let pout = table.outage(n - 1)?;
        total = total + T::from_usize_lossy(n) * (T::one() - pout) * q;
    }
    Ok(total / T::from_usize_lossy(n_outer) / scenario.disc_area())
}

/// Analytic-versus-simulated agreement at one `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonReport<T> {
    pub ks_distance: T,
    pub mean_rel_err: T,
    pub second_moment_rel_err: T,
    pub n_trials: usize,
}

/// Compares simulated SINR against the Gamma model built with the default
/// `λ²` moments.
pub fn compare<T: Real>(scenario: &Scenario<T>, k: usize, n: usize, master: u64) -> Result<ComparisonReport<T>> {
    let model = SinrModel::with_default_moments(*scenario)?;
    compare_with(&model, k, n, master)
}

pub fn compare_with<T: Real>(model: &SinrModel<T>, k: usize, n: usize, master: u64) -> Result<ComparisonReport<T>> {
    let samples = EmpiricalCdf::new(sample_sinr(&model.scenario, k, n, master)?)?;
    let moments = model.moments(k)?;
    let fit = model.fit(k)?;
    let mean = samples.mean();
    let m2 = samples.second_moment();
    Ok(ComparisonReport {
        ks_distance: samples.ks_distance(|x| fit.cdf(x)),
        mean_rel_err: ((moments.mean - mean) / mean).abs(),
        second_moment_rel_err: ((moments.second_moment() - m2) / m2).abs(),
        n_trials: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Detector;

    #[test]
    fn ecdf_basic() {
        let e = EmpiricalCdf::new(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(e.eval(0.5), 0.0);
        assert_eq!(e.eval(1.0), 0.25);
        assert_eq!(e.eval(2.0), 0.75);
        assert_eq!(e.below(2.0), 0.25);
        assert_eq!(e.eval(9.0), 1.0);
        assert_eq!(e.mean(), 2.0);
        assert!(EmpiricalCdf::<f64>::new(vec![]).is_err());
        assert!(EmpiricalCdf::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn ks_uniform_grid() {
        let e = EmpiricalCdf::new((0..10).map(|i| (i as f64 + 0.5) / 10.0).collect()).unwrap();
        let d = e.ks_distance(|x| x.clamp(0.0, 1.0));
        assert!((d - 0.05).abs() < 1e-12);
    }

    #[test]
    fn ks_two_sample_identical_and_disjoint() {
        let a = EmpiricalCdf::new(vec![1.0, 2.0, 3.0]).unwrap();
        let b = EmpiricalCdf::new(vec![10.0, 20.0]).unwrap();
        assert_eq!(a.ks_two_sample(&a), 0.0);
        assert_eq!(a.ks_two_sample(&b), 1.0);
    }

    #[test]
    fn sampling_is_reproducible() {
        let s = Scenario::<f64>::default();
        let a = sample_sinr(&s, 3, 64, 11).unwrap();
        let b = sample_sinr(&s, 3, 64, 11).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| sample_sinr(&s, 3, 64, 11).unwrap());
        assert_eq!(a, c);
        assert!(sample_sinr(&s, 3, 0, 11).is_err());
    }

    #[test]
    fn trial_replays_in_isolation() {
        let s = Scenario::<f64>::default();
        let all = sample_sinr(&s, 2, 10, 5).unwrap();
        let r = build_realization(&s, 2, trial_seed(5, 7)).unwrap();
        assert_eq!(all[7], detector_sinr(&s, &r).unwrap());
    }

    #[test]
    fn outage_extremes() {
        let mut s = Scenario::<f64>::default();
        s.sinr_th_db = -300.0;
        assert_eq!(empirical_outage(&s, 2, 100, 1).unwrap(), 0.0);
        s.sinr_th_db = 300.0;
        assert_eq!(empirical_outage(&s, 2, 100, 1).unwrap(), 1.0);
    }

    #[test]
    fn capacity_zero_density() {
        let s = Scenario::<f64>::default();
        assert_eq!(empirical_capacity(&s, 0.0, 50, 50, 1).unwrap(), 0.0);
    }

    #[test]
    fn outage_table_caches() {
        let s = Scenario::<f64>::default().with_detector(Detector::ZeroForcing);
        let t = EmpiricalOutage::new(s, 200, 3).unwrap();
        let a = t.outage(4).unwrap();
        assert_eq!(t.cached(), 1);
        assert_eq!(t.outage(4).unwrap(), a);
        assert_eq!(a, empirical_outage(&s, 4, 200, 3).unwrap());
    }
}
