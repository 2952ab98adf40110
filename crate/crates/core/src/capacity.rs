//! Link-layer throughput capacity and the optimal active-link density.

use crate::analysis::SinrModel;
use crate::error::{invalid, Result};
use crate::geometry::{mean_active_count, poisson_pmf, Scenario};
use crate::scalar::{db_to_linear, Real};

/// Neglected Poisson tail mass when truncating the capacity sum.
pub const POISSON_TAIL: f64 = 1e-6;
/// Minimum number of grid points scanned by [`optimal_density_by`].
pub const MIN_GRID_POINTS: usize = 40;
/// Relative tolerance in `rho` of the golden-section refinement.
pub const RHO_REL_TOL: f64 = 1e-3;

/// Anything that can report the outage probability with `K` interferers.
pub trait OutageSource<T> {
    fn outage(&self, k: usize) -> Result<T>;
    fn scenario(&self) -> &Scenario<T>;
}

impl<T: Real> OutageSource<T> for SinrModel<T> {
    fn outage(&self, k: usize) -> Result<T> {
        SinrModel::outage(self, k)
    }

    fn scenario(&self) -> &Scenario<T> {
        &self.scenario
    }
}

/// Transmission rate `log2(1 + SINR_th)` in bps/Hz.
pub fn rate_from_threshold<T: Real>(sinr_th_db: T) -> T {
    (T::one() + db_to_linear(sinr_th_db)).log2()
}

/// Sum throughput of `K + 1` simultaneously active links, `(K+1)(1 − P_out) q`.
pub fn conditional_capacity<T: Real>(k: usize, source: &impl OutageSource<T>) -> Result<T> {
    let q = rate_from_threshold(source.scenario().sinr_th_db);
    let pout = source.outage(k)?;
    Ok(T::from_usize_lossy(k + 1) * (T::one() - pout) * q)
}

/// Largest interferer count `K_max` such that the Poisson mass of total
/// counts `0..=K_max+1` is at least `1 − 1e-6`.
pub fn truncation_point<T: Real>(mean: T) -> usize {
    let target = T::one() - T::lit(POISSON_TAIL);
    let mut total = T::zero();
    let mut n = 0usize;
    loop {
        total = total + poisson_pmf(n, mean);
        if total >= target && n >= 1 {
            return n - 1;
        }
        n += 1;
        if n > 100_000 {
            return n - 1;
        }
    }
}

/// `C = (1/(π R²)) Σ_K C̃(K+1) Pr(K+1)` with `Pr` Poisson of mean
/// `rho0 π R²`, truncated so the neglected tail is below `1e-6`.
pub fn network_capacity<T: Real>(rho0: T, source: &impl OutageSource<T>) -> Result<T> {
    if !(rho0 >= T::zero()) || !rho0.is_finite() {
        return Err(invalid(format!("density rho0 must be finite and >= 0, got {rho0}")));
    }
    let scenario = source.scenario();
    let mean = mean_active_count(rho0, scenario);
    if mean.is_zero() {
        return Ok(T::zero());
    }
    let kmax = truncation_point(mean);
    let mut sum = T::zero();
    for k in 0..=kmax {
        let w = poisson_pmf(k + 1, mean);
        if w.is_zero() {
            continue;
        }
        sum = sum + conditional_capacity(k, source)? * w;
    }
    Ok(sum / scenario.disc_area())
}

/// Located maximum of a capacity curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum<T> {
    pub rho_star: T,
    pub c_star: T,
    /// The best grid point sat on an end of the search interval.
    pub boundary: bool,
    /// More than one strict local maximum on the coarse grid.
    pub multiple_local_maxima: bool,
}

/// Capacity evaluated on a density grid, with its optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityCurve<T> {
    pub densities: Vec<T>,
    pub capacities: Vec<T>,
    pub optimum: Optimum<T>,
}

/// `points` geometrically spaced values from `lo` to `hi` inclusive.
pub fn geometric_grid<T: Real>(lo: T, hi: T, points: usize) -> Vec<T> {
    if points <= 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln();
    (0..points)
        .map(|i| {
            if i == points - 1 {
                hi
            } else {
                lo * (ratio * T::from_usize_lossy(i) / T::from_usize_lossy(points - 1)).exp()
            }
        })
        .collect()
}

/// Maximizes `f` over `[rho_min, rho_max]`: geometric grid scan of
/// `grid_points` (at least 40) followed by golden-section refinement between
/// the neighbours of the best grid point.
pub fn optimal_density_by<T: Real>(
    mut f: impl FnMut(T) -> Result<T>,
    rho_min: T,
    rho_max: T,
    grid_points: usize,
) -> Result<CapacityCurve<T>> {
    if !(rho_min > T::zero() && rho_min < rho_max) || !rho_max.is_finite() {
        return Err(invalid(format!(
            "density search needs 0 < rho_min < rho_max, got [{rho_min}, {rho_max}]"
        )));
    }
    let densities = geometric_grid(rho_min, rho_max, grid_points.max(MIN_GRID_POINTS));
    let capacities = densities.iter().map(|&r| f(r)).collect::<Result<Vec<T>>>()?;
    let n = densities.len();
    let best = (0..n)
        .max_by(|&i, &j| capacities[i].partial_cmp(&capacities[j]).unwrap_or(std::cmp::Ordering::Equal))
        .expect("non-empty grid");
    let local_maxima = (1..n - 1)
        .filter(|&i| capacities[i] > capacities[i - 1] && capacities[i] > capacities[i + 1])
        .count();
    let boundary = best == 0 || best == n - 1;
    let (rho_star, c_star) = if boundary {
        (densities[best], capacities[best])
    } else {
        golden_section(&mut f, densities[best - 1], densities[best + 1], (densities[best], capacities[best]))?
    };
    Ok(CapacityCurve {
        densities,
        capacities,
        optimum: Optimum {
            rho_star,
            c_star,
            boundary,
            multiple_local_maxima: local_maxima > 1,
        },
    })
}

fn golden_section<T: Real>(
    f: &mut impl FnMut(T) -> Result<T>,
    mut a: T,
    mut b: T,
    incumbent: (T, T),
) -> Result<(T, T)> {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let tol = T::lit(RHO_REL_TOL);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    let mut best = incumbent;
    for _ in 0..200 {
        if (b - a) <= tol * (a + b) * T::lit(0.5) {
            break;
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2)?;
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok(best)
}

/// Analytical capacity curve and optimum of `source` over `[rho_min, rho_max]`.
pub fn optimal_density<T: Real>(
    source: &impl OutageSource<T>,
    rho_min: T,
    rho_max: T,
    grid_points: usize,
) -> Result<CapacityCurve<T>> {
    optimal_density_by(|r| network_capacity(r, source), rho_min, rho_max, grid_points)
}

/// Optimal MAC transmission probability `p_t = rho* / L`, capped at 1.
/// Returns `(p_t, saturated)`.
pub fn transmission_probability<T: Real>(rho_star: T, total_density: T) -> Result<(T, bool)> {
    if !(total_density > T::zero()) {
        return Err(invalid(format!("total link density L must be > 0, got {total_density}")));
    }
    let p = rho_star / total_density;
    if p > T::one() {
        Ok((T::one(), true))
    } else {
        Ok((p, false))
    }
}
