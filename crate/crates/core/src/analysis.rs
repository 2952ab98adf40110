//! Closed-form SINR statistics of the MMSE receiver.
//!
//! The interference eigenvalue distribution of `G̃_{-1} G̃_{-1}^H` is described
//! through its η-transform, which solves the fixed point
//!
//! ```text
//! 1 − η = (K/m) · (1 − η_mP(γ η))
//! ```
//!
//! where `η_mP` is the η-transform of `m · α_k p_k` for a uniformly placed
//! interferer. The SINR mean and variance follow from `η(1)` and `η'(1)`, and
//! the SINR distribution is approximated by the Gamma law matching those two
//! moments.

use statrs::function::gamma::checked_gamma_lr;

use crate::error::{invalid, Error, Result};
use crate::geometry::Scenario;
use crate::quad;
use crate::randmat::LambdaMoments;
use crate::scalar::Real;

const BISECTION_LOWER: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 200;
const QUAD_TOL: f64 = 1e-10;

fn is_theta4<T: Real>(s: &Scenario<T>) -> bool {
    s.theta == T::lit(4.0)
}

/// Argument `s = c0² sqrt(m α0p0 γ)` of the closed form.
fn closed_form_arg<T: Real>(gamma: T, s: &Scenario<T>) -> T {
    s.c0 * s.c0 * (T::from_usize_lossy(s.m) * s.signal_power() * gamma).sqrt()
}

/// `atan(x/ε²) − atan(x/R²)` without the cancellation of two near-π/2 terms.
fn atan_gap<T: Real>(x: T, s: &Scenario<T>) -> T {
    let e2 = s.eps * s.eps;
    let r2 = s.radius * s.radius;
    let a = x / e2;
    let b = x / r2;
    ((a - b) / (T::one() + a * b)).atan()
}

/// η-transform of `m · α_k p_k`: `E[1 / (1 + γ m α_k p_k)]`.
///
/// Uses the closed form for `theta = 4` and adaptive quadrature over the
/// interferer distance otherwise.
pub fn eta_mp<T: Real>(gamma: T, scenario: &Scenario<T>) -> Result<T> {
    if !(gamma >= T::zero()) {
        return Err(invalid(format!("eta transform argument must be >= 0, got {gamma}")));
    }
    if gamma.is_zero() {
        return Ok(T::one());
    }
    if is_theta4(scenario) {
        let x = closed_form_arg(gamma, scenario);
        let v = T::one() - x / scenario.annulus_span() * atan_gap(x, scenario);
        return Ok(v.max(T::zero()).min(T::one()));
    }
    let mp = T::from_usize_lossy(scenario.m) * scenario.signal_power();
    let span = scenario.annulus_span();
    let r = quad::integrate(
        |c: T| {
            let power = (scenario.c0 / c).powf(scenario.theta);
            T::lit(2.0) * c / span / (T::one() + gamma * mp * power)
        },
        scenario.eps,
        scenario.radius,
        T::lit(QUAD_TOL),
    );
    Ok(r.value.max(T::zero()).min(T::one()))
}

/// `d η_mP / d γ`.
pub fn eta_mp_derivative<T: Real>(gamma: T, scenario: &Scenario<T>) -> Result<T> {
    if !(gamma >= T::zero()) {
        return Err(invalid(format!("eta transform argument must be >= 0, got {gamma}")));
    }
    let mp = T::from_usize_lossy(scenario.m) * scenario.signal_power();
    let span = scenario.annulus_span();
    let e2 = scenario.eps * scenario.eps;
    let r2 = scenario.radius * scenario.radius;
    if is_theta4(scenario) {
        let c04 = scenario.c0.powi(4);
        if gamma.is_zero() {
            // −m E[α_k p_k]
            return Ok(-(c04 * mp / span) * (T::one() / e2 - T::one() / r2));
        }
        let x = closed_form_arg(gamma, scenario);
        let gap = atan_gap(x, scenario);
        let dgap = e2 / (e2 * e2 + x * x) - r2 / (r2 * r2 + x * x);
        return Ok(-(x / (T::lit(2.0) * gamma * span)) * (gap + x * dgap));
    }
    let r = quad::integrate(
        |c: T| {
            let power = mp * (scenario.c0 / c).powf(scenario.theta);
            let d = T::one() + gamma * power;
            -T::lit(2.0) * c / span * power / (d * d)
        },
        scenario.eps,
        scenario.radius,
        T::lit(QUAD_TOL),
    );
    Ok(r.value)
}

/// Fixed point of the η-transform of `G̃_{-1} G̃_{-1}^H` at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSolution<T> {
    pub gamma: T,
    pub eta: T,
    /// `dη/dγ` at `gamma`, by implicit differentiation.
    pub eta_prime: T,
    pub k: usize,
    /// `|η − 1 + (K/m)(1 − η_mP(γη))|` at the returned root.
    pub residual: T,
}

fn fixed_point_residual<T: Real>(eta: T, gamma: T, beta: T, s: &Scenario<T>) -> Result<T> {
    Ok(eta - T::one() + beta * (T::one() - eta_mp(gamma * eta, s)?))
}

/// Solves `1 − η = (K/m)(1 − η_mP(γ η))` on `(0, 1]` by bisection and
/// differentiates the relation implicitly for `η'`.
pub fn solve_eta<T: Real>(gamma: T, k: usize, scenario: &Scenario<T>) -> Result<EtaSolution<T>> {
    if !(gamma >= T::zero()) {
        return Err(invalid(format!("eta transform argument must be >= 0, got {gamma}")));
    }
    if k == 0 || gamma.is_zero() {
        return Ok(EtaSolution {
            gamma,
            eta: T::one(),
            eta_prime: if k == 0 {
                T::zero()
            } else {
                // η'(0) = (K/m) η_mP'(0)
                T::from_usize_lossy(k) / T::from_usize_lossy(scenario.m) * eta_mp_derivative(T::zero(), scenario)?
            },
            k,
            residual: T::zero(),
        });
    }
    let beta = T::from_usize_lossy(k) / T::from_usize_lossy(scenario.m);
    let mut lo = T::lit(BISECTION_LOWER);
    let mut hi = T::one();
    if fixed_point_residual(lo, gamma, beta, scenario)? >= T::zero() {
        hi = lo;
    } else {
        for _ in 0..BISECTION_MAX_ITER {
            let mid = (lo + hi) * T::lit(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            if fixed_point_residual(mid, gamma, beta, scenario)? < T::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let r_lo = fixed_point_residual(lo, gamma, beta, scenario)?;
    let r_hi = fixed_point_residual(hi, gamma, beta, scenario)?;
    let (eta, residual) = if r_lo.abs() < r_hi.abs() { (lo, r_lo.abs()) } else { (hi, r_hi.abs()) };

    // F(η, γ) = η − 1 + β(1 − η_mP(γη)) = 0
    // ∂F/∂η = 1 − β γ η_mP'(γη), ∂F/∂γ = −β η η_mP'(γη)
    let d = eta_mp_derivative(gamma * eta, scenario)?;
    let df_deta = T::one() - beta * gamma * d;
    let df_dgamma = -beta * eta * d;
    let eta_prime = -df_dgamma / df_deta;
    Ok(EtaSolution {
        gamma,
        eta,
        eta_prime,
        k,
        residual,
    })
}

/// Central finite-difference estimate of `η'(γ)` with step `1e-4 γ`, kept as
/// an independent check on the implicit derivative.
pub fn eta_prime_finite_difference<T: Real>(gamma: T, k: usize, scenario: &Scenario<T>) -> Result<T> {
    let h = T::lit(1e-4) * gamma;
    if !(h > T::zero()) {
        return Err(invalid("finite difference needs gamma > 0"));
    }
    let up = solve_eta(gamma + h, k, scenario)?.eta;
    let down = solve_eta(gamma - h, k, scenario)?.eta;
    Ok((up - down) / (T::lit(2.0) * h))
}

/// Mean and variance of the post-detection SINR for `K` interferers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrMoments<T> {
    pub k: usize,
    pub mean: T,
    pub variance: T,
}

impl<T: Real> SinrMoments<T> {
    /// `E[SINR²] = mean² + variance`.
    pub fn second_moment(&self) -> T {
        self.mean * self.mean + self.variance
    }
}

/// `E[SINR] = α0p0 E[λ²] η(1)`.
pub fn sinr_mean<T: Real>(k: usize, scenario: &Scenario<T>, lambda: &LambdaMoments<T>) -> Result<T> {
    let sol = solve_eta(T::one(), k, scenario)?;
    Ok(scenario.signal_power() * lambda.moment1 * sol.eta)
}

/// `Var[SINR] ≈ (α0p0)² (E[λ⁴] − E[λ²]²)(η(1) + η'(1))`.
///
/// Fails with [`Error::ApproximationBreakdown`] rather than clamping when
/// `η(1) + η'(1)` is not positive.
pub fn sinr_variance<T: Real>(k: usize, scenario: &Scenario<T>, lambda: &LambdaMoments<T>) -> Result<T> {
    let sol = solve_eta(T::one(), k, scenario)?;
    variance_from_solution(&sol, scenario, lambda)
}

fn variance_from_solution<T: Real>(
    sol: &EtaSolution<T>,
    scenario: &Scenario<T>,
    lambda: &LambdaMoments<T>,
) -> Result<T> {
    let factor = sol.eta + sol.eta_prime;
    let p0 = scenario.signal_power();
    let v = p0 * p0 * lambda.gain_variance() * factor;
    if !(factor > T::zero()) || !(v > T::zero()) {
        return Err(Error::ApproximationBreakdown {
            k: sol.k,
            value: factor.to_f64_lossy(),
        });
    }
    Ok(v)
}

pub fn sinr_moments<T: Real>(k: usize, scenario: &Scenario<T>, lambda: &LambdaMoments<T>) -> Result<SinrMoments<T>> {
    let sol = solve_eta(T::one(), k, scenario)?;
    Ok(SinrMoments {
        k,
        mean: scenario.signal_power() * lambda.moment1 * sol.eta,
        variance: variance_from_solution(&sol, scenario, lambda)?,
    })
}

/// Gamma distribution with shape `a` and scale `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaFit<T> {
    pub a: T,
    pub b: T,
}

/// Moment-matched Gamma law: `a = mean² / variance`, `b = variance / mean`.
pub fn gamma_fit<T: Real>(mean: T, variance: T) -> Result<GammaFit<T>> {
    if !(mean > T::zero()) || !(variance > T::zero()) || !mean.is_finite() || !variance.is_finite() {
        return Err(invalid(format!(
            "gamma fit needs positive finite mean and variance, got {mean}, {variance}"
        )));
    }
    Ok(GammaFit {
        a: mean * mean / variance,
        b: variance / mean,
    })
}

impl<T: Real> GammaFit<T> {
    pub fn mean(&self) -> T {
        self.a * self.b
    }

    pub fn variance(&self) -> T {
        self.a * self.b * self.b
    }

    pub fn cdf(&self, x: T) -> T {
        gamma_cdf(x, self)
    }

    pub fn pdf(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        let a = self.a.to_f64_lossy();
        let b = self.b.to_f64_lossy();
        let x = x.to_f64_lossy();
        let ln = (a - 1.0) * x.ln() - x / b - a * b.ln() - statrs::function::gamma::ln_gamma(a);
        T::lit(ln.exp())
    }
}

/// Regularized lower incomplete gamma `P(a, x / b)`.
pub fn gamma_cdf<T: Real>(x: T, fit: &GammaFit<T>) -> T {
    if !(x > T::zero()) {
        return T::zero();
    }
    if x.is_infinite() {
        return T::one();
    }
    let z = (x / fit.b).to_f64_lossy();
    match checked_gamma_lr(fit.a.to_f64_lossy(), z) {
        Ok(p) => T::lit(p.clamp(0.0, 1.0)),
        Err(_) => T::zero(),
    }
}

/// Analytical SINR model for one scenario and one set of `λ²` moments.
#[derive(Debug, Clone, Copy)]
pub struct SinrModel<T> {
    pub scenario: Scenario<T>,
    pub lambda: LambdaMoments<T>,
}

impl<T: Real> SinrModel<T> {
    pub fn new(scenario: Scenario<T>, lambda: LambdaMoments<T>) -> Result<Self> {
        scenario.validate()?;
        if lambda.m != scenario.m {
            return Err(invalid(format!(
                "lambda moments computed for m = {} but scenario has m = {}",
                lambda.m, scenario.m
            )));
        }
        Ok(Self { scenario, lambda })
    }

    /// Uses the default cached Monte Carlo `λ²` moments.
    pub fn with_default_moments(scenario: Scenario<T>) -> Result<Self> {
        let lambda = LambdaMoments::for_antennas(scenario.m)?;
        Self::new(scenario, lambda)
    }

    pub fn moments(&self, k: usize) -> Result<SinrMoments<T>> {
        sinr_moments(k, &self.scenario, &self.lambda)
    }

    pub fn fit(&self, k: usize) -> Result<GammaFit<T>> {
        let mo = self.moments(k)?;
        gamma_fit(mo.mean, mo.variance)
    }

    pub fn outage(&self, k: usize) -> Result<T> {
        outage_probability(k, &self.scenario, &self.lambda)
    }
}

/// `P(SINR < SINR_th)` under the `K`-conditioned Gamma fit.
pub fn outage_probability<T: Real>(k: usize, scenario: &Scenario<T>, lambda: &LambdaMoments<T>) -> Result<T> {
    let mo = sinr_moments(k, scenario, lambda)?;
    let fit = gamma_fit(mo.mean, mo.variance)?;
    Ok(gamma_cdf(scenario.sinr_threshold(), &fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randmat::MomentMethod;

    fn scenario(m: usize) -> Scenario<f64> {
        Scenario::default().with_antennas(m)
    }

    fn exp_moments(m: usize) -> LambdaMoments<f64> {
        LambdaMoments::exact(m).unwrap()
    }

    #[test]
    fn eta_at_zero_is_one() {
        assert_eq!(eta_mp(0.0, &scenario(4)).unwrap(), 1.0);
        assert!(eta_mp(-1.0, &scenario(4)).is_err());
    }

    #[test]
    fn eta_decreases_to_zero() {
        let s = scenario(4);
        let mut prev = 1.0;
        for i in 1..60 {
            let g = 10f64.powf(-6.0 + i as f64 * 0.25);
            let v = eta_mp(g, &s).unwrap();
            assert!(v <= prev && v > 0.0);
            prev = v;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn closed_form_derivative_matches_difference() {
        let s = scenario(4);
        for &g in &[1e-4, 0.01, 0.3, 1.0, 7.0] {
            let h = g * 1e-6;
            let fd = (eta_mp(g + h, &s).unwrap() - eta_mp(g - h, &s).unwrap()) / (2.0 * h);
            let d = eta_mp_derivative(g, &s).unwrap();
            assert!((fd - d).abs() <= 1e-6 * d.abs(), "{g}: {fd} vs {d}");
        }
    }

    #[test]
    fn derivative_at_zero_is_limit() {
        let s = scenario(4);
        let d0 = eta_mp_derivative(0.0, &s).unwrap();
        let d = eta_mp_derivative(1e-12, &s).unwrap();
        assert!((d0 - d).abs() <= 1e-4 * d0.abs());
    }

    #[test]
    fn general_theta_matches_closed_form_at_four() {
        let s = scenario(4);
        let mut t = s;
        t.theta = 4.0 + 1e-13; // forces the quadrature branch
        for &g in &[0.001, 0.1, 1.0] {
            let a = eta_mp(g, &s).unwrap();
            let b = eta_mp(g, &t).unwrap();
            assert!((a - b).abs() < 1e-8, "{a} {b}");
        }
    }

    #[test]
    fn no_interferers() {
        let sol = solve_eta(1.0, 0, &scenario(4)).unwrap();
        assert_eq!((sol.eta, sol.eta_prime), (1.0, 0.0));
    }

    #[test]
    fn eta_decreasing_in_k() {
        let s = scenario(4);
        let mut prev = 1.0 + 1e-15;
        for k in 0..=50 {
            let sol = solve_eta(1.0, k, &s).unwrap();
            assert!(sol.eta < prev && sol.eta > 0.0 && sol.eta <= 1.0);
            assert!(sol.residual <= 1e-10);
            assert!(sol.eta_prime <= 0.0);
            prev = sol.eta;
        }
    }

    #[test]
    fn implicit_derivative_matches_finite_difference() {
        let s = scenario(4);
        for k in 1..=50 {
            let sol = solve_eta(1.0, k, &s).unwrap();
            let fd = eta_prime_finite_difference(1.0, k, &s).unwrap();
            assert!((sol.eta_prime - fd).abs() <= 1e-4 * fd.abs(), "K={k}: {} vs {fd}", sol.eta_prime);
        }
    }

    #[test]
    fn single_antenna_no_interference() {
        let lm = LambdaMoments {
            m: 1,
            moment1: 1.0,
            moment2: 2.0,
            method: MomentMethod::Exact,
        };
        let s = scenario(1);
        assert!((sinr_mean(0, &s, &lm).unwrap() - 100.0).abs() < 1e-12);
        assert!((sinr_variance(0, &s, &lm).unwrap() - 1e4).abs() < 1e-8);
    }

    #[test]
    fn mean_and_variance_decrease_with_k() {
        let s = scenario(4);
        let lm = exp_moments(4);
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for k in 0..=50 {
            let mo = sinr_moments(k, &s, &lm).unwrap();
            assert!(mo.mean < prev.0 && mo.variance < prev.1, "K={k}");
            assert!(mo.mean <= s.signal_power() * lm.moment1 * (1.0 + 1e-12));
            prev = (mo.mean, mo.variance);
        }
    }

    #[test]
    fn breakdown_is_reported() {
        let lm = LambdaMoments {
            m: 4,
            moment1: 10.0,
            moment2: 90.0, // below moment1², forcing a negative variance
            method: MomentMethod::Exact,
        };
        assert!(matches!(
            sinr_variance(3, &scenario(4), &lm),
            Err(Error::ApproximationBreakdown { k: 3, .. })
        ));
    }

    #[test]
    fn gamma_fit_arithmetic() {
        let f = gamma_fit(10.0f64, 25.0).unwrap();
        assert!((f.a - 4.0).abs() < 1e-15 && (f.b - 2.5).abs() < 1e-15);
        assert!(gamma_fit(0.0, 1.0).is_err());
        assert!(gamma_fit(1.0, -1.0).is_err());
    }

    #[test]
    fn gamma_cdf_special_cases() {
        let f = GammaFit { a: 1.0, b: 3.0 };
        assert_eq!(gamma_cdf(0.0, &f), 0.0);
        for i in 1..50 {
            let x = i as f64 * 0.37;
            assert!((gamma_cdf(x, &f) - (1.0 - (-x / 3.0).exp())).abs() < 1e-12);
        }
    }

    #[test]
    fn outage_vanishes_for_zero_threshold() {
        let mut s = scenario(4);
        s.sinr_th_db = f64::NEG_INFINITY;
        assert_eq!(outage_probability(5, &s, &exp_moments(4)).unwrap(), 0.0);
    }

    #[test]
    fn outage_nondecreasing_in_k() {
        let s = scenario(4);
        let lm = exp_moments(4);
        let mut prev = 0.0;
        for k in 0..=50 {
            let p = outage_probability(k, &s, &lm).unwrap();
            assert!(p >= prev - 1e-15, "K={k}");
            prev = p;
        }
        assert!(outage_probability(0, &s, &lm).unwrap() < 1e-6);
    }

    #[test]
    fn single_precision_pipeline() {
        let s: Scenario<f32> = Scenario::default();
        let lm = LambdaMoments::<f32>::exact(4).unwrap();
        let mo = sinr_moments(2, &s, &lm).unwrap();
        let lm64 = exp_moments(4);
        let mo64 = sinr_moments(2, &scenario(4), &lm64).unwrap();
        assert!(((mo.mean as f64) - mo64.mean).abs() < 1e-3 * mo64.mean);
    }
}
