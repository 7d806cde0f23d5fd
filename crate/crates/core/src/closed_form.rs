//! Closed-form kernels for the first passage of a drifted Brownian motion
//! and the time-zero behaviour of the jump-diffusion passage density.
//!
//! The Brownian motion has unit volatility throughout; a general volatility
//! is obtained by rescaling the level, the drift and the jump law on the
//! caller's side. Passage densities are extended by zero to nonpositive
//! durations and levels so that downstream estimators never branch.

use crate::error::{Error, Result};
use crate::jump_law::JumpLaw;

pub(crate) const SQRT_2PI: f64 = 2.5066282746310002;

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

/// Standard normal distribution function, via the complementary error
/// function in double precision.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// E[(sd * G + mean)_+] for standard Gaussian G: mean * Phi(mean/sd) + sd * phi(mean/sd).
pub fn gaussian_plus_mean(mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return mean.max(0.0);
    }
    let z = mean / sd;
    mean * normal_cdf(z) + sd * normal_pdf(z)
}

/// Density of the first passage time of `t -> m t + W_t` at level `x`:
/// `|x| / sqrt(2 pi u^3) * exp(-(x - m u)^2 / (2u))`, extended by zero to
/// `u <= 0` and `x <= 0`.
pub fn bm_fpt_density(u: f64, x: f64, m: f64) -> f64 {
    if u <= 0.0 || x <= 0.0 {
        return 0.0;
    }
    let d = x - m * u;
    x / (SQRT_2PI * (u * u * u).sqrt()) * (-d * d / (2.0 * u)).exp()
}

/// P(the drifted Brownian motion never reaches `x` > 0): zero for `m >= 0`,
/// `1 - exp(2 m x)` for `m < 0`.
pub fn bm_never_hit_prob(x: f64, m: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::Domain(format!("level x = {x} must be positive")));
    }
    if m >= 0.0 {
        Ok(0.0)
    } else {
        Ok(-(2.0 * m * x).exp_m1())
    }
}

/// Joint density of (running supremum, endpoint) of the drifted Brownian
/// motion at time `t`, nonzero for `b > max(0, a)`:
/// `2(2b - a)/sqrt(2 pi t^3) * exp(-(2b - a)^2/(2t) + m a - m^2 t / 2)`.
pub fn sup_endpoint_density(b: f64, a: f64, t: f64, m: f64) -> f64 {
    if t <= 0.0 || b <= a.max(0.0) {
        return 0.0;
    }
    let s = 2.0 * b - a;
    2.0 * s / (SQRT_2PI * (t * t * t).sqrt()) * (-s * s / (2.0 * t) + m * a - 0.5 * m * m * t).exp()
}

/// P(sup over [0, u] stays below `c` | endpoint displacement is `a`):
/// `1_{a < c} (1 - exp(-2 c (c - a) / u))`. Drift-free: `m` cancels in the
/// conditioning.
pub fn no_cross_prob_given_endpoint(a: f64, c: f64, u: f64) -> Result<f64> {
    if c <= 0.0 {
        return Err(Error::Domain(format!(
            "barrier offset c = {c} must be positive"
        )));
    }
    if u <= 0.0 {
        return Err(Error::Domain(format!("duration u = {u} must be positive")));
    }
    if a >= c {
        Ok(0.0)
    } else {
        Ok(-(-2.0 * c * (c - a) / u).exp_m1())
    }
}

/// Complement of [`no_cross_prob_given_endpoint`], computed without
/// cancellation: `exp(-2 c (c - a)/u)` for `a < c`, else 1.
pub(crate) fn crossing_prob_given_endpoint(a: f64, c: f64, u: f64) -> f64 {
    if a >= c {
        1.0
    } else {
        (-2.0 * c * (c - a) / u).exp()
    }
}

/// Result of completing the square in `(a - z)^2/u + (a - y)^2/v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareCompletion {
    pub center: f64,
    pub scale: f64,
    pub residual: f64,
}

impl SquareCompletion {
    /// `(a - center)^2 / scale + residual`.
    pub fn combined(&self, a: f64) -> f64 {
        let d = a - self.center;
        d * d / self.scale + self.residual
    }
}

/// Sum of the two quadratics before completion, `(a - z)^2/u + (a - y)^2/v`.
pub fn quadratic_pair(u: f64, v: f64, y: f64, z: f64, a: f64) -> f64 {
    (a - z) * (a - z) / u + (a - y) * (a - y) / v
}

/// Complete the square: for all `a`,
/// `(a - z)^2/u + (a - y)^2/v = (a - center)^2/scale + residual` with
/// `center = (v z + u y)/(v + u)`, `scale = u v/(u + v)`,
/// `residual = (z - y)^2/(u + v)`. Requires `u, v > 0`.
pub fn square_completion(u: f64, v: f64, y: f64, z: f64) -> SquareCompletion {
    debug_assert!(u > 0.0 && v > 0.0);
    SquareCompletion {
        center: (v * z + u * y) / (v + u),
        scale: u * v / (u + v),
        residual: (z - y) * (z - y) / (u + v),
    }
}

/// `E[f~(u, mu + sigma G) 1_{mu + sigma G > 0}]` for standard Gaussian G,
/// where f~ is [`bm_fpt_density`]:
/// `exp(-(mu - m u)^2 / (2(sigma^2 + u))) / (sqrt(2 pi u) (sigma^2 + u))`
/// times the positive-part mean of a Gaussian with standard deviation
/// `sigma` and mean `sqrt(u/(sigma^2+u)) (mu - m u) + m sqrt(u (sigma^2+u))`.
pub fn gaussian_smoothed_fpt_density(u: f64, mu: f64, sigma: f64, m: f64) -> f64 {
    debug_assert!(sigma >= 0.0);
    if u <= 0.0 {
        return 0.0;
    }
    let s2u = sigma * sigma + u;
    let d = mu - m * u;
    let shift = (u / s2u).sqrt() * d + m * (u * s2u).sqrt();
    (-d * d / (2.0 * s2u)).exp() / (SQRT_2PI * u.sqrt() * s2u) * gaussian_plus_mean(shift, sigma)
}

/// Exact value and bound for `E[1_{N_t >= 2} (t - T_{N_t})^beta]` where N is
/// a Poisson process with the given rate and T_n its n-th arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaTailSeries {
    /// `sum_{n >= 2} lambda^n e^{-lambda t} t^{n + beta} B(n, beta + 1)/(n-1)!`.
    pub value: f64,
    /// `(sum_{n >= 1} lambda^n e^t B(n, beta + 1)/(n-1)!) t^{2 + beta}`.
    pub bound: f64,
}

/// Evaluate the series above for `beta > -1` and `0 < t <= 1`, truncating
/// once terms fall below 1e-15. The value never exceeds the bound.
pub fn gamma_tail_series(lambda: f64, t: f64, beta: f64) -> Result<GammaTailSeries> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::Domain(format!(
            "rate lambda = {lambda} must be positive"
        )));
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Domain(format!("t = {t} must lie in (0, 1]")));
    }
    if beta.is_nan() || beta <= -1.0 {
        return Err(Error::Domain(format!("beta = {beta} must exceed -1")));
    }
    const MAX_TERMS: usize = 1000;
    const CUTOFF: f64 = 1e-15;

    // B(n, beta + 1) obeys B(n+1, .) = B(n, .) * n / (n + beta + 1), so both
    // series advance by a single multiplicative factor per term.
    let mut value = 0.0;
    let mut term =
        lambda * lambda * (-lambda * t).exp() * t.powf(2.0 + beta) / ((beta + 1.0) * (beta + 2.0)); // n = 2
    let mut n = 2.0;
    let mut converged = false;
    for _ in 0..MAX_TERMS {
        value += term;
        term *= lambda * t / (n + beta + 1.0);
        n += 1.0;
        if term < CUTOFF {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "series for (lambda, t, beta) = ({lambda}, {t}, {beta}) did not converge in {MAX_TERMS} terms"
        )));
    }

    let mut bound_sum = 0.0;
    let mut bterm = lambda * t.exp() / (beta + 1.0); // n = 1
    let mut n = 1.0;
    converged = false;
    for _ in 0..MAX_TERMS {
        bound_sum += bterm;
        bterm *= lambda / (n + beta + 1.0);
        n += 1.0;
        if bterm < CUTOFF * bound_sum.max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical("bound series did not converge".into()));
    }
    let bound = bound_sum * t.powf(2.0 + beta);
    assert!(
        value <= bound * (1.0 + 1e-12),
        "series value {value} exceeds its bound {bound}"
    );
    Ok(GammaTailSeries { value, bound })
}

/// Value of the passage-time density at t = 0 for barrier `x`:
/// `(lambda/2)(2 - F_Y(x) - F_Y(x-)) + (lambda/4)(F_Y(x) - F_Y(x-))`.
pub fn density_at_zero(law: &JumpLaw, lambda: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0 && lambda >= 0.0);
    let f = law.cdf(x);
    let f_left = law.cdf_left(x);
    0.5 * lambda * (2.0 - f - f_left) + 0.25 * lambda * (f - f_left)
}

/// Time-zero limit of `(1/h) E[1_{tau <= h} phi(K) psi(L)]`: the sum of an
/// atom term `(lambda/4) dF(x) phi(0) psi(0)`, a jump-over term
/// `lambda psi(x) E[phi(Y - x) 1_{Y > x}]` and a boundary atom term
/// `(lambda/2) dF(x) phi(0) psi(x)`.
pub fn zero_time_functional(
    law: &JumpLaw,
    lambda: f64,
    x: f64,
    phi: impl Fn(f64) -> f64,
    psi: impl Fn(f64) -> f64,
) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::Domain(format!("level x = {x} must be positive")));
    }
    let d = law.atom_mass(x);
    // integrate_image includes Y = x; the jump-over term needs Y > x strictly.
    let over = law.integrate_image(x, &phi)? - phi(0.0) * d;
    Ok(0.25 * lambda * d * phi(0.0) * psi(0.0)
        + lambda * psi(x) * over
        + 0.5 * lambda * d * phi(0.0) * psi(x))
}
