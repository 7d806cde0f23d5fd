//! Exact-in-distribution simulation of the jump diffusion on its jump
//! skeleton.
//!
//! Between jumps the path is a drifted Brownian motion, so hit/no-hit on an
//! inter-jump interval can be decided from the two endpoint values alone by
//! the conditional no-crossing probability. Crossings at jump times are read
//! off the pre- and post-jump values exactly. The only discretized quantity
//! is the timestamp of a continuous crossing, located by bridge bisection to
//! resolution `u * 2^-depth` and uniformly dithered within the final
//! subinterval.

use crate::closed_form::crossing_prob_given_endpoint;
use crate::error::{Error, Result};
use crate::jump_law::JumpLaw;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

/// Full specification of the process `X_t = m t + W_t + sum_{i<=N_t} Y_i`
/// and its barrier.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Drift per unit time.
    pub drift: f64,
    /// Jump intensity; zero yields the pure drifted Brownian motion.
    pub intensity: f64,
    /// Jump-size law.
    pub law: JumpLaw,
    /// Barrier level, strictly positive.
    pub barrier: f64,
}

impl ModelParams {
    pub fn new(drift: f64, intensity: f64, law: JumpLaw, barrier: f64) -> Result<Self> {
        if !barrier.is_finite() || barrier <= 0.0 {
            return Err(Error::Domain(format!(
                "barrier x = {barrier} must be positive"
            )));
        }
        if !intensity.is_finite() || intensity < 0.0 {
            return Err(Error::Domain(format!(
                "intensity lambda = {intensity} must be nonnegative"
            )));
        }
        if !drift.is_finite() {
            return Err(Error::Domain(format!("drift m = {drift} must be finite")));
        }
        Ok(Self {
            drift,
            intensity,
            law,
            barrier,
        })
    }

    /// `m + lambda E[Y]`; the passage time is almost surely finite iff this
    /// is nonnegative.
    pub fn mean_displacement_rate(&self) -> f64 {
        self.drift + self.intensity * self.law.mean()
    }
}

/// The process observed at its jump times.
#[derive(Debug, Clone, Default)]
pub struct PathSkeleton {
    pub jump_times: Vec<f64>,
    pub pre_jump_values: Vec<f64>,
    pub post_jump_values: Vec<f64>,
    pub horizon: f64,
}

impl PathSkeleton {
    pub fn len(&self) -> usize {
        self.jump_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }
}

/// How a path resolved against the barrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitStatus {
    /// The diffusion reached the barrier between jumps.
    HitContinuous,
    /// A jump carried the path across the barrier.
    HitJump,
    /// No crossing up to the horizon.
    SurvivedHorizon,
}

/// Outcome of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingRecord {
    pub status: HitStatus,
    /// Passage time; present iff the barrier was hit.
    pub tau: Option<f64>,
    /// `X_tau - x`; zero for continuous crossings.
    pub overshoot: f64,
    /// `x - X_{tau-}`; zero for continuous crossings.
    pub undershoot: f64,
    /// Jumps completed strictly before tau (total jumps when survived).
    pub n_jumps_before: u64,
}

/// Sample the jump skeleton on `[0, horizon]`: Poisson jump times, Gaussian
/// inter-jump increments with mean `m dt` and variance `dt`, jump sizes from
/// the law.
pub fn sample_skeleton<R: Rng + ?Sized>(
    model: &ModelParams,
    horizon: f64,
    rng: &mut R,
) -> PathSkeleton {
    debug_assert!(horizon > 0.0);
    let mut skel = PathSkeleton {
        horizon,
        ..Default::default()
    };
    if model.intensity == 0.0 {
        return skel;
    }
    let gap = Exp::new(model.intensity).unwrap();
    let mut t = gap.sample(rng);
    let mut prev_t = 0.0;
    let mut v = 0.0;
    while t <= horizon {
        let dt = t - prev_t;
        let g: f64 = StandardNormal.sample(rng);
        let pre = v + model.drift * dt + dt.sqrt() * g;
        let post = pre + model.law.sample(rng);
        skel.jump_times.push(t);
        skel.pre_jump_values.push(pre);
        skel.post_jump_values.push(post);
        v = post;
        prev_t = t;
        t += gap.sample(rng);
    }
    skel
}

/// Unbiased crossing indicator for a drifted-Brownian interval with known
/// endpoint values: true with probability
/// `1 - no_cross_prob_given_endpoint(x_end - x_start, barrier - x_start, u)`.
pub fn crossed_on_interval<R: Rng + ?Sized>(
    x_start: f64,
    x_end: f64,
    barrier: f64,
    u: f64,
    rng: &mut R,
) -> Result<bool> {
    if u <= 0.0 {
        return Err(Error::Domain(format!(
            "interval length u = {u} must be positive"
        )));
    }
    Ok(cross_indicator(x_start, x_end, barrier, u, rng))
}

pub(crate) fn cross_indicator<R: Rng + ?Sized>(
    x_start: f64,
    x_end: f64,
    barrier: f64,
    u: f64,
    rng: &mut R,
) -> bool {
    if x_start >= barrier || x_end >= barrier {
        return true;
    }
    let p = crossing_prob_given_endpoint(x_end - x_start, barrier - x_start, u);
    rng.random::<f64>() < p
}

/// Locate the first crossing time within an interval already known to
/// contain one (offset in `(0, u]` from the interval start).
///
/// Bridge bisection: the midpoint is drawn conditionally on the endpoints
/// and redrawn until consistent with the crossing, so each half-interval
/// choice carries exactly its conditional probability and "no crossing found"
/// is impossible by construction. After `depth` levels the subinterval has
/// length `u * 2^-depth`; the returned time is its right edge if the right
/// endpoint value sits at or above the barrier (the crossing is then located
/// there within resolution), else uniformly dithered within the subinterval.
pub fn sample_crossing_time<R: Rng + ?Sized>(
    x_start: f64,
    x_end: f64,
    barrier: f64,
    u: f64,
    depth: u32,
    rng: &mut R,
) -> f64 {
    debug_assert!(u > 0.0);
    debug_assert!(x_start < barrier);
    let (mut lo, mut hi) = (0.0, u);
    let (mut a, mut b) = (x_start, x_end);
    for _ in 0..depth {
        let len = hi - lo;
        let half = 0.5 * len;
        let mut guard = 0u32;
        loop {
            let g: f64 = StandardNormal.sample(rng);
            let mid = 0.5 * (a + b) + 0.5 * len.sqrt() * g;
            let p_left = crossing_prob_given_endpoint(mid - a, barrier - a, half);
            if rng.random::<f64>() < p_left {
                hi = lo + half;
                b = mid;
                break;
            }
            let p_right = crossing_prob_given_endpoint(b - mid, barrier - mid, half);
            if rng.random::<f64>() < p_right {
                lo += half;
                a = mid;
                break;
            }
            guard += 1;
            if guard > 100_000 {
                // Only reachable when the crossing probability underflows;
                // keep the likelier half.
                if p_left >= (1.0 - p_left) * p_right {
                    hi = lo + half;
                    b = mid;
                } else {
                    lo += half;
                    a = mid;
                }
                break;
            }
        }
    }
    if b >= barrier {
        hi
    } else {
        hi - rng.random::<f64>() * (hi - lo)
    }
}

/// Simulate one path to the horizon and report hit/no-hit, the passage time
/// and the overshoot/undershoot pair.
///
/// Intervals are walked jump to jump; continuous crossings are decided by the
/// exact indicator and timestamped by [`sample_crossing_time`], jump
/// crossings are detected from `X_{T-} < x <= X_{T-} + Y`. The undershoot is
/// `L = x - X_{T-}` and the overshoot `K = Y - L`, so `K + L` reproduces the
/// jump bit-exactly.
pub fn sample_hitting<R: Rng + ?Sized>(
    model: &ModelParams,
    horizon: f64,
    depth: u32,
    rng: &mut R,
) -> HittingRecord {
    debug_assert!(horizon > 0.0);
    let x = model.barrier;
    let m = model.drift;
    let gap = (model.intensity > 0.0).then(|| Exp::new(model.intensity).unwrap());
    let mut t = 0.0;
    let mut v = 0.0;
    let mut n_jumps = 0u64;
    loop {
        let next_jump = gap.as_ref().map(|d| t + d.sample(rng));
        let seg_end = next_jump.unwrap_or(f64::INFINITY).min(horizon);
        let dt = seg_end - t;
        if dt > 0.0 {
            let g: f64 = StandardNormal.sample(rng);
            let w_end = v + m * dt + dt.sqrt() * g;
            if cross_indicator(v, w_end, x, dt, rng) {
                let tau = t + sample_crossing_time(v, w_end, x, dt, depth, rng);
                return HittingRecord {
                    status: HitStatus::HitContinuous,
                    tau: Some(tau),
                    overshoot: 0.0,
                    undershoot: 0.0,
                    n_jumps_before: n_jumps,
                };
            }
            v = w_end;
            t = seg_end;
        }
        match next_jump {
            Some(tj) if tj <= horizon => {
                let y = model.law.sample(rng);
                let under = x - v; // > 0: the interval check would have fired otherwise
                if y >= under {
                    return HittingRecord {
                        status: HitStatus::HitJump,
                        tau: Some(tj),
                        overshoot: y - under,
                        undershoot: under,
                        n_jumps_before: n_jumps,
                    };
                }
                v += y;
                n_jumps += 1;
            }
            _ => {
                return HittingRecord {
                    status: HitStatus::SurvivedHorizon,
                    tau: None,
                    overshoot: 0.0,
                    undershoot: 0.0,
                    n_jumps_before: n_jumps,
                };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(m: f64, lambda: f64, law: JumpLaw, x: f64) -> ModelParams {
        ModelParams::new(m, lambda, law, x).unwrap()
    }

    #[test]
    fn params_are_validated() {
        let law = JumpLaw::exponential(1.0).unwrap();
        assert!(ModelParams::new(0.0, 1.0, law.clone(), 0.0).is_err());
        assert!(ModelParams::new(0.0, -1.0, law.clone(), 1.0).is_err());
        assert!(ModelParams::new(f64::NAN, 1.0, law, 1.0).is_err());
    }

    #[test]
    fn skeleton_empty_for_zero_intensity() {
        let m = model(0.3, 0.0, JumpLaw::exponential(1.0).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_skeleton(&m, 10.0, &mut rng);
        assert!(s.is_empty());
        assert_eq!(s.horizon, 10.0);
    }

    #[test]
    fn skeleton_jump_count_mean() {
        // Poisson CLT bound: 3 * sqrt(lambda h / n).
        let m = model(0.0, 1.0, JumpLaw::exponential(1.0).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let total: usize = (0..n)
            .map(|_| sample_skeleton(&m, 10.0, &mut rng).len())
            .sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 10.0).abs() < 0.03, "mean jump count {mean}");
    }

    #[test]
    fn skeleton_invariants_and_increment_normality() {
        let m = model(0.4, 1.5, JumpLaw::gaussian(0.0, 1.0).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut standardized = Vec::new();
        for _ in 0..2_000 {
            let s = sample_skeleton(&m, 5.0, &mut rng);
            let mut prev_t = 0.0;
            let mut prev_v = 0.0;
            for i in 0..s.len() {
                assert!(s.jump_times[i] > prev_t && s.jump_times[i] <= s.horizon);
                let dt = s.jump_times[i] - prev_t;
                standardized.push((s.pre_jump_values[i] - prev_v - m.drift * dt) / dt.sqrt());
                prev_t = s.jump_times[i];
                prev_v = s.post_jump_values[i];
            }
        }
        let d = crate::oracle::ks_statistic(&mut standardized, crate::closed_form::normal_cdf);
        let crit =
            crate::oracle::ks_critical_value(standardized.len(), crate::oracle::THREE_SIGMA_TAIL);
        assert!(d < crit, "KS {d} above {crit}");
    }

    #[test]
    fn skeleton_jump_sizes_are_recorded() {
        // Point-mass jumps: post minus pre recovers the sampled jump up to
        // one rounding of the addition.
        let m = model(0.3, 2.0, JumpLaw::point_mass(0.75).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let s = sample_skeleton(&m, 20.0, &mut rng);
        assert!(!s.is_empty());
        for i in 0..s.len() {
            let jump = s.post_jump_values[i] - s.pre_jump_values[i];
            assert!((jump - 0.75).abs() < 1e-13, "jump {jump}");
        }
    }

    #[test]
    fn crossing_trivial_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(crossed_on_interval(0.0, 1.2, 1.0, 1.0, &mut rng).unwrap());
        assert!(crossed_on_interval(1.0, 0.2, 1.0, 1.0, &mut rng).unwrap());
        assert!(crossed_on_interval(0.0, 0.5, 1.0, 0.0, &mut rng).is_err());
    }

    #[test]
    fn crossing_frequency_matches_conditional_probability() {
        // Bridge from 0 to 0 over unit time crosses level 1 with probability e^-2.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| crossed_on_interval(0.0, 0.0, 1.0, 1.0, &mut rng).unwrap())
            .count();
        let freq = hits as f64 / n as f64;
        let p = (-2.0f64).exp();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() < 3.0 * se, "freq {freq} vs {p}");
    }

    #[test]
    fn crossing_time_boundary_case() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = sample_crossing_time(0.0, 1.5, 1.0, 2.0, 0, &mut rng);
        assert_eq!(t, 2.0);
    }

    #[test]
    fn crossing_time_stays_in_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2_000 {
            let ok = crossed_on_interval(0.0, 0.4, 1.0, 1.0, &mut rng).unwrap();
            if ok {
                let t = sample_crossing_time(0.0, 0.4, 1.0, 1.0, 20, &mut rng);
                assert!(t > 0.0 && t <= 1.0, "t = {t}");
            }
        }
    }

    #[test]
    fn jump_crossing_bookkeeping_is_exact() {
        // Jumps of size 2x force jump crossings with K + L = 2x exactly.
        let x = 1.0;
        let m = model(0.0, 5.0, JumpLaw::point_mass(2.0 * x).unwrap(), x);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut seen_jump = 0;
        for _ in 0..5_000 {
            let r = sample_hitting(&m, 10.0, 16, &mut rng);
            match r.status {
                HitStatus::HitJump => {
                    seen_jump += 1;
                    // L = x - X_{T-} <= 2x here: jumps from below -x cannot cross.
                    assert!(r.undershoot > 0.0 && r.undershoot <= 2.0 * x);
                    assert!(r.overshoot >= 0.0);
                    assert_eq!(r.overshoot + r.undershoot, 2.0 * x);
                    assert!(r.tau.is_some());
                }
                HitStatus::HitContinuous => {
                    assert_eq!(r.overshoot, 0.0);
                    assert_eq!(r.undershoot, 0.0);
                }
                HitStatus::SurvivedHorizon => assert!(r.tau.is_none()),
            }
        }
        assert!(seen_jump > 1_000, "jump crossings {seen_jump}");
    }

    #[test]
    fn pure_diffusion_hit_probability() {
        // lambda = 0, m = 0, x = 1, horizon 5: P(hit) = 2(1 - Phi(1/sqrt(5))).
        let m = model(0.0, 0.0, JumpLaw::exponential(1.0).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| sample_hitting(&m, 5.0, 20, &mut rng).status != HitStatus::SurvivedHorizon)
            .count();
        let freq = hits as f64 / n as f64;
        let p = 2.0 * (1.0 - crate::closed_form::normal_cdf(1.0 / 5.0f64.sqrt()));
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((freq - p).abs() < 3.0 * se, "freq {freq} vs {p}");
    }

    #[test]
    fn defective_case_survives() {
        // m + lambda E[Y] = -0.5 < 0: survival frequency stays away from 0.
        let m = model(-1.0, 1.0, JumpLaw::exponential(2.0).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 20_000;
        let survived = (0..n)
            .filter(|_| sample_hitting(&m, 50.0, 12, &mut rng).status == HitStatus::SurvivedHorizon)
            .count();
        assert!(survived as f64 / n as f64 > 0.2, "survived {survived}/{n}");
    }

    #[test]
    fn determinism_for_fixed_seed() {
        let m = model(0.1, 1.0, JumpLaw::kou(0.6, 2.0, 3.0).unwrap(), 1.0);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            (0..200)
                .map(|_| sample_hitting(&m, 5.0, 20, &mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
