//! Brute-force validators and statistical test helpers.
//!
//! The fine-grid simulator here deliberately shares no crossing logic with
//! `path_sim` (no conditional bridge probabilities anywhere): agreement
//! between the two routes is evidence, not tautology. Continuous crossings on
//! the grid are systematically late by O(sqrt(step)); jump crossings carry no
//! bias beyond snapping the jump times to the grid.
//!
//! The statistical convention throughout is three standard errors (or the
//! matching chi-square / Kolmogorov-Smirnov quantile), plus explicitly stated
//! discretization allowances where a method carries bias.

use crate::error::{Error, Result};
use crate::estimators::{map_paths, run_paths, Estimate, McConfig};
use crate::path_sim::{HitStatus, HittingRecord, ModelParams};
use crate::quad;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Two-sided tail mass of a 3-sigma normal deviation.
pub const THREE_SIGMA_TAIL: f64 = 0.0026997960632601866;

/// A path tabulated on a uniform grid, jumps injected at snapped times.
#[derive(Debug, Clone)]
pub struct GridPath {
    pub step: f64,
    /// Process value at `k * step` for `k = 0..=n_steps`, after any jumps
    /// snapped to that grid point.
    pub values: Vec<f64>,
}

fn snapped_jump_indices<R: Rng + ?Sized>(
    intensity: f64,
    horizon: f64,
    step: f64,
    n_steps: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut idx = Vec::new();
    if intensity > 0.0 {
        let gap = Exp::new(intensity).unwrap();
        let mut t = gap.sample(rng);
        while t <= horizon {
            // |snap error| <= step / 2
            idx.push(((t / step).round() as usize).min(n_steps));
            t += gap.sample(rng);
        }
    }
    idx
}

/// Euler-exact fine-grid simulation of one path: Gaussian increments per
/// step, jumps at snapped times, crossing detected by level comparison at
/// grid points and at jump injections.
pub fn grid_hitting<R: Rng + ?Sized>(
    model: &ModelParams,
    horizon: f64,
    step: f64,
    rng: &mut R,
) -> HittingRecord {
    debug_assert!(step > 0.0 && horizon > 0.0);
    let x = model.barrier;
    let n_steps = (horizon / step).round().max(1.0) as usize;
    let jumps = snapped_jump_indices(model.intensity, horizon, step, n_steps, rng);
    let mut ji = 0;
    let mut v = 0.0;
    let mut n_jumps = 0u64;
    let sd = step.sqrt();
    let drift = model.drift * step;
    for k in 0..=n_steps {
        if k > 0 {
            let g: f64 = StandardNormal.sample(rng);
            v += drift + sd * g;
            if v >= x {
                return HittingRecord {
                    status: HitStatus::HitContinuous,
                    tau: Some(k as f64 * step),
                    overshoot: 0.0,
                    undershoot: 0.0,
                    n_jumps_before: n_jumps,
                };
            }
        }
        while ji < jumps.len() && jumps[ji] == k {
            let y = model.law.sample(rng);
            let under = x - v;
            if y >= under {
                return HittingRecord {
                    status: HitStatus::HitJump,
                    tau: Some(k as f64 * step),
                    overshoot: y - under,
                    undershoot: under,
                    n_jumps_before: n_jumps,
                };
            }
            v += y;
            ji += 1;
            n_jumps += 1;
        }
    }
    HittingRecord {
        status: HitStatus::SurvivedHorizon,
        tau: None,
        overshoot: 0.0,
        undershoot: 0.0,
        n_jumps_before: n_jumps,
    }
}

/// Tabulate one fine-grid path to the horizon (no early stopping).
pub fn sample_grid_path<R: Rng + ?Sized>(
    model: &ModelParams,
    horizon: f64,
    step: f64,
    rng: &mut R,
) -> GridPath {
    debug_assert!(step > 0.0 && horizon > 0.0);
    let n_steps = (horizon / step).round().max(1.0) as usize;
    let jumps = snapped_jump_indices(model.intensity, horizon, step, n_steps, rng);
    let mut ji = 0;
    let mut v = 0.0;
    let sd = step.sqrt();
    let drift = model.drift * step;
    let mut values = Vec::with_capacity(n_steps + 1);
    for k in 0..=n_steps {
        if k > 0 {
            let g: f64 = StandardNormal.sample(rng);
            v += drift + sd * g;
        }
        while ji < jumps.len() && jumps[ji] == k {
            v += model.law.sample(rng);
            ji += 1;
        }
        values.push(v);
    }
    GridPath { step, values }
}

/// Simulate `cfg.n` fine-grid records in path order (parallel, deterministic
/// for fixed seed and shard count).
pub fn collect_grid_records(
    model: &ModelParams,
    horizon: f64,
    step: f64,
    cfg: McConfig,
) -> Vec<HittingRecord> {
    map_paths(cfg, |rng| grid_hitting(model, horizon, step, rng))
}

/// Fraction of fine-grid Brownian bridges from 0 to `a` over `[0, u]` that
/// stay strictly below `c` at every interior grid point. Grid bias makes this
/// an overestimate of the continuous no-crossing probability by
/// O(sqrt(u / steps)).
pub fn bridge_stay_below_fraction(a: f64, c: f64, u: f64, steps: u32, cfg: McConfig) -> Estimate {
    let mom = run_paths(cfg, 1, |rng, out| {
        let dt = u / steps as f64;
        let mut b = 0.0;
        let mut below = a < c;
        for k in 0..steps - 1 {
            let remaining = (steps - k) as f64 * dt;
            let mean = b + dt * (a - b) / remaining;
            let var = dt * (remaining - dt) / remaining;
            let g: f64 = StandardNormal.sample(rng);
            b = mean + var.sqrt() * g;
            if b >= c {
                below = false;
                break;
            }
        }
        out[0] = f64::from(below);
    });
    mom[0].estimate("grid_bridge_oracle")
}

/// Quadrature route to the no-crossing probability: the (sup, endpoint)
/// density integrated in the supremum up to the barrier, normalized by the
/// Gaussian endpoint density. Drift must cancel.
pub fn no_cross_prob_by_reflection(a: f64, c: f64, u: f64, m: f64) -> Result<f64> {
    if c <= 0.0 || u <= 0.0 {
        return Err(Error::Domain("need c > 0 and u > 0".into()));
    }
    if a >= c {
        return Ok(0.0);
    }
    let num = quad::integrate(
        |b| crate::closed_form::sup_endpoint_density(b, a, u, m),
        a.max(0.0),
        c,
        1e-12,
        1e-14,
    )?;
    let den = crate::closed_form::normal_pdf((a - m * u) / u.sqrt()) / u.sqrt();
    Ok(num / den)
}

/// Quadrature route to the total passage mass of the drifted Brownian
/// motion: integral of the passage density over all durations, via the
/// substitution `u = 1/r^2` which makes the integrand smooth and compact.
pub fn bm_fpt_mass_quadrature(x: f64, m: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::Domain(format!("level x = {x} must be positive")));
    }
    let r_max = (10.0 + (100.0 + 4.0 * x * m.abs()).sqrt()) / (2.0 * x) + 1.0;
    quad::integrate(
        |r| {
            if r <= 0.0 {
                return if m == 0.0 {
                    2.0 * x / crate::closed_form::SQRT_2PI
                } else {
                    0.0
                };
            }
            2.0 / (r * r * r) * crate::closed_form::bm_fpt_density(1.0 / (r * r), x, m)
        },
        0.0,
        r_max,
        1e-9,
        1e-12,
    )
}

/// Monte Carlo route to `E[1_{N_t >= 2} (t - T_{N_t})^beta]` by simulating
/// the Poisson arrival process directly (the series in `closed_form` is the
/// analytic route).
pub fn gamma_tail_mc(lambda: f64, t: f64, beta: f64, cfg: McConfig) -> Estimate {
    let gap = Exp::new(lambda).unwrap();
    let mom = run_paths(cfg, 1, |rng, out| {
        let mut last = 0.0;
        let mut count = 0u32;
        let mut arrival = gap.sample(rng);
        while arrival <= t {
            last = arrival;
            count += 1;
            arrival += gap.sample(rng);
        }
        if count >= 2 {
            out[0] = (t - last).powf(beta);
        }
    });
    mom[0].estimate("poisson_walk_mc")
}

/// Largest absolute violation of the square-completion identity over a
/// random parameter sweep: `u, v` in `[0.1, 10]`, `y, z, a` in `[-5, 5]`.
pub fn square_completion_max_error(draws: u64, seed: u64) -> f64 {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let u = 0.1 + 9.9 * rng.random::<f64>();
        let v = 0.1 + 9.9 * rng.random::<f64>();
        let y = -5.0 + 10.0 * rng.random::<f64>();
        let z = -5.0 + 10.0 * rng.random::<f64>();
        let a = -5.0 + 10.0 * rng.random::<f64>();
        let sc = crate::closed_form::square_completion(u, v, y, z);
        let err = (crate::closed_form::quadratic_pair(u, v, y, z, a) - sc.combined(a)).abs();
        worst = worst.max(err);
    }
    worst
}

/// One bucket of a histogram comparison; counts are real so that expected
/// counts under a density fit the same shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bucket {
    pub lo: f64,
    pub hi: f64,
    pub count_a: f64,
    pub count_b: f64,
}

/// Outcome of a chi-square histogram comparison at the 3-sigma-equivalent
/// quantile.
#[derive(Debug, Clone)]
pub struct HistogramComparison {
    pub buckets: Vec<Bucket>,
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn bucket_counts(samples: &[f64], edges: &[f64]) -> Vec<f64> {
    let mut counts = vec![0.0; edges.len() - 1];
    let lo = edges[0];
    let hi = edges[edges.len() - 1];
    let last = counts.len() - 1;
    for &s in samples {
        if s >= lo && s <= hi {
            let i = edges.partition_point(|e| *e <= s).saturating_sub(1);
            counts[i.min(last)] += 1.0;
        }
    }
    counts
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 3 {
        return Err(Error::Usage("need at least 2 buckets (3 edges)".into()));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Usage(
            "bucket edges must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Chi-square quantile at tail mass `p` for the given degrees of freedom.
pub fn chi_square_critical_value(df: f64, p: f64) -> f64 {
    ChiSquared::new(df.max(1.0)).unwrap().inverse_cdf(1.0 - p)
}

fn chi_square_threshold(df: f64) -> f64 {
    chi_square_critical_value(df, THREE_SIGMA_TAIL)
}

/// Two-sample chi-square comparison of bucket counts.
pub fn compare_histograms_two_sample(
    samples_a: &[f64],
    samples_b: &[f64],
    edges: &[f64],
) -> Result<HistogramComparison> {
    check_edges(edges)?;
    if samples_a.is_empty() || samples_b.is_empty() {
        return Err(Error::Usage("empty sample set".into()));
    }
    let ca = bucket_counts(samples_a, edges);
    let cb = bucket_counts(samples_b, edges);
    let na: f64 = ca.iter().sum();
    let nb: f64 = cb.iter().sum();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Usage(
            "no samples fall inside the bucket range".into(),
        ));
    }
    let (ra, rb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let mut stat = 0.0;
    let mut used = 0usize;
    let mut buckets = Vec::with_capacity(ca.len());
    for i in 0..ca.len() {
        buckets.push(Bucket {
            lo: edges[i],
            hi: edges[i + 1],
            count_a: ca[i],
            count_b: cb[i],
        });
        let total = ca[i] + cb[i];
        if total > 0.0 {
            let d = ra * ca[i] - rb * cb[i];
            stat += d * d / total;
            used += 1;
        }
    }
    let threshold = chi_square_threshold(used.saturating_sub(1) as f64);
    Ok(HistogramComparison {
        buckets,
        statistic: stat,
        threshold,
        pass: stat <= threshold,
    })
}

/// One-sample chi-square of bucket counts against a density, normalized over
/// the bucketed range. Buckets with expected count below 5 are pooled with
/// their right neighbours for the statistic.
pub fn compare_histogram_to_density(
    samples: &[f64],
    density: impl Fn(f64) -> f64,
    edges: &[f64],
) -> Result<HistogramComparison> {
    check_edges(edges)?;
    if samples.is_empty() {
        return Err(Error::Usage("empty sample set".into()));
    }
    let counts = bucket_counts(samples, edges);
    let n_in: f64 = counts.iter().sum();
    if n_in == 0.0 {
        return Err(Error::Usage(
            "no samples fall inside the bucket range".into(),
        ));
    }
    let masses: Vec<f64> = (0..counts.len())
        .map(|i| quad::fixed_gl15(&density, edges[i], edges[i + 1]).max(0.0))
        .collect();
    let total_mass: f64 = masses.iter().sum();
    if total_mass <= 0.0 {
        return Err(Error::Usage(
            "density has no mass on the bucket range".into(),
        ));
    }
    let mut buckets = Vec::with_capacity(counts.len());
    for i in 0..counts.len() {
        buckets.push(Bucket {
            lo: edges[i],
            hi: edges[i + 1],
            count_a: counts[i],
            count_b: n_in * masses[i] / total_mass,
        });
    }
    // Pool low-expectation buckets left to right.
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut obs_acc, mut exp_acc) = (0.0, 0.0);
    for b in &buckets {
        obs_acc += b.count_a;
        exp_acc += b.count_b;
        if exp_acc >= 5.0 {
            pooled.push((obs_acc, exp_acc));
            obs_acc = 0.0;
            exp_acc = 0.0;
        }
    }
    if exp_acc > 0.0 || obs_acc > 0.0 {
        if let Some(last) = pooled.last_mut() {
            last.0 += obs_acc;
            last.1 += exp_acc;
        } else {
            pooled.push((obs_acc, exp_acc));
        }
    }
    if pooled.len() < 2 {
        return Err(Error::Usage(
            "fewer than 2 buckets with expected count >= 5".into(),
        ));
    }
    let stat: f64 = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let threshold = chi_square_threshold((pooled.len() - 1) as f64);
    Ok(HistogramComparison {
        buckets,
        statistic: stat,
        threshold,
        pass: stat <= threshold,
    })
}

/// One-sample Kolmogorov-Smirnov statistic against a CDF (sorts in place).
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("NaN in samples"));
    let n = samples.len() as f64;
    let mut d = 0.0f64;
    for (i, &s) in samples.iter().enumerate() {
        let f = cdf(s);
        d = d
            .max((f - i as f64 / n).abs())
            .max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Asymptotic critical value of the one-sample KS statistic at tail mass `p`:
/// `c / sqrt(n)` where `Q_KS(c) = p`.
pub fn ks_critical_value(n: usize, p: f64) -> f64 {
    // Q_KS(c) = 2 sum_k (-1)^{k-1} exp(-2 k^2 c^2), inverted by bisection.
    let q = |c: f64| {
        let mut s = 0.0;
        for k in 1..100 {
            let term = 2.0 * (-2.0 * (k as f64 * c).powi(2)).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-16 {
                break;
            }
        }
        s
    };
    let (mut lo, mut hi) = (0.2, 4.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if q(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi) / (n as f64).sqrt()
}

/// Fit `y = a + sum_j b_j x^{p_j}` exactly through the points and return the
/// intercept with its propagated standard error. Needs
/// `xs.len() == powers.len() + 1`.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[f64], ses: &[f64], powers: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert_eq!(n, powers.len() + 1, "need one point per coefficient");
    assert_eq!(n, ys.len());
    assert_eq!(n, ses.len());
    // Solve A^T w = e_0; the intercept is w . y.
    let mut at = vec![vec![0.0; n]; n];
    for (i, &x) in xs.iter().enumerate() {
        at[0][i] = 1.0;
        for (j, &p) in powers.iter().enumerate() {
            at[j + 1][i] = x.powf(p);
        }
    }
    let mut rhs = vec![0.0; n];
    rhs[0] = 1.0;
    let w = solve_dense(&mut at, &mut rhs);
    let value = w.iter().zip(ys).map(|(wi, yi)| wi * yi).sum();
    let var = w
        .iter()
        .zip(ses)
        .map(|(wi, si)| (wi * si) * (wi * si))
        .sum::<f64>();
    (value, var.sqrt())
}

/// Gaussian elimination with partial pivoting for the tiny systems above.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        assert!(a[col][col].abs() > 1e-14, "singular extrapolation system");
        let pivot_row = a[col].clone();
        for row in col + 1..n {
            let f = a[row][col] / pivot_row[col];
            for (k, &p) in pivot_row.iter().enumerate().skip(col) {
                a[row][k] -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x
}

/// Histogram density estimate at `t` from passage-time samples: fraction of
/// all `n_total` paths with tau in the width-`w` bucket centred at `t`,
/// divided by `w`; the standard error is binomial.
pub fn histogram_density_at(taus: &[f64], n_total: u64, t: f64, width: f64) -> (f64, f64) {
    let lo = t - 0.5 * width;
    let hi = t + 0.5 * width;
    let count = taus.iter().filter(|&&u| u > lo && u <= hi).count() as f64;
    let n = n_total as f64;
    let p = count / n;
    (p / width, (p * (1.0 - p) / n).sqrt() / width)
}
