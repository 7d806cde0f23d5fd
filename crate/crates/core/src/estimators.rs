//! Monte Carlo estimators built on the closed-form representations: the
//! passage-time density, its two time-zero limits, the jump part of the
//! joint (tau, overshoot, undershoot) law and functionals against it.
//!
//! All estimators are conditioned on the jump skeleton: instead of counting
//! crossings in a small window, each path contributes the exact Gaussian or
//! passage kernel given its skeleton. Direct finite-difference estimators are
//! kept only as oracles.
//!
//! Determinism: every path owns a ChaCha stream indexed by its global path
//! number, shards accumulate running moments over fixed index ranges, and
//! shard partials are reduced in shard order. For a fixed
//! `(seed, shards)` the result is bit-for-bit reproducible regardless of
//! thread scheduling; runs at nested horizons reuse per-path stream prefixes,
//! so hit indicators are nested exactly.

use crate::closed_form::{bm_fpt_density, normal_pdf};
use crate::error::{Error, Result};
use crate::path_sim::{cross_indicator, sample_hitting, HitStatus, HittingRecord, ModelParams};
use crate::quad;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;

/// Sample budget, seeding and sharding of one Monte Carlo run.
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub n: u64,
    pub seed: u64,
    pub shards: u32,
    /// Bisection depth for continuous-crossing timestamps.
    pub depth: u32,
}

impl McConfig {
    pub fn new(n: u64, seed: u64, shards: u32, depth: u32) -> Self {
        Self {
            n,
            seed,
            shards: shards.max(1),
            depth,
        }
    }

    /// Same budget, decorrelated stream space.
    pub fn reseeded(self, salt: u64) -> Self {
        Self {
            seed: mix_seed(self.seed, salt),
            ..self
        }
    }
}

/// Universal return of every Monte Carlo operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Sample standard deviation over sqrt(n), pooled across shards.
    pub stderr: f64,
    pub n: u64,
    pub method: &'static str,
}

/// One point of the jump-crossing part of the joint law: the density `g` in
/// `(t, l)` with respect to `dt dl`, to be paired with the image measure in
/// the overshoot variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointDensityPoint {
    pub t: f64,
    pub l: f64,
    pub g: f64,
    pub stderr: f64,
    pub n: u64,
}

/// Welford running moments; exact zero variance on constant inputs and
/// stable pooling across shards.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub(crate) fn push(&mut self, v: f64) {
        self.count += 1;
        let d = v - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (v - self.mean);
    }

    pub(crate) fn merge(&mut self, other: Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let d = other.mean - self.mean;
        self.mean += d * nb / (na + nb);
        self.m2 += other.m2 + d * d * na * nb / (na + nb);
        self.count += other.count;
    }

    pub(crate) fn estimate(&self, method: &'static str) -> Estimate {
        let n = self.count;
        let stderr = if n > 1 {
            let var = (self.m2 / (n as f64 - 1.0)).max(0.0);
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Estimate {
            value: self.mean,
            stderr,
            n,
            method,
        }
    }
}

pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn shard_range(n: u64, shards: u32, s: u32) -> (u64, u64) {
    let per = n / shards as u64;
    let rem = n % shards as u64;
    let s = s as u64;
    let start = s * per + s.min(rem);
    (start, start + per + u64::from(s < rem))
}

fn path_rng(seed: u64, path_idx: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_idx);
    rng
}

/// Run `f` once per path with that path's own stream, accumulating `dims`
/// per-path outputs into pooled moments. Shard partials are combined in
/// shard order.
pub(crate) fn run_paths<F>(cfg: McConfig, dims: usize, f: F) -> Vec<Moments>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let partials: Vec<Vec<Moments>> = (0..cfg.shards)
        .into_par_iter()
        .map(|s| {
            let (lo, hi) = shard_range(cfg.n, cfg.shards, s);
            let mut acc = vec![Moments::default(); dims];
            let mut scratch = vec![0.0; dims];
            for idx in lo..hi {
                scratch.fill(0.0);
                let mut rng = path_rng(cfg.seed, idx);
                f(&mut rng, &mut scratch);
                for d in 0..dims {
                    acc[d].push(scratch[d]);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::default(); dims];
    for shard in partials {
        for (t, p) in total.iter_mut().zip(shard) {
            t.merge(p);
        }
    }
    total
}

/// Run `f` once per path, collecting one value per path in path order.
pub(crate) fn map_paths<T, F>(cfg: McConfig, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> T + Sync,
{
    let mut shards: Vec<Vec<T>> = (0..cfg.shards)
        .into_par_iter()
        .map(|s| {
            let (lo, hi) = shard_range(cfg.n, cfg.shards, s);
            let mut out = Vec::with_capacity((hi - lo) as usize);
            for idx in lo..hi {
                let mut rng = path_rng(cfg.seed, idx);
                out.push(f(&mut rng));
            }
            out
        })
        .collect();
    let mut all = Vec::with_capacity(cfg.n as usize);
    for s in &mut shards {
        all.append(s);
    }
    all
}

/// Simulate `cfg.n` hitting records to the horizon, in path order.
pub fn collect_hitting_records(
    model: &ModelParams,
    horizon: f64,
    cfg: McConfig,
) -> Vec<HittingRecord> {
    map_paths(cfg, |rng| sample_hitting(model, horizon, cfg.depth, rng))
}

/// State of one path observed at its last jump before `t`.
#[derive(Debug, Clone, Copy)]
struct WalkEnd {
    /// No crossing occurred up to and including the last jump.
    alive: bool,
    /// X at the last jump before `t` (0 when there is none).
    value: f64,
    /// Time of that jump.
    t_last: f64,
}

/// Walk the skeleton over `[0, t)`: exact crossing indicator on each
/// inter-jump interval, exact jump-crossing test at each jump.
fn walk_to_last_jump<R: Rng + ?Sized>(model: &ModelParams, t: f64, rng: &mut R) -> WalkEnd {
    let x = model.barrier;
    let m = model.drift;
    let dead = WalkEnd {
        alive: false,
        value: 0.0,
        t_last: 0.0,
    };
    if model.intensity == 0.0 {
        return WalkEnd {
            alive: true,
            value: 0.0,
            t_last: 0.0,
        };
    }
    let gap = Exp::new(model.intensity).unwrap();
    let mut time = 0.0;
    let mut v = 0.0;
    loop {
        let tj = time + gap.sample(rng);
        if tj >= t {
            return WalkEnd {
                alive: true,
                value: v,
                t_last: time,
            };
        }
        let dt = tj - time;
        let g: f64 = StandardNormal.sample(rng);
        let w = v + m * dt + dt.sqrt() * g;
        if cross_indicator(v, w, x, dt, rng) {
            return dead;
        }
        let y = model.law.sample(rng);
        if y >= x - w {
            return dead;
        }
        v = w + y;
        time = tj;
    }
}

/// Density of the passage time at `t > 0`, from its two-term representation:
/// `lambda E[1_{tau > t} (1 - F_Y)(x - X_t)]` with the endpoint of the
/// partial interval drawn and its crossing checked, plus
/// `E[1_{tau > T_{N_t}} f~(t - T_{N_t}, x - X_{T_{N_t}})]`.
pub fn density(model: &ModelParams, t: f64, cfg: McConfig) -> Result<Estimate> {
    if t <= 0.0 {
        return Err(Error::Domain(format!(
            "t = {t} must be positive (the t = 0 value is closed-form)"
        )));
    }
    let mom = run_paths(cfg, 1, |rng, out| {
        let (t1, t2) = density_path_terms(model, t, rng);
        out[0] = t1 + t2;
    });
    Ok(mom[0].estimate("skeleton_conditioned_mc"))
}

fn density_path_terms<R: Rng + ?Sized>(model: &ModelParams, t: f64, rng: &mut R) -> (f64, f64) {
    let x = model.barrier;
    let m = model.drift;
    let w = walk_to_last_jump(model, t, rng);
    if !w.alive {
        return (0.0, 0.0);
    }
    let u = t - w.t_last;
    let term2 = bm_fpt_density(u, x - w.value, m);
    let mut term1 = 0.0;
    if model.intensity > 0.0 {
        let g: f64 = StandardNormal.sample(rng);
        let xt = w.value + m * u + u.sqrt() * g;
        if !cross_indicator(w.value, xt, x, u, rng) {
            term1 = model.intensity * (1.0 - model.law.cdf(x - xt));
        }
    }
    (term1, term2)
}

/// The two terms of the density estimated separately at a small `t`, so each
/// time-zero limit can be tested against its own constant:
/// term 1 tends to `(lambda/2)(2 - F_Y(x) - F_Y(x-))`, term 2 to
/// `(lambda/4)(F_Y(x) - F_Y(x-))`.
pub fn zero_limit_terms(
    model: &ModelParams,
    t: f64,
    cfg: McConfig,
) -> Result<(Estimate, Estimate)> {
    if t <= 0.0 {
        return Err(Error::Domain(format!("t = {t} must be positive")));
    }
    let mom = run_paths(cfg, 2, |rng, out| {
        let (t1, t2) = density_path_terms(model, t, rng);
        out[0] = t1;
        out[1] = t2;
    });
    Ok((
        mom[0].estimate("tail_term_mc"),
        mom[1].estimate("passage_kernel_term_mc"),
    ))
}

/// `E[1_{tau > T_{N_t}} f~(t - T_{N_t}, x - X_{T_{N_t}})^p]`. For `p = 1`
/// this is the second term of the density. The moment is finite for
/// `p < 3/2` and diverges beyond (the last jump can land arbitrarily close
/// to `t`, giving the kernel a tail of index `3/(2p - 1)` in distribution);
/// finiteness is only probed inside that range.
pub fn passage_kernel_moment(
    model: &ModelParams,
    t: f64,
    p: f64,
    cfg: McConfig,
) -> Result<Estimate> {
    if t <= 0.0 {
        return Err(Error::Domain(format!("t = {t} must be positive")));
    }
    let x = model.barrier;
    let m = model.drift;
    let mom = run_paths(cfg, 1, |rng, out| {
        let w = walk_to_last_jump(model, t, rng);
        if w.alive {
            out[0] = bm_fpt_density(t - w.t_last, x - w.value, m).powf(p);
        }
    });
    Ok(mom[0].estimate("passage_kernel_moment_mc"))
}

/// Gaussian density with mean `m u` and variance `u`, evaluated at `z`.
fn drifted_gauss_pdf(z: f64, m: f64, u: f64) -> f64 {
    normal_pdf((z - m * u) / u.sqrt()) / u.sqrt()
}

/// Per-path kernel of the jump part,
/// `f_0(x - v - l) - e^{2m(x-v)} f_0(v - x - l)` with `c = x - v > 0`,
/// evaluated in the equivalent factored form
/// `f_0(c - l) * (1 - e^{-2 c l / u})`, which is free of cancellation and
/// manifestly nonnegative for `l >= 0`.
fn joint_kernel(x: f64, m: f64, v: f64, u: f64, l: f64) -> f64 {
    let c = x - v;
    drifted_gauss_pdf(c - l, m, u) * (-(-2.0 * c * l / u).exp_m1())
}

#[cfg(test)]
fn joint_kernel_difference_form(x: f64, m: f64, v: f64, u: f64, l: f64) -> f64 {
    drifted_gauss_pdf(x - v - l, m, u)
        - (2.0 * m * (x - v)).exp() * drifted_gauss_pdf(v - x - l, m, u)
}

/// Jump-crossing part of the joint law at `(t, l)`:
/// `g(t, l) = lambda E[1_{tau > T_{N_t}} (f_0(x - X - l) - e^{2m(x-X)} f_0(X - x - l))]`
/// with `X = X_{T_{N_t}}` and `f_0` Gaussian with mean `m (t - T_{N_t})` and
/// variance `t - T_{N_t}`; see [`joint_kernel`] for the evaluated form.
pub fn joint_density_jump_part(
    model: &ModelParams,
    t: f64,
    l: f64,
    cfg: McConfig,
) -> Result<JointDensityPoint> {
    if t <= 0.0 {
        return Err(Error::Domain(format!("t = {t} must be positive")));
    }
    if l < 0.0 {
        return Err(Error::Domain(format!("l = {l} must be nonnegative")));
    }
    let x = model.barrier;
    let m = model.drift;
    let lambda = model.intensity;
    let mom = run_paths(cfg, 1, |rng, out| {
        let w = walk_to_last_jump(model, t, rng);
        if w.alive {
            out[0] = lambda * joint_kernel(x, m, w.value, t - w.t_last, l);
        }
    });
    let e = mom[0].estimate("joint_kernel_mc");
    Ok(JointDensityPoint {
        t,
        l,
        g: e.value,
        stderr: e.stderr,
        n: e.n,
    })
}

/// A factor of the undershoot integrand tabulated on a uniform grid over
/// `[0, upper]`, evaluated by linear interpolation.
struct TabulatedFactor {
    upper: f64,
    step: f64,
    values: Vec<f64>,
}

impl TabulatedFactor {
    fn tabulate(upper: f64, resolution: usize, f: impl Fn(f64) -> f64) -> Self {
        let step = upper / resolution as f64;
        let values = (0..=resolution)
            .map(|i| f((i as f64 * step).min(upper)))
            .collect();
        Self {
            upper,
            step,
            values,
        }
    }

    fn try_tabulate(upper: f64, resolution: usize, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let step = upper / resolution as f64;
        let values = (0..=resolution)
            .map(|i| f((i as f64 * step).min(upper)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            upper,
            step,
            values,
        })
    }

    fn eval(&self, l: f64) -> f64 {
        if l < 0.0 || l > self.upper {
            return 0.0;
        }
        let s = l / self.step;
        let i = (s as usize).min(self.values.len() - 2);
        let frac = s - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}

/// Both routes to `lim_{h -> 0} (1/h) E[1_{t < tau <= t+h} phi(K) psi(L)]`:
///
/// * `analytic`: integral over the undershoot of `psi(l)` times the image
///   integral of `phi` against the per-path jump kernel, by adaptive
///   quadrature, plus the continuous-crossing term
///   `phi(0) psi(0) E[1_{tau > T_{N_t}} f~(t - T_{N_t}, x - X_{T_{N_t}})]`;
/// * `direct`: the finite difference `(1/h) E[1_{t < tau <= t+h} phi(K) psi(L)]`
///   from full path simulation, on decorrelated streams (the oracle route).
pub fn joint_functional(
    model: &ModelParams,
    t: f64,
    h: f64,
    phi: impl Fn(f64) -> f64 + Sync,
    psi: impl Fn(f64) -> f64 + Sync,
    cfg: McConfig,
) -> Result<(Estimate, Estimate)> {
    if t <= 0.0 || h <= 0.0 {
        return Err(Error::Domain(format!(
            "t = {t} and h = {h} must be positive"
        )));
    }
    let analytic = joint_functional_analytic(model, t, &phi, &psi, cfg)?;
    let direct = hitting_functional_window(model, t, t + h, &phi, &psi, cfg.reseeded(0xd12ec7))?;
    Ok((analytic, direct))
}

/// Finite-difference functional over a time window:
/// `E[1_{t0 < tau <= t1} phi(K) psi(L)] / (t1 - t0)` from full path
/// simulation. With `t0 = 0` this is the direct route to the time-zero
/// functional; with `t0 = t`, `t1 = t + h` it is the oracle for the joint
/// law at `t`.
pub fn hitting_functional_window(
    model: &ModelParams,
    t0: f64,
    t1: f64,
    phi: impl Fn(f64) -> f64 + Sync,
    psi: impl Fn(f64) -> f64 + Sync,
    cfg: McConfig,
) -> Result<Estimate> {
    if !(t1 > t0 && t0 >= 0.0) {
        return Err(Error::Domain(format!(
            "need 0 <= t0 < t1, got ({t0}, {t1})"
        )));
    }
    let width = t1 - t0;
    let mom = run_paths(cfg, 1, |rng, out| {
        let rec = sample_hitting(model, t1, cfg.depth, rng);
        if let Some(tau) = rec.tau {
            if tau > t0 {
                out[0] = phi(rec.overshoot) * psi(rec.undershoot) / width;
            }
        }
    });
    Ok(mom[0].estimate("finite_difference_mc"))
}

fn joint_functional_analytic(
    model: &ModelParams,
    t: f64,
    phi: &(impl Fn(f64) -> f64 + Sync),
    psi: &(impl Fn(f64) -> f64 + Sync),
    cfg: McConfig,
) -> Result<Estimate> {
    let x = model.barrier;
    let m = model.drift;
    let lambda = model.intensity;

    let walks = map_paths(cfg, |rng| {
        let w = walk_to_last_jump(model, t, rng);
        (w.alive, w.value, t - w.t_last)
    });

    // Undershoot range: beyond l_max every per-path Gaussian kernel carries
    // less than 1e-10 mass given the sampled skeleton values.
    let mut l_max = 0.0f64;
    for &(alive, v, u) in &walks {
        if alive {
            l_max = l_max.max(x - v + 8.0 * u.sqrt() + m.abs() * u);
        }
    }

    if lambda == 0.0 || l_max <= 0.0 {
        // Pure diffusion: only the continuous-crossing term remains.
        let scale = phi(0.0) * psi(0.0);
        let mut mom = Moments::default();
        for &(alive, v, u) in &walks {
            let val = if alive {
                scale * bm_fpt_density(u, x - v, m)
            } else {
                0.0
            };
            mom.push(val);
        }
        return Ok(mom.estimate("joint_functional_analytic"));
    }

    // The undershoot integrand factorizes as psi(l) * (image integral of phi
    // at shift l) * kernel(l). The image integral splits into a smooth
    // density part and one truncated smooth piece per atom; each factor is
    // tabulated once and reused across paths, keeping the per-path quadrature
    // free of inner integrals.
    const RESOLUTION: usize = 8192;
    let mut parts: Vec<TabulatedFactor> = Vec::new();
    if model.law.density_weight() > 0.0 {
        let law = &model.law;
        parts.push(TabulatedFactor::try_tabulate(l_max, RESOLUTION, |l| {
            let mut acc = 0.0;
            for (fam, w) in law.components() {
                let (lo, hi) = fam.truncated_support();
                let lo = lo.max(l);
                if lo < hi {
                    acc += w * quad::integrate(|y| phi(y - l) * fam.pdf(y), lo, hi, 1e-9, 1e-12)?;
                }
            }
            Ok(psi(l) * acc)
        })?);
    }
    for atom in model.law.atoms() {
        if atom.location <= 0.0 {
            continue;
        }
        let upper = atom.location.min(l_max);
        let (mass, loc) = (atom.mass, atom.location);
        parts.push(TabulatedFactor::tabulate(upper, RESOLUTION, |l| {
            mass * psi(l) * phi(loc - l)
        }));
    }

    let cont_scale = phi(0.0) * psi(0.0);
    let chunk = 4096;
    let partials: Vec<Result<Moments>> = walks
        .par_chunks(chunk)
        .map(|block| {
            let mut mom = Moments::default();
            for &(alive, v, u) in block {
                if !alive {
                    mom.push(0.0);
                    continue;
                }
                let mut val = cont_scale * bm_fpt_density(u, x - v, m);
                let sd = u.sqrt();
                let c0 = x - v - m * u;
                let lo = (c0 - 9.0 * sd).max(0.0);
                for part in &parts {
                    let hi = (c0 + 9.0 * sd).min(part.upper);
                    if lo < hi {
                        val += lambda
                            * quad::integrate(
                                |l| part.eval(l) * joint_kernel(x, m, v, u, l),
                                lo,
                                hi,
                                1e-7,
                                1e-11,
                            )?;
                    }
                }
                mom.push(val);
            }
            Ok(mom)
        })
        .collect();
    let mut total = Moments::default();
    for p in partials {
        total.merge(p?);
    }
    Ok(total.estimate("joint_functional_analytic"))
}

/// P(tau <= horizon) with the survived mass implicit in the complement;
/// nondecreasing in the horizon exactly on nested samples (per-path streams).
pub fn total_mass(model: &ModelParams, horizon: f64, cfg: McConfig) -> Result<Estimate> {
    if horizon <= 0.0 {
        return Err(Error::Domain(format!(
            "horizon = {horizon} must be positive"
        )));
    }
    let mom = run_paths(cfg, 1, |rng, out| {
        let rec = sample_hitting(model, horizon, cfg.depth, rng);
        out[0] = f64::from(rec.status != HitStatus::SurvivedHorizon);
    });
    Ok(mom[0].estimate("hit_fraction_mc"))
}
