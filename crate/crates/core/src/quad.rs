//! Adaptive Gauss-Legendre quadrature on finite intervals.
//!
//! A 15-point rule is applied per segment; a segment is accepted when the
//! two-half refinement agrees with the parent value within its share of the
//! requested tolerance, otherwise it is bisected. Node locations are the
//! roots of the degree-15 Legendre polynomial, computed once by Newton
//! iteration.

use crate::error::{Error, Result};
use std::sync::LazyLock;

const ORDER: usize = 15;
const MAX_SEGMENTS: usize = 100_000;

struct Rule {
    nodes: [f64; ORDER],
    weights: [f64; ORDER],
}

/// Legendre P_n(x) and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

static RULE: LazyLock<Rule> = LazyLock::new(|| {
    let mut nodes = [0.0; ORDER];
    let mut weights = [0.0; ORDER];
    for i in 0..ORDER {
        // Tricomi initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (ORDER as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(ORDER, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(ORDER, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * d * d);
    }
    Rule { nodes, weights }
});

fn gl15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let rule = &*RULE;
    let mut acc = 0.0;
    for i in 0..ORDER {
        acc += rule.weights[i] * f(c + h * rule.nodes[i]);
    }
    acc * h
}

/// Integrate `f` over `[a, b]` to the requested tolerances.
///
/// The effective local tolerance is `max(abs_tol, rel_tol * |I|)` distributed
/// proportionally to segment length. Fails with [`Error::Numerical`] if the
/// segment budget is exhausted before convergence.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain("quadrature bounds must be finite".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    let whole = gl15(&f, a, b);
    let mut total = 0.0f64;
    let mut segments = 0usize;
    // Stack of (lo, hi, parent estimate).
    let mut stack = vec![(a, b, whole)];
    let span = (b - a).abs();
    while let Some((lo, hi, parent)) = stack.pop() {
        segments += 1;
        if segments > MAX_SEGMENTS {
            return Err(Error::Numerical(format!(
                "adaptive quadrature on [{a}, {b}] exceeded {MAX_SEGMENTS} segments"
            )));
        }
        let mid = 0.5 * (lo + hi);
        let left = gl15(&f, lo, mid);
        let right = gl15(&f, mid, hi);
        let refined = left + right;
        let err = (refined - parent).abs();
        let scale = whole.abs().max(total.abs());
        let local_tol = (abs_tol.max(rel_tol * scale)) * ((hi - lo).abs() / span);
        if err <= local_tol || (hi - lo).abs() < 1e-15 * span {
            total += refined;
        } else {
            stack.push((lo, mid, left));
            stack.push((mid, hi, right));
        }
    }
    Ok(total)
}

/// Non-adaptive 15-point Gauss-Legendre value on `[a, b]`.
pub fn fixed_gl15<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    gl15(&f, a, b)
}
