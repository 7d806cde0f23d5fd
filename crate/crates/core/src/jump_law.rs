//! Jump-size distributions: a finite atom list plus an absolutely continuous
//! mixture part, with exact CDF and left limits.
//!
//! Atoms are stored exactly as `(location, mass)` pairs so that the jump
//! `F_Y(x) - F_Y(x-)` of the distribution function is available without any
//! numerical differentiation. The continuous part is a weighted mixture of
//! analytic families (exponential, Gaussian, double-exponential), each with a
//! closed-form CDF and mean.

use crate::error::{Error, Result};
use crate::quad;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

/// Tail cut-off: beyond the truncated support each side holds < 1e-12 mass.
const TAIL_MASS_LOG: f64 = 27.631021115928547; // -ln(1e-12)
const GAUSS_TAIL_Z: f64 = 7.2;

/// One absolutely continuous mixture component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpFamily {
    /// Exponential law with the given rate, supported on `[0, inf)`.
    Exponential { rate: f64 },
    /// Gaussian law.
    Gaussian { mu: f64, sigma: f64 },
    /// Double-exponential (asymmetric Laplace): with probability `up_prob` an
    /// upward Exp(`eta_plus`) jump, otherwise a downward Exp(`eta_minus`) one.
    Kou {
        up_prob: f64,
        eta_plus: f64,
        eta_minus: f64,
    },
}

impl JumpFamily {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            JumpFamily::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            JumpFamily::Gaussian { mu, sigma } => {
                mu.is_finite() && sigma > 0.0 && sigma.is_finite()
            }
            JumpFamily::Kou {
                up_prob,
                eta_plus,
                eta_minus,
            } => {
                (0.0..=1.0).contains(&up_prob)
                    && eta_plus > 0.0
                    && eta_plus.is_finite()
                    && eta_minus > 0.0
                    && eta_minus.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidLaw(format!("invalid parameters: {self:?}")))
        }
    }

    pub fn pdf(&self, y: f64) -> f64 {
        match *self {
            JumpFamily::Exponential { rate } => {
                if y < 0.0 {
                    0.0
                } else {
                    rate * (-rate * y).exp()
                }
            }
            JumpFamily::Gaussian { mu, sigma } => {
                let z = (y - mu) / sigma;
                (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            }
            JumpFamily::Kou {
                up_prob,
                eta_plus,
                eta_minus,
            } => {
                if y >= 0.0 {
                    up_prob * eta_plus * (-eta_plus * y).exp()
                } else {
                    (1.0 - up_prob) * eta_minus * (eta_minus * y).exp()
                }
            }
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match *self {
            JumpFamily::Exponential { rate } => {
                if y < 0.0 {
                    0.0
                } else {
                    -(-rate * y).exp_m1()
                }
            }
            JumpFamily::Gaussian { mu, sigma } => crate::closed_form::normal_cdf((y - mu) / sigma),
            JumpFamily::Kou {
                up_prob,
                eta_plus,
                eta_minus,
            } => {
                if y < 0.0 {
                    (1.0 - up_prob) * (eta_minus * y).exp()
                } else {
                    (1.0 - up_prob) + up_prob * (-(-eta_plus * y).exp_m1())
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            JumpFamily::Exponential { rate } => 1.0 / rate,
            JumpFamily::Gaussian { mu, .. } => mu,
            JumpFamily::Kou {
                up_prob,
                eta_plus,
                eta_minus,
            } => up_prob / eta_plus - (1.0 - up_prob) / eta_minus,
        }
    }

    /// Interval outside of which each tail carries less than 1e-12 mass.
    pub fn truncated_support(&self) -> (f64, f64) {
        match *self {
            JumpFamily::Exponential { rate } => (0.0, TAIL_MASS_LOG / rate),
            JumpFamily::Gaussian { mu, sigma } => {
                (mu - GAUSS_TAIL_Z * sigma, mu + GAUSS_TAIL_Z * sigma)
            }
            JumpFamily::Kou {
                eta_plus,
                eta_minus,
                ..
            } => (-TAIL_MASS_LOG / eta_minus, TAIL_MASS_LOG / eta_plus),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpFamily::Exponential { rate } => Exp::new(rate).unwrap().sample(rng),
            JumpFamily::Gaussian { mu, sigma } => Normal::new(mu, sigma).unwrap().sample(rng),
            JumpFamily::Kou {
                up_prob,
                eta_plus,
                eta_minus,
            } => {
                if rng.random::<f64>() < up_prob {
                    Exp::new(eta_plus).unwrap().sample(rng)
                } else {
                    -Exp::new(eta_minus).unwrap().sample(rng)
                }
            }
        }
    }
}

/// A point mass of the jump law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Jump-size distribution F_Y. Immutable after construction and freely
/// shareable across workers; all sampling goes through an explicit RNG.
#[derive(Debug, Clone)]
pub struct JumpLaw {
    atoms: Vec<Atom>,
    components: Vec<(JumpFamily, f64)>,
    mean: f64,
}

impl JumpLaw {
    /// Build a law from atoms and weighted continuous components.
    ///
    /// Checks: total mass 1 within 1e-12, atom locations strictly increasing
    /// with positive masses, and each component density integrating to 1
    /// within 1e-9 over its truncated support.
    pub fn new(mut atoms: Vec<Atom>, components: Vec<(JumpFamily, f64)>) -> Result<Self> {
        atoms.sort_by(|a, b| {
            a.location
                .partial_cmp(&b.location)
                .expect("atom location NaN")
        });
        for w in atoms.windows(2) {
            if w[0].location >= w[1].location {
                return Err(Error::InvalidLaw(format!(
                    "atom locations must be strictly increasing, got {} then {}",
                    w[0].location, w[1].location
                )));
            }
        }
        for a in &atoms {
            if !(a.mass > 0.0 && a.mass <= 1.0) || !a.location.is_finite() {
                return Err(Error::InvalidLaw(format!("invalid atom {a:?}")));
            }
        }
        let mut total = 0.0;
        for a in &atoms {
            total += a.mass;
        }
        for (fam, w) in &components {
            fam.validate()?;
            if !(*w > 0.0 && *w <= 1.0) {
                return Err(Error::InvalidLaw(format!(
                    "component weight {w} not in (0, 1]"
                )));
            }
            total += w;
            let (lo, hi) = fam.truncated_support();
            let mass = quad::integrate(|y| fam.pdf(y), lo, hi, 1e-10, 1e-12)?;
            if (mass - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidLaw(format!(
                    "density of {fam:?} integrates to {mass}, expected 1"
                )));
            }
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidLaw(format!(
                "atom masses plus density weights sum to {total}, expected 1"
            )));
        }
        if atoms.is_empty() && components.is_empty() {
            return Err(Error::InvalidLaw(
                "law has no atoms and no density part".into(),
            ));
        }
        let mean = atoms.iter().map(|a| a.mass * a.location).sum::<f64>()
            + components.iter().map(|(f, w)| w * f.mean()).sum::<f64>();
        Ok(Self {
            atoms,
            components,
            mean,
        })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(vec![], vec![(JumpFamily::Exponential { rate }, 1.0)])
    }

    pub fn gaussian(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![], vec![(JumpFamily::Gaussian { mu, sigma }, 1.0)])
    }

    pub fn kou(up_prob: f64, eta_plus: f64, eta_minus: f64) -> Result<Self> {
        Self::new(
            vec![],
            vec![(
                JumpFamily::Kou {
                    up_prob,
                    eta_plus,
                    eta_minus,
                },
                1.0,
            )],
        )
    }

    pub fn point_mass(location: f64) -> Result<Self> {
        Self::new(
            vec![Atom {
                location,
                mass: 1.0,
            }],
            vec![],
        )
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn components(&self) -> &[(JumpFamily, f64)] {
        &self.components
    }

    /// Analytic mean of the jump size.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Total weight of the absolutely continuous part.
    pub fn density_weight(&self) -> f64 {
        self.components.iter().map(|(_, w)| w).sum()
    }

    /// P(Y <= y), right-continuous.
    pub fn cdf(&self, y: f64) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .take_while(|a| a.location <= y)
            .map(|a| a.mass)
            .sum();
        atoms + self.continuous_cdf(y)
    }

    /// P(Y < y), the left limit F_Y(y-).
    pub fn cdf_left(&self, y: f64) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .take_while(|a| a.location < y)
            .map(|a| a.mass)
            .sum();
        atoms + self.continuous_cdf(y)
    }

    fn continuous_cdf(&self, y: f64) -> f64 {
        self.components.iter().map(|(f, w)| w * f.cdf(y)).sum()
    }

    /// Exact mass at `y`; zero off the atom list.
    pub fn atom_mass(&self, y: f64) -> f64 {
        self.atoms
            .iter()
            .find(|a| a.location == y)
            .map(|a| a.mass)
            .unwrap_or(0.0)
    }

    /// P(Y >= l) = 1 - F_Y(l-).
    pub fn tail_prob(&self, l: f64) -> f64 {
        1.0 - self.cdf_left(l)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.mass;
            if u < acc {
                return a.location;
            }
        }
        for (fam, w) in &self.components {
            acc += w;
            if u < acc {
                return fam.sample(rng);
            }
        }
        // u landed in the final rounding sliver; use the last component.
        match self.components.last() {
            Some((fam, _)) => fam.sample(rng),
            None => self.atoms.last().unwrap().location,
        }
    }

    /// Integral of `phi` against the image measure F_l of F_Y under
    /// `y -> y - l`, restricted to nonnegative arguments:
    /// `E[phi(Y - l) 1_{Y >= l}]`.
    ///
    /// Atoms at or above `l` contribute exactly; the density part goes
    /// through adaptive quadrature over its truncated support.
    pub fn integrate_image<F: Fn(f64) -> f64>(&self, l: f64, phi: F) -> Result<f64> {
        if l < 0.0 {
            return Err(Error::Domain(format!(
                "image shift l = {l} must be nonnegative"
            )));
        }
        let mut acc = 0.0;
        for a in &self.atoms {
            if a.location >= l {
                acc += a.mass * phi(a.location - l);
            }
        }
        for (fam, w) in &self.components {
            let (lo, hi) = fam.truncated_support();
            let lo = lo.max(l);
            if lo < hi {
                acc += w * quad::integrate(|y| phi(y - l) * fam.pdf(y), lo, hi, 1e-9, 1e-12)?;
            }
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mix_atom_exp() -> JumpLaw {
        JumpLaw::new(
            vec![Atom {
                location: 1.0,
                mass: 0.5,
            }],
            vec![(JumpFamily::Exponential { rate: 1.0 }, 0.5)],
        )
        .unwrap()
    }

    #[test]
    fn exponential_cdf() {
        let law = JumpLaw::exponential(1.0).unwrap();
        assert_abs_diff_eq!(law.cdf(1.0), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(law.cdf_left(1.0), law.cdf(1.0), epsilon = 0.0);
        assert_eq!(law.cdf(-0.5), 0.0);
    }

    #[test]
    fn point_mass_cdf_is_right_continuous() {
        let law = JumpLaw::point_mass(1.0).unwrap();
        assert_eq!(law.cdf(1.0), 1.0);
        assert_eq!(law.cdf(0.999), 0.0);
        assert_eq!(law.cdf_left(1.0), 0.0);
        assert_eq!(law.atom_mass(1.0), 1.0);
        assert_eq!(law.atom_mass(0.5), 0.0);
    }

    #[test]
    fn mixture_cdf_and_left_limit() {
        let law = mix_atom_exp();
        let e = 0.5 + 0.5 * (1.0 - (-1.0f64).exp());
        assert_abs_diff_eq!(law.cdf(1.0), e, epsilon = 1e-15);
        assert_abs_diff_eq!(
            law.cdf_left(1.0),
            0.5 * (1.0 - (-1.0f64).exp()),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(law.cdf(1.0) - law.cdf_left(1.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn weights_must_sum_to_one() {
        let r = JumpLaw::new(
            vec![Atom {
                location: 1.0,
                mass: 0.6,
            }],
            vec![(JumpFamily::Exponential { rate: 1.0 }, 0.5)],
        );
        assert!(r.is_err());
    }

    #[test]
    fn atoms_must_increase() {
        let r = JumpLaw::new(
            vec![
                Atom {
                    location: 1.0,
                    mass: 0.5,
                },
                Atom {
                    location: 1.0,
                    mass: 0.5,
                },
            ],
            vec![],
        );
        assert!(r.is_err());
    }

    #[test]
    fn point_mass_samples_are_constant() {
        let law = JumpLaw::point_mass(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(law.sample(&mut rng), 1.0);
        }
    }

    #[test]
    fn exponential_sample_mean() {
        // CLT bound: 3 sigma / sqrt(n) with sigma = 1.
        let law = JumpLaw::exponential(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mean = (0..n).map(|_| law.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 3e-3, "mean = {mean}");
    }

    #[test]
    fn mixture_atom_frequency() {
        // Binomial 3 sigma bound: 3 * sqrt(0.25 / n).
        let law = mix_atom_exp();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| law.sample(&mut rng) == 1.0).count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.0015, "freq = {freq}");
    }

    #[test]
    fn chi_square_atom_frequencies() {
        let law = JumpLaw::new(
            vec![
                Atom {
                    location: 0.5,
                    mass: 0.3,
                },
                Atom {
                    location: 1.5,
                    mass: 0.2,
                },
            ],
            vec![(JumpFamily::Exponential { rate: 1.0 }, 0.5)],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let n = 100_000usize;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let y = law.sample(&mut rng);
            if y == 0.5 {
                counts[0] += 1;
            } else if y == 1.5 {
                counts[1] += 1;
            } else {
                counts[2] += 1;
            }
        }
        let expected = [0.3 * n as f64, 0.2 * n as f64, 0.5 * n as f64];
        let stat: f64 = counts
            .iter()
            .zip(expected)
            .map(|(&o, e)| (o as f64 - e) * (o as f64 - e) / e)
            .sum();
        let crit = crate::oracle::chi_square_critical_value(2.0, crate::oracle::THREE_SIGMA_TAIL);
        assert!(stat < crit, "chi-square {stat} above critical {crit}");
    }

    #[test]
    fn kolmogorov_smirnov_continuous_laws() {
        for (law, name) in [
            (JumpLaw::exponential(1.0).unwrap(), "exp"),
            (JumpLaw::gaussian(0.3, 1.5).unwrap(), "gauss"),
            (JumpLaw::kou(0.6, 2.0, 3.0).unwrap(), "kou"),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let mut xs: Vec<f64> = (0..100_000).map(|_| law.sample(&mut rng)).collect();
            let d = crate::oracle::ks_statistic(&mut xs, |y| law.cdf(y));
            let crit = crate::oracle::ks_critical_value(xs.len(), crate::oracle::THREE_SIGMA_TAIL);
            assert!(d < crit, "{name}: KS statistic {d} above critical {crit}");
        }
    }

    #[test]
    fn image_integral_total_mass() {
        // phi = 1 at l = 0 recovers P(Y >= 0): the full mass for laws
        // supported on [0, inf), the analytic upper tail otherwise.
        for law in [
            JumpLaw::exponential(1.0).unwrap(),
            JumpLaw::point_mass(1.0).unwrap(),
            mix_atom_exp(),
        ] {
            let v = law.integrate_image(0.0, |_| 1.0).unwrap();
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-9);
        }
        for law in [
            JumpLaw::gaussian(0.0, 1.0).unwrap(),
            JumpLaw::kou(0.6, 2.0, 3.0).unwrap(),
        ] {
            let v = law.integrate_image(0.0, |_| 1.0).unwrap();
            assert_abs_diff_eq!(v, law.tail_prob(0.0), epsilon = 1e-9);
        }
    }

    #[test]
    fn image_integral_examples() {
        let exp = JumpLaw::exponential(1.0).unwrap();
        let tail = exp.integrate_image(2.0, |_| 1.0).unwrap();
        assert_abs_diff_eq!(tail, (-2.0f64).exp(), epsilon = 1e-9);

        let pm = JumpLaw::point_mass(1.0).unwrap();
        let shifted = pm.integrate_image(0.25, |k| k).unwrap();
        assert_abs_diff_eq!(shifted, 0.75, epsilon = 1e-15);
    }

    #[test]
    fn mean_is_analytic() {
        assert_abs_diff_eq!(mix_atom_exp().mean(), 0.5 + 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(
            JumpLaw::kou(0.6, 2.0, 3.0).unwrap().mean(),
            0.6 / 2.0 - 0.4 / 3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn atom_mass_matches_cdf_jump_on_probe_grid() {
        let law = JumpLaw::new(
            vec![
                Atom {
                    location: 0.5,
                    mass: 0.2,
                },
                Atom {
                    location: 1.5,
                    mass: 0.3,
                },
            ],
            vec![(
                JumpFamily::Gaussian {
                    mu: 0.0,
                    sigma: 1.0,
                },
                0.5,
            )],
        )
        .unwrap();
        for i in 0..200 {
            let y = -3.0 + 0.031 * i as f64; // grid avoiding the atoms
            let jump = law.cdf(y) - law.cdf_left(y);
            assert_abs_diff_eq!(jump, law.atom_mass(y), epsilon = 1e-15);
        }
        assert_abs_diff_eq!(law.cdf(0.5) - law.cdf_left(0.5), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(law.cdf(1.5) - law.cdf_left(1.5), 0.3, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_and_bounded(
            w in 0.05f64..0.95,
            loc in -2.0f64..2.0,
            rate in 0.2f64..5.0,
            ys in proptest::collection::vec(-10.0f64..10.0, 2..40),
        ) {
            let law = JumpLaw::new(
                vec![Atom { location: loc, mass: w }],
                vec![(JumpFamily::Exponential { rate }, 1.0 - w)],
            ).unwrap();
            let mut sorted = ys.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut prev = 0.0;
            for y in sorted {
                let lo = law.cdf_left(y);
                let hi = law.cdf(y);
                prop_assert!((0.0..=1.0).contains(&lo));
                prop_assert!((0.0..=1.0).contains(&hi));
                prop_assert!(lo <= hi + 1e-15);
                prop_assert!(hi + 1e-12 >= prev);
                prev = hi;
            }
        }
    }
}
