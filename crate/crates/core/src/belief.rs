//! Probability primitives over the binary hypothesis space.
//!
//! A [`Belief`] stores a single degree of freedom, the log posterior ratio
//! `ln(p(theta1) / p(theta0))`. Bayesian updates are additions in that space,
//! so trajectories of hundreds of observations never underflow, and the
//! certain beliefs `(1, 0)` and `(0, 1)` are the ratios `-inf` and `+inf`.

use std::fmt;

use crate::error::{Error, Result};

/// Tolerance on `|sum(pmf) - 1|` accepted when a model is built.
pub const PMF_SUM_TOLERANCE: f64 = 1e-9;

/// The two states of nature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Hypothesis {
    Theta0,
    Theta1,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 2] = [Hypothesis::Theta0, Hypothesis::Theta1];

    pub fn other(self) -> Self {
        match self {
            Hypothesis::Theta0 => Hypothesis::Theta1,
            Hypothesis::Theta1 => Hypothesis::Theta0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Hypothesis::Theta0 => 0,
            Hypothesis::Theta1 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Hypothesis::Theta0 => "theta0",
            Hypothesis::Theta1 => "theta1",
        }
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub(crate) fn check_probability(what: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidProbability { what, value })
    }
}

/// `1 / (1 + exp(-x))` without overflow for large `|x|`.
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A posterior over `{theta0, theta1}` held as a log posterior ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Belief {
    log_ratio: f64,
}

impl Belief {
    /// The uninformative belief `(0.5, 0.5)`.
    pub const UNIFORM: Belief = Belief { log_ratio: 0.0 };

    pub fn from_p_theta1(p_theta1: f64) -> Result<Self> {
        check_probability("p_theta1", p_theta1)?;
        Ok(Belief {
            log_ratio: p_theta1.ln() - (-p_theta1).ln_1p(),
        })
    }

    /// Accepts any extended real except NaN.
    pub fn from_log_ratio(log_ratio: f64) -> Result<Self> {
        if log_ratio.is_nan() {
            return Err(Error::InvalidProbability {
                what: "log_ratio",
                value: log_ratio,
            });
        }
        Ok(Belief { log_ratio })
    }

    /// Builds a belief from unnormalised non-negative masses, not both zero.
    pub(crate) fn from_masses(theta0: f64, theta1: f64) -> Self {
        debug_assert!(theta0 >= 0.0 && theta1 >= 0.0 && theta0 + theta1 > 0.0);
        Belief {
            log_ratio: theta1.ln() - theta0.ln(),
        }
    }

    /// All mass on `h`.
    pub fn certain(h: Hypothesis) -> Self {
        let log_ratio = match h {
            Hypothesis::Theta0 => f64::NEG_INFINITY,
            Hypothesis::Theta1 => f64::INFINITY,
        };
        Belief { log_ratio }
    }

    pub fn log_ratio(&self) -> f64 {
        self.log_ratio
    }

    pub fn p_theta1(&self) -> f64 {
        logistic(self.log_ratio)
    }

    pub fn p_theta0(&self) -> f64 {
        logistic(-self.log_ratio)
    }

    pub fn prob(&self, h: Hypothesis) -> f64 {
        match h {
            Hypothesis::Theta0 => self.p_theta0(),
            Hypothesis::Theta1 => self.p_theta1(),
        }
    }

    /// `min(p(theta0), p(theta1))`, the conditional error of the argmax decision.
    pub fn min_component(&self) -> f64 {
        logistic(-self.log_ratio.abs())
    }

    /// The componentwise swap `(p0, p1) -> (p1, p0)`.
    pub fn inverted(&self) -> Self {
        Belief {
            log_ratio: -self.log_ratio,
        }
    }

    pub fn is_certain(&self) -> bool {
        self.log_ratio.is_infinite()
    }

    /// Entropy in bits. Symmetric under [`Belief::inverted`] bit for bit.
    pub fn entropy_bits(&self) -> f64 {
        plogp(self.p_theta0()) + plogp(self.p_theta1())
    }
}

impl Default for Belief {
    fn default() -> Self {
        Belief::UNIFORM
    }
}

/// `-x log2 x` with `0 log 0 = 0`.
fn plogp(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.log2()
    } else {
        0.0
    }
}

/// The common prior `P(theta = theta1)` shared by both agents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prior(f64);

impl Prior {
    pub fn new(p_theta1: f64) -> Result<Self> {
        check_probability("prior_theta1", p_theta1).map(Prior)
    }

    pub fn p_theta1(&self) -> f64 {
        self.0
    }

    pub fn belief(&self) -> Belief {
        // Validated on construction.
        Belief::from_p_theta1(self.0).expect("prior is a probability")
    }

    /// Draws the state of nature from a uniform variate in `[0, 1)`.
    pub fn sample(&self, u: f64) -> Hypothesis {
        if u < self.0 {
            Hypothesis::Theta1
        } else {
            Hypothesis::Theta0
        }
    }
}

impl Default for Prior {
    fn default() -> Self {
        Prior(0.5)
    }
}

/// One agent's observation likelihoods over a finite alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationModel {
    pmf: [Vec<f64>; 2],
    cdf: [Vec<f64>; 2],
    log_lr: Vec<f64>,
}

impl ObservationModel {
    /// Validates both pmfs, then renormalises them so each sums to one.
    pub fn new(pmf_theta0: Vec<f64>, pmf_theta1: Vec<f64>) -> Result<Self> {
        let pmf_theta0 = normalized_pmf("theta0", pmf_theta0, None)?;
        let pmf_theta1 = normalized_pmf("theta1", pmf_theta1, Some(pmf_theta0.len()))?;
        if pmf_theta0 == pmf_theta1 {
            return Err(Error::UninformativeModel);
        }
        let log_lr = pmf_theta0
            .iter()
            .zip(&pmf_theta1)
            .map(|(&p0, &p1)| p1.ln() - p0.ln())
            .collect();
        let cdf = [cumulative(&pmf_theta0), cumulative(&pmf_theta1)];
        Ok(ObservationModel {
            pmf: [pmf_theta0, pmf_theta1],
            cdf,
            log_lr,
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.log_lr.len()
    }

    pub fn pmf(&self, h: Hypothesis) -> &[f64] {
        &self.pmf[h.index()]
    }

    pub fn pmf_theta0(&self) -> &[f64] {
        &self.pmf[0]
    }

    pub fn pmf_theta1(&self) -> &[f64] {
        &self.pmf[1]
    }

    /// `ln(P(s | theta1) / P(s | theta0))`; NaN when both are zero.
    pub fn log_likelihood_ratio(&self, symbol: usize) -> f64 {
        self.log_lr[symbol]
    }

    /// Inverse-CDF sample of a symbol under `h` from a uniform variate in `[0, 1)`.
    pub fn sample(&self, h: Hypothesis, u: f64) -> usize {
        let cdf = &self.cdf[h.index()];
        cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
    }

    /// `P(s) = p0 * P(s | theta0) + p1 * P(s | theta1)`.
    pub fn marginal(&self, belief: &Belief, symbol: usize) -> f64 {
        belief.p_theta0() * self.pmf[0][symbol] + belief.p_theta1() * self.pmf[1][symbol]
    }

    pub fn kl_theta0_theta1(&self) -> f64 {
        kl_divergence(&self.pmf[0], &self.pmf[1]).expect("validated pmfs")
    }

    pub fn kl_theta1_theta0(&self) -> f64 {
        kl_divergence(&self.pmf[1], &self.pmf[0]).expect("validated pmfs")
    }
}

fn normalized_pmf(which: &'static str, pmf: Vec<f64>, expected: Option<usize>) -> Result<Vec<f64>> {
    let expected_len = expected.unwrap_or(pmf.len().max(1));
    if pmf.len() != expected_len {
        return Err(Error::PmfLength {
            which,
            len: pmf.len(),
            expected: expected_len,
        });
    }
    if let Some((index, &value)) = pmf.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
        return Err(Error::PmfEntry { which, index, value });
    }
    let sum: f64 = pmf.iter().sum();
    if (sum - 1.0).abs() > PMF_SUM_TOLERANCE {
        return Err(Error::PmfSum { which, sum });
    }
    Ok(pmf.into_iter().map(|p| p / sum).collect())
}

fn cumulative(pmf: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = pmf
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    // Pin the tail to exactly 1 from the last symbol with positive mass on.
    if let Some(last) = pmf.iter().rposition(|&p| p > 0.0) {
        cdf[last..].iter_mut().for_each(|c| *c = 1.0);
    }
    cdf
}

/// Posterior after observing `symbol`, computed as an addition of log ratios.
///
/// A likelihood of zero under one hypothesis collapses the posterior onto the
/// other; certain beliefs are absorbing. A symbol that has zero probability
/// under every hypothesis the prior supports is an
/// [`Error::ImpossibleObservation`].
pub fn bayes_update(prior: Belief, model: &ObservationModel, symbol: usize) -> Result<Belief> {
    if symbol >= model.alphabet_size() {
        return Err(Error::SymbolOutOfRange {
            symbol,
            alphabet_size: model.alphabet_size(),
        });
    }
    let log_ratio = prior.log_ratio + model.log_likelihood_ratio(symbol);
    if log_ratio.is_nan() {
        return Err(Error::ImpossibleObservation { symbol });
    }
    Ok(Belief { log_ratio })
}

/// Binary entropy in bits, `H(p) = -p log2 p - (1 - p) log2 (1 - p)`.
pub fn bernoulli_entropy(p: f64) -> Result<f64> {
    check_probability("p", p)?;
    Ok(plogp(p) + plogp(1.0 - p))
}

/// `D(p || q)` in nats.
///
/// Returns `Ok(f64::INFINITY)` when `p` puts mass where `q` has none, and an
/// error for malformed inputs.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    for (which, pmf) in [("p", p), ("q", q)] {
        if let Some((index, &value)) = pmf.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::PmfEntry { which, index, value });
        }
    }
    let mut total = 0.0;
    for (&ps, &qs) in p.iter().zip(q) {
        if ps == 0.0 {
            continue;
        }
        if qs == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += ps * (ps / qs).ln();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn other_is_an_involution() {
        for h in Hypothesis::ALL {
            assert_ne!(h.other(), h);
            assert_eq!(h.other().other(), h);
        }
    }

    #[test]
    fn equal_likelihoods_leave_belief_unchanged() {
        let model = ObservationModel::new(vec![0.5, 0.25, 0.25], vec![0.25, 0.5, 0.25]).unwrap();
        let post = bayes_update(Belief::UNIFORM, &model, 2).unwrap();
        assert_eq!(post.p_theta1(), 0.5);
    }

    #[test]
    fn table1_agent_a_symbol_zero() {
        let model = presets::table1_model_a();
        let post = bayes_update(Belief::UNIFORM, &model, 0).unwrap();
        let expected = 0.2 / (0.1 + 0.2);
        assert!((post.p_theta1() - expected).abs() < 1e-15);
        assert!((post.p_theta1() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn certain_belief_is_absorbing() {
        let model = presets::table1_model_b();
        let certain = Belief::certain(Hypothesis::Theta1);
        for s in 0..model.alphabet_size() {
            let post = bayes_update(certain, &model, s).unwrap();
            assert_eq!(post.p_theta1(), 1.0);
            assert_eq!(post.p_theta0(), 0.0);
        }
    }

    #[test]
    fn one_sided_zero_collapses_posterior() {
        let model = ObservationModel::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let post = bayes_update(Belief::UNIFORM, &model, 0).unwrap();
        assert_eq!(post.p_theta1(), 1.0);
        assert_eq!(post.min_component(), 0.0);
    }

    #[test]
    fn impossible_observations_are_errors() {
        let model = ObservationModel::new(vec![0.0, 0.5, 0.5], vec![0.0, 0.9, 0.1]).unwrap();
        assert_eq!(
            bayes_update(Belief::UNIFORM, &model, 0),
            Err(Error::ImpossibleObservation { symbol: 0 })
        );
        let model = ObservationModel::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(
            bayes_update(Belief::certain(Hypothesis::Theta0), &model, 0),
            Err(Error::ImpossibleObservation { symbol: 0 })
        );
        assert!(matches!(
            bayes_update(Belief::UNIFORM, &model, 2),
            Err(Error::SymbolOutOfRange {
                symbol: 2,
                alphabet_size: 2
            })
        ));
    }

    #[test]
    fn model_validation() {
        assert!(matches!(
            ObservationModel::new(vec![0.5, 0.4], vec![0.5, 0.5]),
            Err(Error::PmfSum { which: "theta0", .. })
        ));
        assert!(matches!(
            ObservationModel::new(vec![0.5, 0.5], vec![1.0]),
            Err(Error::PmfLength {
                which: "theta1",
                len: 1,
                expected: 2
            })
        ));
        assert!(matches!(
            ObservationModel::new(vec![1.5, -0.5], vec![0.5, 0.5]),
            Err(Error::PmfEntry {
                which: "theta0",
                index: 1,
                ..
            })
        ));
        assert_eq!(
            ObservationModel::new(vec![0.3, 0.7], vec![0.3, 0.7]),
            Err(Error::UninformativeModel)
        );
        assert!(ObservationModel::new(vec![], vec![]).is_err());
        let m = ObservationModel::new(vec![0.5 + 4e-10, 0.5], vec![0.25, 0.75]).unwrap();
        assert_eq!(m.pmf_theta0().iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn sampling_skips_zero_mass_symbols() {
        let model = ObservationModel::new(vec![0.0, 0.5, 0.5, 0.0], vec![0.25, 0.25, 0.25, 0.25]).unwrap();
        for i in 0..1000 {
            let u = i as f64 / 1000.0;
            let s = model.sample(Hypothesis::Theta0, u);
            assert!(s == 1 || s == 2, "u = {u} gave {s}");
        }
        assert_eq!(model.sample(Hypothesis::Theta1, 0.999_999), 3);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(bernoulli_entropy(0.5).unwrap(), 1.0);
        assert_eq!(bernoulli_entropy(0.0).unwrap(), 0.0);
        assert_eq!(bernoulli_entropy(1.0).unwrap(), 0.0);
        let a = bernoulli_entropy(0.25).unwrap();
        let b = bernoulli_entropy(0.75).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!(bernoulli_entropy(1.2).is_err());
        assert!(bernoulli_entropy(f64::NAN).is_err());
    }

    #[test]
    fn kl_examples() {
        let a = presets::table1_model_a();
        let b = presets::table1_model_b();
        let kl_a = kl_divergence(a.pmf_theta0(), a.pmf_theta1()).unwrap();
        let kl_b = kl_divergence(b.pmf_theta0(), b.pmf_theta1()).unwrap();
        assert!((kl_a - 0.14).abs() <= 0.005, "{kl_a}");
        assert!((kl_b - 0.496).abs() <= 0.005, "{kl_b}");
        assert_eq!(kl_divergence(a.pmf_theta0(), a.pmf_theta0()).unwrap(), 0.0);
    }

    #[test]
    fn kl_absolute_continuity_is_infinite_not_an_error() {
        assert_eq!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]), Ok(f64::INFINITY));
        assert_eq!(kl_divergence(&[1.0, 0.0], &[0.5, 0.5]), Ok(2f64.ln()));
        assert!(matches!(
            kl_divergence(&[0.5, 0.5], &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn linear_and_log_views_agree() {
        for &p in &[1e-300, 1e-200, 1e-12, 0.01, 0.3, 0.5, 0.77, 1.0 - 1e-12] {
            let b = Belief::from_p_theta1(p).unwrap();
            assert!((b.p_theta1() - p).abs() <= 1e-12 * p, "p = {p}");
            let q = 1.0 - p;
            assert!((b.p_theta0() - q).abs() <= 1e-12 * q.max(1e-300) + 1e-16, "p = {p}");
        }
        assert_eq!(Belief::from_p_theta1(0.0).unwrap(), Belief::certain(Hypothesis::Theta0));
        assert_eq!(Belief::from_p_theta1(1.0).unwrap(), Belief::certain(Hypothesis::Theta1));
    }

    #[test]
    fn long_chains_keep_tiny_components() {
        let model = presets::table1_model_b();
        let mut b = Belief::UNIFORM;
        for _ in 0..500 {
            b = bayes_update(b, &model, 0).unwrap();
        }
        // 500 * ln(0.4 / 0.15) is far past where 1 - p would round to zero.
        assert!(b.p_theta0() > 0.0);
        assert!((b.log_ratio() - 500.0 * (0.4f64 / 0.15).ln()).abs() < 1e-9);
    }

    #[test]
    fn prior_sampling() {
        let prior = Prior::new(0.5).unwrap();
        assert_eq!(prior.sample(0.49), Hypothesis::Theta1);
        assert_eq!(prior.sample(0.5), Hypothesis::Theta0);
        assert!(Prior::new(-0.1).is_err());
    }
}
