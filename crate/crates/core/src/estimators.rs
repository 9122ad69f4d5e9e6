//! Relative propensity estimators over [`PairStats`].
//!
//! Two routes:
//!
//! - [`pairwise_ratio`]: `ĉ_k / ĉ_k'` within one interventional set. In
//!   expectation both sums share the same relevance factor, so the ratio is
//!   `p_k / p_k'`. Only pairs that include position 1 give a direct estimate
//!   of `p_k / p_1`.
//! - [`fit_mle`]: maximises
//!
//!   ```text
//!   Σ_{k≠k'} ĉ_k^{k,k'} log(p_k r_{k,k'}) + ¬ĉ_k^{k,k'} log(1 − p_k r_{k,k'})
//!   ```
//!
//!   over propensities `p_k` and one relevance parameter `r_{k,k'}` per
//!   unordered pair, using every pair at once.
//!
//! The objective is invariant under `p → c·p, r → r/c`, so only ratios
//! `p_k / p_1` are reported. Along that ridge any positive ratio is reachable
//! while keeping every parameter in (0, 1), so the achievable relative
//! propensities form the open interval (0, ∞); values above 1 are reported
//! as is.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::interventions::{pair_key, PairStats};

/// Propensities (index `k − 1`) and per-pair relevance parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MleParams {
    pub propensities: Vec<f64>,
    /// Keyed by (k, k') with k < k'.
    pub relevance: BTreeMap<(usize, usize), f64>,
}

impl MleParams {
    /// Every parameter set to `value`, with a relevance entry per pair.
    pub fn uniform(cutoff: usize, value: f64) -> Self {
        let relevance = (1..=cutoff)
            .flat_map(|k| (k + 1..=cutoff).map(move |kp| ((k, kp), value)))
            .collect();
        MleParams {
            propensities: vec![value; cutoff],
            relevance,
        }
    }

    pub fn relevance_of(&self, k: usize, k_prime: usize) -> Option<f64> {
        self.relevance.get(&pair_key(k, k_prime)).copied()
    }
}

/// One Bernoulli block of the likelihood: weighted clicks and no-clicks of a
/// pair at one of its positions.
#[derive(Debug, Clone, Copy)]
struct Term {
    p: usize,
    r: usize,
    clicks: f64,
    no_clicks: f64,
}

/// Likelihood in flat parameter slices.
#[derive(Debug, Clone)]
struct Likelihood {
    terms: Vec<Term>,
}

impl Likelihood {
    fn value(&self, p: &[f64], r: &[f64]) -> f64 {
        let mut total = 0.0;
        for t in &self.terms {
            let x = p[t.p] * r[t.r];
            if t.clicks > 0.0 {
                total += t.clicks * libm::log(x);
            }
            if t.no_clicks > 0.0 {
                total += t.no_clicks * libm::log1p(-x);
            }
        }
        total
    }

    fn gradient(&self, p: &[f64], r: &[f64], grad_p: &mut [f64], grad_r: &mut [f64]) {
        grad_p.iter_mut().for_each(|g| *g = 0.0);
        grad_r.iter_mut().for_each(|g| *g = 0.0);
        for t in &self.terms {
            let (pk, rk) = (p[t.p], r[t.r]);
            let x = pk * rk;
            let mut dx = 0.0;
            if t.clicks > 0.0 {
                dx += t.clicks / x;
            }
            if t.no_clicks > 0.0 {
                dx -= t.no_clicks / (1.0 - x);
            }
            grad_p[t.p] += dx * rk;
            grad_r[t.r] += dx * pk;
        }
    }
}

/// Terms of the full objective with parameters laid out as in [`MleParams`]:
/// `p` index `k − 1`, `r` index of the pair in key order.
fn full_likelihood(
    params: &MleParams,
    stats: &PairStats,
) -> Result<(Likelihood, Vec<(usize, usize)>)> {
    let cutoff = stats.cutoff();
    if params.propensities.len() != cutoff {
        return Err(Error::InvalidArgument(format!(
            "expected {cutoff} propensities, got {}",
            params.propensities.len()
        )));
    }
    for (i, &v) in params.propensities.iter().enumerate() {
        check_open_unit(v, || format!("p_{}", i + 1))?;
    }
    for (&(k, kp), &v) in &params.relevance {
        check_open_unit(v, || format!("r_{k},{kp}"))?;
    }
    let pair_order: Vec<(usize, usize)> = params.relevance.keys().copied().collect();
    let mut terms = Vec::new();
    for pair in stats.iter() {
        if pair.mass() <= 0.0 {
            continue;
        }
        let r = pair_order
            .binary_search(&(pair.k, pair.k_prime))
            .map_err(|_| Error::MissingPair {
                k: pair.k,
                k_prime: pair.k_prime,
            })?;
        for (pos, side) in [(pair.k, pair.at_k), (pair.k_prime, pair.at_k_prime)] {
            terms.push(Term {
                p: pos - 1,
                r,
                clicks: side.clicks,
                no_clicks: side.no_clicks,
            });
        }
    }
    Ok((Likelihood { terms }, pair_order))
}

fn check_open_unit(v: f64, name: impl FnOnce() -> alloc::string::String) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange {
            name: name(),
            value: v,
        })
    }
}

/// Log-likelihood at `params`. Pairs with zero total mass are skipped; every
/// other pair needs a relevance parameter.
pub fn mle_objective(params: &MleParams, stats: &PairStats) -> Result<f64> {
    let (lik, _) = full_likelihood(params, stats)?;
    let r: Vec<f64> = params.relevance.values().copied().collect();
    Ok(lik.value(&params.propensities, &r))
}

/// Analytic gradient of [`mle_objective`], in the same layout as the
/// parameters.
pub fn mle_gradient(params: &MleParams, stats: &PairStats) -> Result<MleParams> {
    let (lik, order) = full_likelihood(params, stats)?;
    let r: Vec<f64> = params.relevance.values().copied().collect();
    let mut gp = vec![0.0; params.propensities.len()];
    let mut gr = vec![0.0; r.len()];
    lik.gradient(&params.propensities, &r, &mut gp, &mut gr);
    Ok(MleParams {
        propensities: gp,
        relevance: order.into_iter().zip(gr).collect(),
    })
}

/// `ĉ_k / ĉ_k'` within the interventional set of {k, k'}.
pub fn pairwise_ratio(stats: &PairStats, k: usize, k_prime: usize) -> Result<f64> {
    let (at_k, at_kp) = stats
        .get(k, k_prime)
        .ok_or(Error::MissingPair { k, k_prime })?;
    if at_kp.clicks <= 0.0 {
        return Err(Error::UndefinedRatio { k, k_prime });
    }
    Ok(at_k.clicks / at_kp.clicks)
}

/// Relative propensities from [`pairwise_ratio`] against position 1 only.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseEstimate {
    pub cutoff: usize,
    pub rel_propensity: Vec<Option<f64>>,
    pub unidentifiable: Vec<usize>,
}

/// `ĉ_k^{k,1} / ĉ_1^{k,1}` for each k. Positions whose pair with 1 has no
/// mass, or no clicks at position 1, are unidentifiable.
pub fn pairwise_estimate(stats: &PairStats) -> Result<PairwiseEstimate> {
    let cutoff = stats.cutoff();
    let mut rel = vec![None; cutoff];
    rel[0] = Some(1.0);
    let mut unidentifiable = Vec::new();
    for k in 2..=cutoff {
        let usable = stats
            .get(k, 1)
            .is_some_and(|(a, b)| a.mass() > 0.0 && b.mass() > 0.0);
        match pairwise_ratio(stats, k, 1) {
            Ok(v) if usable => rel[k - 1] = Some(v),
            Ok(_) | Err(Error::UndefinedRatio { .. }) => unidentifiable.push(k),
            Err(e) => return Err(e),
        }
    }
    if cutoff < 2 || unidentifiable.len() == cutoff - 1 {
        return Err(Error::EstimationImpossible(
            "no pair with position 1 has clicks at position 1".into(),
        ));
    }
    Ok(PairwiseEstimate {
        cutoff,
        rel_propensity: rel,
        unidentifiable,
    })
}

/// Which positions can be related to position 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentifiabilityReport {
    pub cutoff: usize,
    /// Pairs with positive mass at both positions, (k, k') with k < k'.
    pub pair_graph: BTreeSet<(usize, usize)>,
    pub component_of_position_1: BTreeSet<usize>,
    pub unidentifiable: Vec<usize>,
}

pub fn check_identifiability(stats: &PairStats) -> IdentifiabilityReport {
    identifiability(stats, 0.0)
}

fn identifiability(stats: &PairStats, min_pair_mass: f64) -> IdentifiabilityReport {
    let cutoff = stats.cutoff();
    let pair_graph: BTreeSet<(usize, usize)> = stats
        .iter()
        .filter(|p| {
            p.at_k.mass() > 0.0 && p.at_k_prime.mass() > 0.0 && p.mass() >= min_pair_mass
        })
        .map(|p| (p.k, p.k_prime))
        .collect();
    let mut adjacency = vec![Vec::new(); cutoff + 1];
    for &(k, kp) in &pair_graph {
        adjacency[k].push(kp);
        adjacency[kp].push(k);
    }
    let mut component = BTreeSet::new();
    let mut queue = VecDeque::new();
    component.insert(1);
    queue.push_back(1);
    while let Some(k) = queue.pop_front() {
        for &next in &adjacency[k] {
            if component.insert(next) {
                queue.push_back(next);
            }
        }
    }
    let unidentifiable = (1..=cutoff).filter(|k| !component.contains(k)).collect();
    IdentifiabilityReport {
        cutoff,
        pair_graph,
        component_of_position_1: component,
        unidentifiable,
    }
}

/// How trial step sizes are chosen before backtracking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// Start each line search at twice the last accepted step.
    Doubling,
    /// Start each line search at the Barzilai–Borwein step of the last move.
    #[default]
    BarzilaiBorwein,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Stop once the infinity-norm of the gradient in (p, r) is at most this.
    pub gradient_tolerance: f64,
    pub step_rule: StepRule,
    /// Pairs with less total mass are left out of the objective.
    pub min_pair_mass: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 10_000,
            gradient_tolerance: 1e-8,
            step_rule: StepRule::default(),
            min_pair_mass: 0.0,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if !(self.gradient_tolerance > 0.0) {
            return Err(Error::InvalidArgument("gradient_tolerance must be positive".into()));
        }
        if !(self.min_pair_mass >= 0.0) {
            return Err(Error::InvalidArgument("min_pair_mass must be non-negative".into()));
        }
        Ok(())
    }
}

/// Fitted relative propensities.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityEstimate {
    pub cutoff: usize,
    /// `p̂_k / p̂_1`, index `k − 1`; `None` for unidentifiable positions.
    pub rel_propensity: Vec<Option<f64>>,
    pub fitted_p: Vec<Option<f64>>,
    /// Relevance parameters of the pairs used in the fit.
    pub fitted_r: BTreeMap<(usize, usize), f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub unidentifiable: Vec<usize>,
}

/// Reported to the observer after every accepted ascent step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentStep {
    pub iteration: usize,
    pub objective_before: f64,
    pub objective_after: f64,
    pub step_size: f64,
}

pub fn fit_mle(stats: &PairStats, options: &FitOptions) -> Result<PropensityEstimate> {
    fit_mle_observed(stats, options, &mut |_| {})
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-30;
const MAX_STEP: f64 = 1e12;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Infinity-norm of the gradient with respect to p and r, recovered from the
/// gradient in logistic coordinates.
fn native_gradient_norm(theta: &[f64], grad: &[f64]) -> f64 {
    theta.iter().zip(grad).fold(0.0f64, |m, (&t, &g)| {
        let v = sigmoid(t);
        m.max(libm::fabs(g / (v * (1.0 - v))))
    })
}

/// [`fit_mle`], calling `observer` after each accepted step.
///
/// Parameters live on the real line and are mapped into (0, 1) with the
/// logistic function; ascent starts with every parameter at 0.5.
pub fn fit_mle_observed(
    stats: &PairStats,
    options: &FitOptions,
    observer: &mut dyn FnMut(&AscentStep),
) -> Result<PropensityEstimate> {
    options.validate()?;
    let cutoff = stats.cutoff();
    let report = identifiability(stats, options.min_pair_mass);
    if report.pair_graph.is_empty() {
        return Err(Error::EstimationImpossible(
            "no position pair carries interventional data".into(),
        ));
    }
    if report.component_of_position_1.len() < 2 {
        return Err(Error::EstimationImpossible(
            "position 1 shares no interventional pair with any other position".into(),
        ));
    }

    let positions: Vec<usize> = report.component_of_position_1.iter().copied().collect();
    let pairs: Vec<(usize, usize)> = report
        .pair_graph
        .iter()
        .copied()
        .filter(|(k, _)| report.component_of_position_1.contains(k))
        .collect();
    let slot = |k: usize| positions.binary_search(&k).expect("position in component");
    let mut terms = Vec::with_capacity(2 * pairs.len());
    for (r, &(k, kp)) in pairs.iter().enumerate() {
        let (at_k, at_kp) = stats.get(k, kp).expect("pair in graph");
        for (pos, side) in [(k, at_k), (kp, at_kp)] {
            terms.push(Term {
                p: slot(pos),
                r,
                clicks: side.clicks,
                no_clicks: side.no_clicks,
            });
        }
    }
    let lik = Likelihood { terms };
    let n_p = positions.len();
    let dim = n_p + pairs.len();

    // Objective and gradient in the unconstrained coordinates.
    let mut p = vec![0.0; n_p];
    let mut r = vec![0.0; pairs.len()];
    let mut gp = vec![0.0; n_p];
    let mut gr = vec![0.0; pairs.len()];
    let squash = |theta: &[f64], p: &mut [f64], r: &mut [f64]| {
        for (dst, &t) in p.iter_mut().chain(r.iter_mut()).zip(theta) {
            *dst = sigmoid(t);
        }
    };
    let mut eval_grad = |theta: &[f64], grad: &mut [f64]| -> f64 {
        squash(theta, &mut p, &mut r);
        lik.gradient(&p, &r, &mut gp, &mut gr);
        for (g, (&d, &v)) in grad
            .iter_mut()
            .zip(gp.iter().chain(gr.iter()).zip(p.iter().chain(r.iter())))
        {
            *g = d * v * (1.0 - v);
        }
        lik.value(&p, &r)
    };
    let mut p_trial = vec![0.0; n_p];
    let mut r_trial = vec![0.0; pairs.len()];
    let mut eval = |theta: &[f64]| -> f64 {
        for (dst, &t) in p_trial.iter_mut().chain(r_trial.iter_mut()).zip(theta) {
            *dst = sigmoid(t);
        }
        lik.value(&p_trial, &r_trial)
    };

    let mut theta = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut value = eval_grad(&theta, &mut grad);
    let mut candidate = vec![0.0; dim];
    let mut next_grad = vec![0.0; dim];
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < options.max_iterations {
        let norm = native_gradient_norm(&theta, &grad);
        if norm <= options.gradient_tolerance {
            converged = true;
            break;
        }
        let slope: f64 = grad.iter().map(|g| g * g).sum();
        // Rounding noise allowed in the sufficient-increase test.
        let slack = 4.0 * f64::EPSILON * (libm::fabs(value) + 1.0);
        let mut t = step;
        let accepted = loop {
            for ((c, &th), &g) in candidate.iter_mut().zip(&theta).zip(&grad) {
                *c = th + t * g;
            }
            let v = eval(&candidate);
            if v.is_finite() && v >= value + ARMIJO * t * slope - slack {
                break Some(v);
            }
            t *= 0.5;
            if t < MIN_STEP {
                break None;
            }
        };
        let Some(_) = accepted else { break };
        let new_value = eval_grad(&candidate, &mut next_grad);
        iterations += 1;
        observer(&AscentStep {
            iteration: iterations,
            objective_before: value,
            objective_after: new_value,
            step_size: t,
        });
        step = match options.step_rule {
            StepRule::Doubling => 2.0 * t,
            StepRule::BarzilaiBorwein => {
                // s = t·g, y = g_new − g; ascent on a locally concave function
                // has s·y < 0.
                let sy: f64 = grad
                    .iter()
                    .zip(&next_grad)
                    .map(|(g, gn)| t * g * (gn - g))
                    .sum();
                let ss = t * t * slope;
                if sy < 0.0 {
                    ss / -sy
                } else {
                    2.0 * t
                }
            }
        }
        .clamp(MIN_STEP, MAX_STEP);
        core::mem::swap(&mut theta, &mut candidate);
        core::mem::swap(&mut grad, &mut next_grad);
        value = new_value;
    }
    if !converged {
        let norm = native_gradient_norm(&theta, &grad);
        converged = norm <= options.gradient_tolerance;
    }

    let mut fitted_p = vec![None; cutoff];
    for (i, &k) in positions.iter().enumerate() {
        fitted_p[k - 1] = Some(sigmoid(theta[i]));
    }
    let p1 = fitted_p[0].expect("position 1 is always in its own component");
    let rel_propensity = fitted_p.iter().map(|p| p.map(|v| v / p1)).collect();
    let fitted_r = pairs
        .iter()
        .enumerate()
        .map(|(i, &pair)| (pair, sigmoid(theta[n_p + i])))
        .collect();
    Ok(PropensityEstimate {
        cutoff,
        rel_propensity,
        fitted_p,
        fitted_r,
        objective_value: value,
        iterations,
        converged,
        unidentifiable: report.unidentifiable,
    })
}
