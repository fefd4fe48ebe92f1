//! Aggregation of ordinal expert ratings into a continuous latent severity.
//!
//! Each rater `r` maps a subject's latent severity `theta_j` onto a `K`-point
//! scale through a logistic graded-response model:
//!
//! ```text
//! P(rating >= k) = logistic(a_r (theta_j - b_{r,k-1})),   k = 2..K
//! ```
//!
//! The discrimination `a_r > 0` captures how consistent a rater is, the
//! ordered thresholds `b_{r,1} < ... < b_{r,K-1}` capture how lenient.
//! Missing (subject, rater) pairs simply contribute nothing.
//!
//! Severities carry a standard normal prior and log-discriminations a normal
//! prior with standard deviation `LOG_A_PRIOR_SD`, so the fit maximizes
//!
//! ```text
//! log L - sum_j theta_j^2 / 2 - sum_r (ln a_r)^2 / (2 LOG_A_PRIOR_SD^2)
//! ```
//!
//! Without the severity prior, a subject whom every rater put in the lowest
//! (or highest) category has no finite estimate and drags the whole scale
//! with it; without the discrimination prior, shrinking every severity while
//! inflating every discrimination would raise the objective forever. The fit
//! alternates Newton ascent over each rater's parameters, Newton ascent over
//! each subject's severity, and an exact optimization over the
//! likelihood-preserving rescalings `theta -> s theta + m`. Every accepted
//! step increases the penalized objective. On return severities are rescaled
//! to zero mean and unit variance, compensating in the rater parameters so
//! the likelihood is unchanged.
//!
//! Perfectly consistent panels still push discriminations up without bound,
//! so discriminations stay below `A_MAX`, thresholds within `±B_MAX` and
//! severities within `±THETA_MAX`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::evaluation::auc;

const THETA_MAX: f64 = 8.0;
const A_MIN: f64 = 1e-2;
const A_MAX: f64 = 25.0;
const B_MAX: f64 = 12.0;
const MIN_GAP: f64 = 1e-8;
const INNER_STEPS: usize = 12;
const LOG_A_PRIOR_SD: f64 = 1.0;

fn log_a_penalty(a: f64) -> f64 {
    a.ln().powi(2) / (2.0 * LOG_A_PRIOR_SD * LOG_A_PRIOR_SD)
}

/// One observed rating; `category` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rating {
    pub subject: usize,
    pub rater: usize,
    pub category: usize,
}

/// Sparse subject × rater table of ordinal ratings on a `1..=K` scale.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsTable {
    subjects: Vec<String>,
    raters: Vec<String>,
    categories: usize,
    entries: Vec<Rating>,
}

impl RatingsTable {
    /// Builds a table from `(subject_id, rater_id, rating)` rows. Subjects and
    /// raters are indexed in order of first appearance.
    pub fn new<I, S, R>(categories: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, R, i64)>,
        S: Into<String>,
        R: Into<String>,
    {
        if categories < 2 {
            return Err(Error::InvalidRatings(format!(
                "need at least 2 categories, got {categories}"
            )));
        }
        let mut subjects = Vec::new();
        let mut raters = Vec::new();
        let mut subject_index = HashMap::new();
        let mut rater_index = HashMap::new();
        let mut seen = HashMap::new();
        let mut entries = Vec::new();
        for (s, r, rating) in rows {
            let (s, r) = (s.into(), r.into());
            if rating < 1 || rating > categories as i64 {
                return Err(Error::RatingRange {
                    subject: s,
                    rater: r,
                    rating,
                    categories,
                });
            }
            let si = *subject_index.entry(s.clone()).or_insert_with(|| {
                subjects.push(s.clone());
                subjects.len() - 1
            });
            let ri = *rater_index.entry(r.clone()).or_insert_with(|| {
                raters.push(r.clone());
                raters.len() - 1
            });
            if seen.insert((si, ri), ()).is_some() {
                return Err(Error::InvalidRatings(format!(
                    "rater `{r}` rated subject `{s}` twice"
                )));
            }
            entries.push(Rating {
                subject: si,
                rater: ri,
                category: rating as usize,
            });
        }
        if entries.is_empty() {
            return Err(Error::InvalidRatings("no ratings".into()));
        }
        Ok(RatingsTable {
            subjects,
            raters,
            categories,
            entries,
        })
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn raters(&self) -> &[String] {
        &self.raters
    }

    pub fn categories(&self) -> usize {
        self.categories
    }

    pub fn entries(&self) -> &[Rating] {
        &self.entries
    }

    fn by_rater(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.raters.len()];
        for e in &self.entries {
            out[e.rater].push((e.subject, e.category));
        }
        out
    }

    fn by_subject(&self) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.subjects.len()];
        for e in &self.entries {
            out[e.subject].push((e.rater, e.category));
        }
        out
    }
}

/// Fitted graded-response model.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTraitFit {
    /// Latent severity per subject, standardized to mean 0 and variance 1.
    pub severity: Vec<f64>,
    /// Discrimination per rater.
    pub discrimination: Vec<f64>,
    /// `K - 1` increasing thresholds per rater.
    pub thresholds: Vec<Vec<f64>>,
    /// Log-likelihood of the ratings, without the prior.
    pub log_likelihood: f64,
    pub iterations: usize,
    /// False when `max_iter` sweeps ran out before the objective settled.
    pub converged: bool,
    /// Raters who used a single category for everything; their
    /// discrimination is pinned at the floor and thresholds centered on zero.
    pub degenerate_raters: Vec<usize>,
    /// Penalized objective after initialization and after every sweep,
    /// before the final rescaling.
    pub trace: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Log-probability of one rating and its first and second derivatives with
/// respect to `u_lo = eta - c_{k-1}` and `u_hi = eta - c_k`.
#[derive(Debug, Clone, Copy)]
struct Term {
    ll: f64,
    g_lo: f64,
    g_hi: f64,
    h_lo: f64,
    h_hi: f64,
    h_cross: f64,
}

// `c[i]` is the intercept of P(rating >= i + 2) = sigmoid(eta - c[i]).
fn term(eta: f64, c: &[f64], category: usize) -> Term {
    let k = category - 1;
    let lo = (k > 0).then(|| eta - c[k - 1]);
    let hi = (k < c.len()).then(|| eta - c[k]);
    let (ll, g_lo, g_hi) = match (lo, hi) {
        (Some(u1), Some(u2)) => {
            let em = -(u2 - u1).exp_m1();
            let ll = log_sigmoid(u1) + log_sigmoid(-u2) + em.ln();
            let g1 = sigmoid(-u1) / (sigmoid(-u2) * em);
            let g2 = -sigmoid(u2) / (sigmoid(u1) * em);
            (ll, g1, g2)
        }
        (None, Some(u2)) => (log_sigmoid(-u2), 0.0, -sigmoid(u2)),
        (Some(u1), None) => (log_sigmoid(u1), sigmoid(-u1), 0.0),
        (None, None) => (0.0, 0.0, 0.0),
    };
    let h_lo = lo.map_or(0.0, |u| g_lo * (1.0 - 2.0 * sigmoid(u)) - g_lo * g_lo);
    let h_hi = hi.map_or(0.0, |u| g_hi * (1.0 - 2.0 * sigmoid(u)) - g_hi * g_hi);
    Term {
        ll,
        g_lo,
        g_hi,
        h_lo,
        h_hi,
        h_cross: -g_lo * g_hi,
    }
}

#[derive(Debug, Clone)]
struct RaterParams {
    a: f64,
    c: Vec<f64>,
}

impl RaterParams {
    fn thresholds(&self) -> Vec<f64> {
        self.c.iter().map(|c| c / self.a).collect()
    }

    fn feasible(&self, a_cap: f64, b_cap: f64) -> bool {
        self.a >= A_MIN
            && self.a <= a_cap
            && self.c.windows(2).all(|w| w[1] - w[0] > MIN_GAP)
            && self.c.iter().all(|c| (c / self.a).abs() <= b_cap)
    }

    fn b_extent(&self) -> f64 {
        self.c
            .iter()
            .map(|c| (c / self.a).abs())
            .fold(0.0, f64::max)
    }
}

fn rater_ll(p: &RaterParams, items: &[(usize, usize)], theta: &[f64]) -> f64 {
    items
        .iter()
        .map(|&(s, k)| term(p.a * theta[s], &p.c, k).ll)
        .sum()
}

fn rater_objective(p: &RaterParams, items: &[(usize, usize)], theta: &[f64]) -> f64 {
    rater_ll(p, items, theta) - log_a_penalty(p.a)
}

// includes the prior
fn subject_objective(t: f64, items: &[(usize, usize)], raters: &[RaterParams]) -> f64 {
    items
        .iter()
        .map(|&(r, k)| term(raters[r].a * t, &raters[r].c, k).ll)
        .sum::<f64>()
        - 0.5 * t * t
}

fn total_ll(by_rater: &[Vec<(usize, usize)>], raters: &[RaterParams], theta: &[f64]) -> f64 {
    raters
        .iter()
        .zip(by_rater)
        .map(|(p, items)| rater_ll(p, items, theta))
        .sum()
}

/// Newton ascent over one rater's `(a, c)` with backtracking; never lowers
/// the rater's penalized log-likelihood.
fn update_rater(p: &mut RaterParams, items: &[(usize, usize)], theta: &[f64]) {
    let dim = p.c.len() + 1;
    let mut current = rater_objective(p, items, theta);
    let v = LOG_A_PRIOR_SD * LOG_A_PRIOR_SD;
    for _ in 0..INNER_STEPS {
        let mut g = DVector::<f64>::zeros(dim);
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        let la = p.a.ln();
        g[0] = -la / (v * p.a);
        h[(0, 0)] = -(1.0 - la) / (v * p.a * p.a);
        for &(s, k) in items {
            let t = theta[s];
            let tm = term(p.a * t, &p.c, k);
            // u_lo = a t - c[k-2], u_hi = a t - c[k-1]; index 0 is `a`
            let lo = (k >= 2).then(|| k - 1);
            let hi = (k <= p.c.len()).then_some(k);
            let mut j_lo = Vec::with_capacity(2);
            let mut j_hi = Vec::with_capacity(2);
            if let Some(i) = lo {
                j_lo.extend([(0, t), (i, -1.0)]);
            }
            if let Some(i) = hi {
                j_hi.extend([(0, t), (i, -1.0)]);
            }
            for &(i, v) in &j_lo {
                g[i] += tm.g_lo * v;
            }
            for &(i, v) in &j_hi {
                g[i] += tm.g_hi * v;
            }
            for &(i, vi) in &j_lo {
                for &(j, vj) in &j_lo {
                    h[(i, j)] += tm.h_lo * vi * vj;
                }
                for &(j, vj) in &j_hi {
                    h[(i, j)] += tm.h_cross * vi * vj;
                    h[(j, i)] += tm.h_cross * vi * vj;
                }
            }
            for &(i, vi) in &j_hi {
                for &(j, vj) in &j_hi {
                    h[(i, j)] += tm.h_hi * vi * vj;
                }
            }
        }
        let step = newton_direction(&h, &g);
        let a_cap = A_MAX.max(p.a);
        let b_cap = B_MAX.max(p.b_extent());
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = RaterParams {
                a: p.a + scale * step[0],
                c: p.c
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c + scale * step[i + 1])
                    .collect(),
            };
            if trial.feasible(a_cap, b_cap) {
                let ll = rater_objective(&trial, items, theta);
                if ll >= current {
                    let gain = ll - current;
                    *p = trial;
                    current = ll;
                    accepted = gain > 1e-13 * (1.0 + current.abs());
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
}

// Solves (-H + mu I) x = g with the smallest ridge mu that makes the system
// positive definite.
fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let n = g.len();
    let neg = -h;
    let mut mu = 0.0;
    for _ in 0..30 {
        let m = &neg + DMatrix::identity(n, n) * mu;
        if let Some(ch) = m.cholesky() {
            return ch.solve(g);
        }
        mu = if mu == 0.0 {
            1e-8 * (1.0 + neg.amax())
        } else {
            mu * 10.0
        };
    }
    g.clone()
}

fn update_subject(t: &mut f64, items: &[(usize, usize)], raters: &[RaterParams]) {
    let mut current = subject_objective(*t, items, raters);
    let cap = THETA_MAX.max(t.abs());
    for _ in 0..INNER_STEPS {
        let (mut g, mut h) = (-*t, -1.0);
        for &(r, k) in items {
            let p = &raters[r];
            let tm = term(p.a * *t, &p.c, k);
            g += p.a * (tm.g_lo + tm.g_hi);
            h += p.a * p.a * (tm.h_lo + tm.h_hi + 2.0 * tm.h_cross);
        }
        let step = if h < 0.0 { -g / h } else { g };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = *t + scale * step;
            if trial.abs() <= cap {
                let ll = subject_objective(trial, items, raters);
                if ll >= current {
                    let gain = ll - current;
                    *t = trial;
                    current = ll;
                    accepted = gain > 1e-13 * (1.0 + current.abs());
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
}

// Maps theta -> s theta + m, a -> a / s, c -> c + a m / s, which leaves the
// likelihood unchanged, choosing (s, m) to maximize the priors. The optimal
// m centers theta; ln s minimizes the convex
// F(u) = e^{2u} S / 2 + sum_r (ln a_r - u)^2 / (2 v).
fn rescale(theta: &mut [f64], raters: &mut [RaterParams], free: &[bool]) {
    let n = theta.len() as f64;
    let mean = theta.iter().sum::<f64>() / n;
    let ss: f64 = theta.iter().map(|t| (t - mean).powi(2)).sum();
    let logs: Vec<f64> = raters
        .iter()
        .zip(free)
        .filter(|(_, &f)| f)
        .map(|(p, _)| p.a.ln())
        .collect();
    let v = LOG_A_PRIOR_SD * LOG_A_PRIOR_SD;
    let mut u = 0.0f64;
    if ss > 0.0 && !logs.is_empty() {
        let r = logs.len() as f64;
        for _ in 0..50 {
            let e = (2.0 * u).exp() * ss;
            let grad = e - logs.iter().map(|l| l - u).sum::<f64>() / v;
            let hess = 2.0 * e + r / v;
            let step = grad / hess;
            u -= step.clamp(-1.0, 1.0);
            if step.abs() < 1e-14 {
                break;
            }
        }
    }
    let s = u.exp();
    let m = -s * mean;
    for t in theta.iter_mut() {
        *t = s * *t + m;
    }
    for p in raters.iter_mut() {
        for c in &mut p.c {
            *c += p.a * m / s;
        }
        p.a /= s;
    }
}

fn standardize(theta: &mut [f64], raters: &mut [RaterParams]) -> Result<()> {
    let n = theta.len() as f64;
    let mean = theta.iter().sum::<f64>() / n;
    let sd = (theta.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd.is_nan() || sd <= 0.0 {
        return Err(Error::InvalidRatings(
            "ratings carry no information about subject ordering".into(),
        ));
    }
    for t in theta.iter_mut() {
        *t = (*t - mean) / sd;
    }
    // a (theta - b) is unchanged under theta' = (theta - m)/s, a' = a s, c' = c - a m
    for p in raters.iter_mut() {
        for c in &mut p.c {
            *c -= p.a * mean;
        }
        p.a *= sd;
    }
    Ok(())
}

/// Fits the graded-response model by joint penalized maximum likelihood.
///
/// Sweeps until the penalized objective gains less than `tol` in one sweep
/// or `max_iter` sweeps have run; in the latter case the best fit so far is
/// returned with `converged == false`.
pub fn fit_latent_trait(table: &RatingsTable, max_iter: usize, tol: f64) -> Result<LatentTraitFit> {
    let k = table.categories();
    let by_rater = table.by_rater();
    let by_subject = table.by_subject();
    for (r, items) in by_rater.iter().enumerate() {
        if items.len() < 3 {
            return Err(Error::InvalidRatings(format!(
                "rater `{}` rated {} subjects, need at least 3",
                table.raters()[r],
                items.len()
            )));
        }
    }

    // init: mean of each subject's within-rater z-scores
    let mut theta = vec![0.0; table.subjects().len()];
    let mut counts = vec![0usize; theta.len()];
    for items in &by_rater {
        let n = items.len() as f64;
        let mean = items.iter().map(|&(_, c)| c as f64).sum::<f64>() / n;
        let sd = (items
            .iter()
            .map(|&(_, c)| (c as f64 - mean).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        for &(s, c) in items {
            if sd > 0.0 {
                theta[s] += (c as f64 - mean) / sd;
            }
            counts[s] += 1;
        }
    }
    for (t, &n) in theta.iter_mut().zip(&counts) {
        *t /= n as f64;
    }

    let mut scratch: Vec<RaterParams> = Vec::new();
    standardize(&mut theta, &mut scratch)?;

    // rater parameters start at a = 1 with thresholds matching each rater's
    // category frequencies at theta = 0
    let mut degenerate = Vec::new();
    let raters: Vec<RaterParams> = by_rater
        .iter()
        .enumerate()
        .map(|(r, items)| {
            let first = items[0].1;
            if items.iter().all(|&(_, c)| c == first) {
                degenerate.push(r);
                let c = (1..k)
                    .map(|i| A_MIN * (i as f64 - k as f64 / 2.0))
                    .collect();
                return RaterParams { a: A_MIN, c };
            }
            let n = items.len() as f64;
            let mut c: Vec<f64> = (1..k)
                .map(|i| {
                    let above = items.iter().filter(|&&(_, cat)| cat > i).count() as f64;
                    let p = (above + 0.5) / (n + 1.0);
                    (1.0 - p).ln() - p.ln()
                })
                .collect();
            for i in 1..c.len() {
                c[i] = c[i].max(c[i - 1] + 0.05);
            }
            RaterParams { a: 1.0, c }
        })
        .collect();
    let mut raters = raters;

    let free: Vec<bool> = (0..raters.len())
        .map(|r| !degenerate.contains(&r))
        .collect();
    let objective = |raters: &[RaterParams], theta: &[f64]| {
        total_ll(&by_rater, raters, theta)
            - 0.5 * theta.iter().map(|t| t * t).sum::<f64>()
            - raters
                .iter()
                .zip(&free)
                .filter(|(_, &f)| f)
                .map(|(p, _)| log_a_penalty(p.a))
                .sum::<f64>()
    };
    let mut value = objective(&raters, &theta);
    let mut trace = vec![value];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        for (r, p) in raters.iter_mut().enumerate() {
            if !degenerate.contains(&r) {
                update_rater(p, &by_rater[r], &theta);
            }
        }
        for (s, t) in theta.iter_mut().enumerate() {
            update_subject(t, &by_subject[s], &raters);
        }
        rescale(&mut theta, &mut raters, &free);
        let next = objective(&raters, &theta);
        trace.push(next);
        let gain = next - value;
        value = next;
        if gain < tol {
            converged = true;
            break;
        }
    }
    standardize(&mut theta, &mut raters)?;
    let ll = total_ll(&by_rater, &raters, &theta);

    Ok(LatentTraitFit {
        severity: theta,
        discrimination: raters.iter().map(|p| p.a).collect(),
        thresholds: raters.iter().map(RaterParams::thresholds).collect(),
        log_likelihood: ll,
        iterations,
        converged,
        degenerate_raters: degenerate,
        trace,
    })
}

/// Log-likelihood of `table` under the parameters of `fit`.
pub fn log_likelihood(table: &RatingsTable, fit: &LatentTraitFit) -> f64 {
    table
        .entries()
        .iter()
        .map(|e| {
            let a = fit.discrimination[e.rater];
            let c: Vec<f64> = fit.thresholds[e.rater].iter().map(|b| a * b).collect();
            term(a * fit.severity[e.subject], &c, e.category).ll
        })
        .sum()
}

/// Discrimination of individual raters and of the aggregated severity.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSummary {
    /// AUC of each rater's raw ratings against the diagnosis, over the
    /// subjects that rater saw; `None` if those subjects are all one class.
    pub rater_auc: Vec<Option<f64>>,
    pub individual_mean: f64,
    /// Sample standard deviation of the individual AUCs (0 for one rater).
    pub individual_sd: f64,
    pub individual_max: f64,
    /// AUC of the fitted severities.
    pub aggregated_auc: f64,
}

/// Compares individual raters with the fitted consensus. `diagnosis[j]` is
/// the label of `table.subjects()[j]`.
pub fn panel_auc_summary(
    fit: &LatentTraitFit,
    table: &RatingsTable,
    diagnosis: &[bool],
) -> Result<PanelSummary> {
    if diagnosis.len() != table.subjects().len() {
        return Err(Error::LengthMismatch(
            diagnosis.len(),
            table.subjects().len(),
        ));
    }
    let rater_auc: Vec<Option<f64>> = table
        .by_rater()
        .iter()
        .map(|items| {
            let scores: Vec<f64> = items.iter().map(|&(_, c)| c as f64).collect();
            let labels: Vec<bool> = items.iter().map(|&(s, _)| diagnosis[s]).collect();
            auc(&scores, &labels).ok()
        })
        .collect();
    let values: Vec<f64> = rater_auc.iter().flatten().copied().collect();
    if values.is_empty() {
        return Err(Error::SingleClass);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(PanelSummary {
        individual_max: values.iter().copied().fold(f64::MIN, f64::max),
        rater_auc,
        individual_mean: mean,
        individual_sd: sd,
        aggregated_auc: auc(&fit.severity, diagnosis)?,
    })
}
