//! Agreement between predicted severities and ground truth.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::correspondence::CorrespondenceSet;
use crate::error::{Error, Result};
use crate::metrics::{batch_score, Metric};
use crate::model::{fit_ppca_with, DimSpec, FitOptions};

/// Area under the ROC curve, as the Mann-Whitney probability that a positive
/// (`true`) outranks a negative, ties counting one half. Higher scores mean
/// more pathological.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(r, _)| r)
        .sum();
    let (p, q) = (n_pos as f64, n_neg as f64);
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * q))
}

/// 1-based ranks; tied values share the average of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(Error::TooFewObservations { n: x.len(), min: 3 });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman rank correlation: Pearson of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("correlation input".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// What a cross-validation run trains and scores with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvConfig {
    pub repeats: usize,
    pub folds: usize,
    pub seed: u64,
    pub dim: DimSpec,
    pub scorer: Scorer,
    pub fit: FitOptions,
}

impl CvConfig {
    /// Three repeats of three folds, full-space score.
    pub fn new(seed: u64, dim: DimSpec) -> Self {
        CvConfig {
            repeats: 3,
            folds: 3,
            seed,
            dim,
            scorer: Scorer::Metric(Metric::Full),
            fit: FitOptions::default(),
        }
    }
}

/// Score used to rank held-out shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scorer {
    /// One of the four scores of the fitted model.
    Metric(Metric),
    /// Whole-space distance after dropping every latent component, i.e.
    /// Euclidean distance scaled by the pooled variance.
    Isotropic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldAuc {
    pub repeat: usize,
    pub fold: usize,
    pub n_train: usize,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// One entry per (repeat, fold), repeat-major.
    pub entries: Vec<FoldAuc>,
    pub mean_auc: f64,
    pub repeats: usize,
    pub folds: usize,
    pub seed: u64,
}

/// Index sets of `k` folds over `0..n`, shuffled by `rng`. Fold sizes differ
/// by at most one.
pub fn kfold_indices(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(perm[start..start + len].to_vec());
        start += len;
    }
    folds
}

/// Repeated k-fold cross-validation over the normal population.
///
/// Each repeat reshuffles the normals into `folds` parts. For every part the
/// model is fitted on the remaining normals, then the held-out normals
/// (negatives) and all pathological shapes (positives) are scored and the AUC
/// recorded. The shuffles depend only on `seed`.
pub fn repeated_kfold_cv(
    normals: &CorrespondenceSet,
    pathologicals: &CorrespondenceSet,
    config: &CvConfig,
) -> Result<CvReport> {
    if config.repeats == 0 || config.folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "need repeats >= 1 and folds >= 2, got {} and {}",
            config.repeats, config.folds
        )));
    }
    let n = normals.n();
    if n < config.folds {
        return Err(Error::TooFewShapes {
            n,
            min: config.folds,
        });
    }
    if normals.p() != pathologicals.p() {
        return Err(Error::DimensionMismatch {
            expected: normals.p(),
            found: pathologicals.p(),
            id: pathologicals.ids().first().cloned(),
        });
    }
    let min_train = n - n.div_ceil(config.folds);
    if min_train < 3 {
        return Err(Error::TooFewShapes {
            n: min_train,
            min: 3,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut jobs = Vec::with_capacity(config.repeats * config.folds);
    for repeat in 0..config.repeats {
        let folds = kfold_indices(n, config.folds, &mut rng);
        for (fold, held_out) in folds.iter().enumerate() {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(f, _)| f != fold)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            jobs.push((repeat, fold, train, held_out.clone()));
        }
    }

    let entries = jobs
        .into_par_iter()
        .map(|(repeat, fold, train, held_out)| {
            let train_set = normals.subset(&train)?;
            let test_set = normals.subset(&held_out)?;
            let mut model = fit_ppca_with(&train_set, config.dim, config.fit)?;
            let metric = match config.scorer {
                Scorer::Metric(m) => m,
                Scorer::Isotropic => {
                    model = model.truncate(0)?;
                    Metric::Full
                }
            };
            let mut scores: Vec<f64> = batch_score(&model, &test_set)?
                .iter()
                .map(|s| metric.pick(s))
                .collect();
            scores.extend(
                batch_score(&model, pathologicals)?
                    .iter()
                    .map(|s| metric.pick(s)),
            );
            let mut labels = vec![false; test_set.n()];
            labels.resize(scores.len(), true);
            Ok(FoldAuc {
                repeat,
                fold,
                n_train: train.len(),
                auc: auc(&scores, &labels)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mean_auc = entries.iter().map(|e| e.auc).sum::<f64>() / entries.len() as f64;
    Ok(CvReport {
        entries,
        mean_auc,
        repeats: config.repeats,
        folds: config.folds,
        seed: config.seed,
    })
}
