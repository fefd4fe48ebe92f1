//! Shape normality scores and whitened deviation maps.
//!
//! For a query `c` with deviation `y = c - mu`, latent coordinates
//! `z = U_d^T y` and residual `r = y - U_d z`, the whole-space Mahalanobis
//! distance under `W W^T + sigma2 I = U_d Lambda_d U_d^T + sigma2 (I - U_d U_d^T)`
//! splits exactly into a latent part and a null-space part:
//!
//! ```text
//! full^2 = sum_i z_i^2 / lambda_i  +  |r|^2 / sigma2
//!        = latent_exact^2          +  null^2
//! ```
//!
//! A second latent variant, `latent_paper`, weights the latent coordinates by
//! `1 / (lambda_i + sigma2)`. It is reported alongside but does not take part
//! in the decomposition. Nothing here forms a `p × p` matrix or a basis of the
//! null space.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::correspondence::{to_triples, CorrespondenceSet};
use crate::error::{Error, Result};
use crate::model::PpcaModel;

/// Normality scores of one shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeverityScore {
    /// Whole-space Mahalanobis distance; the headline score.
    pub full: f64,
    /// Latent-subspace distance with weights `1 / (lambda_i + sigma2)`.
    pub latent_paper: f64,
    /// Latent-subspace distance with weights `1 / lambda_i`.
    pub latent_exact: f64,
    /// Distance from the latent subspace in units of `sigma`.
    pub null: f64,
    pub d_used: usize,
    pub sigma2_used: f64,
}

/// Which score a comparison uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Full,
    LatentPaper,
    LatentExact,
    Null,
}

impl Metric {
    pub fn pick(self, s: &SeverityScore) -> f64 {
        match self {
            Metric::Full => s.full,
            Metric::LatentPaper => s.latent_paper,
            Metric::LatentExact => s.latent_exact,
            Metric::Null => s.null,
        }
    }
}

/// Per-particle raw and whitened deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationMap {
    /// `c - mu` regrouped per particle, in input units.
    pub raw: Vec<[f64; 3]>,
    /// `(W W^T + sigma2 I)^{-1/2} (c - mu)` regrouped per particle.
    pub whitened: Vec<[f64; 3]>,
    pub raw_norm: Vec<f64>,
    pub whitened_norm: Vec<f64>,
}

struct Split {
    y: DVector<f64>,
    z: DVector<f64>,
    residual: DVector<f64>,
}

fn split(model: &PpcaModel, c: &[f64]) -> Result<Split> {
    let y = model.deviation(c)?;
    let z = model.basis().tr_mul(&y);
    let residual = &y - model.basis() * &z;
    Ok(Split { y, z, residual })
}

/// All four normality scores of `c` against `model`.
pub fn snm_score(model: &PpcaModel, c: &[f64]) -> Result<SeverityScore> {
    let Split { z, residual, .. } = split(model, c)?;
    let sigma2 = model.sigma2();
    let mut exact2 = 0.0;
    let mut paper2 = 0.0;
    for (zi, &l) in z.iter().zip(model.eigenvalues()) {
        exact2 += zi * zi / l;
        paper2 += zi * zi / (l + sigma2);
    }
    let null2 = residual.norm_squared() / sigma2;
    Ok(SeverityScore {
        full: (exact2 + null2).sqrt(),
        latent_paper: paper2.sqrt(),
        latent_exact: exact2.sqrt(),
        null: null2.sqrt(),
        d_used: model.d(),
        sigma2_used: sigma2,
    })
}

/// Whitened deviation `U_d Lambda_d^{-1/2} z + r / sigma`, regrouped per
/// particle, plus per-particle norms. The squared whitened norms sum to
/// `full^2`.
pub fn whiten(model: &PpcaModel, c: &[f64]) -> Result<DeviationMap> {
    let Split { y, z, residual } = split(model, c)?;
    let scaled = DVector::from_iterator(
        z.len(),
        z.iter()
            .zip(model.eigenvalues())
            .map(|(zi, &l)| zi / l.sqrt()),
    );
    let w = model.basis() * scaled + residual / model.sigma2().sqrt();
    let raw = to_triples(y.as_slice());
    let whitened = to_triples(w.as_slice());
    let norm = |t: &[f64; 3]| (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
    Ok(DeviationMap {
        raw_norm: raw.iter().map(norm).collect(),
        whitened_norm: whitened.iter().map(norm).collect(),
        raw,
        whitened,
    })
}

/// Scores every shape of `set`, preserving order.
pub fn batch_score(model: &PpcaModel, set: &CorrespondenceSet) -> Result<Vec<SeverityScore>> {
    if set.p() != model.p() {
        return Err(Error::DimensionMismatch {
            expected: model.p(),
            found: set.p(),
            id: set.ids().first().cloned(),
        });
    }
    (0..set.n())
        .into_par_iter()
        .map(|i| snm_score(model, set.shape(i).as_slice()))
        .collect()
}
