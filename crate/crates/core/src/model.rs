//! Probabilistic PCA of a normal population.
//!
//! The model is `c = W l + mu + eps` with `l ~ N(0, I_d)` and
//! `eps ~ N(0, sigma2 I_p)`, so that `c ~ N(mu, W W^T + sigma2 I)`. The
//! maximum-likelihood fit keeps the `d` leading eigenpairs `(lambda_i, u_i)` of
//! the sample covariance `Y Y^T / (n - 1)` (with `Y` the centered population)
//! and sets
//!
//! ```text
//! sigma2 = (lambda_{d+1} + ... + lambda_{n-1}) / (n - 1 - d)
//! W      = U_d (Lambda_d - sigma2 I)^{1/2}
//! ```
//!
//! The residual variance averages only the `n - 1 - d` discarded eigenvalues
//! the sample can actually observe. With `p` in the thousands and `n` below a
//! hundred, the `p × p` covariance is never formed: its nonzero eigenpairs
//! come from the `n × n` Gram matrix `Y^T Y / (n - 1)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use sha2::{Digest, Sha256};

use crate::correspondence::{remove_centroid, CorrespondenceSet};
use crate::error::{Error, Result};

/// `sigma2` never drops below this multiple of the leading eigenvalue.
pub const SIGMA2_FLOOR_REL: f64 = 1e-12;

/// Eigenpairs whose eigenvalue falls below this multiple of the leading one
/// carry no recoverable direction.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Orthonormality tolerance on a model's basis, `max |U^T U - I|`.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

/// How the latent dimension is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DimSpec {
    /// Exactly `d` components.
    Fixed(usize),
    /// The fewest components whose eigenvalues explain this fraction of the
    /// total variance.
    ExplainedVariance(f64),
}

/// Result of [`select_dim`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimSelection {
    pub d: usize,
    /// Fraction of the total variance captured by the first `d` eigenvalues.
    pub explained_ratio: f64,
    /// Whether the explained-variance rule asked for more than `n - 2`
    /// components and was cut back.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FitOptions {
    /// Translate every shape (training and query) so its particle centroid is
    /// at the origin. No rotation or scaling is applied.
    pub center_shapes: bool,
}

/// Mean and centered deviations of a population.
#[derive(Debug, Clone)]
pub struct Centered {
    pub mean: DVector<f64>,
    /// `p × n`; column `i` is shape `i` minus the mean.
    pub deviations: DMatrix<f64>,
}

/// Leading eigenpairs of a sample covariance.
#[derive(Debug, Clone)]
pub struct Eigenpairs {
    /// `min(n - 1, p)` eigenvalues, descending, clamped at zero.
    pub values: Vec<f64>,
    /// `p × k` orthonormal eigenvectors for the `k` eigenvalues above
    /// [`RANK_REL_TOL`] times the leading one; eigenvectors of vanishing
    /// eigenvalues are not identifiable from the Gram matrix and are omitted.
    pub vectors: DMatrix<f64>,
}

impl Eigenpairs {
    /// Numerical rank: the number of recovered eigenvectors.
    pub fn rank(&self) -> usize {
        self.vectors.ncols()
    }
}

/// Coordinate-wise mean of the population and each shape's deviation from it.
pub fn center(set: &CorrespondenceSet) -> Result<Centered> {
    let n = set.n();
    if n < 3 {
        return Err(Error::TooFewShapes { n, min: 3 });
    }
    let mean = set.matrix().column_mean();
    let mut deviations = set.matrix().clone();
    for mut col in deviations.column_iter_mut() {
        col -= &mean;
    }
    Ok(Centered { mean, deviations })
}

/// Eigendecomposition of the sample covariance `Y Y^T / (n - 1)` through the
/// `n × n` Gram matrix `Y^T Y / (n - 1)`.
///
/// If `Y^T Y v = (n - 1) lambda v` then `u = Y v / sqrt((n - 1) lambda)` is a
/// unit eigenvector of the covariance with the same eigenvalue. The recovered
/// vectors are re-orthonormalized and each is signed so that its
/// largest-magnitude entry (lowest index on ties) is positive.
pub fn gram_eigendecomposition(deviations: &DMatrix<f64>) -> Result<Eigenpairs> {
    let (p, n) = deviations.shape();
    if n < 3 {
        return Err(Error::TooFewShapes { n, min: 3 });
    }
    let dof = (n - 1) as f64;
    let mut gram = deviations.tr_mul(deviations) / dof;
    // exact symmetry for the solver
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (gram[(i, j)] + gram[(j, i)]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let r = (n - 1).min(p);
    let values: Vec<f64> = order[..r]
        .iter()
        .map(|&i| eig.eigenvalues[i].max(0.0))
        .collect();
    if values[0] <= 1e-14 * p as f64 {
        return Err(Error::DegenerateSpectrum);
    }

    let cutoff = RANK_REL_TOL * values[0];
    let rank = values.iter().take_while(|&&l| l > cutoff).count();
    let mut vectors = DMatrix::zeros(p, rank);
    for (k, &i) in order[..rank].iter().enumerate() {
        let u = deviations * eig.eigenvectors.column(i) / (dof * values[k]).sqrt();
        vectors.set_column(k, &u);
    }
    orthonormalize(&mut vectors);
    for mut col in vectors.column_iter_mut() {
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
    Ok(Eigenpairs { values, vectors })
}

// Two passes of modified Gram-Schmidt; the columns are already nearly
// orthonormal, this only removes round-off.
fn orthonormalize(q: &mut DMatrix<f64>) {
    for _ in 0..2 {
        for j in 0..q.ncols() {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).into_owned();
                q.column_mut(j).axpy(-proj, &qi, 1.0);
            }
            let norm = q.column(j).norm();
            q.column_mut(j).unscale_mut(norm);
        }
    }
}

/// Chooses the latent dimension from the full list of `n - 1` sample
/// eigenvalues (descending, nonnegative).
///
/// The explained-variance rule takes the smallest `d` whose leading
/// eigenvalues reach the target fraction, then clamps it to `[1, n - 2]`.
/// A fixed `d` must already lie in that range.
pub fn select_dim(spectrum: &[f64], target: DimSpec) -> Result<DimSelection> {
    let n = spectrum.len() + 1;
    if n < 3 {
        return Err(Error::TooFewShapes { n, min: 3 });
    }
    let max_d = n - 2;
    let total: f64 = spectrum.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateSpectrum);
    }
    let ratio_at = |d: usize| spectrum[..d].iter().sum::<f64>() / total;
    match target {
        DimSpec::Fixed(d) => {
            if d < 1 || d > max_d {
                return Err(Error::DimOutOfRange {
                    d,
                    min: 1,
                    max: max_d,
                });
            }
            Ok(DimSelection {
                d,
                explained_ratio: ratio_at(d),
                clamped: false,
            })
        }
        DimSpec::ExplainedVariance(alpha) => {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::InvalidRatio(alpha));
            }
            let mut cum = 0.0;
            let mut wanted = spectrum.len();
            for (i, l) in spectrum.iter().enumerate() {
                cum += l;
                // slack so that alpha = 1 is reachable despite round-off
                if cum / total >= alpha - 1e-12 {
                    wanted = i + 1;
                    break;
                }
            }
            let d = wanted.clamp(1, max_d);
            Ok(DimSelection {
                d,
                explained_ratio: ratio_at(d),
                clamped: d < wanted,
            })
        }
    }
}

/// Residual variance before flooring: the mean of the discarded eigenvalues
/// `lambda_{d+1}, ..., lambda_{n-1}`.
pub fn residual_variance(spectrum: &[f64], d: usize) -> f64 {
    if d >= spectrum.len() {
        return 0.0;
    }
    spectrum[d..].iter().sum::<f64>() / (spectrum.len() - d) as f64
}

/// Fits the model with default options.
pub fn fit_ppca(set: &CorrespondenceSet, dim: DimSpec) -> Result<PpcaModel> {
    fit_ppca_with(set, dim, FitOptions::default())
}

pub fn fit_ppca_with(
    set: &CorrespondenceSet,
    dim: DimSpec,
    options: FitOptions,
) -> Result<PpcaModel> {
    let aligned;
    let set = if options.center_shapes {
        aligned = set.centered_shapes();
        &aligned
    } else {
        set
    };
    let Centered { mean, deviations } = center(set)?;
    let eig = gram_eigendecomposition(&deviations)?;

    let n = set.n();
    let mut spectrum = eig.values.clone();
    spectrum.resize(n - 1, 0.0);

    let mut sel = select_dim(&spectrum, dim)?;
    let rank = eig.rank();
    if sel.d > rank {
        match dim {
            DimSpec::Fixed(d) => return Err(Error::RankDeficient { requested: d, rank }),
            DimSpec::ExplainedVariance(_) => {
                sel.d = rank;
                sel.clamped = true;
            }
        }
    }
    let d = sel.d;
    let total: f64 = spectrum.iter().sum();
    let sigma2 = residual_variance(&spectrum, d).max(SIGMA2_FLOOR_REL * spectrum[0]);

    PpcaModel::from_parts(ModelParts {
        n_train: n,
        mean,
        eigenvalues: spectrum[..d].to_vec(),
        basis: eig.vectors.columns(0, d).into_owned(),
        sigma2,
        explained_ratio: spectrum[..d].iter().sum::<f64>() / total,
        spectrum,
        center_shapes: options.center_shapes,
        fingerprint: fingerprint(set.ids()),
    })
}

/// SHA-256 over the newline-joined ids, in training order.
pub fn fingerprint(ids: &[String]) -> String {
    let mut h = Sha256::new();
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            h.update(b"\n");
        }
        h.update(id.as_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Raw fields of a [`PpcaModel`], validated by [`PpcaModel::from_parts`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParts {
    pub n_train: usize,
    pub mean: DVector<f64>,
    pub eigenvalues: Vec<f64>,
    pub basis: DMatrix<f64>,
    pub sigma2: f64,
    pub spectrum: Vec<f64>,
    pub explained_ratio: f64,
    pub center_shapes: bool,
    pub fingerprint: String,
}

/// A fitted model of normal shape variation. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PpcaModel {
    parts: ModelParts,
}

impl PpcaModel {
    /// Checks the model invariants and wraps the parts.
    ///
    /// The basis must be `p × d` with orthonormal columns, the eigenvalues
    /// positive and non-increasing and no smaller than `sigma2`, and the
    /// spectrum (if present) must list `n_train - 1` nonnegative values.
    pub fn from_parts(parts: ModelParts) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        let p = parts.mean.len();
        let d = parts.eigenvalues.len();
        if p == 0 || !p.is_multiple_of(3) {
            return bad(format!("mean length {p} is not a positive multiple of 3"));
        }
        if parts.basis.shape() != (p, d) {
            return bad(format!(
                "basis is {:?}, expected ({p}, {d})",
                parts.basis.shape()
            ));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(parts.mean.as_slice())
            || !finite(parts.basis.as_slice())
            || !finite(&parts.eigenvalues)
            || !finite(&parts.spectrum)
        {
            return Err(Error::NonFinite("model".into()));
        }
        if !(parts.sigma2.is_finite() && parts.sigma2 > 0.0) {
            return bad(format!("sigma2 = {} must be positive", parts.sigma2));
        }
        for w in parts.eigenvalues.windows(2) {
            if w[1] > w[0] {
                return bad("eigenvalues are not descending".into());
            }
        }
        if let Some(&last) = parts.eigenvalues.last() {
            if last < parts.sigma2 * (1.0 - 1e-9) {
                return bad(format!(
                    "eigenvalue {last} is below the residual variance {}",
                    parts.sigma2
                ));
            }
        }
        if !parts.spectrum.is_empty() {
            if parts.spectrum.len() + 1 != parts.n_train {
                return bad(format!(
                    "spectrum has {} values, expected n_train - 1 = {}",
                    parts.spectrum.len(),
                    parts.n_train.saturating_sub(1)
                ));
            }
            if parts.spectrum.iter().any(|&l| l < 0.0) {
                return bad("negative value in spectrum".into());
            }
            if d > parts.n_train.saturating_sub(2) {
                return bad(format!("d = {d} exceeds n_train - 2"));
            }
        }
        if !(0.0..=1.0 + 1e-12).contains(&parts.explained_ratio) {
            return bad(format!("explained ratio {}", parts.explained_ratio));
        }
        let gram = parts.basis.tr_mul(&parts.basis);
        let err = (gram - DMatrix::identity(d, d)).amax();
        if err > ORTHONORMAL_TOL {
            return bad(format!("basis is not orthonormal (error {err:e})"));
        }
        Ok(PpcaModel { parts })
    }

    pub fn parts(&self) -> &ModelParts {
        &self.parts
    }

    pub fn into_parts(self) -> ModelParts {
        self.parts
    }

    /// Ambient dimension `p`.
    pub fn p(&self) -> usize {
        self.parts.mean.len()
    }

    pub fn n_train(&self) -> usize {
        self.parts.n_train
    }

    /// Retained latent dimension.
    pub fn d(&self) -> usize {
        self.parts.eigenvalues.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.parts.mean
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.parts.eigenvalues
    }

    /// `p × d`, orthonormal columns.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.parts.basis
    }

    pub fn sigma2(&self) -> f64 {
        self.parts.sigma2
    }

    /// All `n_train - 1` sample eigenvalues; empty for models not built from
    /// data.
    pub fn spectrum(&self) -> &[f64] {
        &self.parts.spectrum
    }

    pub fn explained_ratio(&self) -> f64 {
        self.parts.explained_ratio
    }

    pub fn center_shapes(&self) -> bool {
        self.parts.center_shapes
    }

    pub fn fingerprint(&self) -> &str {
        &self.parts.fingerprint
    }

    /// The loading matrix `W = U_d (Lambda_d - sigma2 I)^{1/2}`.
    pub fn weights(&self) -> DMatrix<f64> {
        let mut w = self.parts.basis.clone();
        for (mut col, &l) in w.column_iter_mut().zip(&self.parts.eigenvalues) {
            col *= (l - self.parts.sigma2).max(0.0).sqrt();
        }
        w
    }

    /// The same fit with only the first `d` components kept and the residual
    /// variance recomputed from the spectrum. `d = 0` yields the isotropic
    /// model `N(mu, sigma2 I)`.
    pub fn truncate(&self, d: usize) -> Result<PpcaModel> {
        if d > self.d() {
            return Err(Error::DimOutOfRange {
                d,
                min: 0,
                max: self.d(),
            });
        }
        let spectrum = &self.parts.spectrum;
        if spectrum.is_empty() {
            return Err(Error::InvalidModel(
                "no spectrum to recompute the residual variance from".into(),
            ));
        }
        let total: f64 = spectrum.iter().sum();
        let mut parts = self.parts.clone();
        parts.eigenvalues.truncate(d);
        parts.basis = self.parts.basis.columns(0, d).into_owned();
        parts.sigma2 = residual_variance(spectrum, d).max(SIGMA2_FLOOR_REL * spectrum[0]);
        parts.explained_ratio = spectrum[..d].iter().sum::<f64>() / total;
        PpcaModel::from_parts(parts)
    }

    /// `c - mu`, after the same shape alignment the model was trained with.
    pub fn deviation(&self, c: &[f64]) -> Result<DVector<f64>> {
        if c.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                found: c.len(),
                id: None,
            });
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("query shape".into()));
        }
        let mut y = DVector::from_column_slice(c);
        if self.parts.center_shapes {
            remove_centroid(y.as_mut_slice());
        }
        y -= &self.parts.mean;
        Ok(y)
    }

    /// Latent coordinates `U_d^T (c - mu)`.
    pub fn project_latent(&self, c: &[f64]) -> Result<DVector<f64>> {
        let y = self.deviation(c)?;
        Ok(self.parts.basis.tr_mul(&y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(rows: &[[f64; 3]]) -> CorrespondenceSet {
        CorrespondenceSet::new(
            (0..rows.len()).map(|i| format!("s{i}")).collect(),
            rows.iter().map(|r| r.to_vec()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn center_examples() {
        let c = center(&set(&[[1., 0., 0.], [-1., 0., 0.], [0., 0., 0.]])).unwrap();
        assert_eq!(c.mean.as_slice(), &[0., 0., 0.]);
        assert_eq!(c.deviations.column(0).as_slice(), &[1., 0., 0.]);
        assert_eq!(c.deviations.column(1).as_slice(), &[-1., 0., 0.]);

        let c = center(&set(&[[2., 2., 2.]; 3])).unwrap();
        assert_eq!(c.mean.as_slice(), &[2., 2., 2.]);
        assert!(c.deviations.iter().all(|&v| v == 0.0));

        let c = center(&set(&[[1., 2., 3.], [3., 2., 1.], [2., 2., 2.]])).unwrap();
        assert_eq!(c.mean.as_slice(), &[2., 2., 2.]);
    }

    #[test]
    fn center_needs_three_shapes() {
        let e = center(&set(&[[0.; 3], [1.; 3]])).unwrap_err();
        assert!(matches!(e, Error::TooFewShapes { n: 2, .. }));
    }

    #[test]
    fn gram_small_example() {
        let c = center(&set(&[[1., 0., 0.], [-1., 0., 0.], [0., 0., 0.]])).unwrap();
        let eig = gram_eigendecomposition(&c.deviations).unwrap();
        assert_eq!(eig.values.len(), 2);
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!(eig.values[1].abs() < 1e-14);
        assert_eq!(eig.rank(), 1);
        let u = eig.vectors.column(0);
        assert!((u[0] - 1.0).abs() < 1e-14 && u[1].abs() < 1e-14 && u[2].abs() < 1e-14);
    }

    #[test]
    fn gram_rejects_constant_data() {
        let c = center(&set(&[[3., 1., 4.]; 4])).unwrap();
        assert!(matches!(
            gram_eigendecomposition(&c.deviations),
            Err(Error::DegenerateSpectrum)
        ));
        assert!(matches!(
            fit_ppca(&set(&[[3., 1., 4.]; 4]), DimSpec::Fixed(1)),
            Err(Error::DegenerateSpectrum)
        ));
    }

    #[test]
    fn sign_rule_makes_largest_entry_positive() {
        let c = center(&set(&[[0., -2., 0.], [0., 2., 0.], [0., 0., 0.]])).unwrap();
        let eig = gram_eigendecomposition(&c.deviations).unwrap();
        assert_eq!(eig.vectors.column(0).as_slice(), &[0., 1., 0.]);
    }

    #[test]
    fn select_dim_examples() {
        let s = select_dim(&[4., 3., 2., 1.], DimSpec::ExplainedVariance(0.95)).unwrap();
        assert_eq!(s.d, 3);
        assert_eq!(s.explained_ratio, 0.9);
        assert!(s.clamped);

        let s = select_dim(&[1., 0., 0.], DimSpec::ExplainedVariance(0.95)).unwrap();
        assert_eq!((s.d, s.explained_ratio, s.clamped), (1, 1.0, false));

        let s = select_dim(&[4., 3., 2., 1.], DimSpec::Fixed(2)).unwrap();
        assert_eq!(s.d, 2);
        assert!((s.explained_ratio - 0.7).abs() < 1e-15);

        let s = select_dim(&[4., 3., 2., 1.], DimSpec::ExplainedVariance(0.9)).unwrap();
        assert_eq!((s.d, s.clamped), (3, false));
    }

    #[test]
    fn select_dim_errors() {
        for d in [0, 4] {
            assert!(matches!(
                select_dim(&[4., 3., 2., 1.], DimSpec::Fixed(d)),
                Err(Error::DimOutOfRange { max: 3, .. })
            ));
        }
        for a in [0.0, 1.5, f64::NAN] {
            assert!(matches!(
                select_dim(&[4., 3., 2., 1.], DimSpec::ExplainedVariance(a)),
                Err(Error::InvalidRatio(_))
            ));
        }
    }

    #[test]
    fn fit_small_example_floors_sigma2() {
        let m = fit_ppca(
            &set(&[[1., 0., 0.], [-1., 0., 0.], [0., 0., 0.]]),
            DimSpec::Fixed(1),
        )
        .unwrap();
        assert_eq!(m.mean().as_slice(), &[0., 0., 0.]);
        assert!((m.eigenvalues()[0] - 1.0).abs() < 1e-14);
        assert_eq!(m.sigma2(), 1e-12 * m.spectrum()[0]);
        assert_eq!(m.spectrum().len(), 2);
    }

    #[test]
    fn fixed_dim_beyond_rank_is_an_error() {
        let s = set(&[[1., 0., 0.], [-1., 0., 0.], [0., 0., 0.], [2., 0., 0.]]);
        assert!(matches!(
            fit_ppca(&s, DimSpec::Fixed(2)),
            Err(Error::RankDeficient {
                requested: 2,
                rank: 1
            })
        ));
    }

    #[test]
    fn residual_variance_uses_observed_eigenvalues() {
        assert_eq!(residual_variance(&[4., 3., 2., 1.], 1), 2.0);
        assert_eq!(residual_variance(&[4., 3., 2., 1.], 0), 2.5);
        assert_eq!(residual_variance(&[4., 3., 2., 1.], 3), 1.0);
    }

    #[test]
    fn project_latent_basics() {
        let s = set(&[
            [1., 0., 0.],
            [-1., 0., 0.],
            [0., 0.5, 0.],
            [0., -0.5, 0.],
            [0., 0., 0.1],
        ]);
        let m = fit_ppca(&s, DimSpec::Fixed(2)).unwrap();
        let mu = m.mean().clone();
        assert!(m
            .project_latent(mu.as_slice())
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let c = &mu + m.basis().column(0);
        let z = m.project_latent(c.as_slice()).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-12 && z[1].abs() < 1e-12);
        assert!(matches!(
            m.project_latent(&[0.0; 6]),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 6,
                ..
            })
        ));
    }

    #[test]
    fn truncate_to_isotropic() {
        let s = set(&[
            [1., 0., 0.],
            [-1., 0., 0.],
            [0., 0.5, 0.],
            [0., -0.5, 0.],
            [0., 0., 0.1],
        ]);
        let m = fit_ppca(&s, DimSpec::Fixed(2)).unwrap();
        let iso = m.truncate(0).unwrap();
        assert_eq!(iso.d(), 0);
        let total: f64 = m.spectrum().iter().sum();
        assert!((iso.sigma2() - total / 4.0).abs() < 1e-15);
        assert!(m.truncate(3).is_err());
    }

    #[test]
    fn from_parts_rejects_non_orthonormal_basis() {
        let s = set(&[
            [1., 0., 0.],
            [-1., 0., 0.],
            [0., 0.5, 0.],
            [0., -0.5, 0.],
            [0., 0., 0.1],
        ]);
        let mut parts = fit_ppca(&s, DimSpec::Fixed(1)).unwrap().into_parts();
        parts.basis *= 1.001;
        assert!(matches!(
            PpcaModel::from_parts(parts),
            Err(Error::InvalidModel(_))
        ));
    }

    #[test]
    fn fingerprint_depends_on_order() {
        let a = fingerprint(&["x".into(), "y".into()]);
        let b = fingerprint(&["y".into(), "x".into()]);
        assert_ne!(a, b);
        assert_eq!(a.len(), 64);
    }
}
