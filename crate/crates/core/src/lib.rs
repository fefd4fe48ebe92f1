//! Shape normality scoring from particle correspondences.
//!
//! A probabilistic PCA model is fitted to a population of normal anatomies,
//! each given as `m` corresponding 3-D particles. New shapes are scored by
//! their Mahalanobis distance under that model, split into a latent and a
//! null-space part, and localized per particle by a whitened deviation map.
//!
//! ```
//! use snm::{fit_ppca, snm_score, CorrespondenceSet, DimSpec};
//!
//! let shapes = vec![
//!     vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
//!     vec![0.1, 0.0, 0.0, 1.2, 0.0, 0.0],
//!     vec![-0.1, 0.0, 0.1, 0.9, 0.0, 0.0],
//!     vec![0.0, 0.1, 0.0, 1.1, 0.1, 0.0],
//!     vec![0.0, -0.1, 0.0, 0.8, 0.0, 0.1],
//! ];
//! let ids = (0..5).map(|i| format!("n{i}")).collect();
//! let set = CorrespondenceSet::new(ids, shapes)?;
//! let model = fit_ppca(&set, DimSpec::Fixed(1))?;
//! let s = snm_score(&model, model.mean().as_slice())?;
//! assert_eq!(s.full, 0.0);
//! # Ok::<(), snm::Error>(())
//! ```

pub mod correspondence;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod metrics;
pub mod model;
pub mod raters;
pub mod synthetic;

pub use correspondence::CorrespondenceSet;
pub use error::{Error, Result};
pub use evaluation::{auc, pearson, repeated_kfold_cv, spearman, CvConfig, CvReport, Scorer};
pub use metrics::{batch_score, snm_score, whiten, DeviationMap, Metric, SeverityScore};
pub use model::{fit_ppca, fit_ppca_with, select_dim, DimSpec, FitOptions, PpcaModel};
pub use raters::{fit_latent_trait, panel_auc_summary, LatentTraitFit, RatingsTable};
pub use synthetic::{generate_population, GeneratorSpec};
