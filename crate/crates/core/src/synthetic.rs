//! Populations and rater panels with known ground truth.
//!
//! Normal shapes are drawn from the generative model
//! `c = W l + mu + eps`, `l ~ N(0, I)`, `eps ~ N(0, sigma^2 I)`, around a smooth
//! closed curve `mu` whose modes of variation `W` are smooth, mutually
//! orthogonal displacement fields. Pathological shapes are further normal
//! draws pushed along one fixed deformation direction.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::correspondence::CorrespondenceSet;
use crate::error::{Error, Result};
use crate::model::{ModelParts, PpcaModel};
use crate::raters::RatingsTable;

/// Where the pathological deformation points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionMode {
    /// A random combination of the true modes of variation.
    InSpan,
    /// A localized bump with the span of the true modes projected out.
    NullSpace,
    /// A random direction in coordinate space.
    Random,
}

/// The deformation added to every pathological shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deformation {
    pub mode: DirectionMode,
    /// Displacement in units of `sigma`, per affected particle.
    pub amplitude: f64,
    /// How many particles' worth of displacement the deformation carries.
    /// The displacement vector has norm `amplitude * sigma * sqrt(extent)`;
    /// for the null-space mode this is also the size of the bump.
    pub extent: usize,
}

/// Parameters of a synthetic population.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub seed: u64,
    /// Particles per shape.
    pub particles: usize,
    pub n_normal: usize,
    pub n_pathological: usize,
    /// Standard deviation of the isotropic noise.
    pub sigma: f64,
    /// Standard deviation along each true mode; its length is the true
    /// latent dimension.
    pub latent_scales: Vec<f64>,
    pub deformation: Deformation,
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SpecInvalid(m));
        let d = self.latent_scales.len();
        if self.particles == 0 || self.n_normal == 0 || self.n_pathological == 0 {
            return bad("particle and shape counts must be at least 1".into());
        }
        if d == 0 {
            return bad("need at least one latent scale".into());
        }
        if d + 2 > self.n_normal {
            return bad(format!(
                "latent dimension {d} exceeds n_normal - 2 = {}",
                self.n_normal as i64 - 2
            ));
        }
        if d >= 3 * self.particles {
            return bad(format!(
                "latent dimension {d} leaves no null space in {} coordinates",
                3 * self.particles
            ));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if self
            .latent_scales
            .iter()
            .any(|s| !(s.is_finite() && *s > 0.0))
        {
            return bad("latent scales must be positive".into());
        }
        let def = &self.deformation;
        if !(def.amplitude.is_finite() && def.amplitude >= 0.0) {
            return bad(format!("amplitude must be >= 0, got {}", def.amplitude));
        }
        if def.extent == 0 || def.extent > self.particles {
            return bad(format!(
                "extent must lie in [1, {}], got {}",
                self.particles, def.extent
            ));
        }
        Ok(())
    }
}

/// Generator internals, for checking what a fit recovers.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub mean: DVector<f64>,
    /// `p × d`, orthogonal columns with norms equal to the latent scales.
    pub weights: DMatrix<f64>,
    /// The columns of `weights`, normalized.
    pub basis: DMatrix<f64>,
    pub sigma: f64,
    pub latent_scales: Vec<f64>,
    /// Unit deformation direction.
    pub direction: DVector<f64>,
    /// The vector added to each pathological draw.
    pub displacement: DVector<f64>,
}

impl GroundTruth {
    /// The generating distribution as a model, with modes sorted by
    /// decreasing variance.
    pub fn model(&self) -> Result<PpcaModel> {
        let sigma2 = self.sigma * self.sigma;
        let mut order: Vec<usize> = (0..self.latent_scales.len()).collect();
        order.sort_by(|&a, &b| {
            self.latent_scales[b]
                .total_cmp(&self.latent_scales[a])
                .then(a.cmp(&b))
        });
        let eigenvalues: Vec<f64> = order
            .iter()
            .map(|&i| self.latent_scales[i].powi(2) + sigma2)
            .collect();
        let basis = self.basis.select_columns(&order);
        let p = self.mean.len();
        let total = eigenvalues.iter().sum::<f64>() + (p - eigenvalues.len()) as f64 * sigma2;
        PpcaModel::from_parts(ModelParts {
            n_train: 0,
            mean: self.mean.clone(),
            explained_ratio: eigenvalues.iter().sum::<f64>() / total,
            eigenvalues,
            basis,
            sigma2,
            spectrum: Vec::new(),
            center_shapes: false,
            fingerprint: "ground-truth".into(),
        })
    }
}

/// Output of [`generate_population`].
#[derive(Debug, Clone)]
pub struct Population {
    pub normals: CorrespondenceSet,
    pub pathologicals: CorrespondenceSet,
    pub truth: GroundTruth,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

// Smooth closed space curve, roughly 100 units across.
fn base_shape(m: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let radius = 50.0;
    let (a2, a3) = (rng.gen_range(5.0..10.0), rng.gen_range(3.0..8.0));
    let height = rng.gen_range(5.0..15.0);
    let phases: [f64; 3] = [
        rng.gen_range(0.0..2.0 * PI),
        rng.gen_range(0.0..2.0 * PI),
        rng.gen_range(0.0..2.0 * PI),
    ];
    let mut mu = DVector::zeros(3 * m);
    for k in 0..m {
        let t = 2.0 * PI * k as f64 / m as f64;
        mu[3 * k] = radius * t.cos() + a2 * (2.0 * t + phases[0]).cos();
        mu[3 * k + 1] = radius * t.sin() + a3 * (3.0 * t + phases[1]).sin();
        mu[3 * k + 2] = height * (2.0 * t + phases[2]).sin();
    }
    mu
}

// Low-frequency displacement field plus a little white noise, so that any
// number of modes up to p stays linearly independent.
fn smooth_field(m: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    const FREQS: usize = 4;
    let mut coef = [[(0.0, 0.0); FREQS]; 3];
    for axis in &mut coef {
        for (f, c) in axis.iter_mut().enumerate() {
            let decay = 1.0 / (f + 1) as f64;
            *c = (gaussian(rng) * decay, gaussian(rng) * decay);
        }
    }
    let mut v = DVector::zeros(3 * m);
    for k in 0..m {
        let t = 2.0 * PI * k as f64 / m as f64;
        for (axis, row) in coef.iter().enumerate() {
            v[3 * k + axis] = row
                .iter()
                .enumerate()
                .map(|(f, &(a, b))| {
                    let w = (f + 1) as f64 * t;
                    a * w.cos() + b * w.sin()
                })
                .sum();
        }
    }
    let scale = v.norm() / (3.0 * m as f64).sqrt();
    for x in v.iter_mut() {
        *x += 0.1 * scale * gaussian(rng);
    }
    v
}

fn gram_schmidt(mut cols: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    for j in 0..cols.len() {
        for _ in 0..2 {
            for i in 0..j {
                let proj = cols[i].dot(&cols[j]);
                let qi = cols[i].clone();
                cols[j].axpy(-proj, &qi, 1.0);
            }
        }
        let norm = cols[j].norm();
        cols[j] /= norm;
    }
    cols
}

fn project_out(v: &DVector<f64>, basis: &DMatrix<f64>) -> DVector<f64> {
    let mut r = v - basis * basis.tr_mul(v);
    // second pass for round-off
    r -= basis * basis.tr_mul(&r);
    r
}

/// Draws normal and pathological populations from `spec`. The same spec
/// always produces bit-identical output.
pub fn generate_population(spec: &GeneratorSpec) -> Result<Population> {
    spec.validate()?;
    let m = spec.particles;
    let p = 3 * m;
    let d = spec.latent_scales.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mean = base_shape(m, &mut rng);
    let modes = gram_schmidt((0..d).map(|_| smooth_field(m, &mut rng)).collect());
    let basis = DMatrix::from_columns(&modes);
    let mut weights = basis.clone();
    for (mut col, s) in weights.column_iter_mut().zip(&spec.latent_scales) {
        col *= *s;
    }

    let def = spec.deformation;
    let direction = match def.mode {
        DirectionMode::InSpan => {
            let g = DVector::from_fn(d, |_, _| gaussian(&mut rng));
            (&basis * g).normalize()
        }
        DirectionMode::Random => DVector::from_fn(p, |_, _| gaussian(&mut rng)).normalize(),
        DirectionMode::NullSpace => {
            let start = rng.gen_range(0..m);
            let mut bump = DVector::zeros(p);
            for j in 0..def.extent {
                let k = (start + j) % m;
                // radial push away from the curve's axis, with a random lift
                let (x, y) = (mean[3 * k], mean[3 * k + 1]);
                let r = (x * x + y * y).sqrt().max(1e-12);
                bump[3 * k] = x / r;
                bump[3 * k + 1] = y / r;
                bump[3 * k + 2] = 0.3 * gaussian(&mut rng);
            }
            let mut v = project_out(&bump, &basis);
            if v.norm() < 1e-6 * bump.norm() {
                v = project_out(&DVector::from_fn(p, |_, _| gaussian(&mut rng)), &basis);
            }
            v.normalize()
        }
    };
    let displacement = &direction * (def.amplitude * spec.sigma * (def.extent as f64).sqrt());

    let draw = |rng: &mut ChaCha8Rng| -> DVector<f64> {
        let latent = DVector::from_fn(d, |_, _| gaussian(rng));
        let noise = DVector::from_fn(p, |_, _| gaussian(rng) * spec.sigma);
        &mean + &weights * latent + noise
    };
    let normals: Vec<DVector<f64>> = (0..spec.n_normal).map(|_| draw(&mut rng)).collect();
    let paths: Vec<DVector<f64>> = (0..spec.n_pathological)
        .map(|_| draw(&mut rng) + &displacement)
        .collect();

    let ids = |prefix: &str, n: usize| -> Vec<String> {
        let width = n.to_string().len().max(3);
        (0..n).map(|i| format!("{prefix}_{i:0width$}")).collect()
    };
    let normals = CorrespondenceSet::from_columns(
        ids("normal", spec.n_normal),
        DMatrix::from_columns(&normals),
    )?;
    let pathologicals = CorrespondenceSet::from_columns(
        ids("pathological", spec.n_pathological),
        DMatrix::from_columns(&paths),
    )?;
    Ok(Population {
        normals,
        pathologicals,
        truth: GroundTruth {
            mean,
            weights,
            basis,
            sigma: spec.sigma,
            latent_scales: spec.latent_scales.clone(),
            direction,
            displacement,
        },
    })
}

/// Largest principal angle, in radians, between the column spans of two
/// orthonormal `p × d` bases.
///
/// Uses `atan2` of the sine (from the part of `b` outside span(`a`)) and the
/// cosine (from `a^T b`), which stays accurate for both tiny and near-right
/// angles.
pub fn subspace_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows() * a.ncols(),
            found: b.nrows() * b.ncols(),
            id: None,
        });
    }
    if a.ncols() == 0 {
        return Ok(0.0);
    }
    let cross = a.tr_mul(b);
    let cos_min = cross
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
        .min(1.0);
    let outside = b - a * &cross;
    let sin_max = outside
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
        .min(1.0);
    Ok(sin_max.atan2(cos_min.max(0.0)))
}

/// Parameters of a synthetic rater panel.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSpec {
    pub seed: u64,
    pub n_normal: usize,
    pub n_pathological: usize,
    pub raters: usize,
    pub categories: usize,
    /// Mean latent severity of pathological subjects; normals are centered on
    /// zero, both with unit spread.
    pub separation: f64,
    /// Each rater's discrimination is drawn uniformly from this range.
    pub discrimination: (f64, f64),
    /// Standard deviation of each rater's overall threshold shift (leniency).
    pub bias_sd: f64,
    /// Fraction of subjects each rater sees.
    pub coverage: f64,
}

/// Output of [`generate_panel`].
#[derive(Debug, Clone)]
pub struct Panel {
    pub table: RatingsTable,
    /// True latent severity per subject, in `table.subjects()` order.
    pub severity: Vec<f64>,
    pub diagnosis: Vec<bool>,
}

/// Simulates ratings from the graded-response model.
pub fn generate_panel(spec: &PanelSpec) -> Result<Panel> {
    let n = spec.n_normal + spec.n_pathological;
    if n < 3 || spec.raters == 0 || spec.categories < 2 {
        return Err(Error::SpecInvalid(
            "need at least 3 subjects, 1 rater and 2 categories".into(),
        ));
    }
    let (a_lo, a_hi) = spec.discrimination;
    if !(a_lo > 0.0 && a_hi >= a_lo) || !(spec.coverage > 0.0 && spec.coverage <= 1.0) {
        return Err(Error::SpecInvalid(
            "bad discrimination range or coverage".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let diagnosis: Vec<bool> = (0..n).map(|j| j >= spec.n_normal).collect();
    let severity: Vec<f64> = diagnosis
        .iter()
        .map(|&sick| gaussian(&mut rng) + if sick { spec.separation } else { 0.0 })
        .collect();

    // thresholds spread evenly over the range of severities
    let k = spec.categories;
    let lo = -1.0;
    let hi = spec.separation + 1.0;
    let base: Vec<f64> = (1..k)
        .map(|i| lo + (hi - lo) * i as f64 / k as f64)
        .collect();

    let mut rows = Vec::new();
    for r in 0..spec.raters {
        let a = rng.gen_range(a_lo..=a_hi);
        let shift = gaussian(&mut rng) * spec.bias_sd;
        let thresholds: Vec<f64> = base.iter().map(|b| b + shift).collect();
        for (j, &theta) in severity.iter().enumerate() {
            let seen = spec.coverage >= 1.0 || rng.gen::<f64>() < spec.coverage;
            // draw the response even when unseen to keep the stream aligned
            let u: f64 = rng.gen();
            if !seen {
                continue;
            }
            // P(rating >= i + 2) = logistic(a (theta - b_i)), decreasing in i
            let mut category = 1;
            for (i, b) in thresholds.iter().enumerate() {
                let p_at_least = 1.0 / (1.0 + (-a * (theta - b)).exp());
                if u < p_at_least {
                    category = i + 2;
                }
            }
            rows.push((
                format!("subject_{j:03}"),
                format!("rater_{r:02}"),
                category as i64,
            ));
        }
    }
    // subjects appear in index order only if rater 0 saw them all; sort to be sure
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let table = RatingsTable::new(k, rows)?;
    let index: Vec<usize> = table
        .subjects()
        .iter()
        .map(|s| s["subject_".len()..].parse().expect("generated id"))
        .collect();
    Ok(Panel {
        severity: index.iter().map(|&j| severity[j]).collect(),
        diagnosis: index.iter().map(|&j| diagnosis[j]).collect(),
        table,
    })
}
