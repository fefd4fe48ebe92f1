//! Brute-force reference implementations for tests.
//!
//! Everything here works on plain row-major `Vec<f64>` matrices and never
//! calls into nalgebra, so agreement with the library is evidence rather
//! than tautology. Speed is irrelevant; p stays small.
#![allow(dead_code)]

/// Dense square matrix, row-major.
#[derive(Debug, Clone)]
pub struct Dense {
    pub n: usize,
    pub a: Vec<f64>,
}

impl Dense {
    pub fn zeros(n: usize) -> Self {
        Dense {
            n,
            a: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = 1.0;
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues in descending order and the matching unit eigenvectors.
pub fn jacobi_eigen(m: &Dense) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.n;
    let mut a = m.clone();
    let mut v = Dense::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum();
        let scale: f64 = a.a.iter().map(|x| x * x).sum();
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| (a.get(j, j), (0..n).map(|i| v.get(i, j)).collect()))
        .collect();
    pairs.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap());
    pairs.into_iter().unzip()
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(m: &Dense) -> Dense {
    let n = m.n;
    let mut a = m.clone();
    let mut inv = Dense::identity(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a.get(i, col)
                    .abs()
                    .partial_cmp(&a.get(j, col).abs())
                    .unwrap()
            })
            .unwrap();
        for k in 0..n {
            a.a.swap(col * n + k, pivot * n + k);
            inv.a.swap(col * n + k, pivot * n + k);
        }
        let d = a.get(col, col);
        assert!(d != 0.0, "singular matrix");
        for k in 0..n {
            a.set(col, k, a.get(col, k) / d);
            inv.set(col, k, inv.get(col, k) / d);
        }
        for r in 0..n {
            if r != col {
                let f = a.get(r, col);
                for k in 0..n {
                    a.set(r, k, a.get(r, k) - f * a.get(col, k));
                    inv.set(r, k, inv.get(r, k) - f * inv.get(col, k));
                }
            }
        }
    }
    inv
}

/// `V diag(f(e)) V^T` for a symmetric matrix with eigenpairs `(e, V)`.
pub fn spectral_fn(m: &Dense, f: impl Fn(f64) -> f64) -> Dense {
    let (vals, vecs) = jacobi_eigen(m);
    let mut out = Dense::zeros(m.n);
    for (l, v) in vals.iter().zip(&vecs) {
        let fl = f(*l);
        for i in 0..m.n {
            for j in 0..m.n {
                out.a[i * m.n + j] += fl * v[i] * v[j];
            }
        }
    }
    out
}

/// Mean and `1/(n-1)` sample covariance of shapes given as rows.
pub fn covariance(shapes: &[Vec<f64>]) -> (Vec<f64>, Dense) {
    let n = shapes.len();
    let p = shapes[0].len();
    let mean: Vec<f64> = (0..p)
        .map(|j| shapes.iter().map(|s| s[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = Dense::zeros(p);
    for s in shapes {
        for i in 0..p {
            for j in 0..p {
                cov.a[i * p + j] += (s[i] - mean[i]) * (s[j] - mean[j]);
            }
        }
    }
    for x in &mut cov.a {
        *x /= (n - 1) as f64;
    }
    (mean, cov)
}

/// The model fitted the slow way: full `p × p` covariance, Jacobi.
#[derive(Debug, Clone)]
pub struct DenseModel {
    pub p: usize,
    pub mean: Vec<f64>,
    /// All `p` covariance eigenvalues, descending.
    pub all_values: Vec<f64>,
    pub all_vectors: Vec<Vec<f64>>,
    pub d: usize,
    pub sigma2: f64,
}

pub fn dense_fit(shapes: &[Vec<f64>], d: usize) -> DenseModel {
    let n = shapes.len();
    let (mean, cov) = covariance(shapes);
    let (values, vectors) = jacobi_eigen(&cov);
    let tail: f64 = values[d..].iter().map(|v| v.max(0.0)).sum();
    let sigma2 = (tail / (n - 1 - d) as f64).max(1e-12 * values[0]);
    DenseModel {
        p: mean.len(),
        mean,
        all_values: values,
        all_vectors: vectors,
        d,
        sigma2,
    }
}

impl DenseModel {
    /// `W W^T + sigma2 I` with `W = U_d (Lambda_d - sigma2 I)^{1/2}`.
    pub fn covariance(&self) -> Dense {
        let mut c = Dense::identity(self.p);
        for x in &mut c.a {
            *x *= self.sigma2;
        }
        for k in 0..self.d {
            let w = (self.all_values[k] - self.sigma2).max(0.0);
            let u = &self.all_vectors[k];
            for i in 0..self.p {
                for j in 0..self.p {
                    c.a[i * self.p + j] += w * u[i] * u[j];
                }
            }
        }
        c
    }

    pub fn deviation(&self, c: &[f64]) -> Vec<f64> {
        c.iter().zip(&self.mean).map(|(a, b)| a - b).collect()
    }

    /// `sqrt(y^T C^{-1} y)` with `C` inverted by Gauss-Jordan.
    pub fn full(&self, c: &[f64]) -> f64 {
        let y = self.deviation(c);
        inverse(&self.covariance()).quad(&y).sqrt()
    }

    /// `sqrt(y^T U Lambda^{-1} U^T y)` via an explicit `p × p` matrix.
    pub fn latent_exact(&self, c: &[f64]) -> f64 {
        let y = self.deviation(c);
        let mut m = Dense::zeros(self.p);
        for k in 0..self.d {
            let u = &self.all_vectors[k];
            for i in 0..self.p {
                for j in 0..self.p {
                    m.a[i * self.p + j] += u[i] * u[j] / self.all_values[k];
                }
            }
        }
        m.quad(&y).sqrt()
    }

    /// `sqrt(y^T (I - U U^T) y) / sigma` via an explicit projector.
    pub fn null(&self, c: &[f64]) -> f64 {
        let y = self.deviation(c);
        let mut proj = Dense::identity(self.p);
        for k in 0..self.d {
            let u = &self.all_vectors[k];
            for i in 0..self.p {
                for j in 0..self.p {
                    proj.a[i * self.p + j] -= u[i] * u[j];
                }
            }
        }
        (proj.quad(&y) / self.sigma2).sqrt()
    }

    /// `C^{-1/2} y` through a symmetric square root of `C`.
    pub fn whiten(&self, c: &[f64]) -> Vec<f64> {
        let y = self.deviation(c);
        spectral_fn(&self.covariance(), |l| 1.0 / l.sqrt()).mul_vec(&y)
    }
}

/// Fraction of (positive, negative) pairs where the positive scores higher,
/// ties counting one half.
pub fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Angle between two unit vectors' lines, accurate near zero.
pub fn line_angle(a: &[f64], b: &[f64]) -> f64 {
    let c = dot(a, b);
    let perp: Vec<f64> = b.iter().zip(a).map(|(bi, ai)| bi - c * ai).collect();
    norm(&perp).atan2(c.abs())
}

/// `|a - b| <= tol * max(|a|, |b|, floor)`.
pub fn close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}

/// [`DenseModel::whiten`] regrouped per particle.
pub fn dense_whiten_triples(model: &DenseModel, c: &[f64]) -> Vec<[f64; 3]> {
    model
        .whiten(c)
        .chunks(3)
        .map(|t| [t[0], t[1], t[2]])
        .collect()
}
