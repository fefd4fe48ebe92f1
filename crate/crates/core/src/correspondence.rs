//! Populations of corresponded shapes.
//!
//! A shape is a cloud of `m` ordered particles; particle `k` sits at the same
//! anatomical location on every shape of a population. Flattening the
//! `(x, y, z)` triples gives one vector of length `p = 3m` per shape, and a
//! population of `n` shapes is the `p × n` matrix whose columns are those
//! vectors.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};

/// `n` shapes × `p` flattened coordinates, with a unique id per shape.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet {
    ids: Vec<String>,
    // p × n, one column per shape.
    data: DMatrix<f64>,
}

impl CorrespondenceSet {
    /// Builds a set from flattened coordinate vectors `[x0, y0, z0, x1, ...]`.
    pub fn new(ids: Vec<String>, shapes: Vec<Vec<f64>>) -> Result<Self> {
        if ids.len() != shapes.len() {
            return Err(Error::LengthMismatch(ids.len(), shapes.len()));
        }
        if shapes.is_empty() {
            return Err(Error::TooFewShapes { n: 0, min: 1 });
        }
        let p = shapes[0].len();
        if p == 0 || !p.is_multiple_of(3) {
            return Err(Error::NotTriples(p));
        }
        for (id, shape) in ids.iter().zip(&shapes) {
            if shape.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: shape.len(),
                    id: Some(id.clone()),
                });
            }
            if shape.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("shape `{id}`")));
            }
        }
        check_unique(&ids)?;
        let n = shapes.len();
        let data = DMatrix::from_iterator(p, n, shapes.into_iter().flatten());
        Ok(CorrespondenceSet { ids, data })
    }

    /// Builds a set from per-shape particle lists.
    pub fn from_particles(ids: Vec<String>, shapes: Vec<Vec<[f64; 3]>>) -> Result<Self> {
        let flat = shapes
            .into_iter()
            .map(|pts| pts.into_iter().flatten().collect())
            .collect();
        Self::new(ids, flat)
    }

    /// Builds a set from a `p × n` matrix whose columns are shapes.
    pub fn from_columns(ids: Vec<String>, data: DMatrix<f64>) -> Result<Self> {
        if ids.len() != data.ncols() {
            return Err(Error::LengthMismatch(ids.len(), data.ncols()));
        }
        if data.ncols() == 0 {
            return Err(Error::TooFewShapes { n: 0, min: 1 });
        }
        if data.nrows() == 0 || !data.nrows().is_multiple_of(3) {
            return Err(Error::NotTriples(data.nrows()));
        }
        if let Some(j) = data
            .column_iter()
            .position(|c| c.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite(format!("shape `{}`", ids[j])));
        }
        check_unique(&ids)?;
        Ok(CorrespondenceSet { ids, data })
    }

    /// Number of shapes.
    pub fn n(&self) -> usize {
        self.data.ncols()
    }

    /// Particles per shape.
    pub fn m(&self) -> usize {
        self.data.nrows() / 3
    }

    /// Coordinates per shape, `3 * m`.
    pub fn p(&self) -> usize {
        self.data.nrows()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// The `p × n` population matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Flattened coordinates of shape `i`.
    pub fn shape(&self, i: usize) -> DVectorView<'_, f64> {
        self.data.column(i)
    }

    pub fn shape_owned(&self, i: usize) -> DVector<f64> {
        self.data.column(i).into_owned()
    }

    /// Shape `i` as particle triples.
    pub fn particles(&self, i: usize) -> Vec<[f64; 3]> {
        to_triples(self.data.column(i).as_slice())
    }

    /// The shapes at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let ids = indices.iter().map(|&i| self.ids[i].clone()).collect();
        let data = self.data.select_columns(indices);
        Self::from_columns(ids, data)
    }

    /// Translates every shape so its particle centroid is at the origin.
    pub fn centered_shapes(&self) -> Self {
        let mut data = self.data.clone();
        for mut col in data.column_iter_mut() {
            remove_centroid(col.as_mut_slice());
        }
        CorrespondenceSet {
            ids: self.ids.clone(),
            data,
        }
    }
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

/// Regroups a flattened coordinate vector into `(x, y, z)` triples.
pub fn to_triples(flat: &[f64]) -> Vec<[f64; 3]> {
    flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

/// Subtracts the particle centroid from a flattened coordinate vector in place.
pub fn remove_centroid(flat: &mut [f64]) {
    let m = (flat.len() / 3) as f64;
    let mut centroid = [0.0; 3];
    for c in flat.chunks_exact(3) {
        for a in 0..3 {
            centroid[a] += c[a];
        }
    }
    for a in &mut centroid {
        *a /= m;
    }
    for c in flat.chunks_exact_mut(3) {
        for a in 0..3 {
            c[a] -= centroid[a];
        }
    }
}
