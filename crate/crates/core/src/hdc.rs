//! MAP (multiply-add-permute) hypervector algebra over bipolar vectors.
//!
//! Elements are stored as `f64` so bipolar symbols and learned real-valued
//! node states share one representation.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Index};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypervector(Vec<f64>);

impl Hypervector {
    pub fn from_vec(v: Vec<f64>) -> Self {
        Hypervector(v)
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Hypervector(v.to_vec())
    }

    /// Additive identity; also the "no response" sentinel.
    pub fn zeros(d: usize) -> Self {
        Hypervector(vec![0.0; d])
    }

    /// Multiplicative identity under binding.
    pub fn ones(d: usize) -> Self {
        Hypervector(vec![1.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    pub fn is_bipolar(&self) -> bool {
        self.0.iter().all(|&x| x == 1.0 || x == -1.0)
    }
}

impl Index<usize> for Hypervector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &Hypervector {
    type Output = Hypervector;
    fn add(self, rhs: &Hypervector) -> Hypervector {
        assert_eq!(self.dim(), rhs.dim(), "dimension mismatch in addition");
        Hypervector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

pub fn random_bipolar<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Hypervector> {
    if d == 0 {
        return Err(Error::InvalidDimension(d));
    }
    Ok(Hypervector(
        (0..d)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect(),
    ))
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Cosine similarity on raw slices. A zero-norm operand yields 0.
pub fn cosine(x: &[f64], y: &[f64]) -> f64 {
    let nx = dot(x, x);
    let ny = dot(y, y);
    if nx == 0.0 || ny == 0.0 {
        return 0.0;
    }
    dot(x, y) / (nx.sqrt() * ny.sqrt())
}

pub fn cosine_similarity(x: &Hypervector, y: &Hypervector) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch(x.dim(), y.dim()));
    }
    Ok(cosine(&x.0, &y.0))
}

/// Elementwise sign with `sign(0) = 0`.
pub fn sign(x: &Hypervector) -> Hypervector {
    Hypervector(x.0.iter().map(|&v| sgn(v)).collect())
}

pub(crate) fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Signed superposition. An even number of inputs gets one extra random
/// bipolar vector drawn from `rng` so that ties cannot occur.
pub fn bundle<R: Rng + ?Sized>(vs: &[Hypervector], rng: &mut R) -> Result<Hypervector> {
    let first = vs.first().ok_or(Error::EmptyBundle)?;
    let d = first.dim();
    let mut acc = vec![0.0; d];
    for v in vs {
        if v.dim() != d {
            return Err(Error::DimensionMismatch(d, v.dim()));
        }
        for (a, x) in acc.iter_mut().zip(&v.0) {
            *a += x;
        }
    }
    if vs.len().is_multiple_of(2) {
        let eta = random_bipolar(d, rng)?;
        for (a, x) in acc.iter_mut().zip(&eta.0) {
            *a += x;
        }
    }
    Ok(Hypervector(acc.into_iter().map(sgn).collect()))
}

pub fn bind(x: &Hypervector, y: &Hypervector) -> Result<Hypervector> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch(x.dim(), y.dim()));
    }
    Ok(Hypervector(x.0.iter().zip(&y.0).map(|(a, b)| a * b).collect()))
}

/// Circular shift by `k` positions (element `i` moves to `i + k`).
/// Negative shifts go the other way and amounts wrap modulo `d`.
pub fn permute(x: &Hypervector, k: i64) -> Hypervector {
    let d = x.dim();
    if d == 0 {
        return x.clone();
    }
    let k = k.rem_euclid(d as i64) as usize;
    let mut out = x.0.clone();
    out.rotate_right(k);
    Hypervector(out)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Dictionary {
    entries: Vec<(String, Hypervector)>,
}

impl Dictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, label: impl Into<String>, v: Hypervector) -> Result<()> {
        let label = label.into();
        if self.entries.iter().any(|(l, _)| *l == label) {
            return Err(Error::DuplicateLabel(label));
        }
        if let Some((_, first)) = self.entries.first() {
            if first.dim() != v.dim() {
                return Err(Error::DimensionMismatch(first.dim(), v.dim()));
            }
        }
        self.entries.push((label, v));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, Hypervector)] {
        &self.entries
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recovered<'a> {
    pub index: usize,
    pub label: &'a str,
    pub vector: &'a Hypervector,
    pub similarity: f64,
}

/// Best dictionary match if its similarity reaches `theta`. Ties go to the
/// earliest entry.
pub fn recover<'a>(query: &Hypervector, dict: &'a Dictionary, theta: f64) -> Option<Recovered<'a>> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (_, v)) in dict.entries.iter().enumerate() {
        let s = cosine(&query.0, &v.0);
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    let (index, similarity) = best?;
    if similarity < theta {
        return None;
    }
    let (label, vector) = &dict.entries[index];
    Some(Recovered { index, label, vector, similarity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sign_keeps_zero() {
        let x = Hypervector::from_vec(vec![2.0, -0.5, 0.0]);
        assert_eq!(sign(&x).as_slice(), &[1.0, -1.0, 0.0]);
    }

    #[test]
    fn zero_norm_similarity_is_zero() {
        let z = Hypervector::zeros(4);
        let x = Hypervector::ones(4);
        assert_eq!(cosine_similarity(&z, &x).unwrap(), 0.0);
    }

    #[test]
    fn permute_direction_matches_roll() {
        let x = Hypervector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(permute(&x, 1).as_slice(), &[4.0, 1.0, 2.0, 3.0]);
        assert_eq!(permute(&x, -1).as_slice(), &[2.0, 3.0, 4.0, 1.0]);
        assert_eq!(permute(&x, 9).as_slice(), permute(&x, 1).as_slice());
    }

    #[test]
    fn single_bundle_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_bipolar(64, &mut rng).unwrap();
        assert_eq!(bundle(std::slice::from_ref(&x), &mut rng).unwrap(), x);
    }

    #[test]
    fn errors_on_bad_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(random_bipolar(0, &mut rng).is_err());
        assert!(bundle(&[], &mut rng).is_err());
        assert!(bind(&Hypervector::ones(3), &Hypervector::ones(4)).is_err());
        let mut d = Dictionary::new();
        d.insert("a", Hypervector::ones(3)).unwrap();
        assert!(d.insert("a", Hypervector::ones(3)).is_err());
        assert!(recover(&Hypervector::ones(3), &Dictionary::new(), 0.0).is_none());
    }
}
