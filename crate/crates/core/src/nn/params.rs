use rand::Rng;

use super::tape::{Graph, Matrix, Var};
use crate::error::{ArenaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named parameter blocks of one network.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    names: Vec<String>,
    values: Vec<Matrix>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> ParamId {
        let name = name.into();
        assert!(!self.names.contains(&name), "duplicate parameter block {name}");
        self.names.push(name);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    /// Adds a block drawn uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn add_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        shape: (usize, usize),
        fan_in: usize,
        rng: &mut R,
    ) -> ParamId {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let value = Matrix::from_shape_simple_fn(shape, || rng.random_range(-bound..=bound));
        self.add(name, value)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Matrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Matrix] {
        &mut self.values
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.names == other.names && self.values.iter().zip(&other.values).all(|(a, b)| a.dim() == b.dim())
    }

    pub fn check_layout(&self, other: &ParamSet) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(ArenaError::Dimension("parameter sets have different layouts".into()))
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self { names: self.names.clone(), values: self.values.iter().map(|v| Matrix::zeros(v.dim())).collect() }
    }

    /// Puts every block on `graph` as a leaf.
    pub fn bind(&self, graph: &mut Graph) -> Bound {
        Bound(self.values.iter().map(|v| graph.leaf(v.clone())).collect())
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &ParamSet) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn l2_distance(&self, other: &ParamSet) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)))
            .sum::<f64>()
            .sqrt()
    }
}

/// Graph leaves of a [`ParamSet`], indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Bound(Vec<Var>);

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    /// Gradient for every block, shaped like the set.
    pub fn grads(&self, graph: &Graph) -> Result<Grads> {
        Ok(Grads(self.0.iter().map(|v| graph.grad(*v)).collect::<Result<_>>()?))
    }
}

/// Gradient collection mirroring a [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub Vec<Matrix>);

impl Grads {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Self(params.values.iter().map(|v| Matrix::zeros(v.dim())).collect())
    }

    pub fn get(&self, id: ParamId) -> &Matrix {
        &self.0[id.0]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.iter().all(|x| x.is_finite()))
    }
}
