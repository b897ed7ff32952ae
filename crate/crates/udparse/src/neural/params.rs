use std::collections::HashMap;

use rand::Rng;

use super::{NeuralError, Tensor};

pub type ParamId = usize;

/// A named, trainable (or frozen) tensor with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    /// Frozen parameters still receive gradients from `backward`, but the
    /// optimizer never applies them.
    pub trainable: bool,
}

/// The parameter store for a model. Parameters keep the order in which they
/// were registered, which makes serialization and optimizer state
/// deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    params: Vec<Parameter>,
    by_name: HashMap<String, ParamId>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter. Panics on duplicate names: model construction
    /// is static, so a collision is a programming error.
    pub fn add(&mut self, name: &str, value: Tensor, trainable: bool) -> ParamId {
        self.try_add(name, value, trainable).unwrap()
    }

    pub fn try_add(
        &mut self,
        name: &str,
        value: Tensor,
        trainable: bool,
    ) -> Result<ParamId, NeuralError> {
        if self.by_name.contains_key(name) {
            return Err(NeuralError::DuplicateParam { name: name.to_string() });
        }
        let id = self.params.len();
        let grad = Tensor::zeros(&value.shape);
        self.params.push(Parameter { name: name.to_string(), value, grad, trainable });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    /// Glorot-initialized `rows x cols` weight matrix.
    pub fn add_glorot(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        rng: &mut impl Rng,
    ) -> ParamId {
        self.add(name, glorot(rows, cols, rng), true)
    }

    /// Zero-initialized vector (used for biases and for all special token
    /// vectors whose values are purely learned).
    pub fn add_zero_vector(&mut self, name: &str, dim: usize) -> ParamId {
        self.add(name, Tensor::zeros(&[dim]), true)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter> {
        self.id_of(name).map(|id| self.get(id))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar values across all parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data.iter_mut().for_each(|g| *g = 0.0);
        }
    }
}

/// Glorot (Xavier) uniform initialization: entries drawn uniformly from
/// `±sqrt(6 / (fan_in + fan_out))` with `fan_out = rows`, `fan_in = cols`.
pub fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::matrix(rows, cols, data)
}
