use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Named trainable tensors in a fixed insertion order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Adds a parameter, replacing the tensor if the name already exists.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> usize {
        let name = name.into();
        if let Some(&i) = self.index.get(&name) {
            self.tensors[i] = tensor;
            return i;
        }
        let i = self.names.len();
        self.index.insert(name.clone(), i);
        self.names.push(name);
        self.tensors.push(tensor);
        i
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        Ok(&self.tensors[self.index_of(name)?])
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        let i = self.index_of(name)?;
        Ok(&mut self.tensors[i])
    }

    pub fn by_index(&self, i: usize) -> &Tensor<T> {
        &self.tensors[i]
    }

    pub fn by_index_mut(&mut self, i: usize) -> &mut Tensor<T> {
        &mut self.tensors[i]
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(self.tensors.iter())
    }

    /// Total number of scalar entries across all tensors.
    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
            index: self.index.clone(),
        }
    }
}

/// Gradient of one parameter. Embedding lookups produce row-sparse entries.
#[derive(Clone, Debug, PartialEq)]
pub enum Grad<T> {
    Zero(Vec<usize>),
    Dense(Tensor<T>),
    Rows {
        shape: Vec<usize>,
        rows: BTreeMap<usize, Vec<T>>,
    },
}

impl<T: Scalar> Grad<T> {
    pub fn shape(&self) -> &[usize] {
        match self {
            Grad::Zero(shape) | Grad::Rows { shape, .. } => shape,
            Grad::Dense(t) => t.shape(),
        }
    }

    pub fn to_dense(&self) -> Tensor<T> {
        match self {
            Grad::Zero(shape) => Tensor::zeros(shape),
            Grad::Dense(t) => t.clone(),
            Grad::Rows { shape, rows } => {
                let mut out = Tensor::zeros(shape);
                let cols = shape[1];
                let data = out.data_mut();
                for (&r, vals) in rows {
                    data[r * cols..(r + 1) * cols].copy_from_slice(vals);
                }
                out
            }
        }
    }

    /// `acc += scale * self`
    pub fn add_scaled_into(&self, acc: &mut [T], scale: T) {
        match self {
            Grad::Zero(_) => {}
            Grad::Dense(t) => {
                for (a, &g) in acc.iter_mut().zip(t.data()) {
                    *a += scale * g;
                }
            }
            Grad::Rows { shape, rows } => {
                let cols = shape[1];
                for (&r, vals) in rows {
                    for (a, &g) in acc[r * cols..(r + 1) * cols].iter_mut().zip(vals) {
                        *a += scale * g;
                    }
                }
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Grad::Zero(_) => true,
            Grad::Dense(t) => t.is_finite(),
            Grad::Rows { rows, .. } => rows.values().flatten().all(|v| v.is_finite()),
        }
    }

    pub fn sum_sq(&self) -> T {
        match self {
            Grad::Zero(_) => T::zero(),
            Grad::Dense(t) => t.data().iter().map(|&v| v * v).sum(),
            Grad::Rows { rows, .. } => rows.values().flatten().map(|&v| v * v).sum(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Grad::Zero(_) => true,
            Grad::Dense(t) => t.data().iter().all(|v| v.is_zero()),
            Grad::Rows { rows, .. } => rows.values().flatten().all(|v| v.is_zero()),
        }
    }
}

/// Gradient map aligned with a [`ParamStore`]: one entry per parameter,
/// zero for parameters the loss does not reach.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    names: Vec<String>,
    grads: Vec<Grad<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(params: &ParamStore<T>) -> Self {
        Self {
            names: params.names().to_vec(),
            grads: params
                .iter()
                .map(|(_, t)| Grad::Zero(t.shape().to_vec()))
                .collect(),
        }
    }

    pub(crate) fn from_parts(names: Vec<String>, grads: Vec<Grad<T>>) -> Self {
        Self { names, grads }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn entry(&self, i: usize) -> &Grad<T> {
        &self.grads[i]
    }

    pub fn set(&mut self, i: usize, grad: Grad<T>) {
        self.grads[i] = grad;
    }

    pub fn get(&self, name: &str) -> Result<Tensor<T>> {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownParam(name.to_string()))?;
        Ok(self.grads[i].to_dense())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Grad<T>)> {
        self.names.iter().map(String::as_str).zip(self.grads.iter())
    }

    pub fn global_norm(&self) -> T {
        self.grads.iter().map(Grad::sum_sq).sum::<T>().sqrt()
    }

    /// First parameter carrying a NaN or infinite gradient entry.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.iter().find(|(_, g)| !g.is_finite()).map(|(n, _)| n)
    }

    pub fn scale(&mut self, factor: T) {
        for g in &mut self.grads {
            match g {
                Grad::Zero(_) => {}
                Grad::Dense(t) => t.data_mut().iter_mut().for_each(|v| *v *= factor),
                Grad::Rows { rows, .. } => rows
                    .values_mut()
                    .flatten()
                    .for_each(|v| *v *= factor),
            }
        }
    }

    /// Ordered mean of per-example gradients. The summation order is the
    /// slice order, so the result does not depend on how the parts were
    /// produced.
    pub fn mean_of(parts: &[Gradients<T>], params: &ParamStore<T>) -> Self {
        let mut acc: Vec<Option<Vec<T>>> = vec![None; params.len()];
        let scale = T::one() / T::of(parts.len().max(1) as f64);
        for part in parts {
            for (i, g) in part.grads.iter().enumerate() {
                if matches!(g, Grad::Zero(_)) {
                    continue;
                }
                let buf = acc[i].get_or_insert_with(|| vec![T::zero(); params.by_index(i).len()]);
                g.add_scaled_into(buf, T::one());
            }
        }
        let grads = acc
            .into_iter()
            .enumerate()
            .map(|(i, buf)| {
                let shape = params.by_index(i).shape().to_vec();
                match buf {
                    None => Grad::Zero(shape),
                    Some(mut data) => {
                        data.iter_mut().for_each(|v| *v *= scale);
                        Grad::Dense(Tensor::new(shape, data).expect("accumulator matches param shape"))
                    }
                }
            })
            .collect();
        Self {
            names: params.names().to_vec(),
            grads,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_densify_into_place() {
        let mut rows = BTreeMap::new();
        rows.insert(1usize, vec![2.0, 3.0]);
        let g = Grad::<f64>::Rows {
            shape: vec![3, 2],
            rows,
        };
        assert_eq!(g.to_dense().data(), &[0.0, 0.0, 2.0, 3.0, 0.0, 0.0]);
        assert_eq!(g.sum_sq(), 13.0);
    }

    #[test]
    fn mean_is_ordered_average() {
        let mut p = ParamStore::<f64>::new();
        p.insert("a", Tensor::zeros(&[2]));
        p.insert("b", Tensor::zeros(&[1]));
        let mut g1 = Gradients::zeros_like(&p);
        g1.set(0, Grad::Dense(Tensor::vector(vec![1.0, 2.0])));
        let mut g2 = Gradients::zeros_like(&p);
        g2.set(0, Grad::Dense(Tensor::vector(vec![3.0, 4.0])));
        let m = Gradients::mean_of(&[g1, g2], &p);
        assert_eq!(m.get("a").unwrap().data(), &[2.0, 3.0]);
        assert!(m.entry(1).is_zero());
    }
}
