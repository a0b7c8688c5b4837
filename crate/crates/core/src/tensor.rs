//! Dense row-major tensors with runtime shape.

use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    strides: Vec<usize>,
    data: Vec<T>,
}

fn strides_for(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * shape[k + 1];
    }
    strides
}

impl<T: Clone + Default> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            strides: strides_for(shape),
            data: vec![T::default(); len],
        }
    }
}

impl<T> Tensor<T> {
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::shape(format!(
                "tensor of shape {:?} needs {} entries, got {}",
                shape,
                len,
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            strides: strides_for(shape),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    #[inline]
    pub fn get(&self, idx: &[usize]) -> &T {
        &self.data[self.offset(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: &[usize], value: T) {
        let o = self.offset(idx);
        self.data[o] = value;
    }

    /// Contiguous block of all entries whose leading indices equal `prefix`.
    pub fn block(&self, prefix: &[usize]) -> &[T] {
        let k = prefix.len();
        let start: usize = prefix.iter().zip(&self.strides).map(|(i, s)| i * s).sum();
        let len = if k == 0 { self.data.len() } else { self.strides[k - 1] };
        &self.data[start..start + len]
    }

    pub fn block_mut(&mut self, prefix: &[usize]) -> &mut [T] {
        let k = prefix.len();
        let start: usize = prefix.iter().zip(&self.strides).map(|(i, s)| i * s).sum();
        let len = if k == 0 { self.data.len() } else { self.strides[k - 1] };
        &mut self.data[start..start + len]
    }

    /// Multi-index of a flat position.
    pub fn unravel(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for (k, s) in self.strides.iter().enumerate() {
            idx[k] = flat / s;
            flat %= s;
        }
        idx
    }
}

/// Iterates over every multi-index of `shape` in row-major order.
pub fn for_each_index(shape: &[usize], mut f: impl FnMut(&[usize])) {
    if shape.iter().any(|&n| n == 0) {
        return;
    }
    let mut idx = vec![0usize; shape.len()];
    loop {
        f(&idx);
        let mut k = shape.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn infer_shape(value: &Value, path: &str, rank: usize) -> Result<Vec<usize>> {
    let mut shape = Vec::with_capacity(rank);
    let mut cur = value;
    for depth in 0..rank {
        match cur {
            Value::Array(items) => {
                shape.push(items.len());
                match items.first() {
                    Some(first) => cur = first,
                    None => {
                        shape.extend(std::iter::repeat_n(0, rank - depth - 1));
                        return Ok(shape);
                    }
                }
            }
            _ => {
                return Err(Error::parse(
                    path,
                    format!("expected nested array of depth {rank}, found depth {depth}"),
                ))
            }
        }
    }
    Ok(shape)
}

fn flatten_into<T>(
    value: &Value,
    path: &mut String,
    shape: &[usize],
    leaf: &dyn Fn(&Value) -> Option<T>,
    out: &mut Vec<T>,
) -> Result<()> {
    if shape.is_empty() {
        return match leaf(value) {
            Some(v) => {
                out.push(v);
                Ok(())
            }
            None => Err(Error::parse(path.clone(), format!("invalid entry {value}"))),
        };
    }
    let items = value
        .as_array()
        .ok_or_else(|| Error::parse(path.clone(), "expected an array"))?;
    if items.len() != shape[0] {
        return Err(Error::parse(
            path.clone(),
            format!("ragged array: expected length {}, found {}", shape[0], items.len()),
        ));
    }
    for (i, item) in items.iter().enumerate() {
        let len = path.len();
        path.push_str(&format!("[{i}]"));
        flatten_into(item, path, &shape[1..], leaf, out)?;
        path.truncate(len);
    }
    Ok(())
}

/// Parses a rectangular nested JSON array of numbers.
pub fn f64_tensor_from_json(value: &Value, path: &str, rank: usize) -> Result<Tensor<f64>> {
    let shape = infer_shape(value, path, rank)?;
    let mut out = Vec::with_capacity(shape.iter().product());
    let mut p = path.to_string();
    flatten_into(value, &mut p, &shape, &|v| v.as_f64().filter(|x| x.is_finite()), &mut out)?;
    Tensor::from_vec(&shape, out)
}

/// Parses a rectangular nested JSON array of non-negative integers.
pub fn index_tensor_from_json(value: &Value, path: &str, rank: usize) -> Result<Tensor<usize>> {
    let shape = infer_shape(value, path, rank)?;
    let mut out = Vec::with_capacity(shape.iter().product());
    let mut p = path.to_string();
    flatten_into(value, &mut p, &shape, &|v| v.as_u64().map(|x| x as usize), &mut out)?;
    Tensor::from_vec(&shape, out)
}

pub fn tensor_to_json<T: Clone + Into<Value>>(t: &Tensor<T>) -> Value {
    fn rec<T: Clone + Into<Value>>(data: &[T], shape: &[usize]) -> Value {
        if shape.is_empty() {
            return data[0].clone().into();
        }
        let stride = shape[1..].iter().product::<usize>();
        Value::Array(
            (0..shape[0])
                .map(|i| rec(&data[i * stride..(i + 1) * stride], &shape[1..]))
                .collect(),
        )
    }
    if t.shape.iter().any(|&n| n == 0) {
        return Value::Array(vec![]);
    }
    rec(&t.data, &t.shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_is_contiguous_suffix() {
        let t = Tensor::from_vec(&[2, 3], (0..6).map(|i| i as f64).collect()).unwrap();
        assert_eq!(t.block(&[1]), &[3.0, 4.0, 5.0]);
        assert_eq!(*t.get(&[1, 2]), 5.0);
        assert_eq!(t.unravel(4), vec![1, 1]);
    }

    #[test]
    fn json_round_trip_and_ragged_rejection() {
        let v: Value = serde_json::from_str("[[1,2],[3,4]]").unwrap();
        let t = f64_tensor_from_json(&v, "x", 2).unwrap();
        assert_eq!(t.shape(), &[2, 2]);
        assert_eq!(tensor_to_json(&t), serde_json::json!([[1.0, 2.0], [3.0, 4.0]]));

        let bad: Value = serde_json::from_str("[[1,2],[3]]").unwrap();
        let err = f64_tensor_from_json(&bad, "cost", 2).unwrap_err().to_string();
        assert!(err.contains("cost[1]"), "{err}");
    }

    #[test]
    fn index_iteration_covers_all() {
        let mut n = 0;
        for_each_index(&[2, 3, 2], |_| n += 1);
        assert_eq!(n, 12);
    }
}
