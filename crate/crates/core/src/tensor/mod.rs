//! Dense N-dimensional tensors with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is a flat row-major `f64` buffer plus shape metadata and an
//! optional gradient slot. Image tensors use NCHW order. Operations record
//! [`tape::GraphNode`]s onto an active [`tape::Tape`]; [`tape::Tape::backward`]
//! replays the tape in reverse and accumulates gradients additively into every
//! reachable tensor that requires them.
//!
//! Tensors are immutable once produced by an operation. The two sanctioned
//! exceptions are the gradient slot and in-place parameter updates performed
//! by the optimizer between passes. Handles are reference-counted and confined
//! to one thread; concurrent inference uses per-thread deep clones.

mod gradcheck;
pub mod ops;
mod tape;

pub use gradcheck::{check_gradients, check_gradients_sampled, GradCheckReport, FD_ATOL};
pub use tape::{gradient_map, GraphNode, Tape};

use std::cell::{Cell, Ref, RefCell, RefMut};
use std::rc::Rc;

use rand::Rng;

use crate::error::{Error, Result};

struct Inner {
    shape: Vec<usize>,
    data: RefCell<Vec<f64>>,
    requires_grad: Cell<bool>,
    grad: RefCell<Option<Vec<f64>>>,
}

/// Shared handle to an N-dimensional `f64` array. Cloning is cheap and
/// aliases the same storage.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

impl Tensor {
    /// Builds a tensor from a flat row-major buffer. Fails unless
    /// `product(shape) == data.len()`.
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {:?} implies {} elements, got {}", shape, numel, data.len()),
            ));
        }
        Ok(Tensor {
            inner: Rc::new(Inner {
                shape: shape.to_vec(),
                data: RefCell::new(data),
                requires_grad: Cell::new(false),
                grad: RefCell::new(None),
            }),
        })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let numel: usize = shape.iter().product();
        Tensor::new(shape, vec![0.0; numel]).expect("zeros: consistent by construction")
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let numel: usize = shape.iter().product();
        Tensor::new(shape, vec![value; numel]).expect("full: consistent by construction")
    }

    /// Rank-0 scalar.
    pub fn scalar(value: f64) -> Self {
        Tensor::new(&[], vec![value]).expect("scalar")
    }

    /// Uniform samples in `[lo, hi)`, quantized to `f32` so that freshly
    /// initialized weights survive the 32-bit weight file format bit-exactly.
    pub fn uniform<R: Rng>(shape: &[usize], lo: f64, hi: f64, rng: &mut R) -> Self {
        let numel: usize = shape.iter().product();
        let data: Vec<f64> = (0..numel).map(|_| (rng.gen_range(lo..hi) as f32) as f64).collect();
        Tensor::new(shape, data).expect("uniform: consistent by construction")
    }

    /// Marks this tensor as a differentiation leaf.
    pub fn requires_grad(self) -> Self {
        self.inner.requires_grad.set(true);
        self
    }

    pub fn set_requires_grad(&self, v: bool) {
        self.inner.requires_grad.set(v);
    }

    pub fn requires_grad_flag(&self) -> bool {
        self.inner.requires_grad.get()
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    /// Borrow the flat data buffer.
    pub fn data(&self) -> Ref<'_, [f64]> {
        Ref::map(self.inner.data.borrow(), |v| v.as_slice())
    }

    /// Mutable access to the flat buffer. Reserved for leaf updates
    /// (optimizer steps, weight loading); recorded intermediates must never
    /// be mutated.
    pub fn data_mut(&self) -> RefMut<'_, [f64]> {
        RefMut::map(self.inner.data.borrow_mut(), |v| v.as_mut_slice())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.data.borrow().clone()
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> f64 {
        debug_assert_eq!(self.numel(), 1, "item() on non-scalar");
        self.inner.data.borrow()[0]
    }

    /// Stable identity of the underlying storage.
    pub fn id(&self) -> usize {
        Rc::as_ptr(&self.inner) as usize
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Adds `delta` into the gradient slot (allocating it on first use).
    /// Accumulation is additive across fan-out.
    pub fn accumulate_grad(&self, delta: &[f64]) {
        debug_assert_eq!(delta.len(), self.numel(), "gradient length mismatch");
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(g) => {
                for (gi, di) in g.iter_mut().zip(delta) {
                    *gi += di;
                }
            }
            None => *slot = Some(delta.to_vec()),
        }
    }

    /// Deep copy: fresh storage, no recorded history, grad slot cleared.
    pub fn detached_clone(&self) -> Tensor {
        Tensor::new(&self.inner.shape, self.to_vec()).expect("detached_clone")
    }

    /// Interprets the tensor as NCHW, failing on other ranks.
    pub fn dims4(&self, op: &'static str) -> Result<(usize, usize, usize, usize)> {
        match self.inner.shape.as_slice() {
            &[n, c, h, w] => Ok((n, c, h, w)),
            s => Err(Error::shape(op, format!("expected a rank-4 NCHW tensor, got shape {:?}", s))),
        }
    }

    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match self.inner.shape.as_slice() {
            &[n, k] => Ok((n, k)),
            s => Err(Error::shape(op, format!("expected a rank-2 tensor, got shape {:?}", s))),
        }
    }

    /// True if every element is finite.
    pub fn all_finite(&self) -> bool {
        self.inner.data.borrow().iter().all(|v| v.is_finite())
    }
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad.get())
            .field("numel", &self.numel())
            .finish()
    }
}

/// A named, optionally trainable leaf tensor.
#[derive(Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub trainable: bool,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        Parameter { name: name.into(), value: value.requires_grad(), trainable: true }
    }

    /// Non-trainable state that still serializes with the model
    /// (batch-norm running statistics).
    pub fn frozen(name: impl Into<String>, value: Tensor) -> Self {
        Parameter { name: name.into(), value, trainable: false }
    }

    pub fn numel(&self) -> usize {
        self.value.numel()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_data_length_invariant() {
        assert!(Tensor::new(&[2, 3], vec![0.0; 6]).is_ok());
        assert!(Tensor::new(&[2, 3], vec![0.0; 5]).is_err());
        // rank-0 scalar holds one element
        assert_eq!(Tensor::scalar(4.0).numel(), 1);
    }

    #[test]
    fn grad_accumulation_is_additive() {
        let t = Tensor::zeros(&[3]).requires_grad();
        t.accumulate_grad(&[1.0, 2.0, 3.0]);
        t.accumulate_grad(&[1.0, 1.0, 1.0]);
        assert_eq!(t.grad().unwrap(), vec![2.0, 3.0, 4.0]);
        t.zero_grad();
        assert!(t.grad().is_none());
    }

    #[test]
    fn uniform_respects_bounds_and_f32_grid() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let t = Tensor::uniform(&[1000], -0.5, 0.5, &mut rng);
        for &v in t.data().iter() {
            assert!((-0.5..0.5).contains(&v));
            assert_eq!(v, (v as f32) as f64);
        }
    }
}
