//! The recording tape: a Wengert list of [`GraphNode`]s appended during the
//! forward pass and replayed in reverse by [`Tape::backward`].
//!
//! One tape lives for one forward/backward pass; `backward` drains it. A tape
//! built with [`Tape::inference`] never records, so forward passes over frozen
//! weights carry no bookkeeping cost.

use std::cell::{Cell, RefCell};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hash::Fnv64;

use super::{Parameter, Tensor};

/// Backward rule: receives the output gradient and a per-input "needs
/// gradient" mask, returns one optional gradient buffer per input slot.
pub type BackwardFn = Box<dyn Fn(&[f64], &[bool]) -> Vec<Option<Vec<f64>>>>;

/// One recorded operation. Inputs are held as cheap shared handles; whatever
/// else the backward rule needs (pooling argmax indices, convolution
/// hyperparameters, dropout masks) is captured inside the closure.
pub struct GraphNode {
    pub op_id: &'static str,
    pub inputs: Vec<Tensor>,
    pub output: Tensor,
    backward: BackwardFn,
}

pub struct Tape {
    nodes: RefCell<Vec<GraphNode>>,
    recording: bool,
    // Branch-signature accumulator for the gradient checker. When enabled,
    // piecewise ops fold the identity of their active branch (ReLU signs,
    // pooling argmax, selection indices) into this hash.
    branch_tracking: Cell<bool>,
    branch_sig: Cell<u64>,
}

impl Tape {
    /// A recording tape for one forward/backward pass.
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            recording: true,
            branch_tracking: Cell::new(false),
            branch_sig: Cell::new(Fnv64::new().finish()),
        }
    }

    /// A non-recording tape: operations run forward-only and append nothing.
    pub fn inference() -> Self {
        let mut t = Tape::new();
        t.recording = false;
        t
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Runs `forward`, and if recording is on and any input requires a
    /// gradient, appends a node with the given backward rule. The output of a
    /// recorded node is itself marked as requiring a gradient so downstream
    /// operations keep recording.
    pub fn record<F, B>(&self, op_id: &'static str, inputs: &[&Tensor], forward: F, backward: B) -> Result<Tensor>
    where
        F: FnOnce() -> Result<Tensor>,
        B: Fn(&[f64], &[bool]) -> Vec<Option<Vec<f64>>> + 'static,
    {
        let output = forward()?;
        debug_assert!(output.all_finite(), "{op_id}: non-finite forward output");
        let needs_grad = inputs.iter().any(|t| t.requires_grad_flag());
        if self.recording && needs_grad {
            output.set_requires_grad(true);
            self.nodes.borrow_mut().push(GraphNode {
                op_id,
                inputs: inputs.iter().map(|t| (*t).clone()).collect(),
                output: output.clone(),
                backward: Box::new(backward),
            });
        }
        Ok(output)
    }

    /// Reverse pass from a scalar loss. Every tensor with `requires_grad`
    /// reachable from the loss receives its gradient, accumulated additively
    /// across fan-out. The tape is drained; grads stay on the tensors until
    /// the caller zeroes them.
    pub fn backward(&self, loss: &Tensor) -> Result<()> {
        if loss.numel() != 1 {
            return Err(Error::NonScalarLoss(loss.shape().to_vec()));
        }
        let nodes = std::mem::take(&mut *self.nodes.borrow_mut());
        if nodes.is_empty() {
            return Err(Error::EmptyTape);
        }
        loss.accumulate_grad(&[1.0]);
        for node in nodes.iter().rev() {
            let out_grad = match node.output.grad() {
                Some(g) => g,
                None => continue, // branch not reaching the loss
            };
            let needs: Vec<bool> = node.inputs.iter().map(|t| t.requires_grad_flag()).collect();
            if !needs.iter().any(|&b| b) {
                continue;
            }
            let input_grads = (node.backward)(&out_grad, &needs);
            debug_assert_eq!(input_grads.len(), node.inputs.len(), "{}: backward arity", node.op_id);
            for (input, grad) in node.inputs.iter().zip(input_grads) {
                if let Some(g) = grad {
                    debug_assert!(
                        g.iter().all(|v| v.is_finite()),
                        "{}: non-finite input gradient",
                        node.op_id
                    );
                    input.accumulate_grad(&g);
                }
            }
        }
        Ok(())
    }

    /// `backward` followed by collecting `{parameter name -> grad}` for every
    /// trainable parameter (zero-filled when a parameter is unreachable).
    pub fn backward_with_params(&self, loss: &Tensor, params: &[Parameter]) -> Result<BTreeMap<String, Vec<f64>>> {
        self.backward(loss)?;
        Ok(gradient_map(params))
    }

    // -- branch tracking (used by the gradient checker) --

    pub fn enable_branch_tracking(&self) {
        self.branch_tracking.set(true);
        self.branch_sig.set(Fnv64::new().finish());
    }

    pub fn branch_tracking_enabled(&self) -> bool {
        self.branch_tracking.get()
    }

    /// Folds an active-branch identifier into the pass signature.
    pub fn note_branch(&self, token: u64) {
        let mut h = Fnv64::new();
        h.write_u64(self.branch_sig.get());
        h.write_u64(token);
        self.branch_sig.set(h.finish());
    }

    pub fn branch_signature(&self) -> u64 {
        self.branch_sig.get()
    }
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

/// Snapshot of the gradients of all trainable parameters, by name. Parameters
/// without an accumulated gradient map to zeros.
pub fn gradient_map(params: &[Parameter]) -> BTreeMap<String, Vec<f64>> {
    params
        .iter()
        .filter(|p| p.trainable)
        .map(|p| (p.name.clone(), p.value.grad().unwrap_or_else(|| vec![0.0; p.numel()])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::ops;
    use super::*;

    #[test]
    fn record_skips_no_grad_inputs() {
        let tape = Tape::new();
        let a = Tensor::new(&[2], vec![1.0, 2.0]).unwrap();
        let b = Tensor::new(&[2], vec![3.0, 4.0]).unwrap();
        let c = ops::add(&tape, &a, &b).unwrap();
        assert_eq!(c.to_vec(), vec![4.0, 6.0]);
        assert_eq!(tape.len(), 0);
        assert!(!c.requires_grad_flag());
    }

    #[test]
    fn record_appends_when_grad_required() {
        let tape = Tape::new();
        let a = Tensor::new(&[2], vec![1.0, 2.0]).unwrap().requires_grad();
        let b = Tensor::new(&[2], vec![3.0, 4.0]).unwrap();
        let c = ops::add(&tape, &a, &b).unwrap();
        assert_eq!(tape.len(), 1);
        assert!(c.requires_grad_flag());
    }

    #[test]
    fn square_gradient_via_repeated_input() {
        // loss = sum(a * a) => d/da = 2a
        let tape = Tape::new();
        let a = Tensor::new(&[3], vec![1.0, -2.0, 3.0]).unwrap().requires_grad();
        let sq = ops::mul(&tape, &a, &a).unwrap();
        let loss = ops::sum_all(&tape, &sq).unwrap();
        tape.backward(&loss).unwrap();
        assert_eq!(a.grad().unwrap(), vec![2.0, -4.0, 6.0]);
    }

    #[test]
    fn fanout_accumulates() {
        // loss = sum(y) + sum(y) with y = x + 0 => dx = 2
        let tape = Tape::new();
        let x = Tensor::new(&[2], vec![5.0, 7.0]).unwrap().requires_grad();
        let y = ops::scale(&tape, &x, 1.0).unwrap();
        let s1 = ops::sum_all(&tape, &y).unwrap();
        let s2 = ops::sum_all(&tape, &y).unwrap();
        let loss = ops::add(&tape, &s1, &s2).unwrap();
        tape.backward(&loss).unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn linear_form_gradient_is_the_coefficient() {
        // loss = sum(w ⊙ x), x fixed => grad(w) = x, independent of w
        for wval in [[0.0, 0.0], [10.0, -3.0]] {
            let tape = Tape::new();
            let w = Tensor::new(&[2], wval.to_vec()).unwrap().requires_grad();
            let x = Tensor::new(&[2], vec![2.5, -1.5]).unwrap();
            let prod = ops::mul(&tape, &w, &x).unwrap();
            let loss = ops::sum_all(&tape, &prod).unwrap();
            tape.backward(&loss).unwrap();
            assert_eq!(w.grad().unwrap(), vec![2.5, -1.5]);
        }
    }

    #[test]
    fn backward_rejects_non_scalar_and_empty_tape() {
        let tape = Tape::new();
        let a = Tensor::new(&[2], vec![1.0, 2.0]).unwrap().requires_grad();
        assert!(matches!(tape.backward(&a), Err(Error::NonScalarLoss(_))));
        let loss = Tensor::scalar(1.0);
        assert!(matches!(tape.backward(&loss), Err(Error::EmptyTape)));
    }

    #[test]
    fn inference_tape_never_records() {
        let tape = Tape::inference();
        let a = Tensor::new(&[2], vec![1.0, 2.0]).unwrap().requires_grad();
        let _ = ops::mul(&tape, &a, &a).unwrap();
        assert_eq!(tape.len(), 0);
    }
}
