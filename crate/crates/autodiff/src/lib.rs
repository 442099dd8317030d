//! A small reverse-mode tape over vector-valued operations.
//!
//! Forward passes append nodes to a [`Tape`]; each node owns its value (a
//! flat `Vec<f64>`) plus the operation that produced it. [`Tape::backward`]
//! seeds the gradient of a scalar output with 1 and walks the tape in
//! reverse, asking every operation for vector-Jacobian products. The op set
//! is fixed and small (linear maps, pointwise nonlinearities, softmax,
//! reductions, table-driven bilinears, a couple of domain-specific ops);
//! anything heavier plugs in through [`Tape::custom`].
//!
//! Gradients are exact for the recorded computation, so finite differences
//! over the same forward function are the reference oracle everywhere.

mod ops;

pub use ops::CustomOp;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AdError {
    /// Backward was asked for a node that is not on this tape.
    #[error("variable {0} is not recorded on this tape")]
    UnrecordedVariable(usize),
    /// Backward target must be a single scalar.
    #[error("backward target has length {0}, expected 1")]
    NonScalarLoss(usize),
    /// Operand lengths are inconsistent for the requested op.
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
}

/// Handle to a value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    pub(crate) index: usize,
    pub(crate) len: usize,
}

impl Var {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn index(&self) -> usize {
        self.index
    }
}

pub(crate) struct Node {
    pub value: Vec<f64>,
    pub parents: Vec<usize>,
    pub op: Option<Box<dyn ops::Operation>>,
    pub needs_grad: bool,
}

/// Recording of one forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A differentiable input (parameter or data we want gradients for).
    pub fn leaf(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Vec::new(), None, true)
    }

    /// A non-differentiable input; backward never propagates into it.
    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Vec::new(), None, false)
    }

    pub fn scalar_constant(&mut self, value: f64) -> Var {
        self.constant(vec![value])
    }

    /// Value of a recorded variable.
    pub fn value(&self, var: Var) -> &[f64] {
        &self.nodes[var.index].value
    }

    pub(crate) fn push(
        &mut self,
        value: Vec<f64>,
        parents: Vec<usize>,
        op: Option<Box<dyn ops::Operation>>,
        needs_grad_override: bool,
    ) -> Var {
        let needs_grad =
            needs_grad_override || parents.iter().any(|&p| self.nodes[p].needs_grad);
        let len = value.len();
        self.nodes.push(Node { value, parents, op, needs_grad });
        Var { index: self.nodes.len() - 1, len }
    }

    /// Reverse pass from a scalar variable. Returns a gradient table
    /// indexable by [`Gradients::get`] for any variable on the tape;
    /// variables the loss does not depend on yield zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients, AdError> {
        if loss.index >= self.nodes.len() {
            return Err(AdError::UnrecordedVariable(loss.index));
        }
        if loss.len != 1 {
            return Err(AdError::NonScalarLoss(loss.len));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.index] = Some(vec![1.0]);

        for idx in (0..=loss.index).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(grad_out) = grads[idx].take() else {
                continue;
            };
            if let Some(op) = &node.op {
                let parent_values: Vec<&[f64]> =
                    node.parents.iter().map(|&p| self.nodes[p].value.as_slice()).collect();
                let parent_grads = op.backward(&node.value, &grad_out, &parent_values);
                debug_assert_eq!(parent_grads.len(), node.parents.len());
                for (&p, g) in node.parents.iter().zip(parent_grads) {
                    if !self.nodes[p].needs_grad {
                        continue;
                    }
                    debug_assert_eq!(g.len(), self.nodes[p].value.len());
                    match &mut grads[p] {
                        Some(acc) => {
                            for (a, gi) in acc.iter_mut().zip(g.iter()) {
                                *a += gi;
                            }
                        }
                        slot => *slot = Some(g),
                    }
                }
            }
            // Leaves keep their gradient for the caller.
            if self.nodes[idx].op.is_none() {
                grads[idx] = Some(grad_out);
            } else if idx != loss.index {
                grads[idx] = None;
            }
        }
        Ok(Gradients { grads, lens: self.nodes.iter().map(|n| n.value.len()).collect() })
    }
}

/// Gradient table produced by [`Tape::backward`].
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    lens: Vec<usize>,
}

impl Gradients {
    /// Gradient with respect to `var` (zeros if the loss never saw it).
    pub fn get(&self, var: Var) -> Vec<f64> {
        match &self.grads[var.index] {
            Some(g) => g.clone(),
            None => vec![0.0; self.lens[var.index]],
        }
    }

    /// Borrow without copying; `None` means identically zero.
    pub fn get_ref(&self, var: Var) -> Option<&[f64]> {
        self.grads[var.index].as_deref()
    }
}
