use std::sync::{Arc, Mutex, MutexGuard};

use super::{DType, Record, Tensor};
use crate::error::{Error, Result};

/// Adjoint rule of a recorded op: given the output gradient and which inputs
/// need a gradient, returns one optional gradient per input.
pub(crate) type BackwardFn = Box<dyn Fn(&[f64], &[bool]) -> Vec<Option<Vec<f64>>> + Send + Sync>;

struct Node {
    inputs: Vec<Option<usize>>,
    len: usize,
    backward: Option<BackwardFn>,
}

/// An append-only record of one forward pass.
///
/// Nodes are pushed in execution order, so index order is a topological
/// order of the graph. A tape belongs to a single forward/backward pass.
#[derive(Clone, Default)]
pub struct Tape {
    nodes: Arc<Mutex<Vec<Node>>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, Vec<Node>> {
        self.nodes.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn same(&self, other: &Tape) -> bool {
        Arc::ptr_eq(&self.nodes, &other.nodes)
    }

    /// Registers `value` as a differentiable leaf (a parameter).
    pub fn leaf(&self, value: &Tensor) -> Tensor {
        let mut nodes = self.lock();
        let id = nodes.len();
        nodes.push(Node {
            inputs: Vec::new(),
            len: value.data().len(),
            backward: None,
        });
        value.detach().with_record(Record {
            tape: self.clone(),
            id,
        })
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Attaches `value` to the tape shared by the recorded `inputs`.
///
/// When no input is recorded the value is returned as a constant and the
/// closure is dropped unevaluated.
pub(crate) fn record_op<F>(value: Tensor, inputs: &[&Tensor], backward: F) -> Result<Tensor>
where
    F: Fn(&[f64], &[bool]) -> Vec<Option<Vec<f64>>> + Send + Sync + 'static,
{
    let mut tape: Option<&Tape> = None;
    for input in inputs {
        if let Some(rec) = input.record() {
            match tape {
                None => tape = Some(&rec.tape),
                Some(t) if !t.same(&rec.tape) => return Err(Error::TapeMismatch),
                _ => {}
            }
        }
    }
    let Some(tape) = tape else {
        return Ok(value);
    };
    let tape = tape.clone();
    let id = {
        let mut nodes = tape.lock();
        let id = nodes.len();
        nodes.push(Node {
            inputs: inputs.iter().map(|t| t.record().map(|r| r.id)).collect(),
            len: value.data().len(),
            backward: Some(Box::new(backward)),
        });
        id
    };
    Ok(value.with_record(Record { tape, id }))
}

/// Gradients of a scalar loss with respect to the leaves of its tape.
pub struct Gradients {
    tape: Option<Tape>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient for `param`, shaped like it. Tensors that are constants,
    /// live on another tape, or are unreachable from the loss get zeros.
    pub fn get(&self, param: &Tensor) -> Tensor {
        self.raw(param)
            .map(|g| param.with_data(g.to_vec()))
            .unwrap_or_else(|| Tensor::zeros(param.shape(), param.dtype()))
    }

    /// Raw gradient storage, if `param` received any gradient.
    pub fn raw(&self, param: &Tensor) -> Option<&[f64]> {
        let (tape, rec) = (self.tape.as_ref()?, param.record()?);
        if !tape.same(&rec.tape) {
            return None;
        }
        self.grads.get(rec.id)?.as_deref()
    }
}

/// Reverse sweep from a real scalar `loss`.
///
/// Every node is visited at most once, in reverse creation order. Only leaf
/// gradients are retained; intermediate buffers are released as soon as
/// they have been propagated.
pub fn backward(loss: &Tensor) -> Result<Gradients> {
    if loss.numel() != 1 || loss.dtype() != DType::Real {
        return Err(Error::invalid(
            "backward",
            format!(
                "loss must be a real scalar, got {:?} {:?}",
                loss.shape(),
                loss.dtype()
            ),
        ));
    }
    let Some(rec) = loss.record() else {
        return Ok(Gradients {
            tape: None,
            grads: Vec::new(),
        });
    };
    let nodes = rec.tape.lock();
    let mut grads: Vec<Option<Vec<f64>>> = Vec::with_capacity(nodes.len());
    grads.resize_with(nodes.len(), || None);
    grads[rec.id] = Some(vec![1.0]);

    for id in (0..=rec.id).rev() {
        let node = &nodes[id];
        let Some(bw) = node.backward.as_ref() else {
            continue;
        };
        let Some(g) = grads[id].take() else {
            continue;
        };
        debug_assert_eq!(g.len(), node.len);
        let needs: Vec<bool> = node.inputs.iter().map(Option::is_some).collect();
        let input_grads = bw(&g, &needs);
        debug_assert_eq!(input_grads.len(), node.inputs.len());
        for (input, grad) in node.inputs.iter().zip(input_grads) {
            let (Some(i), Some(grad)) = (input, grad) else {
                continue;
            };
            debug_assert_eq!(grad.len(), nodes[*i].len);
            match &mut grads[*i] {
                Some(acc) => acc.iter_mut().zip(&grad).for_each(|(a, b)| *a += b),
                slot @ None => *slot = Some(grad),
            }
        }
    }
    drop(nodes);
    Ok(Gradients {
        tape: Some(rec.tape.clone()),
        grads,
    })
}
