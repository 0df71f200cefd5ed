//! Minimal reverse-mode automatic differentiation.
//!
//! Tensors are reference-counted handles into a dynamically built graph.
//! Each operation stores a boxed backward closure over copies of whatever
//! forward values it needs, so backward never aliases live tensors. Graphs
//! are single-threaded; distinct graphs may run concurrently.

pub mod adam;
pub mod gradcheck;
mod ops;

pub use adam::AdamState;
pub use ops::{add_channel_bias, concat, conv2d, conv2d_transpose, instance_norm};

use std::cell::RefCell;
use std::collections::HashSet;
use std::rc::Rc;

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum AutogradError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("graph already consumed by a previous backward pass")]
    GraphConsumed,
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: usize, classes: usize },
}

/// Maps the output gradient to per-parent gradient contributions
/// (`None` for parents that do not need one).
type BackFn<F> = Box<dyn Fn(&[F]) -> Vec<Option<Vec<F>>>>;

struct Node<F: Real> {
    values: Vec<F>,
    shape: Vec<usize>,
    grad: Option<Vec<F>>,
    requires_grad: bool,
    needs_grad: bool,
    parents: Vec<Tensor<F>>,
    backward: Option<BackFn<F>>,
    consumed: bool,
}

/// N-dimensional value with an optional gradient.
pub struct Tensor<F: Real> {
    node: Rc<RefCell<Node<F>>>,
}

impl<F: Real> Clone for Tensor<F> {
    fn clone(&self) -> Self {
        Self {
            node: Rc::clone(&self.node),
        }
    }
}

impl<F: Real> std::fmt::Debug for Tensor<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let node = self.node.borrow();
        f.debug_struct("Tensor")
            .field("shape", &node.shape)
            .field("requires_grad", &node.requires_grad)
            .finish()
    }
}

impl<F: Real> Tensor<F> {
    fn new_node(
        values: Vec<F>,
        shape: Vec<usize>,
        requires_grad: bool,
        needs_grad: bool,
        parents: Vec<Tensor<F>>,
        backward: Option<BackFn<F>>,
    ) -> Self {
        debug_assert_eq!(values.len(), shape.iter().product::<usize>());
        Self {
            node: Rc::new(RefCell::new(Node {
                values,
                shape,
                grad: None,
                requires_grad,
                needs_grad,
                parents,
                backward,
                consumed: false,
            })),
        }
    }

    /// Leaf tensor. Gradients accumulate here when `requires_grad` is set.
    pub fn leaf(values: Vec<F>, shape: &[usize], requires_grad: bool) -> Result<Self, AutogradError> {
        if values.len() != shape.iter().product::<usize>() {
            return Err(AutogradError::ShapeMismatch(format!(
                "{} values for shape {shape:?}",
                values.len()
            )));
        }
        Ok(Self::new_node(
            values,
            shape.to_vec(),
            requires_grad,
            requires_grad,
            Vec::new(),
            None,
        ))
    }

    pub fn constant(values: Vec<F>, shape: &[usize]) -> Result<Self, AutogradError> {
        Self::leaf(values, shape, false)
    }

    pub fn scalar(v: F) -> Self {
        Self::new_node(vec![v], vec![1], false, false, Vec::new(), None)
    }

    pub fn zeros(shape: &[usize], requires_grad: bool) -> Self {
        let n = shape.iter().product();
        Self::new_node(
            vec![F::zero(); n],
            shape.to_vec(),
            requires_grad,
            requires_grad,
            Vec::new(),
            None,
        )
    }

    pub fn filled(shape: &[usize], v: F) -> Self {
        let n = shape.iter().product();
        Self::new_node(vec![v; n], shape.to_vec(), false, false, Vec::new(), None)
    }

    /// Internal constructor for op outputs.
    fn from_op(values: Vec<F>, shape: Vec<usize>, parents: Vec<Tensor<F>>, back: BackFn<F>) -> Self {
        let needs = parents.iter().any(Tensor::needs_grad);
        let backward = if needs { Some(back) } else { None };
        Self::new_node(values, shape, false, needs, parents, backward)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.node.borrow().shape.clone()
    }

    pub fn numel(&self) -> usize {
        self.node.borrow().values.len()
    }

    pub fn values(&self) -> Vec<F> {
        self.node.borrow().values.clone()
    }

    /// Applies `f` to the raw values without copying them out.
    pub fn with_values<R>(&self, f: impl FnOnce(&[F]) -> R) -> R {
        f(&self.node.borrow().values)
    }

    /// The single element of a scalar tensor.
    pub fn item(&self) -> F {
        let node = self.node.borrow();
        assert_eq!(node.values.len(), 1, "item() on non-scalar tensor");
        node.values[0]
    }

    pub fn grad(&self) -> Option<Vec<F>> {
        self.node.borrow().grad.clone()
    }

    pub fn requires_grad(&self) -> bool {
        self.node.borrow().requires_grad
    }

    fn needs_grad(&self) -> bool {
        self.node.borrow().needs_grad
    }

    pub fn zero_grad(&self) {
        self.node.borrow_mut().grad = None;
    }

    /// Overwrites the values in place (same length required); used by
    /// optimizers and by tests that hand-set parameters.
    pub fn set_values(&self, values: Vec<F>) -> Result<(), AutogradError> {
        let mut node = self.node.borrow_mut();
        if values.len() != node.values.len() {
            return Err(AutogradError::ShapeMismatch(format!(
                "set_values: {} != {}",
                values.len(),
                node.values.len()
            )));
        }
        node.values = values;
        Ok(())
    }

    /// A constant copy cut off from the graph.
    pub fn detach(&self) -> Tensor<F> {
        let node = self.node.borrow();
        Tensor::new_node(
            node.values.clone(),
            node.shape.clone(),
            false,
            false,
            Vec::new(),
            None,
        )
    }

    pub fn all_finite(&self) -> bool {
        self.node.borrow().values.iter().all(|v| v.is_finite())
    }

    fn accumulate_grad(&self, contrib: &[F]) {
        let mut node = self.node.borrow_mut();
        debug_assert_eq!(contrib.len(), node.values.len());
        match &mut node.grad {
            Some(g) => {
                for (gi, ci) in g.iter_mut().zip(contrib.iter()) {
                    *gi += *ci;
                }
            }
            None => node.grad = Some(contrib.to_vec()),
        }
    }

    /// Reverse-mode pass from a scalar loss. Populates `grad` on every
    /// reachable tensor that needs one; a second call on the same loss is
    /// an error.
    pub fn backward(&self) -> Result<(), AutogradError> {
        {
            let mut node = self.node.borrow_mut();
            if node.values.len() != 1 {
                return Err(AutogradError::NonScalarLoss(node.shape.clone()));
            }
            if node.consumed {
                return Err(AutogradError::GraphConsumed);
            }
            node.consumed = true;
        }

        // Post-order DFS: parents land before consumers, so the reversed
        // order sees every node only after all of its consumers.
        enum Frame<F: Real> {
            Enter(Tensor<F>),
            Exit(Tensor<F>),
        }
        let mut topo: Vec<Tensor<F>> = Vec::new();
        let mut visited: HashSet<*const ()> = HashSet::new();
        let mut stack = vec![Frame::Enter(self.clone())];
        while let Some(frame) = stack.pop() {
            match frame {
                Frame::Enter(t) => {
                    let ptr = Rc::as_ptr(&t.node) as *const ();
                    if !visited.insert(ptr) {
                        continue;
                    }
                    stack.push(Frame::Exit(t.clone()));
                    for p in &t.node.borrow().parents {
                        if p.needs_grad() {
                            stack.push(Frame::Enter(p.clone()));
                        }
                    }
                }
                Frame::Exit(t) => topo.push(t),
            }
        }

        self.accumulate_grad(&[F::one()]);
        for t in topo.iter().rev() {
            let grad = {
                let node = t.node.borrow();
                if node.backward.is_none() {
                    continue;
                }
                match &node.grad {
                    Some(g) => g.clone(),
                    None => continue,
                }
            };
            let contribs = {
                let node = t.node.borrow();
                (node.backward.as_ref().expect("checked above"))(&grad)
            };
            let parents = t.node.borrow().parents.clone();
            debug_assert_eq!(contribs.len(), parents.len());
            for (p, c) in parents.iter().zip(contribs.iter()) {
                if let Some(c) = c {
                    if p.needs_grad() {
                        p.accumulate_grad(c);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_backward_is_all_ones() {
        let x = Tensor::leaf(vec![1.0, -2.0, 3.0], &[3], true).unwrap();
        let loss = x.sum();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn elementwise_square_backward_is_two_x() {
        let x = Tensor::leaf(vec![1.0, -2.0, 3.0], &[3], true).unwrap();
        let loss = x.mul(&x).unwrap().sum();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0, -4.0, 6.0]);
    }

    #[test]
    fn gradients_accumulate_across_reuses() {
        // loss = sum(x) + sum(x * x): grad = 1 + 2x.
        let x = Tensor::leaf(vec![0.5, -1.5], &[2], true).unwrap();
        let loss = x.sum().add(&x.mul(&x).unwrap().sum()).unwrap();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0, -2.0]);
    }

    #[test]
    fn second_backward_is_rejected() {
        let x = Tensor::leaf(vec![1.0], &[1], true).unwrap();
        let loss = x.mul(&x).unwrap().sum();
        loss.backward().unwrap();
        assert!(matches!(loss.backward(), Err(AutogradError::GraphConsumed)));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let x = Tensor::leaf(vec![1.0, 2.0], &[2], true).unwrap();
        assert!(matches!(
            x.backward(),
            Err(AutogradError::NonScalarLoss(_))
        ));
    }

    #[test]
    fn detach_blocks_gradient_flow() {
        let x = Tensor::leaf(vec![2.0], &[1], true).unwrap();
        let y = x.mul(&x).unwrap().detach();
        let loss = y.mul(&y).unwrap().sum();
        loss.backward().unwrap();
        assert!(x.grad().is_none());
    }

    #[test]
    fn constants_receive_no_grad() {
        let x = Tensor::leaf(vec![3.0], &[1], true).unwrap();
        let c = Tensor::constant(vec![4.0], &[1]).unwrap();
        let loss = x.mul(&c).unwrap().sum();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![4.0]);
        assert!(c.grad().is_none());
    }
}
