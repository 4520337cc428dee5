//! Generating-function semantics.
//!
//! A desugared program is translated once into a graph of transformer nodes
//! ([`GfProgram`]); each node maps the generating function before a
//! statement to the one after it. [`eval`] then computes truncated Taylor
//! expansions of the final function at a requested point, pulling the
//! expansions it needs from each node's input on demand.

mod eval;
pub(crate) mod series;
mod translate;

use std::collections::BTreeSet;

use crate::ast::{CompoundDistribution, Distribution, Rational};
use crate::kernel::KernelError;
use crate::taylor::TaylorError;

pub use eval::{eval, eval_with_stats, Anchor, EvalOptions, EvalRequest, EvalStats};
pub use series::{lah_numbers, probability_of};
pub use translate::{translate, TranslateOptions};

/// Coordinate used for one variable: `x` with the generating function
/// `E[x^X]`, or `t` with `E[e^{tX}]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rep {
    Pgf,
    Mgf,
}

impl Rep {
    /// Coordinate value at which the function evaluates to the total mass.
    fn unit<T: crate::kernel::Scalar>(self) -> T {
        match self {
            Rep::Pgf => T::one(),
            Rep::Mgf => T::zero(),
        }
    }
}

pub type NodeId = usize;

/// One transformer step. `var` is the statement's target; children always
/// have smaller ids than their parents.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    /// The initial state: every variable is 0.
    One,
    Zero,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    /// Multiplication by `P[D ∈ set]` (or the complement's probability).
    Weight {
        child: NodeId,
        dist: Distribution,
        set: BTreeSet<u64>,
        complement: bool,
    },
    /// Switches `var` from the pgf to the mgf coordinate.
    ToMgf {
        child: NodeId,
        var: usize,
    },
    SampleConst {
        child: NodeId,
        var: usize,
        dist: Distribution,
        accumulate: bool,
    },
    SampleCompound {
        child: NodeId,
        var: usize,
        dist: CompoundDistribution,
        accumulate: bool,
    },
    Affine {
        child: NodeId,
        var: usize,
        coeffs: Vec<(usize, Rational)>,
        constant: Rational,
    },
    /// Restriction to `var ∈ set`.
    Slice {
        child: NodeId,
        var: usize,
        set: BTreeSet<u64>,
    },
    /// `observe value ~ dist` for a compound distribution, without a fresh variable.
    ObserveCompound {
        child: NodeId,
        value: u64,
        dist: CompoundDistribution,
    },
}

impl Node {
    fn children(&self) -> Vec<NodeId> {
        match self {
            Node::One | Node::Zero => vec![],
            Node::Add(a, b) | Node::Sub(a, b) => vec![*a, *b],
            Node::Weight { child, .. }
            | Node::ToMgf { child, .. }
            | Node::SampleConst { child, .. }
            | Node::SampleCompound { child, .. }
            | Node::Affine { child, .. }
            | Node::Slice { child, .. }
            | Node::ObserveCompound { child, .. } => vec![*child],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct NodeData {
    pub node: Node,
    /// Coordinates of the function this node produces.
    pub reps: Vec<Rep>,
}

/// A program translated into transformer nodes, ready for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct GfProgram {
    pub(crate) nodes: Vec<NodeData>,
    pub(crate) root: NodeId,
    vars: Vec<String>,
}

impl GfProgram {
    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Coordinates of the final generating function.
    pub fn output_reps(&self) -> &[Rep] {
        &self.nodes[self.root].reps
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GfError {
    #[error(transparent)]
    Taylor(#[from] TaylorError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("unsupported construct: {0}")]
    NotCore(String),
    #[error("the observations have probability zero")]
    ZeroEvidence,
    #[error("`{var}` is continuous and can only be evaluated at the unit point")]
    ContinuousAnchor { var: String },
    #[error("evaluation request does not match the program: {0}")]
    BadRequest(String),
}

impl GfError {
    /// The kernel error behind this failure, if any.
    pub fn kernel_error(&self) -> Option<&KernelError> {
        match self {
            GfError::Kernel(e) | GfError::Taylor(TaylorError::Kernel(e)) => Some(e),
            _ => None,
        }
    }
}
