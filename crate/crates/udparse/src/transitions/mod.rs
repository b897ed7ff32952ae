//! The arc-hybrid transition system with online reordering (swap).
//!
//! A [`Config`] holds a stack (artificial root `0` at the bottom), a buffer
//! of upcoming token ids, and the arcs built so far. Four transitions move
//! the parse forward:
//!
//! * `SHIFT` moves the buffer front onto the stack.
//! * `LEFT_ARC(l)` attaches the stack top as a dependent of the buffer front
//!   and pops it.
//! * `RIGHT_ARC(l)` attaches the stack top as a dependent of the element
//!   below it and pops it.
//! * `SWAP` pops the stack top and reinserts it as the second element of the
//!   buffer, reordering the sentence on the fly. This is what lets the
//!   system build non-projective trees.
//!
//! Training follows a static-dynamic oracle against a [`GoldTree`]: swaps are
//! decided statically from the gold tree's projective order
//! ([`projective_order`]), while the remaining transitions are costed
//! dynamically by [`dynamic_cost`], which counts exactly how many gold arcs a
//! transition makes unreachable. That exactness is checked against an
//! exhaustive completion search in the test suite.

mod oracle;

pub use oracle::{
    dynamic_cost, static_oracle, swap_mandated, unreachable_arcs, CostCache, OracleError,
    DEFAULT_COST_BUDGET,
};

use std::collections::{HashSet, VecDeque};

use thiserror::Error;

pub type LabelId = usize;

/// A labeled dependency arc; `head == 0` is the artificial root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arc {
    pub head: usize,
    pub dep: usize,
    pub label: LabelId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transition {
    Shift,
    LeftArc(LabelId),
    RightArc(LabelId),
    Swap,
}

impl Transition {
    pub fn kind(self) -> TransitionKind {
        match self {
            Transition::Shift => TransitionKind::Shift,
            Transition::LeftArc(_) => TransitionKind::LeftArc,
            Transition::RightArc(_) => TransitionKind::RightArc,
            Transition::Swap => TransitionKind::Swap,
        }
    }
}

/// Transition kinds in their canonical order, which is also the tie-break
/// order used when scores are equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TransitionKind {
    Shift,
    LeftArc,
    RightArc,
    Swap,
}

pub const TRANSITION_KINDS: [TransitionKind; 4] = [
    TransitionKind::Shift,
    TransitionKind::LeftArc,
    TransitionKind::RightArc,
    TransitionKind::Swap,
];

#[derive(Debug, Error, PartialEq)]
pub enum TransitionError {
    #[error("transition {0:?} is not legal in the current configuration")]
    Illegal(TransitionKind),
}

#[derive(Debug, Error, PartialEq)]
pub enum GoldTreeError {
    #[error("head {head} of token {dep} is out of range")]
    HeadOutOfRange { dep: usize, head: usize },
    #[error("token {dep} has itself as head")]
    SelfHead { dep: usize },
    #[error("expected exactly one root dependent, found {found}")]
    RootCount { found: usize },
    #[error("token {dep} is part of a cycle")]
    Cycle { dep: usize },
    #[error("labels length {labels} does not match heads length {heads}")]
    LengthMismatch { heads: usize, labels: usize },
}

/// A gold dependency tree with its projective order precomputed.
///
/// All arrays are 1-indexed by token id; index 0 is an unused slot for the
/// artificial root.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldTree {
    heads: Vec<usize>,
    labels: Vec<LabelId>,
    proj: Vec<usize>,
}

impl GoldTree {
    /// Builds a gold tree from per-token heads and labels (`heads[i]` is the
    /// head of token `i + 1`). Validates that the heads form a single tree.
    pub fn new(heads: &[usize], labels: &[LabelId]) -> Result<Self, GoldTreeError> {
        let n = heads.len();
        if labels.len() != n {
            return Err(GoldTreeError::LengthMismatch { heads: n, labels: labels.len() });
        }
        let mut full_heads = vec![0; n + 1];
        let mut roots = 0;
        for (i, &h) in heads.iter().enumerate() {
            let dep = i + 1;
            if h > n {
                return Err(GoldTreeError::HeadOutOfRange { dep, head: h });
            }
            if h == dep {
                return Err(GoldTreeError::SelfHead { dep });
            }
            if h == 0 {
                roots += 1;
            }
            full_heads[dep] = h;
        }
        if n > 0 && roots != 1 {
            return Err(GoldTreeError::RootCount { found: roots });
        }
        for start in 1..=n {
            let mut cur = start;
            let mut steps = 0;
            while cur != 0 {
                cur = full_heads[cur];
                steps += 1;
                if steps > n {
                    return Err(GoldTreeError::Cycle { dep: start });
                }
            }
        }
        let proj_flat = projective_order(heads);
        let mut proj = vec![0; n + 1];
        for (i, &p) in proj_flat.iter().enumerate() {
            proj[i + 1] = p;
        }
        let mut full_labels = vec![0; n + 1];
        for (i, &l) in labels.iter().enumerate() {
            full_labels[i + 1] = l;
        }
        Ok(GoldTree { heads: full_heads, labels: full_labels, proj })
    }

    pub fn n(&self) -> usize {
        self.heads.len() - 1
    }

    pub fn head_of(&self, dep: usize) -> usize {
        self.heads[dep]
    }

    pub fn label_of(&self, dep: usize) -> LabelId {
        self.labels[dep]
    }

    /// Position of the token in the projective (in-order) traversal.
    pub fn proj_of(&self, id: usize) -> usize {
        self.proj[id]
    }

    /// The full gold arc set.
    pub fn arcs(&self) -> Vec<Arc> {
        (1..=self.n())
            .map(|dep| Arc { head: self.heads[dep], dep, label: self.labels[dep] })
            .collect()
    }
}

/// Computes the projective order of a tree: the rank of each token in an
/// in-order traversal from the root, where each node is visited between its
/// left and right children (children in surface order). Parsing tokens in
/// this order makes any tree projective; the swap transition realizes the
/// reordering at parse time.
///
/// `heads[i]` is the head of token `i + 1`; the result is a permutation of
/// `1..=n` in the same indexing.
pub fn projective_order(heads: &[usize]) -> Vec<usize> {
    let n = heads.len();
    let mut children = vec![Vec::new(); n + 1];
    for (i, &h) in heads.iter().enumerate() {
        children[h].push(i + 1);
    }
    let mut order = vec![0; n + 1];
    let mut counter = 0;
    fn visit(u: usize, children: &[Vec<usize>], order: &mut [usize], counter: &mut usize) {
        for &c in children[u].iter().filter(|&&c| c < u) {
            visit(c, children, order, counter);
        }
        if u != 0 {
            *counter += 1;
            order[u] = *counter;
        }
        for &c in children[u].iter().filter(|&&c| c > u) {
            visit(c, children, order, counter);
        }
    }
    visit(0, &children, &mut order, &mut counter);
    order[1..].to_vec()
}

/// A parser configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    stack: Vec<usize>,
    buffer: VecDeque<usize>,
    arcs: Vec<Arc>,
    n: usize,
    swaps: usize,
    swapped_pairs: HashSet<(usize, usize)>,
}

impl Config {
    /// The initial configuration for an `n`-token sentence: root on the
    /// stack, all tokens in the buffer, no arcs.
    pub fn initial(n: usize) -> Self {
        Config {
            stack: vec![0],
            buffer: (1..=n).collect(),
            arcs: Vec::new(),
            n,
            swaps: 0,
            swapped_pairs: HashSet::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stack from bottom (always the root) to top.
    pub fn stack(&self) -> &[usize] {
        &self.stack
    }

    /// Buffer from front to back.
    pub fn buffer(&self) -> &VecDeque<usize> {
        &self.buffer
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// `stack_item(0)` is the top, `stack_item(1)` the element below it, and
    /// so on. Includes the root at the deepest position.
    pub fn stack_item(&self, depth: usize) -> Option<usize> {
        self.stack.len().checked_sub(depth + 1).map(|i| self.stack[i])
    }

    pub fn buffer_front(&self) -> Option<usize> {
        self.buffer.front().copied()
    }

    /// Number of swaps executed so far.
    pub fn swap_count(&self) -> usize {
        self.swaps
    }

    /// Lowest-id dependent attached to `head` so far.
    pub fn leftmost_dep(&self, head: usize) -> Option<usize> {
        self.arcs.iter().filter(|a| a.head == head).map(|a| a.dep).min()
    }

    pub fn is_terminal(&self) -> bool {
        self.buffer.is_empty() && self.stack == [0]
    }

    fn top_is_real(&self) -> bool {
        self.stack.last().is_some_and(|&s| s != 0)
    }

    /// Structural legality. Swap is additionally bounded so that parsing
    /// terminates without a gold tree: the top and front must still be in
    /// surface order, each ordered pair may swap at most once, and the total
    /// number of swaps stays below `n (n - 1) / 2`.
    pub fn is_legal(&self, kind: TransitionKind) -> bool {
        match kind {
            TransitionKind::Shift => !self.buffer.is_empty(),
            TransitionKind::LeftArc => self.top_is_real() && !self.buffer.is_empty(),
            TransitionKind::RightArc => self.top_is_real() && self.stack.len() >= 2,
            TransitionKind::Swap => {
                let (Some(&s0), Some(&b0)) = (self.stack.last(), self.buffer.front()) else {
                    return false;
                };
                s0 != 0
                    && s0 < b0
                    && !self.swapped_pairs.contains(&(s0, b0))
                    && self.swaps < self.n * (self.n.saturating_sub(1)) / 2
            }
        }
    }

    /// The legal transition kinds, in canonical order.
    pub fn legal_transitions(&self) -> Vec<TransitionKind> {
        TRANSITION_KINDS.into_iter().filter(|&k| self.is_legal(k)).collect()
    }

    /// Applies a transition, or reports that it is illegal.
    pub fn apply(&mut self, t: Transition) -> Result<(), TransitionError> {
        if !self.is_legal(t.kind()) {
            return Err(TransitionError::Illegal(t.kind()));
        }
        match t {
            Transition::Shift => {
                let b0 = self.buffer.pop_front().unwrap();
                self.stack.push(b0);
            }
            Transition::LeftArc(label) => {
                let s0 = self.stack.pop().unwrap();
                let b0 = *self.buffer.front().unwrap();
                self.arcs.push(Arc { head: b0, dep: s0, label });
            }
            Transition::RightArc(label) => {
                let s0 = self.stack.pop().unwrap();
                let s1 = *self.stack.last().unwrap();
                self.arcs.push(Arc { head: s1, dep: s0, label });
            }
            Transition::Swap => {
                let s0 = self.stack.pop().unwrap();
                let b0 = *self.buffer.front().unwrap();
                self.buffer.insert(1, s0);
                self.swaps += 1;
                self.swapped_pairs.insert((s0, b0));
            }
        }
        Ok(())
    }
}
