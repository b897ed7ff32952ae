//! The static-dynamic oracle.
//!
//! Swap decisions are static: a swap is mandated exactly when the stack top
//! follows the buffer front in the gold tree's projective order. All other
//! transitions are costed dynamically, so training can explore
//! configurations off the gold path and still receive exact supervision.
//!
//! Costs count the gold arcs a transition gives up. Arcs interact: two arcs
//! that are each reachable on their own can force contradictory pop orders
//! on the stack, so no per-arc formula is exact in general. [`dynamic_cost`]
//! therefore runs a memoized search over completions, with
//! [`unreachable_arcs`] as a cheap certainly-lost lower bound, and falls
//! back to that bound when a sentence exhausts its search budget.

use std::collections::HashMap;

use thiserror::Error;

use super::{Config, GoldTree, Transition, TransitionKind};

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("no oracle transition applies; the configuration is not reachable from the gold tree")]
    NotGoldReachable,
}

/// True when the static oracle requires a swap: the stack top is real, the
/// buffer is non-empty, and the projective order of the top exceeds that of
/// the front.
pub fn swap_mandated(config: &Config, gold: &GoldTree) -> bool {
    match (config.stack_item(0), config.buffer_front()) {
        (Some(s0), Some(b0)) if s0 != 0 => gold.proj_of(s0) > gold.proj_of(b0),
        _ => false,
    }
}

fn collected_all_deps(config: &Config, gold: &GoldTree, head: usize) -> bool {
    let want = (1..=gold.n()).filter(|&d| gold.head_of(d) == head).count();
    let have = config.arcs().iter().filter(|a| a.head == head).count();
    want == have
}

/// The transition a gold derivation takes from `config`.
///
/// Swap when mandated; otherwise the arc-hybrid decision consistent with the
/// gold tree: attach the stack top leftward to the buffer front or rightward
/// to the element below it once it has collected all its dependents, and
/// shift otherwise. Errors when `config` cannot lead to the gold tree.
pub fn static_oracle(config: &Config, gold: &GoldTree) -> Result<Transition, OracleError> {
    if swap_mandated(config, gold) {
        return Ok(Transition::Swap);
    }
    if let Some(s0) = config.stack_item(0).filter(|&s| s != 0) {
        if config.buffer_front() == Some(gold.head_of(s0)) && collected_all_deps(config, gold, s0) {
            return Ok(Transition::LeftArc(gold.label_of(s0)));
        }
        if config.stack_item(1) == Some(gold.head_of(s0)) && collected_all_deps(config, gold, s0) {
            return Ok(Transition::RightArc(gold.label_of(s0)));
        }
    }
    if config.is_legal(TransitionKind::Shift) {
        return Ok(Transition::Shift);
    }
    Err(OracleError::NotGoldReachable)
}

/// Where a token currently lives.
#[derive(Clone, Copy, PartialEq)]
enum Loc {
    /// Already attached and popped.
    Gone,
    /// On the stack at this index (0 = bottom).
    Stack(usize),
    Buffer,
}

fn lost_arcs(stack: &[usize], buffer: &[usize], gold: &GoldTree) -> usize {
    let n = gold.n();
    let mut loc = vec![Loc::Gone; n + 1];
    for (i, &t) in stack.iter().enumerate() {
        loc[t] = Loc::Stack(i);
    }
    for &t in buffer {
        loc[t] = Loc::Buffer;
    }
    let min_proj_buffer = buffer.iter().map(|&t| gold.proj_of(t)).min();
    let can_reenter = |id: usize| min_proj_buffer.is_some_and(|m| gold.proj_of(id) > m);

    let mut lost = 0;
    for d in 1..=n {
        let h = gold.head_of(d);
        let reachable = match (loc[d], loc[h]) {
            (Loc::Gone, _) => continue,
            (_, Loc::Gone) => false,
            (Loc::Buffer, _) => true,
            (Loc::Stack(_), Loc::Buffer) => true,
            (Loc::Stack(pd), Loc::Stack(ph)) => {
                if ph + 1 == pd {
                    true
                } else if ph > pd {
                    can_reenter(h)
                } else {
                    can_reenter(d)
                }
            }
        };
        if !reachable {
            lost += 1;
        }
    }
    lost
}

/// Counts gold arcs that are individually unreachable from `config`: a
/// certain lower bound on the arcs that every completion loses.
///
/// A gold arc `(h, d)` with `d` still in play is kept iff one of:
///
/// * `d` is in the buffer and `h` has not been popped;
/// * `d` is on the stack and `h` is in the buffer, or directly below `d`;
/// * `d` is on the stack and `h` is above `d`, and `h` can still re-enter
///   the buffer by swapping behind some buffer token with a smaller
///   projective order;
/// * `d` is on the stack and `h` is below `d` (but not adjacent), and `d`
///   itself can re-enter the buffer the same way.
///
/// The re-entry condition compares against the minimum projective order over
/// the current buffer: a stack token can only swap behind a front that
/// precedes it in projective order, and future swaps never lower that
/// minimum. The count is a lower bound, not the exact loss, because it
/// cannot see conflicts between arcs that are each reachable in isolation.
pub fn unreachable_arcs(config: &Config, gold: &GoldTree) -> usize {
    let buffer: Vec<usize> = config.buffer().iter().copied().collect();
    lost_arcs(config.stack(), &buffer, gold)
}

/// Default node budget for the exact completion search, per cache.
pub const DEFAULT_COST_BUDGET: usize = 200_000;

const KEY_SEP: u16 = u16::MAX;

/// Memoized exact-cost search over one sentence.
///
/// Completions may shift, build arcs, and swap exactly when the projective
/// order mandates it; the search minimizes the number of tokens popped with
/// a wrong head. Memoization is sound because every move strictly shrinks
/// the triple (live tokens, projective inversions, buffer length), so the
/// state graph is acyclic. A cache is meant to live for one sentence; once
/// its node budget is exhausted, all further costs come from the
/// [`unreachable_arcs`] bound instead of the search.
pub struct CostCache {
    memo: HashMap<Box<[u16]>, u32>,
    nodes: usize,
    budget: usize,
    exhausted: bool,
}

impl Default for CostCache {
    fn default() -> Self {
        CostCache::new(DEFAULT_COST_BUDGET)
    }
}

impl CostCache {
    pub fn new(budget: usize) -> Self {
        CostCache { memo: HashMap::new(), nodes: 0, budget, exhausted: false }
    }

    /// True once the search budget ran out and costs degraded to the bound.
    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    /// The cost of a non-swap transition: the number of gold arcs (counting
    /// the label of the arc being built) that applying `t` gives up relative
    /// to the best completion. Zero-cost transitions are exactly the ones an
    /// optimal completion can start with.
    ///
    /// The caller must pass a legal, non-swap transition; swap costs are
    /// decided statically by [`swap_mandated`].
    pub fn cost(&mut self, config: &Config, t: Transition, gold: &GoldTree) -> usize {
        assert!(t.kind() != TransitionKind::Swap, "swap is costed statically");
        assert!(config.is_legal(t.kind()), "dynamic cost requires a legal transition");

        let stack: Vec<u16> = config.stack().iter().map(|&x| x as u16).collect();
        let buffer: Vec<u16> = config.buffer().iter().map(|&x| x as u16).collect();
        let (immediate, next_stack, next_buffer) = match t {
            Transition::Shift => {
                let mut s = stack.clone();
                let mut b = buffer.clone();
                s.push(b.remove(0));
                (0, s, b)
            }
            Transition::LeftArc(l) => {
                let s0 = *stack.last().unwrap() as usize;
                let wrong = gold.head_of(s0) != buffer[0] as usize || gold.label_of(s0) != l;
                (usize::from(wrong), stack[..stack.len() - 1].to_vec(), buffer.clone())
            }
            Transition::RightArc(l) => {
                let s0 = *stack.last().unwrap() as usize;
                let s1 = stack[stack.len() - 2] as usize;
                let wrong = gold.head_of(s0) != s1 || gold.label_of(s0) != l;
                (usize::from(wrong), stack[..stack.len() - 1].to_vec(), buffer.clone())
            }
            Transition::Swap => unreachable!(),
        };

        if !self.exhausted {
            let before = self.search(stack.clone(), buffer.clone(), gold);
            let after = self.search(next_stack.clone(), next_buffer.clone(), gold);
            if let (Some(before), Some(after)) = (before, after) {
                // Abandoning t is itself a completion of the pre-state, so
                // the delta can never be negative.
                return (immediate + after as usize)
                    .checked_sub(before as usize)
                    .expect("completion search produced a negative cost");
            }
            self.exhausted = true;
        }

        let before = lost_u16(&stack, &buffer, gold);
        let after = lost_u16(&next_stack, &next_buffer, gold);
        immediate + after.saturating_sub(before)
    }

    /// Minimal future head-misses, or None once the budget is gone.
    fn search(&mut self, stack: Vec<u16>, buffer: Vec<u16>, gold: &GoldTree) -> Option<u32> {
        if buffer.is_empty() && stack.len() == 1 {
            return Some(0);
        }
        let mut key = Vec::with_capacity(stack.len() + buffer.len() + 1);
        key.extend_from_slice(&stack);
        key.push(KEY_SEP);
        key.extend_from_slice(&buffer);
        let key: Box<[u16]> = key.into();
        if let Some(&v) = self.memo.get(&key) {
            return Some(v);
        }
        if self.nodes >= self.budget {
            return None;
        }
        self.nodes += 1;

        let mut best = u32::MAX;
        if !buffer.is_empty() {
            let mut s = stack.clone();
            let mut b = buffer.clone();
            s.push(b.remove(0));
            best = best.min(self.search(s, b, gold)?);
        }
        if stack.len() >= 2 {
            let s0 = stack[stack.len() - 1] as usize;
            let s1 = stack[stack.len() - 2] as usize;
            let popped = stack[..stack.len() - 1].to_vec();
            if let Some(&b0) = buffer.first() {
                let miss = u32::from(gold.head_of(s0) != b0 as usize);
                best = best.min(miss + self.search(popped.clone(), buffer.clone(), gold)?);
                if gold.proj_of(s0) > gold.proj_of(b0 as usize) {
                    let mut b = buffer.clone();
                    b.insert(1, s0 as u16);
                    best = best.min(self.search(popped.clone(), b, gold)?);
                }
            }
            let miss = u32::from(gold.head_of(s0) != s1);
            best = best.min(miss + self.search(popped, buffer, gold)?);
        }
        self.memo.insert(key, best);
        Some(best)
    }
}

fn lost_u16(stack: &[u16], buffer: &[u16], gold: &GoldTree) -> usize {
    let stack: Vec<usize> = stack.iter().map(|&x| x as usize).collect();
    let buffer: Vec<usize> = buffer.iter().map(|&x| x as usize).collect();
    lost_arcs(&stack, &buffer, gold)
}

/// One-off exact [`CostCache::cost`] with a fresh cache. Training loops
/// should hold a cache per sentence instead so the search is shared.
pub fn dynamic_cost(config: &Config, t: Transition, gold: &GoldTree) -> usize {
    CostCache::default().cost(config, t, gold)
}
