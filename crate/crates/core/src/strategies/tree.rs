use super::{OpCounter, StrategyError, TIE_TOL};
use crate::posterior::Posterior;

/// Node `H_l^m` of the dyadic tree over `2^L` bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TreeNode {
    pub level: u32,
    pub index: usize,
}

impl TreeNode {
    pub const ROOT: TreeNode = TreeNode { level: 0, index: 0 };

    /// Inclusive bin range `[m·2^{L−l} + 1, (m+1)·2^{L−l}]`.
    pub fn interval(&self, levels: u32) -> (usize, usize) {
        let width = 1usize << (levels - self.level);
        (self.index * width + 1, (self.index + 1) * width)
    }

    pub fn children(&self) -> [TreeNode; 2] {
        let level = self.level + 1;
        [
            TreeNode { level, index: 2 * self.index },
            TreeNode { level, index: 2 * self.index + 1 },
        ]
    }

    pub fn mass<P: Posterior + ?Sized>(&self, post: &P, levels: u32) -> f64 {
        let (lo, hi) = self.interval(levels);
        post.range_mass(lo, hi)
    }

    /// Whether `(lo, hi)` is exactly some node's interval.
    pub fn from_interval(lo: usize, hi: usize, levels: u32) -> Option<TreeNode> {
        let len = hi.checked_sub(lo)? + 1;
        if !len.is_power_of_two() || len > 1usize << levels || !(lo - 1).is_multiple_of(len) {
            return None;
        }
        Some(TreeNode { level: levels - len.trailing_zeros(), index: (lo - 1) / len })
    }
}

/// `log2(n)` for a power-of-two bin count.
pub fn dyadic_levels(n_bins: usize) -> Result<u32, StrategyError> {
    if n_bins == 0 || !n_bins.is_power_of_two() {
        return Err(StrategyError::NotDyadic { n_bins });
    }
    Ok(n_bins.trailing_zeros())
}

/// Deepest node carrying mass at least 1/2, with its mass.
///
/// Descends from the root into every child that still holds half the mass.
/// Both children qualify only when each carries exactly 1/2 (up to
/// [`TIE_TOL`]); the winner is then the heavier one at the deepest level,
/// the smaller index on ties.
pub fn heaviest_node<P: Posterior + ?Sized>(
    post: &P,
    ops: &mut OpCounter,
) -> Result<(TreeNode, f64), StrategyError> {
    let levels = dyadic_levels(post.n_bins())?;
    let mut frontier = vec![(TreeNode::ROOT, 1.0)];
    loop {
        if frontier[0].0.level == levels {
            break;
        }
        let mut next = Vec::with_capacity(2);
        for (node, _) in &frontier {
            for child in node.children() {
                ops.tick();
                let m = child.mass(post, levels);
                if m >= 0.5 - TIE_TOL {
                    next.push((child, m));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    let mut best = frontier[0];
    for &cand in &frontier[1..] {
        if cand.1 > best.1 + TIE_TOL {
            best = cand;
        }
    }
    Ok(best)
}
