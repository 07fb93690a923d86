//! Shared inputs for the benchmarks.

use hwidths_core::{generate_h_tree, HTreeSpec, RootedTree, WeightLaw, WeightedTreeOperator};

/// Binary h-tree of the given depth.
pub fn binary(depth: usize) -> RootedTree {
    generate_h_tree(&HTreeSpec::new(1.0, 1, depth)).expect("valid spec")
}

/// `S_{u,w}` with `κ_u = κ_w = 0.5` on a binary h-tree.
pub fn operator(depth: usize) -> WeightedTreeOperator {
    WeightedTreeOperator::from_law(binary(depth), &WeightLaw::new(0.5, 0.5, 1)).expect("valid law")
}
