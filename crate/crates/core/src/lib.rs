//! Widths of weighted summation operators on trees.
//!
//! The crate covers h-regular tree generation, slowly varying factors and
//! their implicit inverses, widths of finite-dimensional diagonal balls,
//! balanced subtree partitions, the summation operator with its Hardy
//! constants and two-sided width bounds, metric trees and their
//! discretisation, and the exponent calculators for the decay laws.

pub mod balls;
pub mod error;
pub mod experiments;
pub mod exponents;
pub mod hardy;
pub mod linalg;
pub mod metric;
pub mod partition;
pub mod slow;
pub mod tree;

pub use balls::{conjugate, diag_width, order_by_kind, order_phi, order_psi, DiagonalSpec, WidthKind};
pub use error::{Error, Result};
pub use experiments::{fit_decay, run_width_sweep, ExperimentConfig, FitResult, SweepRow};
pub use exponents::{
    cube_exponent, metric_exponent, sobolev_exponent, tree_exponent, ExponentReport, RegimeParams,
    Selection, SigmaDescriptor, TreeParams,
};
pub use hardy::{
    discrete_upper_scheme, hardy_constant, lower_bound_disjoint, make_budget_plan, operator_norm_corner,
    WeightLaw, WeightedTreeOperator,
};
pub use linalg::singular_values;
pub use metric::{
    discretize_to_summation, volterra_norm_l2, MetricFunction, MetricPoint, MetricTree, PiecewiseConstant,
    Tiling,
};
pub use partition::{check_partition, check_refinement, partition_tree, SubtreePartition, VertexCost};
pub use slow::{check_slow_variation, eval_h, invert_scale, ImplicitInverse, SlowFactor};
pub use tree::{generate_h_tree, random_tree, HTreeSpec, RootedTree, VertexId};
