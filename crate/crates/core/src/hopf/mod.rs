//! Grafting, the ⋆ product, the coproducts `Δ` and `Δ⁺`, and preparation
//! maps.

mod coproduct;
mod graft;
mod preparation;
mod series;

pub use coproduct::{delta_of_product, Coproduct, ForestPlus, PlusTensor, Tensor, TensorSeries};
pub use graft::{graft, star, star_series, tree_product};
pub use preparation::{Character, PreparationMap};
pub use series::{Truncation, TreeSeries};
