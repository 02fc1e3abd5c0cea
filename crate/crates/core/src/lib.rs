//! Product-monoid algebra, a procedural scene world with an exact
//! ground-truth action, and learned single-factor augmentations regularized
//! by compositionality, commutativity and equivariance.

pub mod algebra;
pub mod diffcore;
pub mod edt;
pub mod eval;
pub mod factors;
pub mod scenes;
pub mod splits;

pub use algebra::{ElemId, FiniteAction, LawReport, MonoidTable, Verification};
pub use factors::{FactorKind, FactorSpec, FactorTuple, ProductLabelSpace};
pub use scenes::{Dataset, RenderParams, Renderer, SceneImage};
