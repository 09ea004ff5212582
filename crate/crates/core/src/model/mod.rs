//! The XIMP network, its HIMP special case and molecule featurization.

mod config;
mod features;
mod himp;
mod ximp;

pub use config::{Abstraction, ModelConfig, ReadoutCombine, Sequencing};
pub use features::{
    atom_features, bond_features, featurize, input_width, MoleculeInput, ViewInput, ATOM_FEATURES,
    BOND_FEATURES, FEATURIZATION_VERSION,
};
pub use himp::{HimpConfig, HimpModel};
pub use ximp::{LayerState, XimpModel};

use crate::autodiff::GradError;
use crate::layers::LayerError;
use crate::reductions::ReductionError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}
