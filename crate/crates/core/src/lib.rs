pub mod autodiff;
pub mod chem;
pub mod expressivity;
pub mod harness;
pub mod layers;
pub mod model;
pub mod reductions;
