pub mod autodiff;
pub mod data;
pub mod harness;
pub mod layers;
pub mod model;
pub mod parsing;
