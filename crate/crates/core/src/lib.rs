pub mod algebra;
pub mod blowup;
pub mod burns_simanca;
pub mod cli;
pub mod curvature;
pub mod error;
pub mod jet;
pub mod models;
pub mod quadrature;
pub mod stability;
