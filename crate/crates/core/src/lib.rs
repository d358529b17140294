pub mod analytic;
pub mod error;
pub mod link;
pub mod physics;
pub mod reference;
pub mod sim;
mod special;
