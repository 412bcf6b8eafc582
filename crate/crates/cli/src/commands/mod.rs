pub mod audit;
pub mod demo;
pub mod probe;
pub mod train;
