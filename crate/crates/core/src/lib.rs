pub mod asymptotics;
pub mod cli;
pub mod complex;
pub mod curve;
pub mod error;
pub mod extended;
pub mod interior;
pub mod oracle;
pub mod special;
pub mod szego;
pub mod transforms;
pub mod zeros;
