pub mod cli;
pub mod crypto;
pub mod ids;
pub mod protocol;
pub mod radio;
pub mod sim;
pub mod trust;
