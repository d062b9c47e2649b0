pub mod channel;
pub mod posterior;
pub mod strategies;
pub mod theory;
pub mod sim;
pub mod cli;
