pub mod exact1d;
pub mod grid;
pub mod ot1d;
pub mod poisson;
pub mod projection;
pub mod sim;
pub mod transport;
pub mod velocity;

#[cfg(test)]
pub(crate) mod dense;
