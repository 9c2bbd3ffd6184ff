//! A small variational-form compiler for finite element element tensors.

pub mod dsl;
pub mod elements;
pub mod harness;
pub mod kernel;
pub mod lowering;
pub mod quadrature;
pub mod quadrep;
pub mod tensorrep;

#[cfg(test)]
mod testutil;
