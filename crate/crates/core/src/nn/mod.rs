//! Minimal neural-network stack behind the VAE models: flat parameter
//! arenas, im2col convolutions on hand-rolled SIMD kernels, and Adam.

pub mod adam;
pub mod conv_direct;
pub mod kernels;
pub mod layers;
pub mod real;
