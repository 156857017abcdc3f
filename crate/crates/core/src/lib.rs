//! Loss concealment for tiled deep-feature tensors.
//!
//! A feature tensor is tiled into one square mosaic, quantized to 8 bits, and
//! shipped as fixed-height row slabs over a lossy datagram channel. Whatever
//! arrives is reassembled into a holed mosaic plus a loss mask; the holes are
//! filled either by PDE inpainting on the mosaic ([`inpaint`]) or by low-rank
//! completion of the untiled tensor ([`lowrank`]). The [`flow`] module is a
//! small numerical lab verifying that the transport equation behind the
//! inpainting model survives convolution, pointwise activation, local-max
//! pooling, and downscaling, which is what justifies running image inpainting
//! on feature-space mosaics in the first place.
//!
//! Everything is deterministic: the loss channel and all synthetic data are
//! driven by the seeded generator in [`rng`], and every engine produces
//! bit-identical output for identical input.

pub mod fileio;
pub mod flow;
pub mod fmm;
pub mod inpaint;
pub mod lowrank;
pub mod metrics;
pub mod packet;
pub mod rng;
pub mod tensor;

pub use inpaint::{MaskedImage, NavierStokesParams, TeleaParams};
pub use packet::{ChannelConfig, LossMask, Packet, Reassembly};
pub use tensor::{FeatureTensor, Mosaic, QuantParams, QuantizedMosaic, TileLayout};
