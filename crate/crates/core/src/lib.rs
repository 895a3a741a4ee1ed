//! Tensor descriptors for 3D skeleton sequences built from linearized RBF kernels.
//!
//! Two descriptors are provided:
//!
//! - **SCK** (sequence compatibility kernel): per-joint third-order
//!   super-symmetric tensors over joint-position and time feature maps,
//!   power-normalized slice by slice and stored as upper simplices.
//! - **DCK** (dynamics compatibility kernel): per joint-pair third-order
//!   tensors over displacement and start/end time feature maps, whitened with
//!   an HOSVD-based power normalization.
//!
//! Dot products between descriptors approximate the corresponding exact
//! kernels, so a linear SVM ([`classifier`]) on the descriptors behaves like a
//! kernel machine on the sequences. Exact kernels ([`sck::sck_exact`],
//! [`dck::dck_exact`]) are provided for verification.

pub mod bench;
pub mod classifier;
pub mod config;
pub mod dataset;
pub mod dck;
pub mod descriptor;
pub mod error;
pub mod kernel;
pub mod pipeline;
pub mod preprocess;
pub mod sck;
pub mod tensor;

pub use error::{Error, Result};

/// Per-sequence normalizer placed in the `1/sqrt(Lambda)` slot of the tensor sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Normalization {
    /// Divide by the frame count (SCK) or joint count times frame count (DCK).
    #[default]
    FrameCount,
    /// Raw sums.
    None,
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}
