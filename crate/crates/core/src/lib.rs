//! Training, stitching and certification of knowledge-graph representations.
//!
//! Objects of a knowledge graph are embedded as points in `R^d` and a small
//! MLP decoder maps a pair of embeddings to one link probability per
//! relation. The crate provides:
//!
//! - [`kg`]: knowledge graphs, family-tree generation and kinship derivation,
//!   logical property checks, train/test splits.
//! - [`diff`]: a dense 2-D tensor type, a reverse-mode tape and AdamW.
//! - [`train`]: joint embedding + decoder training and capacity sweeps.
//! - [`cone`]: the axis-aligned cone and Heaviside reference decoders and
//!   exhaustive optimality certification.
//! - [`align`]: almost-affine stitching (AAT) equivalence scores, linear CKA,
//!   PCA and feature alignment.
//! - [`prune`]: breadth-first pruning of a graph against a relation oracle.
//!
//! Everything here is `no_std` + `alloc`; file formats, figures and the
//! command line live in the `kgstitch` crate.

#![no_std]

extern crate alloc;

pub mod align;
pub mod cone;
pub mod diff;
mod error;
pub mod kg;
pub mod prune;
pub mod stats;
pub mod train;

pub use error::{Error, Result};

/// Derives a child seed from a parent seed and a stream index (SplitMix64).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
