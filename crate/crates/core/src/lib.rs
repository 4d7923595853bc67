//! Weakly-supervised disentanglement learning from pairs of observations.
//!
//! The library covers the full pipeline: procedural ground-truth-factor
//! datasets ([`factor`]), weakly-supervised pair generation ([`pairs`]),
//! encoder/decoder networks with the plain beta-VAE objective ([`vae`]),
//! the adaptive group objectives that infer the shared factor set per pair
//! ([`weak`]), supervised disentanglement metrics ([`metrics`]), downstream
//! usefulness evaluations ([`eval`]), an empirical identifiability test
//! bench ([`ident`]), and the experiment harness ([`exp`]).

pub mod audit;
pub mod eval;
pub mod exp;
pub mod factor;
pub mod ident;
pub mod learn;
pub mod metrics;
pub mod nn;
pub mod pairs;
pub mod stats;
pub mod vae;
pub mod weak;

pub use factor::{FactorSpace, FactorVector, GroundTruthDataset};




