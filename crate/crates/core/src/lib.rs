//! Wasserstein goodness-of-fit testing with Lipschitz neural critics.
//!
//! The distance between two empirical measures is estimated in its dual form,
//! as the largest mean difference achieved by a spectrally normalized ReLU
//! network ([`dual`]). Its sampling distribution is approximated by a
//! Gaussian multiplier bootstrap ([`bootstrap`]), which calibrates one- and
//! two-sample tests and confidence intervals ([`inference`]). Exact optimal
//! transport ([`transport`]) and an MMD permutation test ([`baselines`]) serve
//! as references.

pub mod baselines;
pub mod bootstrap;
pub mod datagen;
pub mod dual;
pub mod error;
pub mod inference;
pub mod nn;
pub mod par;
pub mod rng;
pub mod sample;
pub mod transport;

pub use error::{Error, Result};
pub use sample::Sample;
