//! Logo localization and recognition without box annotations: a deep
//! Q-network moves a box over the image, rewarded by the confidence of a
//! jointly trained classifier.

pub mod agent;
pub mod error;
pub mod evalcli;
pub mod locenv;
pub mod numkit;
pub mod pipeline;
pub mod rng;
pub mod synthgen;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/boxes-and-actions.md")]
    mod boxes_and_actions {}
    #[doc = include_str!("../../../book/src/rewards.md")]
    mod rewards {}
    #[doc = include_str!("../../../book/src/episodes.md")]
    mod episodes {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
}
