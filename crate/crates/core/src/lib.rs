//! Browsing-history anonymization by adding topic-aware decoy links.
//!
//! The crate quantifies a user's privacy as the entropy of their topic distribution and the
//! utility cost of manipulation as a cosine distance, chooses how many decoys to add per topic
//! by greedy local search, and draws concrete decoys from simulated histories of non-friends.
//! Around that core it ships a synthetic social-feed simulator, a likelihood-based linkage
//! attack, baseline polluters and an experiment harness that writes CSV reports.
//!
//! Modules in dependency order: [`domain`], [`metrics`], [`topicsel`], [`socialsim`],
//! [`linksel`], [`anonymizers`], [`attack`], [`evaluate`], [`experiment`], [`cli`].

pub mod anonymizers;
pub mod attack;
pub mod cli;
pub mod domain;
pub mod error;
pub mod evaluate;
pub mod experiment;
pub mod linksel;
pub mod metrics;
pub mod seed;
pub mod socialsim;
pub mod topicsel;

pub use error::{Error, Result};
