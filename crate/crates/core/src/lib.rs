//! Knowledge-graph recommendation workbench.
//!
//! The crate is organised around the life cycle of a preference-elicitation
//! dataset:
//!
//! * [`kg`] loads the knowledge graph and computes structural statistics and
//!   (personalized) PageRank.
//! * [`dataset`] loads like/dislike/unknown observations and reproduces the
//!   descriptive analyses (long tail, co-ratings, coverage, ...).
//! * [`sampling`] and [`interview`] implement the three-phase rating interview.
//! * [`models`] holds the recommenders behind a single [`models::Recommender`]
//!   contract.
//! * [`eval`] builds leave-one-out splits and the add / substitute / remove
//!   experiments and runs them.
//!
//! Inner loops are data-parallel when the `parallel` feature (on by default) is
//! enabled. Results never depend on the feature or on the thread count.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod interview;
pub mod kg;
pub mod models;
pub mod par;
pub mod sampling;
pub mod synth;

pub use error::{Error, Result};
