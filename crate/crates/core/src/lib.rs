//! Accessibility persona pipeline.
//!
//! Reviews are ingested from VR stores ([`ingest`]), filtered and labelled
//! with a VR category and disability dimensions ([`curation`]), chunked and
//! embedded into a flat cosine index ([`index`]), and turned into personas
//! whose quotes are checked against the retrieved evidence ([`generate`]).
//! [`session`] drives the conversational loop on top.

pub mod clock;
pub mod curation;
pub mod generate;
pub mod index;
pub mod ingest;
pub mod jsonl;
pub mod session;
pub mod text;

pub use curation::{CuratedReview, DisabilityDimension, Prevalence, VrCategory};
pub use ingest::{AppDescriptor, RawReview, StoreId};
