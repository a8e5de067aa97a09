//! Cleaning, segmentation, annotation and analytics for novels.
//!
//! The pipeline runs in phases over one book at a time: [`ingest`] reads raw
//! files and marks boilerplate, [`segmentation`] finds section headers,
//! [`linguistic`] tokenizes and tags, and [`characters`] builds the canonical
//! character list. Each phase reads and writes the [`xml::AnnotatedBook`] tree.
//! [`analytics`] and [`report`] then compute and emit per-book and corpus-level
//! results.

pub mod analytics;
pub mod characters;
pub mod config;
pub mod dedup;
pub mod error;
pub mod ingest;
pub mod lexicon;
pub mod segmentation;
pub mod linguistic;
pub mod pipeline;
pub mod report;
pub mod xml;

pub use error::{Error, Result};
pub use lexicon::Lexicons;
