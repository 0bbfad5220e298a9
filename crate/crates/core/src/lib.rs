//! Instruction-bias analytics for natural-language task instructions.
//!
//! The crate is organised along the analysis pipeline:
//!
//! * [`corpus`] loads, validates and versions task records;
//! * [`textproc`] turns text into tokens, lemmas, POS classes and n-grams;
//! * [`biasmetrics`] computes diversity, similarity and component-bias metrics;
//! * [`embedspace`] embeds instructions, ranks neighbours and projects with t-SNE;
//! * [`relations`] builds the correlation graph and chord matrices;
//! * [`evalharness`] prompts a model client, scores with ROUGE-L and bins results;
//! * [`service`] ties everything into analysis sessions and headless reports.

pub mod biasmetrics;
pub mod corpus;
pub mod embedspace;
pub mod evalharness;
pub mod fixtures;
pub mod relations;
pub mod service;
pub mod textproc;
