//! Corpus construction and evaluation toolkit for biomedical machine
//! translation: streaming ingestion of bitext, bibliographic metadata and
//! UMLS terminology; overlap filtering, deduplication and seeded
//! partitioning; corpus BLEU; and a small IBM Model 1 baseline translator.

pub mod bleu;
pub mod exec;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod smt;
pub mod umls;
pub mod workflow;

pub use exec::Exec;
