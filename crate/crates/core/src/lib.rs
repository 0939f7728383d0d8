//! Rank-based citation analytics.
//!
//! Papers of a topic are ranked globally by the citations they receive in a
//! citation window. An entity (a country or a group of countries) is scored
//! by the Rk-index of its ten best global ranks. Selections never re-rank:
//! a domestic, collaborative or counterfactual subset is always scored with
//! positions taken from the full topic list.
//!
//! Module map:
//! - [`corpus`]: record model, JSONL/CSV parsing, window folding, loading.
//! - [`ranking`]: per-topic rank lists and percentile cutoffs.
//! - [`metrics`]: the Rk-index, top-fraction counts, rendering.
//! - [`analyses`]: entity selectors, tables, thresholds, ratios, counterfactuals.
//! - [`simgen`]: seeded synthetic corpora and a naive reference computation.

pub mod analyses;
pub mod corpus;
pub mod country;
pub mod metrics;
pub mod ranking;
pub mod simgen;

pub use analyses::{
    analyze_cell, batch_table, select, AnalysisCell, AnalysisTable, EntitySpec, SelectorKind,
    SubsetSelector,
};
pub use corpus::{load, parse_records, Corpus, PublicationRecord, RecordFormat, WindowConfig};
pub use country::CountryCode;
pub use metrics::{render_rk, rk_index, top_fraction_count, RkResult};
pub use ranking::{build_ranked_list, entity_ranks, percentile_cutoff, RankedList};
