//! Browser bindings for the Rk-index library.
//!
//! Each operation has a plain Rust function returning JSON (testable natively)
//! and a `#[wasm_bindgen]` wrapper that turns errors into JS exceptions.

use rk_core::analyses::{batch_table, threshold_summary, EntitySpec, SubsetSelector};
use rk_core::metrics::{rk_index, top_fraction_count};
use rk_core::ranking::percentile_cutoff;
use rk_core::simgen::{self, SimParams};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct RkOut {
    value: f64,
    rendered: String,
    slots: Vec<u64>,
    padded_slots: usize,
    n_entity: usize,
}

#[derive(Serialize)]
struct PercentileOut {
    level: f64,
    cutoff: u64,
    count: usize,
}

#[derive(Serialize)]
struct CellOut {
    entity: String,
    selector: String,
    topic: String,
    n: usize,
    value: Option<f64>,
    rendered: String,
}

#[derive(Serialize)]
struct ThresholdOut {
    level: f64,
    entries: Vec<(String, usize)>,
}

#[derive(Serialize)]
struct SimTableOut {
    records: usize,
    topics: Vec<String>,
    cells: Vec<CellOut>,
    thresholds: Vec<ThresholdOut>,
    markdown: String,
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, String> {
    text.split([',', ' ', '\n', '\t'])
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| format!("invalid {what}: {s:?}")))
        .collect()
}

fn to_json(v: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

/// Rk-index of a list of global ranks in a topic of `n_world` papers.
pub fn rk_from_ranks(ranks: &str, n_world: u64) -> Result<String, String> {
    let ranks: Vec<u64> = parse_list(ranks, "rank")?;
    let r = rk_index(&ranks, n_world).map_err(|e| e.to_string())?;
    to_json(&RkOut {
        value: r.value,
        slots: r.slot_ranks(n_world),
        rendered: r.rendered,
        padded_slots: r.padded_slots,
        n_entity: r.n_entity,
    })
}

/// Percentile cutoffs and how many of `ranks` fall within each.
pub fn percentile_counts(ranks: &str, n_world: u64, levels: &str) -> Result<String, String> {
    let ranks: Vec<u64> = parse_list(ranks, "rank")?;
    let levels: Vec<f64> = parse_list(levels, "level")?;
    let out = levels
        .into_iter()
        .map(|level| {
            let c = percentile_cutoff(n_world, level).map_err(|e| e.to_string())?;
            Ok(PercentileOut {
                level,
                cutoff: c.cutoff_count,
                count: top_fraction_count(&ranks, c),
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    to_json(&out)
}

/// Generates a corpus from `params_json` and tabulates the given entities and selectors over every topic.
pub fn simulate_table(
    params_json: &str,
    entities: &str,
    selectors: &str,
    levels: &str,
) -> Result<String, String> {
    let params = SimParams::from_json(params_json).map_err(|e| e.to_string())?;
    let corpus = simgen::generate(&params).map_err(|e| e.to_string())?;
    let entities = entities
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|n| EntitySpec::resolve(n, corpus.aggregates()).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let selectors = selectors
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| SubsetSelector::parse(s, corpus.aggregates()).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    let topics: Vec<String> = corpus.topics().iter().cloned().collect();
    let table = batch_table(&corpus, &entities, &topics, &selectors).map_err(|e| e.to_string())?;
    let levels: Vec<f64> = parse_list(levels, "level")?;
    let thresholds = if levels.is_empty() {
        Vec::new()
    } else {
        threshold_summary(&table, &levels)
            .map_err(|e| e.to_string())?
            .levels
            .into_iter()
            .map(|l| ThresholdOut {
                level: l.level,
                entries: l.entries,
            })
            .collect()
    };
    let mut markdown = Vec::new();
    table
        .write_markdown(&mut markdown, false)
        .map_err(|e| e.to_string())?;
    to_json(&SimTableOut {
        records: corpus.records().len(),
        topics,
        cells: table
            .cells
            .iter()
            .map(|c| CellOut {
                entity: c.entity.clone(),
                selector: c.selector.short_label(),
                topic: c.topic.clone(),
                n: c.n,
                value: c.value(),
                rendered: c.rendered(),
            })
            .collect(),
        thresholds,
        markdown: String::from_utf8(markdown).map_err(|e| e.to_string())?,
    })
}

#[wasm_bindgen(js_name = rkFromRanks)]
pub fn rk_from_ranks_js(ranks: &str, n_world: u32) -> Result<String, JsError> {
    rk_from_ranks(ranks, n_world.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = percentileCounts)]
pub fn percentile_counts_js(ranks: &str, n_world: u32, levels: &str) -> Result<String, JsError> {
    percentile_counts(ranks, n_world.into(), levels).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = simulateTable)]
pub fn simulate_table_js(
    params_json: &str,
    entities: &str,
    selectors: &str,
    levels: &str,
) -> Result<String, JsError> {
    simulate_table(params_json, entities, selectors, levels).map_err(|e| JsError::new(&e))
}
