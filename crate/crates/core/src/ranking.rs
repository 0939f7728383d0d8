//! Per-topic global rank lists and percentile cutoffs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::corpus::{window_citations, Corpus};
use crate::country::{self, CountryCode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankingError {
    #[error("unknown topic {0:?}")]
    UnknownTopic(String),
    #[error("topic {0:?} has no records")]
    EmptyTopic(String),
    #[error("percentile level {0} outside (0, 1]")]
    InvalidLevel(f64),
    #[error("n_world must be positive")]
    EmptyWorld,
    #[error("id {0:?} is not in the rank list")]
    UnknownId(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedEntry {
    pub rank: u64,
    pub id: String,
    pub citations: u64,
    pub countries: BTreeSet<CountryCode>,
}

/// Papers of one topic in global order: most cited first, ties by ascending id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList {
    topic: String,
    entries: Vec<RankedEntry>,
    rank_of: HashMap<String, u64>,
}

impl RankedList {
    /// Sorts `(id, citations, countries)` triples and assigns ordinal ranks.
    pub fn from_entries(
        topic: impl Into<String>,
        papers: impl IntoIterator<Item = (String, u64, BTreeSet<CountryCode>)>,
    ) -> Self {
        let mut papers: Vec<_> = papers.into_iter().collect();
        papers.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let entries: Vec<RankedEntry> = papers
            .into_iter()
            .zip(1u64..)
            .map(|((id, citations, countries), rank)| RankedEntry {
                rank,
                id,
                citations,
                countries,
            })
            .collect();
        let rank_of = entries.iter().map(|e| (e.id.clone(), e.rank)).collect();
        Self {
            topic: topic.into(),
            entries,
            rank_of,
        }
    }

    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    pub fn n_world(&self) -> u64 {
        self.entries.len() as u64
    }

    pub fn rank_of(&self, id: &str) -> Option<u64> {
        self.rank_of.get(id).copied()
    }

    /// Writes `rank,id,citations,countries`, sorted by rank.
    pub fn write_csv(&self, out: impl Write) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["rank", "id", "citations", "countries"])?;
        for e in &self.entries {
            w.write_record([
                e.rank.to_string().as_str(),
                &e.id,
                &e.citations.to_string(),
                &country::join_codes(&e.countries),
            ])?;
        }
        w.flush()
    }
}

pub fn build_ranked_list(corpus: &Corpus, topic: &str) -> Result<RankedList, RankingError> {
    if !corpus.topics().contains(topic) {
        return Err(if corpus.diagnostics().input_topics.contains(topic) {
            RankingError::EmptyTopic(topic.to_string())
        } else {
            RankingError::UnknownTopic(topic.to_string())
        });
    }
    let window = corpus.window();
    Ok(RankedList::from_entries(
        topic,
        corpus.topic_records(topic).map(|r| {
            (
                r.id.clone(),
                window_citations(r, window),
                r.countries.clone(),
            )
        }),
    ))
}

/// Size of a top fraction of the world list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercentileCutoff {
    pub level: f64,
    pub cutoff_count: u64,
}

/// `level × n_world` rounded half away from zero, at least 1.
pub fn percentile_cutoff(n_world: u64, level: f64) -> Result<PercentileCutoff, RankingError> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(RankingError::InvalidLevel(level));
    }
    if n_world == 0 {
        return Err(RankingError::EmptyWorld);
    }
    let count = (level * n_world as f64).round().max(1.0) as u64;
    Ok(PercentileCutoff {
        level,
        cutoff_count: count,
    })
}

/// Global ranks of the eligible ids, ascending. Ranks are never recomputed within the subset.
pub fn entity_ranks<'a>(
    list: &RankedList,
    eligible_ids: impl IntoIterator<Item = &'a str>,
) -> Result<Vec<u64>, RankingError> {
    let mut ranks = eligible_ids
        .into_iter()
        .map(|id| {
            list.rank_of(id)
                .ok_or_else(|| RankingError::UnknownId(id.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    ranks.sort_unstable();
    ranks.dedup();
    Ok(ranks)
}

/// Lazily built rank lists, one per topic, each built at most once.
pub struct RankCache<'c> {
    corpus: &'c Corpus,
    lists: BTreeMap<String, OnceLock<Result<Arc<RankedList>, RankingError>>>,
}

impl<'c> RankCache<'c> {
    pub fn new(corpus: &'c Corpus) -> Self {
        let lists = corpus
            .topics()
            .iter()
            .chain(&corpus.diagnostics().input_topics)
            .map(|t| (t.clone(), OnceLock::new()))
            .collect();
        Self { corpus, lists }
    }

    pub fn corpus(&self) -> &'c Corpus {
        self.corpus
    }

    pub fn get(&self, topic: &str) -> Result<Arc<RankedList>, RankingError> {
        match self.lists.get(topic) {
            Some(cell) => cell
                .get_or_init(|| build_ranked_list(self.corpus, topic).map(Arc::new))
                .clone(),
            None => Err(RankingError::UnknownTopic(topic.to_string())),
        }
    }
}
