//! Seeded synthetic corpora and a naive reference computation of the Rk-index.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{weighted::WeightedIndex, Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyses::{EntitySpec, SelectorKind, SubsetSelector};
use crate::corpus::{
    self, Aggregates, Corpus, DocType, PublicationRecord, WindowConfig, YearRange,
};
use crate::country::CountryCode;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("{field}: {reason}")]
    InvalidParam { field: &'static str, reason: String },
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> SimError {
    SimError::InvalidParam {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicWeight {
    pub name: String,
    pub weight: f64,
}

/// Number of extra countries on an international paper: starts at 1 and
/// grows by one with probability `q`, up to `cap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraCountries {
    pub q: f64,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn default_cap() -> usize {
    5
}

/// Lognormal citation counts, rounded down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CitationModel {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub n_papers: usize,
    pub topics: Vec<TopicWeight>,
    pub country_weights: BTreeMap<String, f64>,
    pub p_international: f64,
    pub collab_extra_countries: ExtraCountries,
    pub citation_model: CitationModel,
    pub seed: u64,
    #[serde(default = "default_pub_years")]
    pub publication_years: String,
    #[serde(default = "default_cite_years")]
    pub citation_years: String,
}

fn default_pub_years() -> String {
    "2014-2017".into()
}

fn default_cite_years() -> String {
    "2019-2022".into()
}

impl SimParams {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| invalid("params", e.to_string()))
    }

    pub fn window(&self) -> Result<WindowConfig, SimError> {
        let pubs: YearRange = self
            .publication_years
            .parse()
            .map_err(|e: corpus::CorpusError| invalid("publication_years", e.to_string()))?;
        let cites: YearRange = self
            .citation_years
            .parse()
            .map_err(|e: corpus::CorpusError| invalid("citation_years", e.to_string()))?;
        Ok(WindowConfig::new(pubs, cites))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_papers == 0 {
            return Err(invalid("n_papers", "n_papers must be positive"));
        }
        if self.topics.is_empty() {
            return Err(invalid("topics", "at least one topic required"));
        }
        if self
            .topics
            .iter()
            .any(|t| !(t.weight > 0.0 && t.weight.is_finite()))
        {
            return Err(invalid("topics", "weights must be positive"));
        }
        let names: BTreeSet<_> = self.topics.iter().map(|t| &t.name).collect();
        if names.len() != self.topics.len() {
            return Err(invalid("topics", "topic names must be distinct"));
        }
        if self.country_weights.is_empty() {
            return Err(invalid("country_weights", "at least one country required"));
        }
        for (code, w) in &self.country_weights {
            code.parse::<CountryCode>()
                .map_err(|e| invalid("country_weights", e.to_string()))?;
            if !(*w > 0.0 && w.is_finite()) {
                return Err(invalid(
                    "country_weights",
                    format!("weight for {code} must be positive"),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.p_international) {
            return Err(invalid("p_international", "must lie in [0, 1]"));
        }
        let extra = &self.collab_extra_countries;
        if !(0.0..1.0).contains(&extra.q) {
            return Err(invalid("collab_extra_countries", "q must lie in [0, 1)"));
        }
        if extra.cap == 0 {
            return Err(invalid("collab_extra_countries", "cap must be at least 1"));
        }
        if self.p_international > 0.0 && self.country_weights.len() < extra.cap + 1 {
            return Err(invalid(
                "collab_extra_countries",
                format!(
                    "cap {} needs at least {} countries, found {}",
                    extra.cap,
                    extra.cap + 1,
                    self.country_weights.len()
                ),
            ));
        }
        let m = &self.citation_model;
        if !m.mu.is_finite() || !(m.sigma >= 0.0 && m.sigma.is_finite()) {
            return Err(invalid(
                "citation_model",
                "mu must be finite and sigma >= 0",
            ));
        }
        self.window()?;
        Ok(())
    }
}

/// Draws the records of a synthetic corpus. Same params, same records.
pub fn generate_records(params: &SimParams) -> Result<Vec<PublicationRecord>, SimError> {
    params.validate()?;
    let window = params.window()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let topic_pick = WeightedIndex::new(params.topics.iter().map(|t| t.weight))
        .map_err(|e| invalid("topics", e.to_string()))?;
    let codes: Vec<CountryCode> = params
        .country_weights
        .keys()
        .map(|c| c.parse().expect("validated"))
        .collect();
    let weights: Vec<f64> = params.country_weights.values().copied().collect();
    let country_pick =
        WeightedIndex::new(&weights).map_err(|e| invalid("country_weights", e.to_string()))?;
    let sigma = params.citation_model.sigma;
    let lognormal = if sigma > 0.0 {
        Some(
            LogNormal::new(params.citation_model.mu, sigma)
                .map_err(|e| invalid("citation_model", e.to_string()))?,
        )
    } else {
        None
    };
    let pub_years = window.publication_years;
    let cite_year = window.citation_years.start();
    let width = params.n_papers.to_string().len().max(6);

    let mut records = Vec::with_capacity(params.n_papers);
    for i in 0..params.n_papers {
        let topic = params.topics[topic_pick.sample(&mut rng)].name.clone();
        let year = rng.random_range(pub_years.start()..=pub_years.end());

        let primary = country_pick.sample(&mut rng);
        let mut chosen = vec![primary];
        if rng.random_bool(params.p_international) {
            let mut k = 1;
            while k < params.collab_extra_countries.cap
                && rng.random_bool(params.collab_extra_countries.q)
            {
                k += 1;
            }
            for _ in 0..k {
                let remaining: Vec<usize> =
                    (0..codes.len()).filter(|j| !chosen.contains(j)).collect();
                let pick = WeightedIndex::new(remaining.iter().map(|&j| weights[j]))
                    .expect("positive weights");
                chosen.push(remaining[pick.sample(&mut rng)]);
            }
        }

        let cites = match &lognormal {
            Some(d) => d.sample(&mut rng).floor(),
            None => params.citation_model.mu.exp().floor(),
        };
        records.push(PublicationRecord {
            id: format!("s{:0width$}", i + 1),
            topic,
            year,
            countries: chosen.into_iter().map(|j| codes[j]).collect(),
            citations_by_year: [(cite_year, cites.max(0.0) as u64)].into(),
            doc_type: DocType::Article,
        });
    }
    Ok(records)
}

/// Generates and loads a corpus with the built-in aggregates.
pub fn generate(params: &SimParams) -> Result<Corpus, SimError> {
    let records = generate_records(params)?;
    Ok(corpus::load(
        records,
        params.window()?,
        Aggregates::builtin(),
        BTreeSet::new(),
    )?)
}

/// Builds a topic whose global list places each group's papers at the given ranks.
///
/// Rank `r` receives `n_world - r + 1` citations, so ranks are unambiguous.
/// Positions not claimed by a group get the `filler` country set.
pub fn embed_ranks(
    topic: &str,
    n_world: u64,
    groups: &[(BTreeSet<CountryCode>, Vec<u64>)],
    filler: &BTreeSet<CountryCode>,
) -> Vec<PublicationRecord> {
    let mut by_rank: BTreeMap<u64, &BTreeSet<CountryCode>> = BTreeMap::new();
    for (countries, ranks) in groups {
        for &r in ranks {
            by_rank.insert(r, countries);
        }
    }
    let width = n_world.to_string().len();
    (1..=n_world)
        .map(|r| PublicationRecord {
            id: format!("{topic}-{r:0width$}"),
            topic: topic.to_string(),
            year: 2015,
            countries: by_rank
                .get(&r)
                .map_or_else(|| filler.clone(), |c| (*c).clone()),
            citations_by_year: [(2020, n_world - r + 1)].into(),
            doc_type: DocType::Article,
        })
        .collect()
}

/// Recomputes a cell's Rk-index the slow way: full sort, linear filter and a
/// tenth root of the direct product. Shares no code with the analysis path.
pub fn oracle_rk(
    corpus: &Corpus,
    topic: &str,
    entity: &EntitySpec,
    selector: &SubsetSelector,
) -> Result<(usize, f64), String> {
    let cites = corpus.window().citation_years;
    let mut papers: Vec<(&str, u64, &BTreeSet<CountryCode>)> = Vec::new();
    for r in corpus.records() {
        if r.topic != topic {
            continue;
        }
        let mut total = 0u64;
        for (year, c) in &r.citations_by_year {
            if *year >= cites.start() && *year <= cites.end() {
                total += c;
            }
        }
        papers.push((r.id.as_str(), total, &r.countries));
    }
    if papers.is_empty() {
        return Err(format!("unknown topic {topic:?}"));
    }
    papers.sort_by(|a, b| {
        if a.1 != b.1 {
            b.1.cmp(&a.1)
        } else {
            a.0.cmp(b.0)
        }
    });

    let members = &entity.members;
    let mut ranks = Vec::new();
    for (i, (_, _, countries)) in papers.iter().enumerate() {
        let inside = countries.iter().filter(|c| members.contains(c)).count();
        let some = inside > 0;
        let all = inside == countries.len();
        let eligible = match selector.kind() {
            SelectorKind::Domestic => all,
            SelectorKind::Collaborative => some && !all,
            SelectorKind::CollaborativeExcluding => {
                let partner = &selector.partner().expect("partner").members;
                some && !all && !countries.iter().any(|c| partner.contains(c))
            }
            SelectorKind::EntityAll => some,
            SelectorKind::WorldExcluding => !some,
            SelectorKind::WorldAll => true,
        };
        if eligible {
            ranks.push(i as u64 + 1);
        }
    }
    if ranks.is_empty() {
        return Err("no eligible papers".to_string());
    }
    let n = ranks.len();
    let mut product = 1.0f64;
    for slot in 0..10 {
        let r = ranks.get(slot).copied().unwrap_or(papers.len() as u64);
        product *= r as f64 + 20.0;
    }
    Ok((n, 1000.0 / product.powf(0.1)))
}
