//! Entity selections and the analysis battery built on them: country tables,
//! threshold summaries, collaboration ratios and the two exclusion
//! counterfactuals.
//!
//! Every selection is scored with ranks from the full topic list. Removing
//! papers from a selection never improves the ranks of the papers that remain.
//!
//! An aggregate entity such as the EU counts a paper as domestic when all of
//! its countries are members, so intra-EU multinational papers are domestic.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Aggregates, Corpus};
use crate::country::CountryCode;
use crate::metrics::{format_value, rk_index, RkResult, RENDER_FLOOR, RK_SLOTS};
use crate::ranking::{entity_ranks, RankCache, RankingError};

/// Placeholder for cells without a score.
pub const EMPTY_CELL: &str = "—";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
    #[error("unknown selector {0:?}")]
    UnknownSelector(String),
    #[error("selector {0} requires a partner")]
    MissingPartner(SelectorKind),
    #[error("selector {0} does not take a partner")]
    UnexpectedPartner(SelectorKind),
    #[error("partner {partner:?} overlaps entity {entity:?}")]
    PartnerOverlap { entity: String, partner: String },
    #[error(transparent)]
    Ranking(#[from] RankingError),
    #[error("{0} list must not be empty")]
    EmptyInput(&'static str),
    #[error("threshold levels must be positive and strictly ascending")]
    InvalidLevels,
}

/// A country or a named group of countries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EntitySpec {
    pub name: String,
    pub members: BTreeSet<CountryCode>,
}

impl EntitySpec {
    pub fn country(name: impl Into<String>, code: CountryCode) -> Self {
        Self {
            name: name.into(),
            members: [code].into(),
        }
    }

    pub fn aggregate(name: impl Into<String>, members: BTreeSet<CountryCode>) -> Self {
        Self {
            name: name.into(),
            members,
        }
    }

    /// Aggregate names win over country names; the given spelling is kept as display name.
    pub fn resolve(name: &str, aggregates: &Aggregates) -> Result<Self, AnalysisError> {
        let name = name.trim();
        if let Some(members) = aggregates.get(name) {
            return Ok(Self::aggregate(name, members.clone()));
        }
        CountryCode::from_name_or_code(name)
            .map(|code| Self::country(name, code))
            .map_err(|_| AnalysisError::UnknownEntity(name.to_string()))
    }

    fn inside(&self, countries: &BTreeSet<CountryCode>) -> bool {
        countries.is_subset(&self.members)
    }

    fn touches(&self, countries: &BTreeSet<CountryCode>) -> bool {
        !countries.is_disjoint(&self.members)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SelectorKind {
    Domestic,
    Collaborative,
    CollaborativeExcluding,
    EntityAll,
    WorldExcluding,
    WorldAll,
}

impl SelectorKind {
    pub const ALL: [SelectorKind; 6] = [
        SelectorKind::Domestic,
        SelectorKind::Collaborative,
        SelectorKind::CollaborativeExcluding,
        SelectorKind::EntityAll,
        SelectorKind::WorldExcluding,
        SelectorKind::WorldAll,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SelectorKind::Domestic => "domestic",
            SelectorKind::Collaborative => "collaborative",
            SelectorKind::CollaborativeExcluding => "collaborative_excluding",
            SelectorKind::EntityAll => "entity_all",
            SelectorKind::WorldExcluding => "world_excluding",
            SelectorKind::WorldAll => "world_all",
        }
    }

    fn needs_partner(&self) -> bool {
        matches!(self, SelectorKind::CollaborativeExcluding)
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubsetSelector {
    kind: SelectorKind,
    partner: Option<EntitySpec>,
}

impl SubsetSelector {
    pub fn new(kind: SelectorKind, partner: Option<EntitySpec>) -> Result<Self, AnalysisError> {
        match (kind.needs_partner(), partner.is_some()) {
            (true, false) => Err(AnalysisError::MissingPartner(kind)),
            (false, true) => Err(AnalysisError::UnexpectedPartner(kind)),
            _ => Ok(Self { kind, partner }),
        }
    }

    /// Any kind that takes no partner.
    pub fn simple(kind: SelectorKind) -> Self {
        Self::new(kind, None).expect("kind without partner")
    }

    pub fn domestic() -> Self {
        Self::simple(SelectorKind::Domestic)
    }

    pub fn collaborative() -> Self {
        Self::simple(SelectorKind::Collaborative)
    }

    pub fn excluding(partner: EntitySpec) -> Self {
        Self {
            kind: SelectorKind::CollaborativeExcluding,
            partner: Some(partner),
        }
    }

    pub fn kind(&self) -> SelectorKind {
        self.kind
    }

    pub fn partner(&self) -> Option<&EntitySpec> {
        self.partner.as_ref()
    }

    /// Parses `domestic`/`D`, `collaborative`/`C`, `collaborative_excluding:PARTNER`/`Cx:PARTNER`,
    /// `entity_all`/`A`, `world_excluding`/`Wx`, `world_all`/`W`.
    pub fn parse(text: &str, aggregates: &Aggregates) -> Result<Self, AnalysisError> {
        let text = text.trim();
        let (head, partner) = match text.split_once(':') {
            Some((h, p)) => (h.trim(), Some(EntitySpec::resolve(p, aggregates)?)),
            None => (text, None),
        };
        let kind = head.parse::<SelectorKind>()?;
        Self::new(kind, partner)
    }

    /// Checks the partner against the entity it will be applied to.
    pub fn check(&self, entity: &EntitySpec) -> Result<(), AnalysisError> {
        if let Some(p) = &self.partner {
            if !p.members.is_disjoint(&entity.members) {
                return Err(AnalysisError::PartnerOverlap {
                    entity: entity.name.clone(),
                    partner: p.name.clone(),
                });
            }
        }
        Ok(())
    }

    /// Does a paper with these countries belong to the selection for `entity`?
    pub fn matches(&self, entity: &EntitySpec, countries: &BTreeSet<CountryCode>) -> bool {
        match self.kind {
            SelectorKind::Domestic => entity.inside(countries),
            SelectorKind::Collaborative => entity.touches(countries) && !entity.inside(countries),
            SelectorKind::CollaborativeExcluding => {
                entity.touches(countries)
                    && !entity.inside(countries)
                    && self.partner.as_ref().is_some_and(|p| !p.touches(countries))
            }
            SelectorKind::EntityAll => entity.touches(countries),
            SelectorKind::WorldExcluding => !entity.touches(countries),
            SelectorKind::WorldAll => true,
        }
    }

    /// Machine label for CSV, e.g. `collaborative_excluding:USA`.
    pub fn label(&self) -> String {
        match &self.partner {
            Some(p) => format!("{}:{}", self.kind, p.name),
            None => self.kind.to_string(),
        }
    }

    /// Short row tag, e.g. `D`, `C`, `C excl. USA`.
    pub fn short_label(&self) -> String {
        match self.kind {
            SelectorKind::Domestic => "D".into(),
            SelectorKind::Collaborative => "C".into(),
            SelectorKind::CollaborativeExcluding => {
                format!(
                    "C excl. {}",
                    self.partner.as_ref().map_or("?", |p| p.name.as_str())
                )
            }
            SelectorKind::EntityAll => "all".into(),
            SelectorKind::WorldExcluding => "world excl.".into(),
            SelectorKind::WorldAll => "world".into(),
        }
    }
}

impl FromStr for SelectorKind {
    type Err = AnalysisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "domestic" | "D" => SelectorKind::Domestic,
            "collaborative" | "C" => SelectorKind::Collaborative,
            "collaborative_excluding" | "Cx" => SelectorKind::CollaborativeExcluding,
            "entity_all" | "A" => SelectorKind::EntityAll,
            "world_excluding" | "Wx" => SelectorKind::WorldExcluding,
            "world_all" | "W" => SelectorKind::WorldAll,
            other => return Err(AnalysisError::UnknownSelector(other.to_string())),
        })
    }
}

/// Ids of the topic's papers chosen by `selector` relative to `entity`.
pub fn select(
    corpus: &Corpus,
    topic: &str,
    entity: &EntitySpec,
    selector: &SubsetSelector,
) -> Result<BTreeSet<String>, AnalysisError> {
    selector.check(entity)?;
    if !corpus.topics().contains(topic) {
        return Err(RankingError::UnknownTopic(topic.to_string()).into());
    }
    Ok(corpus
        .topic_records(topic)
        .filter(|r| selector.matches(entity, &r.countries))
        .map(|r| r.id.clone())
        .collect())
}

/// Why a cell carries no score.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellIssue {
    NoEligiblePapers,
    Failed(String),
}

impl fmt::Display for CellIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellIssue::NoEligiblePapers => f.write_str("no eligible papers"),
            CellIssue::Failed(msg) => f.write_str(msg),
        }
    }
}

/// Paper count and Rk-index of one (entity, topic, selector).
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisCell {
    pub entity: String,
    pub topic: String,
    pub selector: SubsetSelector,
    pub n: usize,
    pub n_world: u64,
    pub rk: Result<RkResult, CellIssue>,
}

impl AnalysisCell {
    fn failed(
        entity: &EntitySpec,
        topic: &str,
        selector: &SubsetSelector,
        err: AnalysisError,
    ) -> Self {
        Self {
            entity: entity.name.clone(),
            topic: topic.to_string(),
            selector: selector.clone(),
            n: 0,
            n_world: 0,
            rk: Err(CellIssue::Failed(err.to_string())),
        }
    }

    pub fn value(&self) -> Option<f64> {
        self.rk.as_ref().ok().map(|r| r.value)
    }

    pub fn rendered(&self) -> String {
        match &self.rk {
            Ok(r) => r.rendered.clone(),
            Err(_) => EMPTY_CELL.to_string(),
        }
    }

    /// Ten-slot rank vector (padding included), if scored.
    pub fn slot_ranks(&self) -> Option<Vec<u64>> {
        self.rk.as_ref().ok().map(|r| r.slot_ranks(self.n_world))
    }

    /// Rendered value, or full precision in `precise` mode.
    pub fn display_value(&self, precise: bool) -> String {
        match (&self.rk, precise) {
            (Ok(r), true) => format_value(r.value, true),
            _ => self.rendered(),
        }
    }
}

pub fn analyze_cell(
    corpus: &Corpus,
    topic: &str,
    entity: &EntitySpec,
    selector: &SubsetSelector,
) -> Result<AnalysisCell, AnalysisError> {
    analyze_cell_cached(&RankCache::new(corpus), topic, entity, selector)
}

/// [`analyze_cell`] reusing rank lists from `cache`.
pub fn analyze_cell_cached(
    cache: &RankCache<'_>,
    topic: &str,
    entity: &EntitySpec,
    selector: &SubsetSelector,
) -> Result<AnalysisCell, AnalysisError> {
    let ids = select(cache.corpus(), topic, entity, selector)?;
    let list = cache.get(topic)?;
    let ranks = entity_ranks(&list, ids.iter().map(String::as_str))?;
    let rk = rk_index(&ranks, list.n_world()).map_err(|e| match e {
        crate::metrics::MetricsError::NoEligiblePapers => CellIssue::NoEligiblePapers,
        other => CellIssue::Failed(other.to_string()),
    });
    Ok(AnalysisCell {
        entity: entity.name.clone(),
        topic: topic.to_string(),
        selector: selector.clone(),
        n: ids.len(),
        n_world: list.n_world(),
        rk,
    })
}

/// Cells for every (entity, selector, topic), in that nesting order.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisTable {
    pub entities: Vec<String>,
    pub topics: Vec<String>,
    pub selectors: Vec<SubsetSelector>,
    pub cells: Vec<AnalysisCell>,
}

/// Builds the table; cell-level failures are recorded in the cell, never raised.
pub fn batch_table(
    corpus: &Corpus,
    entities: &[EntitySpec],
    topics: &[String],
    selectors: &[SubsetSelector],
) -> Result<AnalysisTable, AnalysisError> {
    if entities.is_empty() {
        return Err(AnalysisError::EmptyInput("entity"));
    }
    if topics.is_empty() {
        return Err(AnalysisError::EmptyInput("topic"));
    }
    if selectors.is_empty() {
        return Err(AnalysisError::EmptyInput("selector"));
    }
    let cache = RankCache::new(corpus);
    let jobs: Vec<(&EntitySpec, &SubsetSelector, &String)> = entities
        .iter()
        .flat_map(|e| {
            selectors
                .iter()
                .flat_map(move |s| topics.iter().map(move |t| (e, s, t)))
        })
        .collect();
    let cells = jobs
        .into_par_iter()
        .map(|(e, s, t)| {
            analyze_cell_cached(&cache, t, e, s)
                .unwrap_or_else(|err| AnalysisCell::failed(e, t, s, err))
        })
        .collect();
    Ok(AnalysisTable {
        entities: entities.iter().map(|e| e.name.clone()).collect(),
        topics: topics.to_vec(),
        selectors: selectors.to_vec(),
        cells,
    })
}

impl AnalysisTable {
    pub fn cell(
        &self,
        entity: &str,
        topic: &str,
        selector: &SubsetSelector,
    ) -> Option<&AnalysisCell> {
        self.cells
            .iter()
            .find(|c| c.entity == entity && c.topic == topic && &c.selector == selector)
    }

    /// `entity,topic,selector,n,rk_value,rk_rendered,padded_slots`
    pub fn write_csv(&self, out: impl Write, precise: bool) -> std::io::Result<()> {
        write_cells_csv(&self.cells, out, precise)
    }

    /// Country-table layout: one row per entity and selector, an N and Rk column per topic.
    pub fn write_markdown(&self, mut out: impl Write, precise: bool) -> std::io::Result<()> {
        write!(out, "| Entity |")?;
        for t in &self.topics {
            write!(out, " {t} N | {t} Rk |")?;
        }
        writeln!(out)?;
        write!(out, "|---|")?;
        for _ in &self.topics {
            write!(out, "---:|---:|")?;
        }
        writeln!(out)?;
        for row in self.cells.chunks(self.topics.len()) {
            let first = &row[0];
            write!(
                out,
                "| {}({}) |",
                first.entity,
                first.selector.short_label()
            )?;
            for c in row {
                write!(out, " {} | {} |", c.n, c.display_value(precise))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Shared CSV writer for table-shaped outputs.
pub fn write_cells_csv<'a>(
    cells: impl IntoIterator<Item = &'a AnalysisCell>,
    out: impl Write,
    precise: bool,
) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record([
        "entity",
        "topic",
        "selector",
        "n",
        "rk_value",
        "rk_rendered",
        "padded_slots",
    ])?;
    for c in cells {
        let (value, padded) = match &c.rk {
            Ok(r) => (format_value(r.value, precise), r.padded_slots.to_string()),
            Err(_) => (String::new(), String::new()),
        };
        w.write_record([
            c.entity.as_str(),
            &c.topic,
            &c.selector.label(),
            &c.n.to_string(),
            &value,
            &c.rendered(),
            &padded,
        ])?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdLevel {
    pub level: f64,
    /// (entity label, topics above the level), most topics first.
    pub entries: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSummary {
    pub levels: Vec<ThresholdLevel>,
}

/// Per level, how many topics each entity scores strictly above it.
///
/// Entities are labelled by name alone when the table has a single selector,
/// otherwise as `name(D)`, `name(C)`, and so on.
pub fn threshold_summary(
    table: &AnalysisTable,
    levels: &[f64],
) -> Result<ThresholdSummary, AnalysisError> {
    if levels.is_empty()
        || levels.iter().any(|l| !(l.is_finite() && *l > 0.0))
        || levels.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(AnalysisError::InvalidLevels);
    }
    let single = table.selectors.len() == 1;
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for row in table.cells.chunks(table.topics.len()) {
        let c = &row[0];
        let label = if single {
            c.entity.clone()
        } else {
            format!("{}({})", c.entity, c.selector.short_label())
        };
        groups.push((label, row.iter().filter_map(AnalysisCell::value).collect()));
    }
    let levels = levels
        .iter()
        .map(|&level| {
            let mut entries: Vec<(String, usize)> = groups
                .iter()
                .map(|(label, values)| {
                    (label.clone(), values.iter().filter(|v| **v > level).count())
                })
                .filter(|(_, n)| *n > 0)
                .collect();
            entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            ThresholdLevel { level, entries }
        })
        .collect();
    Ok(ThresholdSummary { levels })
}

impl ThresholdSummary {
    /// `level,entity,count`
    pub fn write_csv(&self, out: impl Write) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["level", "entity", "count"])?;
        for l in &self.levels {
            for (entity, count) in &l.entries {
                w.write_record([l.level.to_string(), entity.clone(), count.to_string()])?;
            }
        }
        w.flush()
    }

    pub fn write_markdown(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "# Topics exceeding Rk thresholds")?;
        for l in &self.levels {
            let list = l
                .entries
                .iter()
                .map(|(e, n)| format!("{e} ({n})"))
                .collect::<Vec<_>>();
            let list = if list.is_empty() {
                EMPTY_CELL.to_string()
            } else {
                list.join(", ")
            };
            writeln!(out)?;
            writeln!(out, "Rk > {}: {}", l.level, list)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub entity: String,
    pub topic: String,
    /// Collaborative over domestic Rk; `None` when the domestic score is missing or below 0.20.
    pub ratio: Option<f64>,
}

/// Collaborative/domestic Rk ratio for every entity and topic holding both cells.
pub fn ratio_report(table: &AnalysisTable) -> Vec<RatioRow> {
    let d = SubsetSelector::domestic();
    let c = SubsetSelector::collaborative();
    let mut rows = Vec::new();
    for entity in &table.entities {
        for topic in &table.topics {
            let (Some(dc), Some(cc)) =
                (table.cell(entity, topic, &d), table.cell(entity, topic, &c))
            else {
                continue;
            };
            let ratio = match (dc.value(), cc.value()) {
                (Some(dv), Some(cv)) if dv >= RENDER_FLOOR => Some(cv / dv),
                _ => None,
            };
            rows.push(RatioRow {
                entity: entity.clone(),
                topic: topic.clone(),
                ratio,
            });
        }
    }
    rows
}

/// `entity,topic,ratio_or_NA`
pub fn write_ratios_csv(rows: &[RatioRow], out: impl Write, precise: bool) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["entity", "topic", "ratio_or_NA"])?;
    for r in rows {
        let ratio = r
            .ratio
            .map_or_else(|| "NA".to_string(), |v| format_value(v, precise));
        w.write_record([r.entity.as_str(), &r.topic, &ratio])?;
    }
    w.flush()
}

/// Entity-only papers next to every paper the entity is absent from.
pub fn world_exclusion_compare(
    cache: &RankCache<'_>,
    topic: &str,
    entity: &EntitySpec,
) -> Result<(AnalysisCell, AnalysisCell), AnalysisError> {
    let domestic = analyze_cell_cached(cache, topic, entity, &SubsetSelector::domestic())?;
    let rest = analyze_cell_cached(
        cache,
        topic,
        entity,
        &SubsetSelector::simple(SelectorKind::WorldExcluding),
    )?;
    Ok((domestic, rest))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartnerExclusion {
    pub all: AnalysisCell,
    pub excluded: AnalysisCell,
    /// Whether every slot rank of `excluded` is >= the matching slot of `all`.
    pub pointwise_ok: bool,
}

/// All collaborations of `entity` next to those without `partner`.
pub fn partner_exclusion_compare(
    cache: &RankCache<'_>,
    topic: &str,
    entity: &EntitySpec,
    partner: &EntitySpec,
) -> Result<PartnerExclusion, AnalysisError> {
    let excl_selector = SubsetSelector::excluding(partner.clone());
    excl_selector.check(entity)?;
    let all = analyze_cell_cached(cache, topic, entity, &SubsetSelector::collaborative())?;
    let excluded = analyze_cell_cached(cache, topic, entity, &excl_selector)?;
    let pointwise_ok = match (excluded.slot_ranks(), all.slot_ranks()) {
        (Some(ex), Some(al)) => pointwise_ge(&ex, &al),
        // Nothing left after exclusion: no ranks to compare.
        (None, _) => true,
        (Some(_), None) => false,
    };
    Ok(PartnerExclusion {
        all,
        excluded,
        pointwise_ok,
    })
}

/// `a[i] >= b[i]` for every slot.
pub fn pointwise_ge(a: &[u64], b: &[u64]) -> bool {
    a.len() == b.len() && a.len() <= RK_SLOTS && a.iter().zip(b).all(|(x, y)| x >= y)
}

/// One topic of a counterfactual comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualRow {
    pub topic: String,
    pub left: AnalysisCell,
    pub right: AnalysisCell,
    pub world: AnalysisCell,
    /// Slot-wise rank check, partner mode only.
    pub pointwise_ok: Option<bool>,
}

/// Paired columns: all collaborations vs. collaborations without a partner,
/// or domestic papers vs. the world without the entity.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualReport {
    pub entity: String,
    pub partner: Option<String>,
    pub rows: Vec<CounterfactualRow>,
}

pub fn counterfactual_report(
    corpus: &Corpus,
    entity: &EntitySpec,
    partner: Option<&EntitySpec>,
    topics: &[String],
) -> Result<CounterfactualReport, AnalysisError> {
    if topics.is_empty() {
        return Err(AnalysisError::EmptyInput("topic"));
    }
    if let Some(p) = partner {
        SubsetSelector::excluding(p.clone()).check(entity)?;
    }
    let cache = RankCache::new(corpus);
    let rows = topics
        .par_iter()
        .map(|topic| {
            let world = analyze_cell_cached(
                &cache,
                topic,
                entity,
                &SubsetSelector::simple(SelectorKind::WorldAll),
            )?;
            Ok(match partner {
                Some(p) => {
                    let r = partner_exclusion_compare(&cache, topic, entity, p)?;
                    CounterfactualRow {
                        topic: topic.clone(),
                        left: r.all,
                        right: r.excluded,
                        world,
                        pointwise_ok: Some(r.pointwise_ok),
                    }
                }
                None => {
                    let (left, right) = world_exclusion_compare(&cache, topic, entity)?;
                    CounterfactualRow {
                        topic: topic.clone(),
                        left,
                        right,
                        world,
                        pointwise_ok: None,
                    }
                }
            })
        })
        .collect::<Result<Vec<_>, AnalysisError>>()?;
    Ok(CounterfactualReport {
        entity: entity.name.clone(),
        partner: partner.map(|p| p.name.clone()),
        rows,
    })
}

impl CounterfactualReport {
    pub fn column_titles(&self) -> (String, String) {
        match &self.partner {
            Some(p) => (
                "All collaborations".into(),
                format!("Collaborations not including {p}"),
            ),
            None => (
                format!("Domestic {}", self.entity),
                format!("World not {}", self.entity),
            ),
        }
    }

    /// Same columns as the table CSV; three rows per topic (left, right, world).
    pub fn write_csv(&self, out: impl Write, precise: bool) -> std::io::Result<()> {
        write_cells_csv(
            self.rows.iter().flat_map(|r| [&r.left, &r.right, &r.world]),
            out,
            precise,
        )
    }

    pub fn write_markdown(&self, mut out: impl Write, precise: bool) -> std::io::Result<()> {
        let (left, right) = self.column_titles();
        write!(
            out,
            "| Topic | {left} N | {left} Rk | {right} N | {right} Rk | World N | World Rk |"
        )?;
        let check = self.partner.is_some();
        if check {
            write!(out, " Rank check |")?;
        }
        writeln!(out)?;
        write!(out, "|---|---:|---:|---:|---:|---:|---:|")?;
        if check {
            write!(out, "---|")?;
        }
        writeln!(out)?;
        for r in &self.rows {
            write!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} |",
                r.topic,
                r.left.n,
                r.left.display_value(precise),
                r.right.n,
                r.right.display_value(precise),
                r.world.n,
                r.world.display_value(precise)
            )?;
            if let Some(ok) = r.pointwise_ok {
                write!(out, " {} |", if ok { "ok" } else { "VIOLATED" })?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{load, DocType, PublicationRecord, WindowConfig};

    fn codes(cs: &[&str]) -> BTreeSet<CountryCode> {
        cs.iter().map(|c| c.parse().unwrap()).collect()
    }

    fn entity(name: &str) -> EntitySpec {
        EntitySpec::resolve(name, &Aggregates::builtin()).unwrap()
    }

    fn corpus(papers: &[(&str, &[&str], u64)]) -> Corpus {
        let recs = papers
            .iter()
            .map(|(id, cs, cites)| PublicationRecord {
                id: id.to_string(),
                topic: "t".into(),
                year: 2015,
                countries: codes(cs),
                citations_by_year: [(2019, *cites)].into(),
                doc_type: DocType::Article,
            })
            .collect();
        load(
            recs,
            WindowConfig::default(),
            Aggregates::builtin(),
            BTreeSet::new(),
        )
        .unwrap()
    }

    fn all_kinds(partner: &str) -> Vec<SubsetSelector> {
        SelectorKind::ALL
            .iter()
            .map(|&k| {
                if k == SelectorKind::CollaborativeExcluding {
                    SubsetSelector::excluding(entity(partner))
                } else {
                    SubsetSelector::simple(k)
                }
            })
            .collect()
    }

    fn truth_row(entity_name: &str, partner: &str, countries: &[&str]) -> Vec<bool> {
        let e = entity(entity_name);
        all_kinds(partner)
            .iter()
            .map(|s| s.matches(&e, &codes(countries)))
            .collect()
    }

    #[test]
    fn us_paper_against_usa() {
        // domestic, collaborative, coll-excl(CN), entity_all, world_excluding, world_all
        assert_eq!(
            truth_row("USA", "China", &["US"]),
            [true, false, false, true, false, true]
        );
    }

    #[test]
    fn spain_germany_paper_truth_table() {
        // Worked by hand: {ES, DE} lies inside EU27; against Spain alone DE is foreign.
        assert_eq!(
            truth_row("EU", "USA", &["ES", "DE"]),
            [true, false, false, true, false, true]
        );
        assert_eq!(
            truth_row("Spain", "USA", &["ES", "DE"]),
            [false, true, true, true, false, true]
        );
        // Partner Germany is on the paper, so the excluding selection drops it.
        assert_eq!(
            truth_row("Spain", "Germany", &["ES", "DE"]),
            [false, true, false, true, false, true]
        );
    }

    #[test]
    fn china_us_paper_excluded_by_usa_partner() {
        let s = SubsetSelector::excluding(entity("USA"));
        assert!(!s.matches(&entity("China"), &codes(&["CN", "US"])));
        assert!(s.matches(&entity("China"), &codes(&["CN", "JP"])));
    }

    #[test]
    fn selector_well_formedness() {
        assert_eq!(
            SubsetSelector::new(SelectorKind::CollaborativeExcluding, None).unwrap_err(),
            AnalysisError::MissingPartner(SelectorKind::CollaborativeExcluding)
        );
        assert!(SubsetSelector::new(SelectorKind::Domestic, Some(entity("USA"))).is_err());
        let s = SubsetSelector::excluding(entity("Germany"));
        assert!(matches!(
            s.check(&entity("EU")),
            Err(AnalysisError::PartnerOverlap { .. })
        ));
        let agg = Aggregates::builtin();
        assert_eq!(
            SubsetSelector::parse("D", &agg).unwrap(),
            SubsetSelector::domestic()
        );
        assert_eq!(
            SubsetSelector::parse("Cx:USA", &agg).unwrap().label(),
            "collaborative_excluding:USA"
        );
        assert!(SubsetSelector::parse("bogus", &agg).is_err());
        assert!(SubsetSelector::parse("Cx:Atlantis", &agg).is_err());
    }

    #[test]
    fn top_ten_owner_scores_maximum() {
        let mut papers: Vec<(String, Vec<&str>, u64)> = (0..10)
            .map(|i| (format!("a{i}"), vec!["US"], 100 - i))
            .collect();
        papers.extend((0..20).map(|i| (format!("b{i:02}"), vec!["CN"], 50 - i)));
        let refs: Vec<(&str, &[&str], u64)> = papers
            .iter()
            .map(|(i, c, n)| (i.as_str(), c.as_slice(), *n))
            .collect();
        let c = corpus(&refs);
        let cell = analyze_cell(&c, "t", &entity("USA"), &SubsetSelector::domestic()).unwrap();
        assert_eq!(cell.n, 10);
        assert_eq!(cell.rendered(), "39.47");
        let world = analyze_cell(
            &c,
            "t",
            &entity("USA"),
            &SubsetSelector::simple(SelectorKind::WorldAll),
        )
        .unwrap();
        assert_eq!(world.n, 30);
        assert_eq!(world.rendered(), "39.47");

        let cache = RankCache::new(&c);
        let (dom, rest) = world_exclusion_compare(&cache, "t", &entity("USA")).unwrap();
        assert_eq!(dom.rendered(), "39.47");
        assert_eq!(rest.slot_ranks().unwrap(), (11..=20).collect::<Vec<_>>());
        // 1000 / GM(31..40), evaluated at 40 digits.
        assert!((rest.value().unwrap() - 28.261_909_455_165_07).abs() < 1e-9);

        let (_, rest) = world_exclusion_compare(&cache, "t", &entity("France")).unwrap();
        assert_eq!(rest.n, 30);
        assert_eq!(rest.rendered(), "39.47");
    }

    #[test]
    fn complement_of_everything_is_empty() {
        let c = corpus(&[("a", &["US"], 3), ("b", &["US", "CN"], 1)]);
        let cache = RankCache::new(&c);
        let e = EntitySpec::aggregate("G2", codes(&["US", "CN"]));
        let (_, rest) = world_exclusion_compare(&cache, "t", &e).unwrap();
        assert_eq!(rest.n, 0);
        assert_eq!(rest.rk, Err(CellIssue::NoEligiblePapers));
        assert_eq!(rest.rendered(), EMPTY_CELL);
    }

    #[test]
    fn batch_table_shape_and_empty_cells() {
        let c = corpus(&[
            ("a", &["US"], 3),
            ("b", &["US", "CN"], 1),
            ("c", &["CN"], 2),
        ]);
        let topics = vec!["t".to_string(), "missing".to_string()];
        let t = batch_table(
            &c,
            &[entity("USA"), entity("France")],
            &topics,
            &[SubsetSelector::domestic(), SubsetSelector::collaborative()],
        )
        .unwrap();
        assert_eq!(t.cells.len(), 8);
        let fr = t.cell("France", "t", &SubsetSelector::domestic()).unwrap();
        assert_eq!((fr.n, fr.rendered()), (0, EMPTY_CELL.to_string()));
        let missing = t
            .cell("USA", "missing", &SubsetSelector::domestic())
            .unwrap();
        assert!(matches!(missing.rk, Err(CellIssue::Failed(_))));

        assert!(batch_table(&c, &[], &topics, &[SubsetSelector::domestic()]).is_err());

        let mut out = Vec::new();
        t.write_csv(&mut out, false).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("entity,topic,selector,n,rk_value,rk_rendered,padded_slots\n"));
        assert!(text.contains("France,t,domestic,0,,—,\n"));
    }

    fn table_with(values: &[(&str, &str, f64)], selectors: Vec<SubsetSelector>) -> AnalysisTable {
        let mut entities: Vec<String> = Vec::new();
        let mut topics: Vec<String> = Vec::new();
        for (e, t, _) in values {
            if !entities.iter().any(|x| x == e) {
                entities.push(e.to_string());
            }
            if !topics.iter().any(|x| x == t) {
                topics.push(t.to_string());
            }
        }
        let mut cells = Vec::new();
        for e in &entities {
            for s in &selectors {
                for t in &topics {
                    let v = values
                        .iter()
                        .find(|(ee, tt, _)| ee == e && tt == t)
                        .map(|x| x.2)
                        .unwrap();
                    let v = if s.kind() == SelectorKind::Collaborative {
                        v * 2.0
                    } else {
                        v
                    };
                    cells.push(AnalysisCell {
                        entity: e.clone(),
                        topic: t.clone(),
                        selector: s.clone(),
                        n: 10,
                        n_world: 1000,
                        rk: Ok(RkResult {
                            value: v,
                            contributing_ranks: vec![],
                            padded_slots: 0,
                            n_entity: 10,
                            rendered: crate::metrics::render_rk(v),
                        }),
                    });
                }
            }
        }
        AnalysisTable {
            entities,
            topics,
            selectors,
            cells,
        }
    }

    #[test]
    fn threshold_counts_strictly_above() {
        let usa = [25.68, 28.29, 25.05, 32.22, 28.09];
        let china = [23.18, 15.32, 13.10, 20.63, 19.58];
        let topics = ["graphene", "semi", "solar", "lithium", "composite"];
        let mut values = Vec::new();
        for (i, t) in topics.iter().enumerate() {
            values.push(("USA", *t, usa[i]));
            values.push(("China", *t, china[i]));
        }
        let table = table_with(&values, vec![SubsetSelector::domestic()]);
        let s = threshold_summary(&table, &[5.0, 15.0, 25.0]).unwrap();
        assert_eq!(
            s.levels[0].entries,
            [("China".to_string(), 5), ("USA".to_string(), 5)]
        );
        assert_eq!(
            s.levels[1].entries,
            [("USA".to_string(), 5), ("China".to_string(), 4)]
        );
        assert_eq!(s.levels[2].entries, [("USA".to_string(), 5)]);
        assert!(threshold_summary(&table, &[50.0]).unwrap().levels[0]
            .entries
            .is_empty());
        assert!(threshold_summary(&table, &[15.0, 5.0]).is_err());
        assert!(threshold_summary(&table, &[]).is_err());

        let mut md = Vec::new();
        s.write_markdown(&mut md).unwrap();
        assert!(String::from_utf8(md).unwrap().contains("Rk > 25: USA (5)"));
    }

    #[test]
    fn ratios() {
        let table = table_with(
            &[("USA", "t", 28.08), ("Norway", "t", 0.19)],
            vec![SubsetSelector::domestic(), SubsetSelector::collaborative()],
        );
        let rows = ratio_report(&table);
        assert_eq!(rows.len(), 2);
        assert!((rows[0].ratio.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(rows[1].ratio, None);
        let mut out = Vec::new();
        write_ratios_csv(&rows, &mut out, false).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "entity,topic,ratio_or_NA\nUSA,t,2.00\nNorway,t,NA\n"
        );
        assert_eq!(crate::metrics::format_2dp(33.48 / 28.08), "1.19");
        assert_eq!(crate::metrics::format_2dp(38.47 / 19.07), "2.02");
    }

    #[test]
    fn partner_holding_top_papers() {
        // China's top collaborations are all with the USA.
        let mut papers: Vec<(String, Vec<&str>, u64)> = (0..10)
            .map(|i| (format!("u{i}"), vec!["CN", "US"], 100 - i))
            .collect();
        papers.extend((0..10).map(|i| (format!("j{i}"), vec!["CN", "JP"], 50 - i)));
        papers.extend((0..30).map(|i| (format!("x{i:02}"), vec!["FR"], 80 - i)));
        let refs: Vec<(&str, &[&str], u64)> = papers
            .iter()
            .map(|(i, c, n)| (i.as_str(), c.as_slice(), *n))
            .collect();
        let c = corpus(&refs);
        let cache = RankCache::new(&c);
        let r = partner_exclusion_compare(&cache, "t", &entity("China"), &entity("USA")).unwrap();
        assert!(r.pointwise_ok);
        assert_eq!(r.all.rendered(), "39.47");
        assert!(r.excluded.value().unwrap() < r.all.value().unwrap() / 2.0);
        assert!(
            partner_exclusion_compare(&cache, "t", &entity("China"), &entity("China")).is_err()
        );
    }
}
