use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rk_core::analyses::{
    batch_table, counterfactual_report, ratio_report, threshold_summary, write_ratios_csv,
    AnalysisError, AnalysisTable, EntitySpec, SelectorKind, SubsetSelector,
};
use rk_core::corpus::{self, Aggregates, Corpus, RecordFormat, WindowConfig, YearRange};
use rk_core::simgen::{self, SimParams};

use crate::{CorpusArgs, OutputArgs, SelectArgs};

const MAX_LISTED_ERRORS: usize = 20;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Data(_) => 1,
            Failure::Usage(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) => m,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn data(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn window_config(args: &CorpusArgs) -> Result<WindowConfig, Failure> {
    let pubs: YearRange = args.window.parse().map_err(usage)?;
    let cites: YearRange = args.citation_window.parse().map_err(usage)?;
    let mut window = WindowConfig::new(pubs, cites);
    for spec in &args.topic_windows {
        let (topic, range) = spec
            .split_once('=')
            .ok_or_else(|| usage(format!("--topic-window expects TOPIC=Y1-Y2, got {spec:?}")))?;
        window = window.with_override(topic.trim(), range.parse().map_err(usage)?);
    }
    Ok(window)
}

fn read_aggregates(args: &CorpusArgs) -> Result<Aggregates, Failure> {
    let Some(path) = &args.aggregates else {
        return Ok(Aggregates::builtin());
    };
    let text = fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let from_file =
        Aggregates::from_json(&text).map_err(|e| data(format!("{}: {e}", path.display())))?;
    // The built-in EU stays available unless the file defines its own.
    let mut pairs: Vec<(String, Vec<String>)> = Aggregates::builtin()
        .iter()
        .filter(|(name, _)| from_file.get(name).is_none())
        .chain(from_file.iter())
        .map(|(n, m)| (n.clone(), m.iter().map(|c| c.to_string()).collect()))
        .collect();
    pairs.sort();
    Aggregates::from_pairs(pairs).map_err(data)
}

fn read_exclusions(args: &CorpusArgs) -> Result<BTreeSet<String>, Failure> {
    match &args.exclude_ids {
        None => Ok(BTreeSet::new()),
        Some(path) => {
            let f = File::open(path).map_err(|e| data(format!("{}: {e}", path.display())))?;
            corpus::parse_exclusions(f).map_err(data)
        }
    }
}

/// Parses and loads the corpus; any per-record error is fatal.
fn load_corpus(args: &CorpusArgs) -> Result<Corpus, Failure> {
    let (records, window) = parse_corpus(args)?;
    if let Some(e) = records.errors.first() {
        let more = records.errors.len() - 1;
        let suffix = if more > 0 {
            format!(" (and {more} more)")
        } else {
            String::new()
        };
        return Err(data(format!("{}: {e}{suffix}", args.corpus.display())));
    }
    corpus::load(
        records.records,
        window,
        read_aggregates(args)?,
        read_exclusions(args)?,
    )
    .map_err(data)
}

fn parse_corpus(args: &CorpusArgs) -> Result<(corpus::ParseOutcome, WindowConfig), Failure> {
    let format: RecordFormat = args.format.parse().map_err(usage)?;
    let window = window_config(args)?;
    let file =
        File::open(&args.corpus).map_err(|e| data(format!("{}: {e}", args.corpus.display())))?;
    let outcome =
        corpus::parse_all(std::io::BufReader::new(file), format, &window).map_err(data)?;
    Ok((outcome, window))
}

pub fn validate(args: &CorpusArgs) -> CmdResult {
    let (outcome, window) = parse_corpus(args)?;
    if !outcome.errors.is_empty() {
        println!("structural errors: {}", outcome.errors.len());
        for e in outcome.errors.iter().take(MAX_LISTED_ERRORS) {
            println!("  {e}");
        }
        return Err(data(format!(
            "{} structural error(s) in {}",
            outcome.errors.len(),
            args.corpus.display()
        )));
    }
    let corpus = corpus::load(
        outcome.records,
        window,
        read_aggregates(args)?,
        read_exclusions(args)?,
    )
    .map_err(data)?;
    let d = corpus.diagnostics();
    let mut out = std::io::stdout().lock();
    let w = &mut out;
    let io = |e: std::io::Error| data(e);
    writeln!(
        w,
        "records: {}, dropped: {}",
        corpus.records().len(),
        d.dropped()
    )
    .map_err(io)?;
    writeln!(w, "input: {}", d.input).map_err(io)?;
    writeln!(w, "filtered_doctype: {}", d.filtered_doctype).map_err(io)?;
    writeln!(w, "filtered_excluded: {}", d.filtered_excluded).map_err(io)?;
    writeln!(w, "filtered_year: {}", d.filtered_year).map_err(io)?;
    let mut per_topic: BTreeMap<&str, usize> = BTreeMap::new();
    for r in corpus.records() {
        *per_topic.entry(&r.topic).or_default() += 1;
    }
    let topics = per_topic
        .iter()
        .map(|(t, n)| format!("{t} ({n})"))
        .collect::<Vec<_>>()
        .join(", ");
    writeln!(w, "topics: {topics}").map_err(io)?;
    match corpus.year_span() {
        Some((a, b)) => writeln!(w, "years: {a}–{b}").map_err(io)?,
        None => writeln!(w, "years: —").map_err(io)?,
    }
    let window = corpus.window();
    writeln!(w, "publication window: {}", window.publication_years).map_err(io)?;
    for (topic, range) in &window.topic_overrides {
        writeln!(w, "{topic}: {range}").map_err(io)?;
    }
    writeln!(w, "citation window: {}", window.citation_years).map_err(io)?;
    Ok(())
}

fn resolve_entities(names: &[String], corpus: &Corpus) -> Result<Vec<EntitySpec>, Failure> {
    let names: Vec<&String> = names.iter().filter(|n| !n.trim().is_empty()).collect();
    if names.is_empty() {
        return Err(usage("--entities must name at least one entity"));
    }
    names
        .into_iter()
        .map(|n| EntitySpec::resolve(n, corpus.aggregates()).map_err(usage))
        .collect()
}

fn resolve_topics(topics: &[String], corpus: &Corpus) -> Result<Vec<String>, Failure> {
    if topics.is_empty() {
        if corpus.topics().is_empty() {
            return Err(data("corpus has no topics"));
        }
        return Ok(corpus.topics().iter().cloned().collect());
    }
    for t in topics {
        if !corpus.topics().contains(t) {
            return Err(data(format!("unknown topic {t:?}")));
        }
    }
    Ok(topics.to_vec())
}

fn resolve_selectors(
    specs: &[String],
    default: &[&str],
    corpus: &Corpus,
) -> Result<Vec<SubsetSelector>, Failure> {
    let specs: Vec<&str> = if specs.is_empty() {
        default.to_vec()
    } else {
        specs.iter().map(String::as_str).collect()
    };
    specs
        .into_iter()
        .map(|s| SubsetSelector::parse(s, corpus.aggregates()).map_err(usage))
        .collect()
}

struct Emit {
    csv: bool,
    md: bool,
}

fn emit_formats(output: &OutputArgs) -> Result<Emit, Failure> {
    let mut emit = Emit {
        csv: false,
        md: false,
    };
    for f in &output.emit {
        match f.trim() {
            "csv" => emit.csv = true,
            "md" => emit.md = true,
            other => {
                return Err(usage(format!(
                    "unknown emit format {other:?} (expected csv or md)"
                )))
            }
        }
    }
    if !(emit.csv || emit.md) {
        return Err(usage("--emit needs at least one of csv, md"));
    }
    fs::create_dir_all(&output.out).map_err(|e| data(format!("{}: {e}", output.out.display())))?;
    Ok(emit)
}

fn write_file(
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> CmdResult {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| data(format!("{}: {e}", path.display())))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn build_table(
    corpus: &Corpus,
    select: &SelectArgs,
    default_selectors: &[&str],
) -> Result<AnalysisTable, Failure> {
    let entities = resolve_entities(&select.entities, corpus)?;
    let topics = resolve_topics(&select.topics, corpus)?;
    let selectors = resolve_selectors(&select.selectors, default_selectors, corpus)?;
    for e in &entities {
        for s in &selectors {
            s.check(e).map_err(usage)?;
        }
    }
    batch_table(corpus, &entities, &topics, &selectors).map_err(usage)
}

pub fn table(args: &CorpusArgs, select: &SelectArgs, output: &OutputArgs) -> CmdResult {
    let corpus = load_corpus(args)?;
    let table = build_table(&corpus, select, &["D", "C"])?;
    let emit = emit_formats(output)?;
    let precise = output.precise;
    if emit.csv {
        write_file(&output.out, "table.csv", |w| table.write_csv(w, precise))?;
        let has = |k| {
            table
                .selectors
                .iter()
                .any(|s: &SubsetSelector| s.kind() == k)
        };
        if has(SelectorKind::Domestic) && has(SelectorKind::Collaborative) {
            let rows = ratio_report(&table);
            write_file(&output.out, "ratios.csv", |w| {
                write_ratios_csv(&rows, w, precise)
            })?;
        }
    }
    if emit.md {
        write_file(&output.out, "table.md", |w| {
            table.write_markdown(w, precise)
        })?;
    }
    Ok(())
}

pub fn thresholds(
    args: &CorpusArgs,
    select: &SelectArgs,
    levels: &[f64],
    output: &OutputArgs,
) -> CmdResult {
    let corpus = load_corpus(args)?;
    let table = build_table(&corpus, select, &["D"])?;
    let summary = threshold_summary(&table, levels).map_err(|e| match e {
        AnalysisError::InvalidLevels => usage(e),
        other => data(other),
    })?;
    let emit = emit_formats(output)?;
    if emit.csv {
        write_file(&output.out, "thresholds.csv", |w| summary.write_csv(w))?;
    }
    if emit.md {
        write_file(&output.out, "thresholds.md", |w| summary.write_markdown(w))?;
    }
    Ok(())
}

pub fn counterfactual(
    args: &CorpusArgs,
    entity: &str,
    partner: Option<&str>,
    topics: &[String],
    output: &OutputArgs,
) -> CmdResult {
    let corpus = load_corpus(args)?;
    let entity = EntitySpec::resolve(entity, corpus.aggregates()).map_err(usage)?;
    let partner = partner
        .map(|p| EntitySpec::resolve(p, corpus.aggregates()).map_err(usage))
        .transpose()?;
    if let Some(p) = &partner {
        if !p.members.is_disjoint(&entity.members) {
            return Err(usage(format!(
                "partner {:?} overlaps entity {:?}",
                p.name, entity.name
            )));
        }
    }
    let topics = resolve_topics(topics, &corpus)?;
    let report =
        counterfactual_report(&corpus, &entity, partner.as_ref(), &topics).map_err(data)?;
    for row in &report.rows {
        if let Some(ok) = row.pointwise_ok {
            println!(
                "{}: rank vector without {} is pointwise >= all collaborations: {}",
                row.topic,
                report.partner.as_deref().unwrap_or("?"),
                if ok { "ok" } else { "VIOLATED" }
            );
        }
    }
    let emit = emit_formats(output)?;
    let precise = output.precise;
    if emit.csv {
        write_file(&output.out, "counterfactual.csv", |w| {
            report.write_csv(w, precise)
        })?;
    }
    if emit.md {
        write_file(&output.out, "counterfactual.md", |w| {
            report.write_markdown(w, precise)
        })?;
    }
    Ok(())
}

pub fn simulate(params_path: &Path, out: &Path) -> CmdResult {
    let text = fs::read_to_string(params_path)
        .map_err(|e| data(format!("{}: {e}", params_path.display())))?;
    let params = SimParams::from_json(&text).map_err(data)?;
    let records = simgen::generate_records(&params).map_err(data)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    }
    let file = File::create(out).map_err(|e| data(format!("{}: {e}", out.display())))?;
    let mut w = BufWriter::new(file);
    corpus::write_jsonl(&records, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| data(format!("{}: {e}", out.display())))?;
    let international = records.iter().filter(|r| r.countries.len() > 1).count();
    let topics: BTreeSet<&str> = records.iter().map(|r| r.topic.as_str()).collect();
    println!("seed: {}", params.seed);
    println!(
        "records: {}, international: {international}, topics: {}",
        records.len(),
        topics.len()
    );
    println!("wrote {}", out.display());
    Ok(())
}
