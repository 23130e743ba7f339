//! TREC run and qrels files.
//!
//! A run line is `topic Q0 docid rank score runtag`; a qrels line is
//! `topic 0 docid grade`. Fields are separated by ASCII whitespace and ids
//! are compared bytewise.

use std::collections::{btree_map::Entry, BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exec::Execution;

/// What to do when a run lists the same document twice for one topic.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DedupPolicy {
    #[default]
    Reject,
    /// Keep the first line seen in the file and drop later ones.
    First,
}

/// Which field defines the evaluation order of a ranking.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RankOrder {
    /// Descending score, ties broken by descending doc-id (the trec_eval convention).
    #[default]
    Score,
    /// Ascending rank field, then the score order for ties.
    RankField,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParseOptions {
    pub dedup: DedupPolicy,
    pub order: RankOrder,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankedDoc {
    pub doc_id: String,
    pub score: f64,
    pub rank: i64,
}

impl RankedDoc {
    pub fn new(doc_id: impl Into<String>, score: f64, rank: i64) -> Self {
        RankedDoc {
            doc_id: doc_id.into(),
            score,
            rank,
        }
    }
}

fn canonical_cmp(order: RankOrder, a: &RankedDoc, b: &RankedDoc) -> std::cmp::Ordering {
    let by_score = || {
        b.score
            .total_cmp(&a.score)
            .then_with(|| b.doc_id.as_bytes().cmp(a.doc_id.as_bytes()))
    };
    match order {
        RankOrder::Score => by_score(),
        RankOrder::RankField => a.rank.cmp(&b.rank).then_with(by_score),
    }
}

/// One system's ranked lists, keyed by topic, each in canonical evaluation order.
#[derive(Clone, Debug, PartialEq)]
pub struct Run {
    system_id: String,
    rankings: BTreeMap<String, Vec<RankedDoc>>,
}

impl Run {
    /// Builds a run from per-topic lists, rejecting duplicate documents and
    /// sorting each list into canonical order.
    pub fn new(
        system_id: impl Into<String>,
        rankings: BTreeMap<String, Vec<RankedDoc>>,
        order: RankOrder,
    ) -> Result<Self> {
        let system_id = system_id.into();
        check_token(&system_id, "system id")?;
        let mut rankings = rankings;
        for (topic, docs) in rankings.iter_mut() {
            check_token(topic, "topic id")?;
            let mut seen = HashSet::with_capacity(docs.len());
            for d in docs.iter() {
                check_token(&d.doc_id, "doc id")?;
                if !d.score.is_finite() {
                    return Err(Error::Format(format!(
                        "non-finite score for `{}` on topic `{topic}`",
                        d.doc_id
                    )));
                }
                if !seen.insert(d.doc_id.as_str()) {
                    return Err(Error::Format(format!(
                        "duplicate document `{}` on topic `{topic}` in run `{system_id}`",
                        d.doc_id
                    )));
                }
            }
            docs.sort_by(|a, b| canonical_cmp(order, a, b));
        }
        Ok(Run {
            system_id,
            rankings,
        })
    }

    pub fn system_id(&self) -> &str {
        &self.system_id
    }

    pub fn topics(&self) -> impl Iterator<Item = &str> {
        self.rankings.keys().map(String::as_str)
    }

    /// The ranking for `topic`, empty if the run has none.
    pub fn ranking(&self, topic: &str) -> &[RankedDoc] {
        self.rankings.get(topic).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn has_topic(&self, topic: &str) -> bool {
        self.rankings.contains_key(topic)
    }

    pub fn rankings(&self) -> &BTreeMap<String, Vec<RankedDoc>> {
        &self.rankings
    }

    /// Same rankings under a different system id.
    pub fn renamed(&self, system_id: impl Into<String>) -> Result<Run> {
        let system_id = system_id.into();
        check_token(&system_id, "system id")?;
        Ok(Run {
            system_id,
            rankings: self.rankings.clone(),
        })
    }

    /// Serialises the run in TREC format, topics in id order and each ranking
    /// in canonical order. Scores are written in shortest round-trip form.
    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for (topic, docs) in &self.rankings {
            for d in docs {
                let _ = writeln!(
                    out,
                    "{topic} Q0 {} {} {} {}",
                    d.doc_id, d.rank, d.score, self.system_id
                );
            }
        }
        out
    }

    pub fn write_trec<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_trec_string().as_bytes())?;
        Ok(())
    }
}

fn check_token(token: &str, what: &str) -> Result<()> {
    if token.is_empty() || token.bytes().any(|b| b.is_ascii_whitespace()) {
        return Err(Error::Format(format!(
            "{what} `{token}` must be a non-empty token without whitespace"
        )));
    }
    Ok(())
}

/// Reads `reader` line by line, handing the whitespace-split fields of each
/// non-blank line to `f` along with its 1-based line number.
fn for_each_record<R, F>(mut reader: R, mut f: F) -> Result<()>
where
    R: BufRead,
    F: FnMut(usize, &[&str]) -> Result<()>,
{
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            return Ok(());
        }
        line_no += 1;
        let line = std::str::from_utf8(&buf).map_err(|_| Error::Parse {
            line: line_no,
            message: "line is not valid UTF-8".into(),
        })?;
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        f(line_no, &fields)?;
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses a TREC run. The system id is the runtag of the first line; every
/// later line must carry the same tag.
pub fn parse_run<R: BufRead>(reader: R, options: &ParseOptions) -> Result<Run> {
    let mut system_id: Option<String> = None;
    let mut rankings: BTreeMap<String, Vec<RankedDoc>> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();

    for_each_record(reader, |line, fields| {
        if fields.len() != 6 {
            return Err(parse_err(
                line,
                format!("expected 6 fields (topic Q0 docid rank score runtag), found {}", fields.len()),
            ));
        }
        let (topic, doc, rank, score, tag) = (fields[0], fields[2], fields[3], fields[4], fields[5]);
        let rank: i64 = rank
            .parse()
            .map_err(|_| parse_err(line, format!("rank `{rank}` is not an integer")))?;
        let score: f64 = match score.parse::<f64>() {
            Ok(s) if s.is_finite() => s,
            _ => return Err(parse_err(line, format!("score `{score}` is not a finite number"))),
        };
        match &system_id {
            None => system_id = Some(tag.to_string()),
            Some(id) if id != tag => {
                return Err(parse_err(
                    line,
                    format!("mixed runtags in one file: `{id}` and `{tag}`"),
                ))
            }
            Some(_) => {}
        }
        if !seen.insert((topic.to_string(), doc.to_string())) {
            match options.dedup {
                DedupPolicy::Reject => {
                    return Err(parse_err(
                        line,
                        format!("duplicate document `{doc}` for topic `{topic}`"),
                    ))
                }
                DedupPolicy::First => return Ok(()),
            }
        }
        rankings
            .entry(topic.to_string())
            .or_default()
            .push(RankedDoc::new(doc, score, rank));
        Ok(())
    })?;

    let system_id =
        system_id.ok_or_else(|| Error::Format("run contains no records".to_string()))?;
    for docs in rankings.values_mut() {
        docs.sort_by(|a, b| canonical_cmp(options.order, a, b));
    }
    Ok(Run {
        system_id,
        rankings,
    })
}

pub fn parse_run_str(text: &str, options: &ParseOptions) -> Result<Run> {
    parse_run(text.as_bytes(), options)
}

/// Relevance judgments. Grades are kept as given; a document is relevant
/// when its grade reaches `relevance_threshold`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
    relevance_threshold: u32,
}

impl Qrels {
    pub fn new(relevance_threshold: u32) -> Result<Self> {
        if relevance_threshold < 1 {
            return Err(Error::Config("relevance threshold must be at least 1".into()));
        }
        Ok(Qrels {
            judgments: BTreeMap::new(),
            relevance_threshold,
        })
    }

    /// Adds a judgment. Re-adding the same grade is a no-op; a different
    /// grade for an existing pair is an error.
    pub fn add_judgment(&mut self, topic: &str, doc: &str, grade: u32) -> Result<()> {
        check_token(topic, "topic id")?;
        check_token(doc, "doc id")?;
        match self
            .judgments
            .entry(topic.to_string())
            .or_default()
            .entry(doc.to_string())
        {
            Entry::Vacant(v) => {
                v.insert(grade);
                Ok(())
            }
            Entry::Occupied(o) if *o.get() == grade => Ok(()),
            Entry::Occupied(o) => Err(Error::Format(format!(
                "conflicting grades {} and {grade} for document `{doc}` on topic `{topic}`",
                o.get()
            ))),
        }
    }

    pub fn relevance_threshold(&self) -> u32 {
        self.relevance_threshold
    }

    pub fn topics(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn has_topic(&self, topic: &str) -> bool {
        self.judgments.contains_key(topic)
    }

    pub fn grade(&self, topic: &str, doc: &str) -> Option<u32> {
        self.judgments.get(topic)?.get(doc).copied()
    }

    /// Unjudged documents are non-relevant.
    pub fn is_relevant(&self, topic: &str, doc: &str) -> bool {
        self.topic(topic).is_relevant(doc)
    }

    /// Relevant documents of `topic` in id order.
    pub fn relevant_docs<'a>(&'a self, topic: &str) -> impl Iterator<Item = &'a str> + 'a {
        let threshold = self.relevance_threshold;
        self.judgments
            .get(topic)
            .into_iter()
            .flat_map(move |m| m.iter().filter(move |(_, &g)| g >= threshold).map(|(d, _)| d.as_str()))
    }

    pub fn num_relevant(&self, topic: &str) -> usize {
        self.topic(topic).num_relevant()
    }

    pub fn topic(&self, topic: &str) -> TopicJudgments<'_> {
        TopicJudgments {
            grades: self.judgments.get(topic),
            threshold: self.relevance_threshold,
        }
    }

    pub fn judgments(&self) -> &BTreeMap<String, BTreeMap<String, u32>> {
        &self.judgments
    }

    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for (topic, docs) in &self.judgments {
            for (doc, grade) in docs {
                let _ = writeln!(out, "{topic} 0 {doc} {grade}");
            }
        }
        out
    }
}

/// Binary relevance view of one topic's judgments.
#[derive(Clone, Copy, Debug)]
pub struct TopicJudgments<'a> {
    grades: Option<&'a BTreeMap<String, u32>>,
    threshold: u32,
}

impl<'a> TopicJudgments<'a> {
    pub fn is_relevant(&self, doc: &str) -> bool {
        self.grade(doc).is_some_and(|g| g >= self.threshold)
    }

    pub fn grade(&self, doc: &str) -> Option<u32> {
        self.grades?.get(doc).copied()
    }

    /// N_R, the number of relevant documents judged for the topic.
    pub fn num_relevant(&self) -> usize {
        self.grades
            .map_or(0, |m| m.values().filter(|&&g| g >= self.threshold).count())
    }

    pub fn is_judged(&self) -> bool {
        self.grades.is_some()
    }
}

pub fn parse_qrels<R: BufRead>(reader: R, relevance_threshold: u32) -> Result<Qrels> {
    let mut qrels = Qrels::new(relevance_threshold)?;
    for_each_record(reader, |line, fields| {
        if fields.len() != 4 {
            return Err(parse_err(
                line,
                format!("expected 4 fields (topic iter docid grade), found {}", fields.len()),
            ));
        }
        let grade: i64 = fields[3]
            .parse()
            .map_err(|_| parse_err(line, format!("grade `{}` is not an integer", fields[3])))?;
        if grade < 0 {
            return Err(parse_err(line, format!("negative grade {grade}")));
        }
        let grade = u32::try_from(grade)
            .map_err(|_| parse_err(line, format!("grade {grade} out of range")))?;
        qrels
            .add_judgment(fields[0], fields[2], grade)
            .map_err(|e| parse_err(line, e.to_string()))
    })?;
    Ok(qrels)
}

pub fn parse_qrels_str(text: &str, relevance_threshold: u32) -> Result<Qrels> {
    parse_qrels(text.as_bytes(), relevance_threshold)
}

/// A set of runs evaluated together against one set of judgments.
#[derive(Clone, Debug, PartialEq)]
pub struct Campaign {
    runs: Vec<Run>,
    qrels: Qrels,
}

/// Which of a run's topics are judged and which judged topics it misses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopicCoverage {
    pub system_id: String,
    pub judged_topics: usize,
    pub missing_judged: Vec<String>,
    pub unjudged: Vec<String>,
}

impl Campaign {
    pub fn new(runs: Vec<Run>, qrels: Qrels) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::EmptyCampaign);
        }
        let mut ids = HashSet::with_capacity(runs.len());
        for r in &runs {
            if !ids.insert(r.system_id()) {
                return Err(Error::DuplicateSystem(r.system_id().to_string()));
            }
        }
        Ok(Campaign { runs, qrels })
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn qrels(&self) -> &Qrels {
        &self.qrels
    }

    /// S, the number of participating systems.
    pub fn num_systems(&self) -> usize {
        self.runs.len()
    }

    pub fn system_ids(&self) -> impl Iterator<Item = &str> {
        self.runs.iter().map(Run::system_id)
    }

    pub fn run(&self, system_id: &str) -> Option<&Run> {
        self.runs.iter().find(|r| r.system_id() == system_id)
    }

    /// Topics that are evaluated: those present in the qrels, in id order.
    pub fn judged_topics(&self) -> Vec<String> {
        self.qrels.topics().map(str::to_string).collect()
    }

    /// Union of qrels topics and run topics.
    pub fn topic_universe(&self) -> BTreeSet<&str> {
        let mut all: BTreeSet<&str> = self.qrels.topics().collect();
        for r in &self.runs {
            all.extend(r.topics());
        }
        all
    }

    /// Topics that some run answers but the qrels do not judge. They are
    /// accepted and left out of evaluation.
    pub fn unjudged_topics(&self) -> Vec<String> {
        let mut out = BTreeSet::new();
        for r in &self.runs {
            out.extend(r.topics().filter(|t| !self.qrels.has_topic(t)));
        }
        out.into_iter().map(str::to_string).collect()
    }

    pub fn coverage(&self) -> Vec<TopicCoverage> {
        self.runs
            .iter()
            .map(|r| TopicCoverage {
                system_id: r.system_id().to_string(),
                judged_topics: r.topics().filter(|t| self.qrels.has_topic(t)).count(),
                missing_judged: self
                    .qrels
                    .topics()
                    .filter(|t| !r.has_topic(t))
                    .map(str::to_string)
                    .collect(),
                unjudged: r
                    .topics()
                    .filter(|t| !self.qrels.has_topic(t))
                    .map(str::to_string)
                    .collect(),
            })
            .collect()
    }

    /// A copy of this campaign with `run` added.
    pub fn with_run(&self, run: Run) -> Result<Campaign> {
        let mut runs = self.runs.clone();
        runs.push(run);
        Campaign::new(runs, self.qrels.clone())
    }

    pub fn with_qrels(self, qrels: Qrels) -> Campaign {
        Campaign { qrels, ..self }
    }

    pub fn into_parts(self) -> (Vec<Run>, Qrels) {
        (self.runs, self.qrels)
    }
}

/// A file path or standard input (`-`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    Path(PathBuf),
    Stdin,
}

impl Source {
    pub fn from_arg(arg: &str) -> Self {
        if arg == "-" {
            Source::Stdin
        } else {
            Source::Path(PathBuf::from(arg))
        }
    }

    fn label(&self) -> PathBuf {
        match self {
            Source::Path(p) => p.clone(),
            Source::Stdin => PathBuf::from("<stdin>"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoadOptions {
    pub parse: ParseOptions,
    pub relevance_threshold: u32,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            parse: ParseOptions::default(),
            relevance_threshold: 1,
        }
    }
}

/// Expands directories into the regular, non-hidden files they contain,
/// sorted by name. Files and stdin pass through unchanged.
pub fn expand_sources(sources: &[Source]) -> Result<Vec<Source>> {
    let mut out = Vec::new();
    for s in sources {
        match s {
            Source::Path(p) if p.is_dir() => {
                let mut files = Vec::new();
                for entry in std::fs::read_dir(p).map_err(|e| Error::from(e).in_file(p))? {
                    let entry = entry?;
                    let path = entry.path();
                    let hidden = entry.file_name().to_string_lossy().starts_with('.');
                    if path.is_file() && !hidden {
                        files.push(path);
                    }
                }
                files.sort();
                out.extend(files.into_iter().map(Source::Path));
            }
            other => out.push(other.clone()),
        }
    }
    Ok(out)
}

fn read_source(source: &Source, stdin: Option<&[u8]>) -> Result<Vec<u8>> {
    match source {
        Source::Path(p) => std::fs::read(p).map_err(|e| Error::from(e).in_file(p)),
        Source::Stdin => stdin
            .map(<[u8]>::to_vec)
            .ok_or_else(|| Error::Config("standard input is not available".into())),
    }
}

fn read_path(path: &Path, f: impl FnOnce(&[u8]) -> Result<Run>) -> Result<Run> {
    let bytes = std::fs::read(path).map_err(|e| Error::from(e).in_file(path))?;
    f(&bytes).map_err(|e| e.in_file(path))
}

/// Loads runs and qrels into a campaign. Run files are parsed concurrently
/// under `exec`. At most one source may be standard input.
pub fn load_campaign(
    run_sources: &[Source],
    qrels_source: &Source,
    options: &LoadOptions,
    exec: Execution,
) -> Result<Campaign> {
    let run_sources = expand_sources(run_sources)?;
    if run_sources.is_empty() {
        return Err(Error::EmptyCampaign);
    }
    let stdin_uses = run_sources.iter().filter(|s| **s == Source::Stdin).count()
        + usize::from(*qrels_source == Source::Stdin);
    if stdin_uses > 1 {
        return Err(Error::Config(
            "standard input can supply at most one file".into(),
        ));
    }
    let stdin = if stdin_uses == 1 {
        let mut buf = Vec::new();
        std::io::stdin().lock().read_to_end(&mut buf)?;
        Some(buf)
    } else {
        None
    };

    let qrels_bytes = read_source(qrels_source, stdin.as_deref())?;
    let qrels = parse_qrels(qrels_bytes.as_slice(), options.relevance_threshold)
        .map_err(|e| e.in_file(qrels_source.label()))?;

    let runs = exec.try_map(run_sources.len(), |i| match &run_sources[i] {
        Source::Path(p) => read_path(p, |b| parse_run(b, &options.parse)),
        Source::Stdin => {
            let bytes = read_source(&Source::Stdin, stdin.as_deref())?;
            parse_run(bytes.as_slice(), &options.parse).map_err(|e| e.in_file("<stdin>"))
        }
    })?;

    let campaign = Campaign::new(runs, qrels)?;
    let unjudged = campaign.unjudged_topics();
    if !unjudged.is_empty() {
        log::warn!(
            "{} topic(s) appear in runs but not in qrels and are not evaluated: {}",
            unjudged.len(),
            unjudged.join(", ")
        );
    }
    Ok(campaign)
}
