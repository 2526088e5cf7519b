//! Corpus ingestion: concept lists, hyperlink-annotated sentences, mention
//! masking and the token-length window.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Read, Write};

use rand::seq::index;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Mode};
use crate::seed;

/// Replacement for every masked mention. Brackets and upper case never survive
/// [`tokenize`], so it cannot collide with a corpus token.
pub const DEFAULT_MASK_TOKEN: &str = "[MASK]";

pub const DEFAULT_MIN_LEN: usize = 10;
pub const DEFAULT_MAX_LEN: usize = 70;

const CONTEXTS_FORMAT: &str = "controversy-contexts";
const CONTEXTS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: mention of `{concept}` spans {start}..{end}, outside text of {len} characters")]
    SpanOutOfBounds { line: usize, concept: String, start: usize, end: usize, len: usize },
    #[error("line {line}: mention spans overlap ({first} and {second})")]
    OverlappingSpans { line: usize, first: String, second: String },
    #[error("sentence {source_ref} has no mention of concept `{concept}`")]
    NoMention { source_ref: String, concept: String },
    #[error("concept list line {line}: {message}")]
    ConceptList { line: usize, message: String },
    #[error("duplicate concept id `{0}`")]
    DuplicateConcept(String),
    #[error("min_len {min} exceeds max_len {max}")]
    LengthWindow { min: usize, max: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Splits text into lowercase alphanumeric runs.
///
/// Whitespace and punctuation are boundaries; punctuation-only runs vanish and
/// numerals stay as tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// A titled entity whose controversiality is estimated.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: String,
    pub title: String,
    pub surface_forms: BTreeSet<String>,
    /// `Some(true)` for controversial.
    pub label: Option<bool>,
    /// Integer grade in `0..=10`.
    pub grade: Option<u8>,
    pub categories: BTreeSet<String>,
}

impl Concept {
    pub fn new(id: impl Into<String>, title: impl Into<String>) -> Self {
        Concept {
            id: id.into(),
            title: title.into(),
            surface_forms: BTreeSet::new(),
            label: None,
            grade: None,
            categories: BTreeSet::new(),
        }
    }

    pub fn with_label(mut self, label: bool) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_grade(mut self, grade: u8) -> Self {
        self.grade = Some(grade);
        self
    }

    pub fn with_categories<I, S>(mut self, categories: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.categories.extend(categories.into_iter().map(Into::into));
        self
    }

    pub fn with_surface_forms<I, S>(mut self, forms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.surface_forms.extend(forms.into_iter().map(Into::into));
        self
    }

    /// Token sequences that refer to this concept: the title plus every
    /// surface form, tokenized, deduplicated.
    pub fn mention_token_forms(&self) -> Vec<Vec<String>> {
        let mut forms: BTreeSet<Vec<String>> = BTreeSet::new();
        for text in std::iter::once(&self.title).chain(self.surface_forms.iter()) {
            let toks = tokenize(text);
            if !toks.is_empty() {
                forms.insert(toks);
            }
        }
        forms.into_iter().collect()
    }
}

/// Concepts keyed by id, iterated in id order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConceptSet {
    concepts: BTreeMap<String, Concept>,
}

impl ConceptSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_concepts<I: IntoIterator<Item = Concept>>(items: I) -> Result<Self, CorpusError> {
        let mut set = ConceptSet::new();
        for c in items {
            set.insert(c)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, concept: Concept) -> Result<(), CorpusError> {
        validate_id(&concept.id).map_err(|message| CorpusError::ConceptList { line: 0, message })?;
        if let Some(g) = concept.grade {
            if g > 10 {
                return Err(CorpusError::ConceptList {
                    line: 0,
                    message: format!("grade {g} of `{}` outside 0..=10", concept.id),
                });
            }
        }
        if self.concepts.contains_key(&concept.id) {
            return Err(CorpusError::DuplicateConcept(concept.id));
        }
        self.concepts.insert(concept.id.clone(), concept);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Concept> {
        self.concepts.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.concepts.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Concept> + Clone {
        self.concepts.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.concepts.keys().map(String::as_str)
    }

    /// Concepts that carry a binary label, paired with it.
    pub fn labeled(&self) -> impl Iterator<Item = (&Concept, bool)> + Clone {
        self.concepts.values().filter_map(|c| c.label.map(|l| (c, l)))
    }

    /// Id → label for every labeled concept.
    pub fn labels(&self) -> BTreeMap<String, bool> {
        self.labeled().map(|(c, l)| (c.id.clone(), l)).collect()
    }

    /// Every category name in use.
    pub fn categories(&self) -> BTreeSet<String> {
        self.concepts.values().flat_map(|c| c.categories.iter().cloned()).collect()
    }

    /// Subset restricted to `ids`; unknown ids are ignored.
    pub fn subset<'a, I: IntoIterator<Item = &'a str>>(&self, ids: I) -> ConceptSet {
        let concepts =
            ids.into_iter().filter_map(|id| self.concepts.get(id)).map(|c| (c.id.clone(), c.clone())).collect();
        ConceptSet { concepts }
    }

    /// Union of two sets; ids must be disjoint.
    pub fn merged(&self, other: &ConceptSet) -> Result<ConceptSet, CorpusError> {
        let mut out = self.clone();
        for c in other.iter() {
            out.insert(c.clone())?;
        }
        Ok(out)
    }
}

fn validate_id(id: &str) -> Result<(), String> {
    if id.is_empty() {
        return Err("empty concept id".into());
    }
    if id.chars().any(|c| c == '\t' || c == '\n' || c == '\r') {
        return Err(format!("concept id `{}` contains a tab or newline", id.escape_debug()));
    }
    Ok(())
}

/// Reads a concept list with a header row
/// `id, title, label, grade, categories, surface_forms`. Trailing optional
/// columns may be omitted; list-valued columns are `;`-separated.
pub fn load_concepts<R: Read>(reader: R, delimiter: u8) -> Result<ConceptSet, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(reader);

    let headers = rdr.headers().map_err(|e| CorpusError::ConceptList { line: 1, message: e.to_string() })?.clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(id_col), Some(title_col)) = (column("id"), column("title")) else {
        return Err(CorpusError::ConceptList {
            line: 1,
            message: "header must name at least `id` and `title` columns".into(),
        });
    };
    let label_col = column("label");
    let grade_col = column("grade");
    let cat_col = column("categories");
    let forms_col = column("surface_forms");

    let mut set = ConceptSet::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| CorpusError::ConceptList { line, message: e.to_string() })?;
        let field = |col: Option<usize>| col.and_then(|c| record.get(c)).unwrap_or("");
        let err = |message: String| CorpusError::ConceptList { line, message };

        let id = field(Some(id_col));
        validate_id(id).map_err(err)?;
        let mut concept = Concept::new(id, field(Some(title_col)));

        concept.label = match field(label_col) {
            "" => None,
            "0" => Some(false),
            "1" => Some(true),
            other => return Err(err(format!("label `{other}` is not 0 or 1"))),
        };
        concept.grade = match field(grade_col) {
            "" => None,
            g => match g.parse::<u8>() {
                Ok(v) if v <= 10 => Some(v),
                _ => return Err(err(format!("grade `{g}` is not an integer in 0..=10"))),
            },
        };
        concept.categories = split_list(field(cat_col));
        concept.surface_forms = split_list(field(forms_col));

        if set.contains(id) {
            return Err(err(format!("duplicate concept id `{id}`")));
        }
        set.insert(concept).map_err(|e| err(e.to_string()))?;
    }
    Ok(set)
}

fn split_list(s: &str) -> BTreeSet<String> {
    s.split(';').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

/// Hyperlink anchor: character offsets into the sentence text, end exclusive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub concept: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawSentence {
    pub text: String,
    /// Sorted by start offset; non-overlapping.
    pub mentions: Vec<Mention>,
    /// `source:line`.
    pub source_ref: String,
}

impl RawSentence {
    /// Checks spans against the text and sorts them. `line` only labels errors.
    pub fn new(text: String, mut mentions: Vec<Mention>, source_ref: String, line: usize) -> Result<Self, CorpusError> {
        let len = text.chars().count();
        for m in &mentions {
            if m.start >= m.end || m.end > len {
                return Err(CorpusError::SpanOutOfBounds {
                    line,
                    concept: m.concept.clone(),
                    start: m.start,
                    end: m.end,
                    len,
                });
            }
        }
        mentions.sort_by_key(|m| (m.start, m.end));
        for pair in mentions.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(CorpusError::OverlappingSpans {
                    line,
                    first: format!("{}@{}..{}", pair[0].concept, pair[0].start, pair[0].end),
                    second: format!("{}@{}..{}", pair[1].concept, pair[1].start, pair[1].end),
                });
            }
        }
        Ok(RawSentence { text, mentions, source_ref })
    }

    pub fn mentions_of<'a>(&'a self, concept_id: &'a str) -> impl Iterator<Item = &'a Mention> + 'a {
        self.mentions.iter().filter(move |m| m.concept == concept_id)
    }
}

#[derive(Deserialize)]
struct CorpusRecord {
    text: String,
    #[serde(default)]
    mentions: Vec<Mention>,
}

/// Parses a JSON-lines corpus. Blank lines are skipped; line numbers are
/// 1-based and reported in every error.
pub fn parse_corpus<R: BufRead>(reader: R, source: &str) -> Result<Vec<RawSentence>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Malformed { line: line_no, message: e.to_string() })?;
        out.push(RawSentence::new(record.text, record.mentions, format!("{source}:{line_no}"), line_no)?);
    }
    Ok(out)
}

/// One tokenized sentence referencing a concept, with the mention masked.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedContext {
    #[serde(rename = "concept")]
    pub concept_id: String,
    pub tokens: Vec<String>,
    #[serde(rename = "source")]
    pub source_ref: String,
}

impl MaskedContext {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Text form with each mask standing for a mention of `placeholder`.
    /// Masking the result for its own concept gives the same tokens back.
    pub fn reconstruct(&self, mask_token: &str, placeholder: &str) -> RawSentence {
        let mut text = String::new();
        let mut mentions = Vec::new();
        let mut pos = 0usize;
        for (i, tok) in self.tokens.iter().enumerate() {
            if i > 0 {
                text.push(' ');
                pos += 1;
            }
            if tok == mask_token {
                let len = placeholder.chars().count();
                mentions.push(Mention { concept: self.concept_id.clone(), start: pos, end: pos + len });
                text.push_str(placeholder);
                pos += len;
            } else {
                text.push_str(tok);
                pos += tok.chars().count();
            }
        }
        RawSentence { text, mentions, source_ref: self.source_ref.clone() }
    }
}

/// Replaces every span linked to `concept_id` with one `mask_token`; all other
/// text, including mentions of other concepts, is tokenized normally.
pub fn mask_mention(sentence: &RawSentence, concept_id: &str, mask_token: &str) -> Result<MaskedContext, CorpusError> {
    let chars: Vec<char> = sentence.text.chars().collect();
    let mut tokens = Vec::new();
    let mut cursor = 0usize;
    let mut found = false;
    for m in sentence.mentions_of(concept_id) {
        let before: String = chars[cursor..m.start].iter().collect();
        tokens.extend(tokenize(&before));
        tokens.push(mask_token.to_string());
        cursor = m.end;
        found = true;
    }
    if !found {
        return Err(CorpusError::NoMention {
            source_ref: sentence.source_ref.clone(),
            concept: concept_id.to_string(),
        });
    }
    let rest: String = chars[cursor..].iter().collect();
    tokens.extend(tokenize(&rest));
    Ok(MaskedContext { concept_id: concept_id.to_string(), tokens, source_ref: sentence.source_ref.clone() })
}

/// Masks unlinked occurrences of any token form of the concept, longest
/// forms first. Each matched run collapses to a single mask token.
pub fn mask_surface_forms(tokens: &[String], forms: &[Vec<String>], mask_token: &str) -> Vec<String> {
    let mut forms: Vec<&Vec<String>> = forms.iter().filter(|f| !f.is_empty()).collect();
    forms.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    'outer: while i < tokens.len() {
        for form in &forms {
            if tokens[i..].starts_with(form) {
                out.push(mask_token.to_string());
                i += form.len();
                continue 'outer;
            }
        }
        out.push(tokens[i].clone());
        i += 1;
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub min_len: usize,
    pub max_len: usize,
    pub per_concept_cap: Option<usize>,
    pub seed: u64,
    pub mask_token: String,
    #[serde(skip)]
    pub mode: Mode,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            min_len: DEFAULT_MIN_LEN,
            max_len: DEFAULT_MAX_LEN,
            per_concept_cap: None,
            seed: 0,
            mask_token: DEFAULT_MASK_TOKEN.to_string(),
            mode: Mode::default(),
        }
    }
}

/// Concept id → its masked contexts, in corpus order.
pub type ContextMap = BTreeMap<String, Vec<MaskedContext>>;

/// Builds the masked contexts of every concept in `concepts`.
///
/// A sentence linking two target concepts yields one context per concept.
/// Contexts outside the `[min_len, max_len]` window are dropped, then an
/// optional seeded uniform sample of `per_concept_cap` is taken per concept.
/// Every concept in the set has an entry, possibly empty.
pub fn extract_contexts(
    sentences: &[RawSentence],
    concepts: &ConceptSet,
    opts: &ExtractOptions,
) -> Result<ContextMap, CorpusError> {
    if opts.min_len > opts.max_len {
        return Err(CorpusError::LengthWindow { min: opts.min_len, max: opts.max_len });
    }
    let forms: BTreeMap<&str, Vec<Vec<String>>> =
        concepts.iter().map(|c| (c.id.as_str(), c.mention_token_forms())).collect();

    let per_sentence = exec::map(opts.mode, sentences, |sentence| {
        let targets: BTreeSet<&str> =
            sentence.mentions.iter().map(|m| m.concept.as_str()).filter(|id| concepts.contains(id)).collect();
        targets
            .into_iter()
            .filter_map(|id| {
                let mut ctx = mask_mention(sentence, id, &opts.mask_token).ok()?;
                ctx.tokens = mask_surface_forms(&ctx.tokens, &forms[id], &opts.mask_token);
                (opts.min_len..=opts.max_len).contains(&ctx.tokens.len()).then_some(ctx)
            })
            .collect::<Vec<_>>()
    });

    let mut map: ContextMap = concepts.ids().map(|id| (id.to_string(), Vec::new())).collect();
    for ctx in per_sentence.into_iter().flatten() {
        map.get_mut(&ctx.concept_id).expect("target concept").push(ctx);
    }

    if let Some(cap) = opts.per_concept_cap {
        let mut rng = seed::rng(opts.seed);
        for contexts in map.values_mut() {
            if contexts.len() > cap {
                let mut keep = index::sample(&mut rng, contexts.len(), cap).into_vec();
                keep.sort_unstable();
                let taken: Vec<MaskedContext> = keep.iter().map(|&i| contexts[i].clone()).collect();
                *contexts = taken;
            }
        }
    }
    Ok(map)
}

#[derive(Serialize)]
struct CorpusRecordOut<'a> {
    text: &'a str,
    mentions: &'a [Mention],
}

/// Writes sentences in the JSON-lines corpus format read by [`parse_corpus`].
pub fn write_corpus<W: Write>(mut w: W, sentences: &[RawSentence]) -> std::io::Result<()> {
    for s in sentences {
        serde_json::to_writer(&mut w, &CorpusRecordOut { text: &s.text, mentions: &s.mentions })?;
        writeln!(w)?;
    }
    Ok(())
}

/// Writes a tab-separated concept list readable by [`load_concepts`].
pub fn write_concepts<W: Write>(mut w: W, concepts: &ConceptSet) -> std::io::Result<()> {
    let join = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>().join(";");
    writeln!(w, "id\ttitle\tlabel\tgrade\tcategories\tsurface_forms")?;
    for c in concepts.iter() {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            c.id,
            c.title,
            c.label.map_or(String::new(), |l| u8::from(l).to_string()),
            c.grade.map_or(String::new(), |g| g.to_string()),
            join(&c.categories),
            join(&c.surface_forms),
        )?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ContextsHeader {
    format: String,
    version: u32,
    config: serde_json::Value,
}

/// Writes contexts as JSON lines, preceded by a header carrying `config`.
pub fn write_contexts<W: Write>(mut w: W, contexts: &ContextMap, config: &serde_json::Value) -> std::io::Result<()> {
    let header = ContextsHeader { format: CONTEXTS_FORMAT.into(), version: CONTEXTS_VERSION, config: config.clone() };
    serde_json::to_writer(&mut w, &header)?;
    writeln!(w)?;
    for ctx in contexts.values().flatten() {
        serde_json::to_writer(&mut w, ctx)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a file produced by [`write_contexts`]. Returns the contexts and the
/// header's config echo.
pub fn read_contexts<R: BufRead>(reader: R) -> Result<(ContextMap, serde_json::Value), CorpusError> {
    let mut lines = reader.lines().enumerate();
    let header: ContextsHeader = match lines.next() {
        Some((_, line)) => serde_json::from_str(&line?)
            .map_err(|e| CorpusError::Malformed { line: 1, message: format!("bad contexts header: {e}") })?,
        None => return Err(CorpusError::Malformed { line: 1, message: "empty contexts file".into() }),
    };
    if header.format != CONTEXTS_FORMAT || header.version != CONTEXTS_VERSION {
        return Err(CorpusError::Malformed {
            line: 1,
            message: format!(
                "expected {CONTEXTS_FORMAT} v{CONTEXTS_VERSION}, found {} v{}",
                header.format, header.version
            ),
        });
    }
    let mut map = ContextMap::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ctx: MaskedContext =
            serde_json::from_str(&line).map_err(|e| CorpusError::Malformed { line: i + 1, message: e.to_string() })?;
        map.entry(ctx.concept_id.clone()).or_default().push(ctx);
    }
    Ok((map, header.config))
}

impl fmt::Display for MaskedContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.concept_id, self.tokens.join(" "))
    }
}
