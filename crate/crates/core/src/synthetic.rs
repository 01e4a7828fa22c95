//! Deterministic desk-scale collection: documents, known-item topics and qrels.
//!
//! Every topic is authored from one target passage into which a few invented
//! rare terms are planted. The question and keyword queries reuse those terms,
//! so the target is findable by lexical matching while neighbouring passages
//! of the same document act as marginal answers.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::collection::{write_topics, Topic};
use crate::corpus::{passage_id, write_jsonl, Document, SourceKind, DEFAULT_WINDOW};
use crate::eval::QrelSet;
use crate::fusion::{Grade, Split};

pub const DEFAULT_SEED: u64 = 20_221_015;

const VOCAB: &[&str] = &[
    "wheat", "barley", "canola", "sorghum", "chickpea", "lentil", "oats", "lupin", "faba", "beans",
    "soil", "moisture", "nitrogen", "phosphorus", "potassium", "sulfur", "zinc", "lime", "gypsum",
    "rainfall", "frost", "heat", "drought", "waterlogging", "salinity", "acidity", "sodicity",
    "yield", "grain", "protein", "quality", "screenings", "harvest", "sowing", "emergence",
    "flowering", "maturity", "variety", "cultivar", "rotation", "fallow", "stubble", "tillage",
    "residue", "cover", "crop", "pasture", "livestock", "grazing", "weeds", "ryegrass", "radish",
    "brome", "fleabane", "herbicide", "resistance", "spray", "nozzle", "drift", "label", "rate",
    "fungicide", "disease", "rust", "blackleg", "blotch", "mildew", "nematodes", "insects",
    "aphids", "mites", "snails", "slugs", "mice", "trial", "site", "season", "growers", "advisers",
    "paddock", "region", "northern", "southern", "western", "plots", "treatment", "control",
    "response", "increase", "decrease", "margin", "cost", "return", "profit", "risk", "management",
    "strategy", "timing", "early", "late", "application", "fertiliser", "seed", "density", "row",
    "spacing", "canopy", "biomass", "roots", "leaves", "stems", "heads", "pods", "tillers", "water",
    "use", "efficiency", "evaporation", "storage", "nutrient", "uptake", "deficiency", "symptoms",
    "monitoring", "sampling", "threshold", "economic", "benefit", "data", "results", "analysis",
    "observed", "measured", "reduced", "improved", "higher", "lower", "average", "significant",
];

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "th", "kr", "pl", "qu"];
const NUCLEI: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou", "y"];
const CODAS: &[&str] = &["", "n", "r", "x", "l", "s", "th", "m"];

const QUESTION_STARTS: &[&str] = &[
    "What is known about",
    "How does",
    "Which factors affect",
    "Why do growers report",
    "When should growers consider",
    "What causes",
];

#[derive(Debug, Clone, Copy)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub n_documents: usize,
    pub n_topics: usize,
    /// Rare terms planted per target passage.
    pub planted_terms: usize,
    /// Other passages that receive one of each topic's rare terms.
    pub distractors: usize,
    pub n_test: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            n_documents: 500,
            n_topics: 50,
            planted_terms: 3,
            distractors: 2,
            n_test: 25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCollection {
    pub documents: Vec<Document>,
    pub topics: Vec<Topic>,
    pub qrels: QrelSet,
    /// Target passage of each topic.
    pub targets: BTreeMap<String, String>,
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn pseudo_word<R: Rng>(rng: &mut R) -> String {
    let syllables = rng.random_range(3..=4);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).unwrap());
        w.push_str(NUCLEI.choose(rng).unwrap());
    }
    w.push_str(CODAS.choose(rng).unwrap());
    w
}

fn vocab_word<R: Rng>(rng: &mut R) -> &'static str {
    // skewed towards the front of the list
    let x: f64 = rng.random();
    VOCAB[((x * x) * VOCAB.len() as f64) as usize % VOCAB.len()]
}

/// One sentence as a list of words (without the terminator).
fn sentence_words<R: Rng>(rng: &mut R) -> Vec<String> {
    let n = rng.random_range(6..=14);
    (0..n).map(|_| vocab_word(rng).to_string()).collect()
}

fn render_sentence<R: Rng>(rng: &mut R, words: &[String]) -> String {
    let mut s = capitalize(&words[0]);
    for (i, w) in words[1..].iter().enumerate() {
        s.push(' ');
        s.push_str(w);
        // sprinkle abbreviations and decimals that must not split sentences
        if i == 2 {
            match rng.random_range(0..12) {
                0 => s.push_str(" (see Fig. 2)"),
                1 => s.push_str(", e.g. Trial 4,"),
                2 => s.push_str(" at 2.5 t/ha"),
                3 => s.push_str(" as noted by Dr. Reid"),
                _ => {}
            }
        }
    }
    s.push(if rng.random_range(0..15) == 0 { '?' } else { '.' });
    s
}

/// A random body and the exact sentences it is made of.
pub fn random_body<R: Rng>(rng: &mut R, n_sentences: usize) -> (String, Vec<String>) {
    let sentences: Vec<String> = (0..n_sentences)
        .map(|_| {
            let w = sentence_words(rng);
            render_sentence(rng, &w)
        })
        .collect();
    let sep = if rng.random_range(0..4) == 0 { "\n\n" } else { " " };
    (sentences.join(sep), sentences)
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticCollection {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let vocab: HashSet<&str> = VOCAB.iter().copied().collect();

    // documents as sentence word lists so terms can be planted before rendering
    let mut docs: Vec<(String, String, Vec<Vec<String>>)> = (0..cfg.n_documents)
        .map(|i| {
            let title_len = rng.random_range(3..=6);
            let title = (0..title_len)
                .map(|_| vocab_word(&mut rng))
                .collect::<Vec<_>>()
                .join(" ");
            let n_sent = rng.random_range(4..=24);
            let sentences = (0..n_sent).map(|_| sentence_words(&mut rng)).collect();
            (format!("d{:04}", i + 1), capitalize(&title), sentences)
        })
        .collect();

    let mut used: HashSet<String> = HashSet::new();
    let mut fresh_term = |rng: &mut ChaCha8Rng| loop {
        let w = pseudo_word(rng);
        if !vocab.contains(w.as_str()) && used.insert(w.clone()) {
            return w;
        }
    };

    let mut doc_order: Vec<usize> = (0..docs.len()).collect();
    for i in (1..doc_order.len()).rev() {
        let j = rng.random_range(0..=i);
        doc_order.swap(i, j);
    }

    let mut topics = Vec::new();
    let mut qrels = QrelSet::new();
    let mut targets = BTreeMap::new();
    let mut planted_passages: HashSet<(usize, usize)> = HashSet::new();
    for (t, &doc_idx) in doc_order.iter().cycle().take(cfg.n_topics).enumerate() {
        let topic_id = format!("T{:03}", t + 1);
        let n_sent = docs[doc_idx].2.len();
        let n_passages = n_sent.div_ceil(DEFAULT_WINDOW);
        let ordinal = rng.random_range(0..n_passages);
        let first_sentence = ordinal * DEFAULT_WINDOW;
        let last_sentence = (first_sentence + DEFAULT_WINDOW).min(n_sent);
        let rare: Vec<String> = (0..cfg.planted_terms).map(|_| fresh_term(&mut rng)).collect();
        for term in &rare {
            let s = rng.random_range(first_sentence..last_sentence);
            let words = &mut docs[doc_idx].2[s];
            let pos = rng.random_range(1..=words.len());
            words.insert(pos, term.clone());
        }
        planted_passages.insert((doc_idx, ordinal));

        // the first rare term also shows up elsewhere, alone
        for _ in 0..cfg.distractors {
            let other = rng.random_range(0..docs.len());
            let s = rng.random_range(0..docs[other].2.len());
            if (other, s / DEFAULT_WINDOW) == (doc_idx, ordinal) {
                continue;
            }
            let words = &mut docs[other].2[s];
            let pos = rng.random_range(1..=words.len());
            words.insert(pos, rare[0].clone());
        }

        let doc_id = docs[doc_idx].0.clone();
        let context: Vec<String> = docs[doc_idx].2[first_sentence]
            .iter()
            .filter(|w| !rare.contains(w))
            .take(3)
            .cloned()
            .collect();
        let start = QUESTION_STARTS.choose(&mut rng).unwrap();
        let question = format!(
            "{start} {} {} in {} {} {}?",
            rare[0],
            context.first().map_or("crops", String::as_str),
            rare[1 % rare.len()],
            context.get(1).map_or("paddocks", String::as_str),
            rare.last().unwrap(),
        );
        let n_queries = rng.random_range(2..=4);
        let keyword_queries: Vec<String> = (0..n_queries)
            .map(|i| {
                let mut q = vec![rare[i % rare.len()].clone()];
                q.push(vocab_word(&mut rng).to_string());
                if i % 2 == 0 {
                    q.push(rare[(i + 1) % rare.len()].clone());
                }
                q.push(context.get(i % context.len().max(1)).cloned().unwrap_or_else(|| "yield".into()));
                q.join(" ")
            })
            .collect();

        let target = passage_id(&doc_id, ordinal + 1);
        qrels.insert(topic_id.clone(), target.clone(), Grade::Relevant);
        if ordinal + 1 < n_passages {
            qrels.insert(topic_id.clone(), passage_id(&doc_id, ordinal + 2), Grade::Marginal);
        }
        if ordinal > 0 {
            qrels.insert(topic_id.clone(), passage_id(&doc_id, ordinal), Grade::NonRelevant);
        }
        targets.insert(topic_id.clone(), target);
        topics.push(Topic {
            topic_id,
            question,
            keyword_queries,
            answer: format!("See the passage discussing {} and {}.", rare[0], rare[1 % rare.len()]),
            split: Split::Train,
            source_doc_id: Some(doc_id),
        });
    }

    // most-judged topics form the test split, ties by id
    let mut by_count: Vec<(usize, String)> = topics
        .iter()
        .map(|t| (qrels.judged_count(&t.topic_id), t.topic_id.clone()))
        .collect();
    by_count.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let test: HashSet<String> = by_count.into_iter().take(cfg.n_test).map(|(_, id)| id).collect();
    for t in &mut topics {
        if test.contains(&t.topic_id) {
            t.split = Split::Test;
        }
    }

    let documents = docs
        .into_iter()
        .enumerate()
        .map(|(i, (doc_id, title, sentences))| {
            let rendered: Vec<String> = sentences.iter().map(|w| render_sentence(&mut rng, w)).collect();
            let report = i % 3 != 0;
            Document {
                source_url: report.then(|| format!("https://example.org/reports/{doc_id}.pdf")),
                doc_id,
                title,
                source_kind: if report { SourceKind::Report } else { SourceKind::Journal },
                body: rendered.join(" "),
            }
        })
        .collect();

    SyntheticCollection {
        documents,
        topics,
        qrels,
        targets,
    }
}

impl SyntheticCollection {
    pub fn write_qrels<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for topic in self.qrels.topic_ids() {
            for (passage, grade) in self.qrels.topic(topic).into_iter().flatten() {
                writeln!(out, "{topic} 0 {passage} {grade}")?;
            }
        }
        Ok(())
    }

    /// Writes `corpus.jsonl`, `topics.jsonl` and `qrels.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        write_jsonl(BufWriter::new(File::create(dir.join("corpus.jsonl"))?), &self.documents)?;
        let mut topics = BufWriter::new(File::create(dir.join("topics.jsonl"))?);
        write_topics(&mut topics, &self.topics)?;
        topics.flush()?;
        let mut qrels = BufWriter::new(File::create(dir.join("qrels.txt"))?);
        self.write_qrels(&mut qrels)?;
        qrels.flush()
    }
}
