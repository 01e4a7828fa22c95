//! Brute-force reference scorers. They recompute everything from raw passage
//! text and qrels on every call and share no code with the engine beyond the
//! analyzer.
#![allow(dead_code)]

use std::collections::HashMap;

use passearch_core::analysis::tokenize;

/// Direct BM25 over raw passages: every passage rescanned for every query.
pub struct Bm25Oracle {
    docs: Vec<(String, Vec<String>)>,
    pub k1: f64,
    pub b: f64,
}

impl Bm25Oracle {
    pub fn new(passages: &[(String, String)], k1: f64, b: f64) -> Self {
        Self {
            docs: passages
                .iter()
                .map(|(id, text)| (id.clone(), tokenize(text)))
                .collect(),
            k1,
            b,
        }
    }

    fn df(&self, term: &str) -> usize {
        self.docs
            .iter()
            .filter(|(_, toks)| toks.iter().any(|t| t == term))
            .count()
    }

    fn avgdl(&self) -> f64 {
        let total: usize = self.docs.iter().map(|(_, t)| t.len()).sum();
        total as f64 / self.docs.len() as f64
    }

    fn score_terms(&self, terms: &[String], dfs: &HashMap<&str, usize>, avgdl: f64, doc: usize) -> f64 {
        let n = self.docs.len() as f64;
        let toks = &self.docs[doc].1;
        let len = toks.len() as f64;
        let mut total = 0.0;
        for q in terms {
            let tf = toks.iter().filter(|t| *t == q).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = dfs[q.as_str()] as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            total += idf * tf * (self.k1 + 1.0) / (tf + self.k1 * (1.0 - self.b + self.b * len / avgdl));
        }
        total
    }

    pub fn score(&self, query: &str, doc: usize) -> f64 {
        let terms = tokenize(query);
        let dfs = terms.iter().map(|t| (t.as_str(), self.df(t))).collect();
        self.score_terms(&terms, &dfs, self.avgdl(), doc)
    }

    /// Every passage sharing a term with the query, best first, ties by id.
    pub fn rank(&self, query: &str) -> Vec<(String, f64)> {
        let q = tokenize(query);
        let dfs: HashMap<&str, usize> = q.iter().map(|t| (t.as_str(), self.df(t))).collect();
        let avgdl = self.avgdl();
        let mut out: Vec<(String, f64)> = self
            .docs
            .iter()
            .enumerate()
            .filter(|(_, (_, toks))| toks.iter().any(|t| q.contains(t)))
            .map(|(i, (id, _))| (id.clone(), self.score_terms(&q, &dfs, avgdl, i)))
            .collect();
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        out
    }
}

fn dcg(grades: &[u8], k: usize) -> f64 {
    grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| (2f64.powi(g as i32) - 1.0) / ((i as f64 + 2.0).ln() / 2f64.ln()))
        .sum()
}

fn permutations(items: &[u8]) -> Vec<Vec<u8>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// nDCG@k with the ideal DCG found by enumerating every ordering of the
/// judged passages. `None` when no grade is positive.
pub fn ndcg(ranking: &[&str], qrels: &HashMap<String, u8>, k: usize) -> Option<f64> {
    if !qrels.values().any(|&g| g > 0) {
        return None;
    }
    let grades: Vec<u8> = ranking.iter().map(|p| *qrels.get(*p).unwrap_or(&0)).collect();
    let judged: Vec<u8> = qrels.values().copied().collect();
    let ideal = permutations(&judged)
        .iter()
        .map(|p| dcg(p, k))
        .fold(0.0, f64::max);
    Some(dcg(&grades, k) / ideal)
}

pub fn rr(ranking: &[&str], qrels: &HashMap<String, u8>, threshold: u8) -> f64 {
    for (i, p) in ranking.iter().enumerate() {
        if qrels.get(*p).copied().unwrap_or(0) >= threshold {
            return 1.0 / (i as f64 + 1.0);
        }
    }
    0.0
}

pub fn success(ranking: &[&str], qrels: &HashMap<String, u8>, k: usize, threshold: u8) -> f64 {
    let hit = ranking
        .iter()
        .take(k)
        .any(|p| qrels.get(*p).copied().unwrap_or(0) >= threshold);
    if hit { 1.0 } else { 0.0 }
}

/// Student t density with `nu` degrees of freedom.
fn t_density(x: f64, nu: f64) -> f64 {
    fn ln_gamma(z: f64) -> f64 {
        // Lanczos approximation, g = 7
        const C: [f64; 9] = [
            0.999_999_999_999_809_9,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_1,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_572e-6,
            1.505_632_735_149_311_6e-7,
        ];
        let z = z - 1.0;
        let mut a = C[0];
        let t = z + 7.5;
        for (i, c) in C.iter().enumerate().skip(1) {
            a += c / (z + i as f64);
        }
        0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + a.ln()
    }
    let ln_c = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (nu * std::f64::consts::PI).ln();
    (ln_c - (nu + 1.0) / 2.0 * (1.0 + x * x / nu).ln()).exp()
}

/// Paired t statistic from the textbook formula and a two-sided p-value from
/// Simpson integration of the t density over [0, |t|].
pub fn paired_t(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = mean / (sd / n.sqrt());
    let nu = n - 1.0;
    let steps = 20_000;
    let h = t.abs() / steps as f64;
    let mut area = t_density(0.0, nu) + t_density(t.abs(), nu);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        area += w * t_density(i as f64 * h, nu);
    }
    area *= h / 3.0;
    (t, 1.0 - 2.0 * area)
}
