//! Subword vocabulary over rendered documents.
//!
//! Reserved tokens occupy fixed ids: the special and structural tokens at
//! `0..=10`, then one id per amount bucket. Description words are split into
//! subwords learned by byte-pair-style merges; non-initial pieces carry the
//! `##` prefix. Encoding segments each word by greedy longest match, which
//! always succeeds because every training character is present in both its
//! initial and its continuation form.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use crate::grammar::BucketConfig;
use crate::synthgen::Provenance;
use crate::{Error, Result};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const SEP_ID: u32 = 3;
pub const MASK_ID: u32 = 4;
pub const TYPE_ID: u32 = 5;
pub const AMT_ID: u32 = 6;
pub const NAME_ID: u32 = 7;
pub const DEBIT_ID: u32 = 8;
pub const CREDIT_ID: u32 = 9;
pub const EMPTY_DESC_ID: u32 = 10;
pub const FIRST_BUCKET_ID: u32 = 11;

pub const SPECIAL_TOKENS: [&str; 11] = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[TYPE]", "[AMT]", "[NAME]", "DEBIT", "CREDIT",
    "EMPTY_DESC",
];

pub const CONTINUATION: &str = "##";
pub const DEFAULT_MAX_CONTEXT: usize = 512;
const VOCAB_MAGIC: &str = "#txnfm-vocab";
const VOCAB_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    reserved: HashMap<String, u32>,
    pieces: HashMap<String, u32>,
    buckets: BucketConfig,
}

impl Vocabulary {
    /// Vocabulary holding only the reserved tokens.
    pub fn reserved_only(buckets: BucketConfig) -> Self {
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        tokens.extend((0..=buckets.max_index).map(|i| buckets.token(i)));
        let reserved = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self {
            tokens,
            reserved,
            pieces: HashMap::new(),
            buckets,
        }
    }

    pub fn reserved_count(buckets: &BucketConfig) -> usize {
        SPECIAL_TOKENS.len() + buckets.n_buckets()
    }

    pub fn n_reserved(&self) -> usize {
        Self::reserved_count(&self.buckets)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn buckets(&self) -> &BucketConfig {
        &self.buckets
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.reserved
            .get(token)
            .or_else(|| self.pieces.get(token))
            .copied()
    }

    pub fn bucket_id(&self, index: u32) -> u32 {
        FIRST_BUCKET_ID + index
    }

    pub fn is_reserved(&self, id: u32) -> bool {
        (id as usize) < self.n_reserved()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    fn push_piece(&mut self, piece: String) -> bool {
        if self.reserved.contains_key(&piece) || self.pieces.contains_key(&piece) {
            return false;
        }
        self.pieces.insert(piece.clone(), self.tokens.len() as u32);
        self.tokens.push(piece);
        true
    }

    fn from_tokens(tokens: Vec<String>, buckets: BucketConfig) -> Result<Self> {
        let mut vocab = Self::reserved_only(buckets);
        let n_reserved = vocab.n_reserved();
        if tokens.len() < n_reserved || tokens[..n_reserved] != vocab.tokens[..] {
            return Err(Error::input("vocabulary does not start with the reserved token block"));
        }
        for piece in tokens.into_iter().skip(n_reserved) {
            if piece.is_empty() || piece.chars().any(char::is_whitespace) {
                return Err(Error::input(format!("invalid vocabulary token `{piece}`")));
            }
            if !vocab.push_piece(piece.clone()) {
                return Err(Error::input(format!("duplicate vocabulary token `{piece}`")));
            }
        }
        Ok(vocab)
    }

    /// Writes the vocabulary file: one header line, then one token per line in id order.
    pub fn save(&self, path: &Path, provenance: Option<&Provenance>) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        let mut header = format!(
            "{VOCAB_MAGIC} version={VOCAB_VERSION} max_index={} width_cents={}",
            self.buckets.max_index, self.buckets.width_cents
        );
        if let Some(p) = provenance {
            header.push_str(&format!(" config_hash={} seed={}", p.config_hash, p.seed));
        }
        writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
        for t in &self.tokens {
            writeln!(w, "{t}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let corrupt = |reason: String| Error::CorruptFile {
            path: path.to_path_buf(),
            reason,
        };
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = std::io::BufReader::new(f).lines();
        let header = lines
            .next()
            .ok_or_else(|| corrupt("empty file".into()))?
            .map_err(|e| Error::io(path, e))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some(VOCAB_MAGIC) {
            return Err(corrupt("missing vocabulary header".into()));
        }
        let mut buckets = BucketConfig::default();
        let mut version = None;
        for field in fields {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| corrupt(format!("bad header field `{field}`")))?;
            let parse_err = |_| corrupt(format!("bad header value `{field}`"));
            match k {
                "version" => version = Some(v.parse::<u32>().map_err(parse_err)?),
                "max_index" => buckets.max_index = v.parse().map_err(parse_err)?,
                "width_cents" => buckets.width_cents = v.parse().map_err(parse_err)?,
                _ => {}
            }
        }
        if version != Some(VOCAB_VERSION) {
            return Err(corrupt(format!("unsupported version {version:?}")));
        }
        let tokens = lines
            .collect::<std::io::Result<Vec<_>>>()
            .map_err(|e| Error::io(path, e))?;
        Self::from_tokens(tokens, buckets).map_err(|e| corrupt(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TokenizerConfig {
    pub target_size: usize,
    pub min_frequency: u64,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            target_size: 8192,
            min_frequency: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Candidate {
    count: u64,
    left: String,
    right: String,
    pair: (u32, u32),
}

impl Ord for Candidate {
    // Highest count first; ties go to the lexicographically smaller pair.
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| Reverse((&self.left, &self.right)).cmp(&Reverse((&other.left, &other.right))))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Word {
    symbols: Vec<u32>,
    count: u64,
}

fn word_pairs(symbols: &[u32]) -> impl Iterator<Item = (u32, u32)> + '_ {
    symbols.windows(2).map(|w| (w[0], w[1]))
}

/// Learns subwords with greedy pair merges over description words.
///
/// Words are whitespace-split; reserved tokens are atoms and never enter
/// merging. Pair counts include overlapping occurrences. The most frequent pair
/// is merged first, ties broken by the lexicographically smaller pair, and
/// merging stops at `target_size` tokens or when no pair reaches
/// `min_frequency`. Each merged string is added in its initial and its `##`
/// continuation form.
pub fn train_vocab<S: AsRef<str>>(
    lines: &[S],
    buckets: BucketConfig,
    config: &TokenizerConfig,
) -> Result<Vocabulary> {
    buckets.validate()?;
    let mut vocab = Vocabulary::reserved_only(buckets);
    if lines.is_empty() {
        return Err(Error::input("tokenizer corpus is empty"));
    }
    if config.target_size <= vocab.n_reserved() {
        return Err(Error::config(format!(
            "target_size {} must exceed the {} reserved tokens",
            config.target_size,
            vocab.n_reserved()
        )));
    }

    let mut counts: HashMap<&str, u64> = HashMap::new();
    for line in lines {
        for w in line.as_ref().split_whitespace() {
            if !vocab.reserved.contains_key(w) {
                *counts.entry(w).or_default() += 1;
            }
        }
    }
    let mut sorted: Vec<(&str, u64)> = counts.into_iter().collect();
    sorted.sort_unstable();

    // Symbol table for merging: role-free strings.
    let mut symbols: Vec<String> = Vec::new();
    let mut symbol_ids: HashMap<String, u32> = HashMap::new();
    let mut alphabet: Vec<char> = sorted.iter().flat_map(|(w, _)| w.chars()).collect();
    alphabet.sort_unstable();
    alphabet.dedup();
    for c in &alphabet {
        symbol_ids.insert(c.to_string(), symbols.len() as u32);
        symbols.push(c.to_string());
    }
    for c in &alphabet {
        vocab.push_piece(c.to_string());
        vocab.push_piece(format!("{CONTINUATION}{c}"));
    }

    let mut words: Vec<Word> = sorted
        .iter()
        .map(|(w, count)| Word {
            symbols: w.chars().map(|c| symbol_ids[&c.to_string()]).collect(),
            count: *count,
        })
        .collect();

    let mut pair_counts: HashMap<(u32, u32), u64> = HashMap::new();
    let mut where_: HashMap<(u32, u32), Vec<usize>> = HashMap::new();
    for (wi, word) in words.iter().enumerate() {
        for pair in word_pairs(&word.symbols) {
            *pair_counts.entry(pair).or_default() += word.count;
            where_.entry(pair).or_default().push(wi);
        }
    }
    for list in where_.values_mut() {
        list.dedup();
    }

    let candidate = |pair: (u32, u32), count: u64, symbols: &[String]| Candidate {
        count,
        left: symbols[pair.0 as usize].clone(),
        right: symbols[pair.1 as usize].clone(),
        pair,
    };
    let mut heap: BinaryHeap<Candidate> = pair_counts
        .iter()
        .map(|(&p, &c)| candidate(p, c, &symbols))
        .collect();
    let mut banned: HashSet<(u32, u32)> = HashSet::new();

    while vocab.len() < config.target_size {
        let Some(top) = heap.pop() else { break };
        let current = pair_counts.get(&top.pair).copied().unwrap_or(0);
        if current != top.count || banned.contains(&top.pair) {
            continue;
        }
        if current < config.min_frequency.max(1) {
            break;
        }
        let merged = format!("{}{}", top.left, top.right);
        // An initial piece must never look like a continuation or a reserved token.
        if merged.starts_with(CONTINUATION) || vocab.reserved.contains_key(&merged) {
            banned.insert(top.pair);
            continue;
        }
        let new_id = match symbol_ids.get(&merged) {
            Some(&id) => id,
            None => {
                let id = symbols.len() as u32;
                symbols.push(merged.clone());
                symbol_ids.insert(merged.clone(), id);
                id
            }
        };
        vocab.push_piece(merged.clone());
        if vocab.len() < config.target_size {
            vocab.push_piece(format!("{CONTINUATION}{merged}"));
        }

        let (a, b) = top.pair;
        let mut touched: HashMap<(u32, u32), i64> = HashMap::new();
        let affected = where_.remove(&top.pair).unwrap_or_default();
        for wi in affected {
            let word = &mut words[wi];
            if !word_pairs(&word.symbols).any(|p| p == (a, b)) {
                continue;
            }
            let count = word.count as i64;
            for p in word_pairs(&word.symbols) {
                *touched.entry(p).or_default() -= count;
            }
            let mut next = Vec::with_capacity(word.symbols.len());
            let mut i = 0;
            while i < word.symbols.len() {
                if i + 1 < word.symbols.len() && word.symbols[i] == a && word.symbols[i + 1] == b {
                    next.push(new_id);
                    i += 2;
                } else {
                    next.push(word.symbols[i]);
                    i += 1;
                }
            }
            word.symbols = next;
            for p in word_pairs(&word.symbols) {
                *touched.entry(p).or_default() += count;
                let list = where_.entry(p).or_default();
                if list.last() != Some(&wi) {
                    list.push(wi);
                }
            }
        }
        let mut touched: Vec<((u32, u32), i64)> = touched.into_iter().filter(|(_, d)| *d != 0).collect();
        touched.sort_unstable();
        for (pair, delta) in touched {
            let entry = pair_counts.entry(pair).or_default();
            *entry = (*entry as i64 + delta).max(0) as u64;
            let count = *entry;
            if count == 0 {
                pair_counts.remove(&pair);
            } else if pair != top.pair {
                heap.push(candidate(pair, count, &symbols));
            }
        }
        pair_counts.remove(&top.pair);
    }
    Ok(vocab)
}

/// Model-ready ids: `[CLS]` first, real tokens, then `[PAD]` up to `max_context`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of leading real (unpadded) positions.
    pub fn n_real(&self) -> usize {
        self.attention_mask.iter().take_while(|&&m| m == 1).count()
    }

    /// Checks that the mask is a run of ones followed by zeros and lengths agree.
    pub fn validate(&self) -> Result<()> {
        if self.ids.len() != self.attention_mask.len() {
            return Err(Error::ShapeMismatch {
                expected: self.ids.len(),
                actual: self.attention_mask.len(),
            });
        }
        let n = self.n_real();
        if n == 0 || self.attention_mask[n..].iter().any(|&m| m != 0) {
            return Err(Error::input("attention mask must be a non-empty prefix of ones"));
        }
        Ok(())
    }

    pub fn from_ids(mut ids: Vec<u32>, max_context: usize) -> Self {
        ids.truncate(max_context);
        let n = ids.len();
        ids.resize(max_context, PAD_ID);
        let mut attention_mask = vec![1u8; n];
        attention_mask.resize(max_context, 0);
        Self { ids, attention_mask }
    }
}

/// Greedy longest-match segmentation of one description word.
fn segment_word(word: &str, vocab: &Vocabulary, out: &mut Vec<u32>) {
    let chars: Vec<(usize, char)> = word.char_indices().collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let from = chars[start].0;
        let mut found = None;
        for end in (start + 1..=chars.len()).rev() {
            let to = chars.get(end).map_or(word.len(), |c| c.0);
            let text = &word[from..to];
            let id = if start == 0 {
                if text.starts_with(CONTINUATION) {
                    None
                } else {
                    vocab.pieces.get(text).copied()
                }
            } else {
                vocab.pieces.get(&format!("{CONTINUATION}{text}")).copied()
            };
            if let Some(id) = id {
                found = Some((id, end));
                break;
            }
        }
        match found {
            Some((id, end)) => {
                pieces.push(id);
                start = end;
            }
            None => {
                out.push(UNK_ID);
                return;
            }
        }
    }
    out.extend(pieces);
}

/// Tokenizes text into sentences of ids (split at `[SEP]`), without `[CLS]`.
fn tokenize_sentences(text: &str, vocab: &Vocabulary) -> Vec<Vec<u32>> {
    let mut sentences = vec![Vec::new()];
    for word in text.split_whitespace() {
        match vocab.reserved.get(word) {
            Some(&SEP_ID) => sentences.push(Vec::new()),
            Some(&id) => sentences.last_mut().expect("non-empty").push(id),
            None => segment_word(word, vocab, sentences.last_mut().expect("non-empty")),
        }
    }
    sentences
}

/// Encodes a rendered document.
///
/// Keeps `[CLS]` plus the most recent complete sentences that fit in
/// `max_context`; if even the newest sentence does not fit, its leading tokens
/// are kept. The result is padded to exactly `max_context`.
pub fn encode(text: &str, vocab: &Vocabulary, max_context: usize) -> TokenSequence {
    let max_context = max_context.max(1);
    let sentences = tokenize_sentences(text, vocab);
    let budget = max_context - 1;
    let mut kept = 0;
    let mut used = 0;
    for s in sentences.iter().rev() {
        let cost = s.len() + usize::from(kept > 0);
        if used + cost > budget {
            break;
        }
        used += cost;
        kept += 1;
    }
    let mut ids = Vec::with_capacity(max_context);
    ids.push(CLS_ID);
    if kept == 0 {
        let newest = sentences.last().expect("non-empty");
        ids.extend(newest.iter().take(budget));
    } else {
        for (i, s) in sentences[sentences.len() - kept..].iter().enumerate() {
            if i > 0 {
                ids.push(SEP_ID);
            }
            ids.extend(s);
        }
    }
    TokenSequence::from_ids(ids, max_context)
}

/// Inverse of [`encode`] on in-vocabulary input: drops `[CLS]`/`[PAD]` and glues
/// `##` continuations onto the preceding piece.
pub fn decode(ids: &[u32], vocab: &Vocabulary) -> Result<String> {
    let mut words: Vec<String> = Vec::new();
    for &id in ids {
        let token = vocab.token(id).ok_or(Error::UnknownTokenId(id))?;
        if id == CLS_ID || id == PAD_ID {
            continue;
        }
        match token.strip_prefix(CONTINUATION) {
            Some(rest) if !vocab.is_reserved(id) && !words.is_empty() => {
                words.last_mut().expect("non-empty").push_str(rest);
            }
            _ => words.push(token.to_string()),
        }
    }
    Ok(words.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{serialize_document, BucketConfig};
    use crate::synthgen::{Direction, Transaction};
    use proptest::prelude::*;

    fn micro(lines: &[&str], target: usize) -> Vocabulary {
        let cfg = TokenizerConfig {
            target_size: target,
            min_frequency: 1,
        };
        train_vocab(lines, BucketConfig::default(), &cfg).unwrap()
    }

    fn learned(v: &Vocabulary) -> Vec<&str> {
        v.tokens()[v.n_reserved()..].iter().map(String::as_str).collect()
    }

    #[test]
    fn micro_corpus_merges_in_frequency_order() {
        let v = micro(&["aaaa aaaa"], 10_000);
        // alphabet, then merge "aa" (6 overlapping pairs), then "aaaa".
        assert_eq!(learned(&v), ["a", "##a", "aa", "##aa", "aaaa", "##aaaa"]);
    }

    #[test]
    fn reserved_ids_are_fixed() {
        let v = micro(&["hello world"], 400);
        for (i, t) in SPECIAL_TOKENS.iter().enumerate() {
            assert_eq!(v.id(t), Some(i as u32));
        }
        assert_eq!(v.id("AMT_0_50"), Some(FIRST_BUCKET_ID));
        assert_eq!(v.id("AMT_10000_INF"), Some(FIRST_BUCKET_ID + 200));
        assert_eq!(v.n_reserved(), 212);
    }

    #[test]
    fn target_must_exceed_reserved() {
        let cfg = TokenizerConfig {
            target_size: 212,
            min_frequency: 1,
        };
        assert!(train_vocab(&["x"], BucketConfig::default(), &cfg).is_err());
        let empty: [&str; 0] = [];
        assert!(train_vocab(&empty, BucketConfig::default(), &TokenizerConfig::default()).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let lines = ["the cat sat on the mat", "the bat ate the hat", "that cat"];
        assert_eq!(micro(&lines, 300), micro(&lines, 300));
    }

    #[test]
    fn hash_prefixed_words_do_not_collide() {
        let v = micro(&["##a ##a ##ab #a", "a ab"], 10_000);
        for t in learned(&v) {
            if let Some(rest) = t.strip_prefix("##") {
                assert!(!rest.is_empty());
            }
        }
        let text = "##a ##ab #a a";
        let seq = encode(text, &v, 32);
        assert_eq!(decode(&seq.ids, &v).unwrap(), text);
    }

    #[test]
    fn special_only_decodes() {
        let v = micro(&["a"], 400);
        assert_eq!(decode(&[CLS_ID, PAD_ID, PAD_ID], &v).unwrap(), "");
        assert_eq!(decode(&[SEP_ID], &v).unwrap(), "[SEP]");
        assert!(matches!(decode(&[99_999], &v), Err(Error::UnknownTokenId(99_999))));
    }

    #[test]
    fn empty_description_sentence_layout() {
        let v = micro(&["a"], 400);
        let seq = encode("[TYPE] DEBIT [AMT] AMT_0_50 [NAME] EMPTY_DESC", &v, 16);
        assert_eq!(
            &seq.ids[..7],
            &[CLS_ID, TYPE_ID, DEBIT_ID, AMT_ID, FIRST_BUCKET_ID, NAME_ID, EMPTY_DESC_ID]
        );
        assert_eq!(seq.n_real(), 7);
        assert_eq!(seq.len(), 16);
    }

    #[test]
    fn unknown_characters_become_unk() {
        let v = micro(&["abc"], 400);
        let seq = encode("[NAME] abz", &v, 8);
        assert_eq!(&seq.ids[..3], &[CLS_ID, NAME_ID, UNK_ID]);
    }

    #[test]
    fn truncation_keeps_most_recent_sentences() {
        let cfg = BucketConfig::default();
        let txns: Vec<Transaction> = (0..100)
            .map(|i| Transaction {
                ts: i,
                dir: Direction::Debit,
                amount_cents: 100 + i as u64,
                desc: format!("shop{i} purchase"),
            })
            .collect();
        let doc = serialize_document("a", &txns, &cfg).unwrap();
        let text = doc.render();
        let v = micro(&[text.as_str()], 2000);
        let seq = encode(&text, &v, 64);
        assert_eq!(seq.len(), 64);
        let decoded = decode(&seq.ids, &v).unwrap();
        assert!(text.ends_with(&decoded), "kept text must be a suffix");
        assert!(decoded.starts_with("[TYPE]"));
        let newest = doc.sentences.last().unwrap().render();
        assert!(decoded.ends_with(&newest));
    }

    #[test]
    fn oversized_single_sentence_is_cut_to_context() {
        let v = micro(&["x"], 400);
        let text = format!("[TYPE] DEBIT [AMT] AMT_0_50 [NAME] {}", vec!["x"; 40].join(" "));
        let seq = encode(&text, &v, 16);
        assert_eq!(seq.n_real(), 16);
        assert_eq!(seq.ids[1], TYPE_ID);
    }

    #[test]
    fn vocab_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let v = micro(&["the cat sat on the mat"], 260);
        let prov = Provenance {
            config_hash: "abc".into(),
            seed: 3,
        };
        v.save(&path, Some(&prov)).unwrap();
        let first = std::fs::read_to_string(&path).unwrap();
        assert!(first.lines().next().unwrap().contains("max_index=200"));
        assert_eq!(first.lines().count(), v.len() + 1);
        assert_eq!(Vocabulary::load(&path).unwrap(), v);
    }

    proptest! {
        #[test]
        fn reserved_tokens_stay_atomic(words in proptest::collection::vec(
            prop_oneof![
                Just("[SEP]".to_string()), Just("[TYPE]".to_string()), Just("DEBIT".to_string()),
                Just("AMT_50_100".to_string()), Just("EMPTY_DESC".to_string()),
                "[a-z#]{1,6}", "[A-Z\\[\\]_]{1,7}",
            ], 1..20)) {
            let v = micro(&["ab abc #a DEBITX [sepx"], 600);
            let text = words.join(" ");
            let seq = encode(&text, &v, 256);
            let real = &seq.ids[1..seq.n_real()];
            let reserved_in: Vec<u32> = words.iter().filter_map(|w| v.reserved.get(w.as_str()).copied())
                .filter(|&id| id != SEP_ID && id != UNK_ID).collect();
            let reserved_out: Vec<u32> = real.iter().copied()
                .filter(|&id| v.is_reserved(id) && id != UNK_ID && id != SEP_ID).collect();
            prop_assert_eq!(reserved_in, reserved_out);
        }
    }
}
