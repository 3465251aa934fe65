//! Shared text primitives: character-offset bookkeeping, a whitespace/punctuation
//! tokenizer, and a period-based sentence splitter.
//!
//! All offsets in this crate are *character* offsets (Unicode scalar values),
//! not byte offsets, so that spans survive round-trips through tools that
//! tokenize differently.

/// Number of characters in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte index of character index `idx` in `s`. `idx` may equal `char_len(s)`.
fn char_to_byte(s: &str, idx: usize) -> usize {
    s.char_indices()
        .nth(idx)
        .map(|(b, _)| b)
        .unwrap_or_else(|| s.len())
}

/// Slice `s` by character offsets `[start, end)`.
///
/// Panics if the range is out of bounds or inverted; callers validate spans
/// before slicing.
pub fn char_slice(s: &str, start: usize, end: usize) -> &str {
    let b0 = char_to_byte(s, start);
    let b1 = char_to_byte(s, end);
    &s[b0..b1]
}

/// A token with half-open character offsets into its source string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawToken {
    pub start: usize,
    pub end: usize,
}

impl RawToken {
    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        char_slice(source, self.start, self.end)
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '-'
}

/// Split `text` into word and single-character punctuation tokens.
///
/// Words are maximal runs of alphanumerics plus internal apostrophes and
/// hyphens; every other non-space character becomes its own token.
pub fn tokenize(text: &str) -> Vec<RawToken> {
    let mut tokens = Vec::new();
    let mut word_start: Option<usize> = None;
    for (i, c) in text.chars().enumerate() {
        if is_word_char(c) {
            if word_start.is_none() {
                word_start = Some(i);
            }
        } else {
            if let Some(s) = word_start.take() {
                tokens.push(RawToken { start: s, end: i });
            }
            if !c.is_whitespace() {
                tokens.push(RawToken { start: i, end: i + 1 });
            }
        }
    }
    if let Some(s) = word_start {
        tokens.push(RawToken {
            start: s,
            end: char_len(text),
        });
    }
    tokens
}

/// A sentence as a half-open character span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
}

/// Split `text` into sentences on `.`, `!` and `?`.
///
/// The terminator belongs to its sentence; leading whitespace is trimmed from
/// each sentence start. Text without a terminator forms one sentence.
pub fn split_sentences(text: &str) -> Vec<SentenceSpan> {
    let chars: Vec<char> = text.chars().collect();
    let mut spans = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        if c == '.' || c == '!' || c == '?' {
            // swallow a run of terminators ("..", "?!")
            let mut end = i + 1;
            while end < chars.len() && matches!(chars[end], '.' | '!' | '?') {
                end += 1;
            }
            push_trimmed(&chars, start, end, &mut spans);
            start = end;
            i = end;
        } else {
            i += 1;
        }
    }
    if start < chars.len() {
        push_trimmed(&chars, start, chars.len(), &mut spans);
    }
    spans
}

fn push_trimmed(chars: &[char], mut start: usize, mut end: usize, out: &mut Vec<SentenceSpan>) {
    while start < end && chars[start].is_whitespace() {
        start += 1;
    }
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    if start < end {
        out.push(SentenceSpan { start, end });
    }
}

/// 64-bit FNV-1a over a string. Used wherever a hash must stay stable across
/// runs and toolchain versions (embedding lookup, seed mixing).
pub fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Mix integers into a single deterministic seed.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for b in p.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
