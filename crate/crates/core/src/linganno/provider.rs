//! The bundled deterministic annotation provider.
//!
//! Dictionary POS tagging, clause-bounded frame extraction around a verb
//! lexicon, exact-string plus pronoun coreference within a step, and a
//! cue-word temporal annotator. Rule-based on purpose: the weak-supervision
//! pipeline stays reproducible offline, and adapters around trained
//! annotators can replace this provider without touching the heuristics.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::Article;
use crate::text;

use super::{
    pos, AnnotationProvider, CorefChain, LingAnnotations, PosToken, ProviderError, SrlArg,
    SrlFrame, TemporalLabel, TemporalRelation, TokenSpan,
};

const DETERMINERS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "your", "its", "their", "his", "her",
    "our", "my", "some", "any", "each", "every", "another", "both",
];

const PRONOUNS: &[&str] = &["it", "they", "them", "he", "she", "him", "you", "we", "i", "us"];

/// Closed list used for chain building and for filtering pronoun surfaces
/// out of entity intersections.
pub const COREF_PRONOUNS: &[&str] = &["it", "they", "them"];

/// Whether a lowercased word is one of the closed coref pronouns.
pub fn is_coref_pronoun(word: &str) -> bool {
    COREF_PRONOUNS.contains(&word)
}

const BE_VERBS: &[&str] = &["am", "is", "are", "was", "were", "be", "been", "being"];

pub(crate) fn is_be_verb(word: &str) -> bool {
    BE_VERBS.contains(&word)
}

const MODALS: &[&str] = &[
    "will", "would", "can", "could", "shall", "should", "may", "might", "must",
];

const PREPOSITIONS: &[&str] = &[
    "in", "on", "at", "to", "for", "with", "without", "from", "of", "by", "into", "onto", "over",
    "under", "above", "below", "through", "up", "down", "off", "out", "about", "around", "near",
    "behind", "between", "and", "or", "but", "nor", "as", "while", "when", "where", "than",
    "because", "though", "although", "unless", "before", "after", "until", "once", "if", "so",
];

const ADVERBS: &[&str] = &[
    "first", "beforehand", "afterwards", "later", "then", "now", "again", "twice", "very", "too",
    "also", "just", "well", "together", "aside", "away", "not",
];

const NUMBER_WORDS: &[&str] = &[
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "dozen",
];

const ADJECTIVES: &[&str] = &[
    "clean", "warm", "cool", "empty", "golden", "steady", "sharp", "hot", "cold", "wet", "soft",
    "hard", "smooth", "rough", "fresh", "wooden", "metal", "plastic", "small", "large", "big",
    "tiny", "thin", "thick", "loose", "tight", "ready", "sticky", "shiny", "stubborn", "gentle",
    "firm", "flat", "solid", "damp", "dirty", "sturdy", "spare", "new", "old", "good", "long",
    "short", "high", "low", "full", "whole", "main", "extra", "safe", "stable", "level",
];

/// Instructional verb stems. Words that double as common nouns in manuals
/// (glue, nail, paint, screw, sand, water, oil, step) are deliberately
/// absent so noun chunking keeps working on them.
const VERB_STEMS: &[&str] = &[
    "heat", "place", "slice", "stir", "mix", "cut", "chop", "attach", "remove", "add", "pour",
    "wait", "bake", "cook", "fry", "boil", "dry", "turn", "press", "hold", "open", "close",
    "wash", "apply", "wipe", "measure", "mark", "fold", "bend", "tie", "wrap", "cover", "fill",
    "put", "take", "bring", "keep", "let", "make", "use", "check", "leave", "push", "pull",
    "lift", "lower", "insert", "align", "secure", "tighten", "loosen", "drain", "rinse", "soak",
    "sprinkle", "spread", "grease", "preheat", "simmer", "whisk", "knead", "peel", "grate",
    "melt", "freeze", "serve", "store", "trim", "prune", "dig", "plant", "pry", "scrub",
    "polish", "buff", "sweep", "mow", "connect", "disconnect", "unplug", "start", "stop",
    "begin", "continue", "repeat", "flip", "rotate", "shake", "squeeze", "crush", "grind",
    "blend", "strain", "season", "garnish", "taste", "listen", "look", "find", "locate",
    "position", "arrange", "stack", "sort", "gather", "collect", "prepare", "assemble", "build",
    "install", "replace", "repair", "fix", "adjust", "verify", "ensure", "confirm", "allow",
    "wear", "set", "sit", "rest", "rise", "sizzle", "thicken", "harden", "settle", "curl",
    "glow", "cure", "toast", "beep", "drill", "move", "carry", "drop", "lay", "hang", "mount",
    "fasten", "seal", "coat", "spray", "dip", "soften", "slide", "twist", "unscrew", "detach",
    "join", "split", "stand", "climb", "stay", "run", "walk", "read", "write", "follow", "pat",
    "rub", "stretch", "drizzle", "break", "vacuum", "whip", "steam", "chill", "score", "pin",
];

/// Irregular participles mapped to VBN.
const IRREGULAR_VBN: &[&str] = &[
    "frozen", "made", "taken", "held", "left", "kept", "worn", "risen", "swept", "built",
    "brought", "broken", "hung", "laid", "split",
];

/// Stems where the final consonant is not doubled before -ing/-ed.
const NO_DOUBLE: &[&str] = &["open", "cover", "listen", "gather", "season", "sharpen", "loosen"];

const KEYWORD_SINGLE: &[&str] = &["before", "until", "so", "requires", "after", "once", "if"];

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn should_double(stem: &str) -> bool {
    if NO_DOUBLE.contains(&stem) || stem.len() > 4 || stem.len() < 3 {
        return false;
    }
    let chars: Vec<char> = stem.chars().collect();
    let n = chars.len();
    let last = chars[n - 1];
    !is_vowel(last)
        && !matches!(last, 'w' | 'x' | 'y')
        && is_vowel(chars[n - 2])
        && !is_vowel(chars[n - 3])
}

fn third_person(stem: &str) -> String {
    if let Some(prefix) = stem.strip_suffix('y') {
        let chars: Vec<char> = prefix.chars().collect();
        if chars.last().map(|c| !is_vowel(*c)).unwrap_or(false) {
            return format!("{prefix}ies");
        }
    }
    if stem.ends_with('s')
        || stem.ends_with("sh")
        || stem.ends_with("ch")
        || stem.ends_with('x')
        || stem.ends_with('z')
        || stem.ends_with('o')
    {
        return format!("{stem}es");
    }
    format!("{stem}s")
}

fn gerund(stem: &str) -> String {
    if stem.ends_with("ee") {
        return format!("{stem}ing");
    }
    if let Some(prefix) = stem.strip_suffix('e') {
        return format!("{prefix}ing");
    }
    if should_double(stem) {
        let last = stem.chars().last().unwrap();
        return format!("{stem}{last}ing");
    }
    format!("{stem}ing")
}

fn past(stem: &str) -> String {
    if stem.ends_with('e') {
        return format!("{stem}d");
    }
    if let Some(prefix) = stem.strip_suffix('y') {
        let chars: Vec<char> = prefix.chars().collect();
        if chars.last().map(|c| !is_vowel(*c)).unwrap_or(false) {
            return format!("{prefix}ied");
        }
    }
    if should_double(stem) {
        let last = stem.chars().last().unwrap();
        return format!("{stem}{last}ed");
    }
    format!("{stem}ed")
}

/// Word lists plus the generated verb-inflection table.
#[derive(Debug, Clone)]
pub struct Lexicon {
    verb_forms: BTreeMap<String, &'static str>,
}

impl Default for Lexicon {
    fn default() -> Self {
        let mut verb_forms = BTreeMap::new();
        for stem in VERB_STEMS {
            verb_forms.insert((*stem).to_string(), pos::VB);
            verb_forms.insert(third_person(stem), pos::VB);
            verb_forms.insert(gerund(stem), pos::VBG);
            verb_forms.insert(past(stem), pos::VBN);
        }
        for form in IRREGULAR_VBN {
            verb_forms.insert((*form).to_string(), pos::VBN);
        }
        Lexicon { verb_forms }
    }
}

impl Lexicon {
    pub fn tag(&self, word: &str) -> &'static str {
        let lower = word.to_lowercase();
        let w = lower.as_str();
        if w.chars().all(|c| !c.is_alphanumeric()) {
            return pos::PUNCT;
        }
        if w.chars().all(|c| c.is_ascii_digit()) || NUMBER_WORDS.contains(&w) {
            return pos::CD;
        }
        if BE_VERBS.contains(&w) {
            return pos::BE;
        }
        if MODALS.contains(&w) {
            return pos::MD;
        }
        if DETERMINERS.contains(&w) {
            return pos::DT;
        }
        if PRONOUNS.contains(&w) {
            return pos::PRP;
        }
        if PREPOSITIONS.contains(&w) {
            return pos::IN;
        }
        if ADVERBS.contains(&w) {
            return pos::RB;
        }
        if let Some(tag) = self.verb_forms.get(w) {
            return tag;
        }
        if w.ends_with("ly") && w.chars().count() > 3 {
            return pos::RB;
        }
        if ADJECTIVES.contains(&w) {
            return pos::JJ;
        }
        if w.ends_with('s') && !w.ends_with("ss") && w.chars().count() > 2 {
            return pos::NNS;
        }
        pos::NN
    }
}

/// Token indices (within one sentence) occupied by keyword separators.
/// "in order to" is matched as a token trigram.
pub(crate) fn keyword_token_indices(words: &[String]) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for (i, w) in words.iter().enumerate() {
        if KEYWORD_SINGLE.contains(&w.as_str()) {
            out.insert(i);
        }
        if w == "in" && words.get(i + 1).map(String::as_str) == Some("order") && words.get(i + 2).map(String::as_str) == Some("to")
        {
            out.insert(i);
            out.insert(i + 1);
            out.insert(i + 2);
        }
    }
    out
}

/// Deterministic rule-based annotation provider.
#[derive(Debug, Clone, Default)]
pub struct RuleProvider {
    lexicon: Lexicon,
}

impl RuleProvider {
    pub fn new() -> Self {
        RuleProvider::default()
    }

    fn pos_tokens(&self, step_text: &str) -> Vec<PosToken> {
        text::tokenize(step_text)
            .into_iter()
            .map(|t| PosToken {
                char_start: t.start,
                char_end: t.end,
                pos: self.lexicon.tag(t.text(step_text)).to_string(),
            })
            .collect()
    }

    fn frames(&self, step_index: usize, step_text: &str, tokens: &[PosToken]) -> Vec<SrlFrame> {
        let mut frames = Vec::new();
        for sentence in text::split_sentences(step_text) {
            let sent: Vec<(usize, &PosToken)> = tokens
                .iter()
                .enumerate()
                .filter(|(_, t)| t.char_start >= sentence.start && t.char_end <= sentence.end)
                .collect();
            if sent.is_empty() {
                continue;
            }
            let words: Vec<String> = sent
                .iter()
                .map(|(_, t)| {
                    text::char_slice(step_text, t.char_start, t.char_end).to_lowercase()
                })
                .collect();
            let keyword_idx = keyword_token_indices(&words);
            let is_verb =
                |t: &PosToken| matches!(t.pos.as_str(), pos::VB | pos::VBG | pos::VBN);
            // boundary = comma, keyword token, or another verb
            let is_boundary = |k: usize| {
                let (_, t) = sent[k];
                words[k] == "," || keyword_idx.contains(&k) || is_verb(t)
            };

            for v in 0..sent.len() {
                if !is_verb(sent[v].1) {
                    continue;
                }
                let mut args = Vec::new();

                // run before the predicate, back to the previous boundary;
                // suppressed when that boundary is itself a verb (the run
                // already serves as its object)
                let mut b = v;
                while b > 0 && !is_boundary(b - 1) {
                    b -= 1;
                }
                let prev_is_verb = b > 0 && is_verb(sent[b - 1].1);
                if b < v && !prev_is_verb {
                    let mut run: Vec<&PosToken> = sent[b..v].iter().map(|(_, t)| *t).collect();
                    while run
                        .last()
                        .map(|t| t.pos == pos::BE || t.pos == pos::MD)
                        .unwrap_or(false)
                    {
                        run.pop();
                    }
                    while run.last().map(|t| t.pos == pos::PUNCT).unwrap_or(false) {
                        run.pop();
                    }
                    while run.first().map(|t| t.pos == pos::PUNCT).unwrap_or(false) {
                        run.remove(0);
                    }
                    if !run.is_empty() {
                        args.push(SrlArg {
                            role: "ARG0".into(),
                            span: TokenSpan::new(
                                step_index,
                                run[0].char_start,
                                run[run.len() - 1].char_end,
                            ),
                        });
                    }
                }

                // run after the predicate, up to the next boundary
                let mut e = v + 1;
                while e < sent.len() && !is_boundary(e) {
                    e += 1;
                }
                let mut run: Vec<usize> = (v + 1..e).collect();
                while run
                    .last()
                    .map(|k| sent[*k].1.pos == pos::PUNCT)
                    .unwrap_or(false)
                {
                    run.pop();
                }
                while run
                    .first()
                    .map(|k| sent[*k].1.pos == pos::PUNCT)
                    .unwrap_or(false)
                {
                    run.remove(0);
                }
                if !run.is_empty() {
                    let all_adverbs = run.iter().all(|k| sent[*k].1.pos == pos::RB);
                    let role = if all_adverbs {
                        "ARGM-MNR"
                    } else if words[run[0]] == "for"
                        && run.iter().any(|k| sent[*k].1.pos == pos::CD)
                    {
                        "ARGM-TMP"
                    } else {
                        "ARG1"
                    };
                    args.push(SrlArg {
                        role: role.into(),
                        span: TokenSpan::new(
                            step_index,
                            sent[run[0]].1.char_start,
                            sent[run[run.len() - 1]].1.char_end,
                        ),
                    });
                }

                let pred = sent[v].1;
                frames.push(SrlFrame {
                    predicate: TokenSpan::new(step_index, pred.char_start, pred.char_end),
                    args,
                });
            }
        }
        frames
    }

    fn chains(&self, step_index: usize, step_text: &str, tokens: &[PosToken]) -> Vec<CorefChain> {
        let mut chains = Vec::new();

        // noun chunks over the whole step
        let chunk_idx = super::noun_chunks(tokens);
        struct Chunk {
            span: TokenSpan,
            surface: String,
            plural: bool,
        }
        let chunks: Vec<Chunk> = chunk_idx
            .iter()
            .map(|(first, last)| {
                let start = tokens[*first].char_start;
                let end = tokens[*last].char_end;
                Chunk {
                    span: TokenSpan::new(step_index, start, end),
                    surface: text::char_slice(step_text, start, end).to_lowercase(),
                    plural: tokens[*last].pos == pos::NNS,
                }
            })
            .collect();

        // exact-string chains: repeated surfaces within the step
        let mut by_surface: BTreeMap<&str, Vec<TokenSpan>> = BTreeMap::new();
        for c in &chunks {
            by_surface.entry(c.surface.as_str()).or_default().push(c.span);
        }
        for (_, mentions) in by_surface {
            if mentions.len() >= 2 {
                chains.push(CorefChain { mentions });
            }
        }

        // pronoun chains: nearest preceding chunk with number agreement
        for (i, t) in tokens.iter().enumerate() {
            if t.pos != pos::PRP {
                continue;
            }
            let word = text::char_slice(step_text, t.char_start, t.char_end).to_lowercase();
            if !COREF_PRONOUNS.contains(&word.as_str()) {
                continue;
            }
            let want_plural = word != "it";
            let antecedent = chunks
                .iter()
                .filter(|c| c.span.char_end <= tokens[i].char_start && c.plural == want_plural)
                .last();
            if let Some(ante) = antecedent {
                chains.push(CorefChain {
                    mentions: vec![
                        ante.span,
                        TokenSpan::new(step_index, t.char_start, t.char_end),
                    ],
                });
            }
        }
        chains
    }

    /// Cue-word temporal annotator: a predicate in a sentence carrying
    /// "first" or "beforehand" is predicted to occur before every predicate
    /// narrated earlier in a different sentence. Emits AFTER for those pairs;
    /// absent pairs read as VAGUE.
    fn temporal(&self, article: &Article, frames: &[SrlFrame]) -> Vec<TemporalRelation> {
        #[derive(Clone, Copy, PartialEq, Eq)]
        struct SentencePos {
            step: usize,
            sentence: usize,
        }
        let sentence_of = |span: &TokenSpan| -> SentencePos {
            let step_text = article.step_text(span.step_index).unwrap_or("");
            let idx = text::split_sentences(step_text)
                .iter()
                .position(|s| span.char_start >= s.start && span.char_end <= s.end)
                .unwrap_or(0);
            SentencePos {
                step: span.step_index,
                sentence: idx,
            }
        };
        let cue_sentence = |p: SentencePos| -> bool {
            let step_text = article.step_text(p.step).unwrap_or("");
            let sentences = text::split_sentences(step_text);
            let Some(sent) = sentences.get(p.sentence) else {
                return false;
            };
            text::tokenize(step_text).iter().any(|t| {
                t.start >= sent.start
                    && t.end <= sent.end
                    && matches!(
                        text::char_slice(step_text, t.start, t.end)
                            .to_lowercase()
                            .as_str(),
                        "first" | "beforehand"
                    )
            })
        };

        let mut preds: Vec<TokenSpan> = frames.iter().map(|f| f.predicate).collect();
        preds.sort();
        preds.dedup();

        let mut out = Vec::new();
        for i in 0..preds.len() {
            for j in (i + 1)..preds.len() {
                let pa = sentence_of(&preds[i]);
                let pb = sentence_of(&preds[j]);
                if pa == pb {
                    continue;
                }
                if cue_sentence(pb) && !cue_sentence(pa) {
                    out.push(TemporalRelation {
                        event_a: preds[i],
                        event_b: preds[j],
                        relation: TemporalLabel::After,
                    });
                }
            }
        }
        out
    }
}

impl AnnotationProvider for RuleProvider {
    fn annotate_article(&self, article: &Article) -> Result<LingAnnotations, ProviderError> {
        let mut tokens = Vec::with_capacity(article.steps.len());
        let mut frames = Vec::new();
        let mut chains = Vec::new();
        for step in &article.steps {
            let toks = self.pos_tokens(&step.text);
            frames.extend(self.frames(step.index, &step.text, &toks));
            chains.extend(self.chains(step.index, &step.text, &toks));
            tokens.push(toks);
        }
        let temporal = self.temporal(article, &frames);
        Ok(LingAnnotations {
            article_id: article.id.clone(),
            tokens,
            frames,
            chains,
            temporal,
        })
    }
}
