use std::ops::Range;

/// Lowercased word tokens with sentence boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizedText {
    tokens: Vec<String>,
    sentences: Vec<Range<usize>>,
    letter_count: usize,
}

impl TokenizedText {
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Token-index ranges; together they partition `tokens()`.
    pub fn sentences(&self) -> &[Range<usize>] {
        &self.sentences
    }

    /// Alphabetic characters in the source text.
    pub fn letter_count(&self) -> usize {
        self.letter_count
    }

    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    pub fn sentence_count(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}')
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_apostrophe(c)
}

/// Splits text into word tokens and sentences.
///
/// Tokens are maximal runs of letters, digits and apostrophes, lowercased,
/// with quote-like apostrophes trimmed from either end. A sentence ends at
/// `.`, `!` or `?` followed by whitespace or end of input; trailing tokens
/// without a terminator form a final sentence.
pub fn tokenize(text: &str) -> TokenizedText {
    let mut out =
        TokenizedText { letter_count: text.chars().filter(|c| c.is_alphabetic()).count(), ..TokenizedText::default() };
    let mut current = String::new();
    let mut sentence_start = 0;
    let mut chars = text.chars().peekable();

    fn flush(current: &mut String, tokens: &mut Vec<String>) {
        let word = current.trim_matches('\'');
        if !word.is_empty() {
            tokens.push(word.to_lowercase());
        }
        current.clear();
    }

    while let Some(c) = chars.next() {
        if is_word_char(c) {
            current.push(if is_apostrophe(c) { '\'' } else { c });
            continue;
        }
        flush(&mut current, &mut out.tokens);
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = chars.peek().is_none_or(|n| n.is_whitespace());
            if at_boundary && out.tokens.len() > sentence_start {
                out.sentences.push(sentence_start..out.tokens.len());
                sentence_start = out.tokens.len();
            }
        }
    }
    flush(&mut current, &mut out.tokens);
    if out.tokens.len() > sentence_start {
        out.sentences.push(sentence_start..out.tokens.len());
    }
    out
}
