//! Tokenizers used both for similarity scoring and for prompt budgeting.

/// A text tokenizer. Implementations must satisfy `count(text) ==
/// tokenize(text).len()` and `count("") == 0`.
pub trait Tokenizer: Send + Sync {
    /// Stable identifier, persisted in index headers.
    fn id(&self) -> &str;

    fn tokenize(&self, text: &str) -> Vec<String>;

    fn count(&self, text: &str) -> usize {
        self.tokenize(text).len()
    }

    /// Upper bound on how many extra tokens joining two newline-terminated
    /// texts can produce. Budget accounting adds this once per join.
    fn join_slack(&self) -> usize {
        1
    }
}

/// Model-free lexical tokenizer: maximal runs of `[A-Za-z0-9_]` form one
/// token, every other non-whitespace character is a token on its own, and
/// whitespace only separates.
#[derive(Debug, Default, Clone, Copy)]
pub struct LexicalTokenizer;

impl LexicalTokenizer {
    pub const ID: &'static str = "lexical";

    /// Borrowing variant of [`Tokenizer::tokenize`].
    pub fn tokens<'a>(&self, text: &'a str) -> Tokens<'a> {
        Tokens { text, pos: 0 }
    }
}

fn is_word(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl Tokenizer for LexicalTokenizer {
    fn id(&self) -> &str {
        Self::ID
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        self.tokens(text).map(str::to_owned).collect()
    }

    fn count(&self, text: &str) -> usize {
        self.tokens(text).count()
    }

    // Newline-terminated texts never merge a word run across the join.
    fn join_slack(&self) -> usize {
        0
    }
}

pub struct Tokens<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Iterator for Tokens<'a> {
    type Item = &'a str;

    fn next(&mut self) -> Option<&'a str> {
        let rest = &self.text[self.pos..];
        let trimmed = rest.trim_start();
        let start = self.pos + (rest.len() - trimmed.len());
        let first = trimmed.chars().next()?;
        let len = if is_word(first) {
            trimmed
                .find(|c: char| !is_word(c))
                .unwrap_or(trimmed.len())
        } else {
            first.len_utf8()
        };
        self.pos = start + len;
        Some(&self.text[start..start + len])
    }
}

/// Looks up a tokenizer by its persisted id.
pub fn tokenizer_by_id(id: &str) -> Option<Box<dyn Tokenizer>> {
    match id {
        LexicalTokenizer::ID => Some(Box::new(LexicalTokenizer)),
        _ => None,
    }
}
