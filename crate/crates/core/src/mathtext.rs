//! Whitespace normalization and math-aware tokenization of proof markdown.
//!
//! The baseline tokenizer splits on whitespace and treats every punctuation
//! character as its own token, the way word-piece tokenizers see text.
//! Two kinds of mathematical notation are merged back into single tokens:
//!
//! * a LaTeX command together with its attached groups, e.g.
//!   `\sum_{i=1}^n`, `\frac{a}{b}`, `\sqrt[3]{x}`;
//! * an identifier immediately followed by a balanced parenthesized
//!   argument list, e.g. `f(x)`, `g(n - 1)`.
//!
//! Groups must close on the same line. When they do not, the construct is
//! not merged and its characters fall back to the baseline rules (the
//! command name or identifier becomes a token, each bracket another).
//! [`MergeRules`] switches the individual rules on and off and adds an
//! optional third rule attaching `^`/`_` scripts to plain identifiers.

use serde::{Deserialize, Serialize};

/// Unifies line endings, collapses runs of spaces and tabs, trims line ends,
/// keeps at most one blank line between paragraphs and drops leading and
/// trailing blank lines. Math delimiters are left untouched.
pub fn normalize(body: &str) -> String {
    let unified = body.replace("\r\n", "\n").replace('\r', "\n");
    let mut lines: Vec<String> = Vec::new();
    for line in unified.split('\n') {
        let mut out = String::with_capacity(line.len());
        let mut in_gap = false;
        for ch in line.chars() {
            if ch == ' ' || ch == '\t' {
                in_gap = true;
            } else {
                if in_gap {
                    out.push(' ');
                    in_gap = false;
                }
                out.push(ch);
            }
        }
        let blank = out.is_empty();
        if blank && lines.last().is_none_or(|l| l.is_empty()) {
            continue;
        }
        lines.push(out);
    }
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    lines.join("\n")
}

/// Which merge rules the tokenizer applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeRules {
    /// `\cmd` plus attached `{…}`, `[…]`, `_x`, `^x`, `(…)` groups.
    pub commands: bool,
    /// `ident(…)` with balanced parentheses.
    pub function_calls: bool,
    /// `x^2`, `a_{n-1}` on plain identifiers.
    pub identifier_scripts: bool,
}

impl Default for MergeRules {
    fn default() -> Self {
        Self {
            commands: true,
            function_calls: true,
            identifier_scripts: false,
        }
    }
}

impl MergeRules {
    /// Baseline tokenization with no merging.
    pub const NONE: MergeRules = MergeRules {
        commands: false,
        function_calls: false,
        identifier_scripts: false,
    };
}

/// Tokens with their byte spans in the normalized text.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub spans: Vec<(usize, usize)>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens joined by single spaces.
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

pub fn merge_math_tokens(text: &str) -> TokenSequence {
    tokenize(text, MergeRules::default())
}

pub fn tokenize(text: &str, rules: MergeRules) -> TokenSequence {
    let scanner = Scanner {
        text,
        bytes: text.as_bytes(),
        rules,
    };
    let mut seq = TokenSequence::default();
    let mut pos = 0;
    while pos < text.len() {
        let ch = scanner.char_at(pos);
        if ch.is_whitespace() {
            pos += ch.len_utf8();
            continue;
        }
        let end = scanner.token_end(pos);
        seq.tokens.push(text[pos..end].to_string());
        seq.spans.push((pos, end));
        pos = end;
    }
    seq
}

struct Scanner<'a> {
    text: &'a str,
    bytes: &'a [u8],
    rules: MergeRules,
}

impl Scanner<'_> {
    fn char_at(&self, pos: usize) -> char {
        self.text[pos..].chars().next().expect("pos inside text")
    }

    fn peek(&self, pos: usize) -> Option<char> {
        self.text.get(pos..).and_then(|s| s.chars().next())
    }

    /// End of the token starting at `start` (a non-whitespace char).
    fn token_end(&self, start: usize) -> usize {
        let ch = self.char_at(start);
        if ch == '\\' {
            return self.command_token(start);
        }
        if ch.is_alphanumeric() {
            let word_end = self.word_end(start);
            if ch.is_alphabetic() {
                if self.rules.function_calls && self.peek(word_end) == Some('(') {
                    if let Some(end) = self.balanced(word_end, '(', ')') {
                        return end;
                    }
                }
                if self.rules.identifier_scripts {
                    if let Some(end) = self.scripts(word_end) {
                        return end;
                    }
                }
            }
            return word_end;
        }
        start + ch.len_utf8()
    }

    fn word_end(&self, start: usize) -> usize {
        let mut pos = start;
        while let Some(c) = self.peek(pos) {
            if !c.is_alphanumeric() {
                break;
            }
            pos += c.len_utf8();
        }
        pos
    }

    fn command_name_end(&self, backslash: usize) -> usize {
        let mut pos = backslash + 1;
        while pos < self.bytes.len() && self.bytes[pos].is_ascii_alphabetic() {
            pos += 1;
        }
        pos
    }

    fn command_token(&self, start: usize) -> usize {
        let name_end = self.command_name_end(start);
        if name_end == start + 1 {
            // `\(`, `\{`, `\\`: two-char escape, or a lone trailing backslash.
            return match self.peek(start + 1) {
                Some(c) if !c.is_whitespace() => start + 1 + c.len_utf8(),
                _ => start + 1,
            };
        }
        if !self.rules.commands {
            return name_end;
        }
        self.attach_groups(name_end).unwrap_or(name_end)
    }

    /// Consumes groups attached to a command; `None` if one is unbalanced.
    fn attach_groups(&self, mut pos: usize) -> Option<usize> {
        loop {
            match self.peek(pos) {
                Some('{') => pos = self.balanced(pos, '{', '}')?,
                Some('[') => pos = self.balanced(pos, '[', ']')?,
                Some('_') | Some('^') => pos = self.script_argument(pos + 1)?,
                Some('(') if self.rules.function_calls => {
                    return self.balanced(pos, '(', ')');
                }
                _ => return Some(pos),
            }
        }
    }

    fn scripts(&self, mut pos: usize) -> Option<usize> {
        let mut attached = false;
        while matches!(self.peek(pos), Some('_') | Some('^')) {
            match self.script_argument(pos + 1) {
                Some(end) => {
                    pos = end;
                    attached = true;
                }
                None => break,
            }
        }
        attached.then_some(pos)
    }

    /// Argument after `_` or `^`: a braced group, a command, or one char.
    fn script_argument(&self, pos: usize) -> Option<usize> {
        match self.peek(pos)? {
            '{' => self.balanced(pos, '{', '}'),
            '\\' => {
                let end = self.command_name_end(pos);
                (end > pos + 1).then_some(end)
            }
            c if c.is_whitespace() => None,
            c => Some(pos + c.len_utf8()),
        }
    }

    /// End (exclusive) of the group opened at `open_pos`, which must hold
    /// `open`. Backslash escapes are skipped. Fails at a newline or end of
    /// text.
    fn balanced(&self, open_pos: usize, open: char, close: char) -> Option<usize> {
        debug_assert_eq!(self.peek(open_pos), Some(open));
        let mut depth = 0usize;
        let mut pos = open_pos;
        while let Some(c) = self.peek(pos) {
            match c {
                '\n' => return None,
                '\\' => {
                    pos += 1;
                    if let Some(next) = self.peek(pos) {
                        if next == '\n' {
                            return None;
                        }
                        pos += next.len_utf8();
                    }
                    continue;
                }
                c if c == open => depth += 1,
                c if c == close => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(pos + 1);
                    }
                }
                _ => {}
            }
            pos += c.len_utf8();
        }
        None
    }
}

/// Result of comparing a token count with an input limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBudget {
    pub fits: bool,
    pub token_count: usize,
}

pub const DEFAULT_TOKEN_LIMIT: usize = 512;

/// `fits` iff the count is at most `limit` (inclusive bound).
pub fn check_token_budget(tokens: &TokenSequence, limit: usize) -> TokenBudget {
    assert!(limit > 0, "token limit must be positive");
    let token_count = tokens.len();
    TokenBudget {
        fits: token_count <= limit,
        token_count,
    }
}
