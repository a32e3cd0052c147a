//! Tokenizer and S-expression reader shared by every PDDL-like input format.

use std::fmt;

/// Line/column of a token, both 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Symbol {
        text: String,
        pos: Pos,
    },
    List {
        items: Vec<SExpr>,
        pos: Pos,
        /// `;; @tag` comments seen just before the list was opened.
        annotations: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadError {
    pub pos: Pos,
    pub message: String,
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Symbol { pos, .. } | SExpr::List { pos, .. } => *pos,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            SExpr::Symbol { text, .. } => Some(text),
            SExpr::List { .. } => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List { items, .. } => Some(items),
            SExpr::Symbol { .. } => None,
        }
    }

    /// Annotations attached to this list or to any list nested inside it.
    pub fn annotations_deep(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_annotations(&mut out);
        out
    }

    fn collect_annotations(&self, out: &mut Vec<String>) {
        if let SExpr::List {
            items, annotations, ..
        } = self
        {
            out.extend(annotations.iter().cloned());
            for item in items {
                item.collect_annotations(out);
            }
        }
    }

    /// Head symbol of a list, lowercased.
    pub fn head(&self) -> Option<String> {
        self.as_list()?.first()?.as_symbol().map(str::to_ascii_lowercase)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Open(Pos),
    Close(Pos),
    Symbol(String, Pos),
    Annotation(String),
}

fn tokenize(src: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chars = src.chars().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '(' => {
                chars.next();
                col += 1;
                tokens.push(Token::Open(pos));
            }
            ')' => {
                chars.next();
                col += 1;
                tokens.push(Token::Close(pos));
            }
            ';' => {
                let mut comment = String::new();
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    comment.push(c);
                    chars.next();
                    col += 1;
                }
                let body = comment.trim_start_matches(';').trim();
                if let Some(tag) = body.strip_prefix('@') {
                    let tag = tag.split_whitespace().next().unwrap_or("");
                    if !tag.is_empty() {
                        tokens.push(Token::Annotation(tag.to_ascii_lowercase()));
                    }
                }
            }
            _ => {
                let mut text = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    text.push(c);
                    chars.next();
                    col += 1;
                }
                tokens.push(Token::Symbol(text, pos));
            }
        }
    }
    tokens
}

/// Reads every top-level expression in `src`.
pub fn read_all(src: &str) -> Result<Vec<SExpr>, ReadError> {
    let tokens = tokenize(src);
    let mut stack: Vec<(Pos, Vec<String>, Vec<SExpr>)> = Vec::new();
    let mut top = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    for token in tokens {
        match token {
            Token::Annotation(tag) => pending.push(tag),
            Token::Open(pos) => stack.push((pos, std::mem::take(&mut pending), Vec::new())),
            Token::Close(pos) => {
                let (open, annotations, items) = stack.pop().ok_or(ReadError {
                    pos,
                    message: "unbalanced ')'".into(),
                })?;
                let list = SExpr::List {
                    items,
                    pos: open,
                    annotations,
                };
                match stack.last_mut() {
                    Some((_, _, parent)) => parent.push(list),
                    None => top.push(list),
                }
            }
            Token::Symbol(text, pos) => {
                let sym = SExpr::Symbol { text, pos };
                match stack.last_mut() {
                    Some((_, _, parent)) => parent.push(sym),
                    None => top.push(sym),
                }
            }
        }
    }
    if let Some((pos, _, _)) = stack.pop() {
        return Err(ReadError {
            pos,
            message: "unclosed '('".into(),
        });
    }
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_nested_lists_with_positions() {
        let exprs = read_all("(a (b c)\n  d)").unwrap();
        assert_eq!(exprs.len(), 1);
        let items = exprs[0].as_list().unwrap();
        assert_eq!(items.len(), 3);
        assert_eq!(items[2].pos(), Pos { line: 2, col: 3 });
    }

    #[test]
    fn comments_are_skipped_and_annotations_attach_to_next_list() {
        let exprs = read_all("; hello\n;; @complete\n(x) (y)").unwrap();
        assert_eq!(exprs[0].annotations_deep(), vec!["complete".to_string()]);
        assert!(exprs[1].annotations_deep().is_empty());
    }

    #[test]
    fn unbalanced_input_reports_position() {
        let err = read_all("(a\n (b)").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 1 });
        let err = read_all("a)").unwrap_err();
        assert_eq!(err.pos, Pos { line: 1, col: 2 });
    }
}
