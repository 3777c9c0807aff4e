//! Parser for operator words such as `f[1](1) a[0](2*al1 - w) |0>`.
//!
//! ```text
//! word  := token+ ( "|0>" | "@" filename )
//! token := kind "[" int "]" "(" class ")"
//! kind  := "a" | "f" | "m" | "h" | "e"
//! class := term (("+" | "-") term)*
//! term  := ["-"] [rational "*"] letter
//! letter:= "1" | "w" | "al" int | "be" int
//! ```

use std::path::PathBuf;

use num_traits::One;
use quot_yangian::{CurveClassQ, CurveLetter, ModuliParams, OpKind, OperatorToken, OperatorWord, Q};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Vacuum,
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExprAst {
    /// tokens in written order; the rightmost applies first
    pub word: OperatorWord<Q>,
    pub target: Target,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at position {pos}: expected {expected}")]
    Syntax { pos: usize, expected: String },
    #[error("unknown class letter `{letter}` at position {pos}")]
    UnknownLetter { pos: usize, letter: String },
    #[error("{kind}-index {index} out of range at position {pos} (must be at most {max})")]
    IndexOutOfRange { pos: usize, kind: char, index: u32, max: u32 },
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.src.len()
    }

    fn err(&self, expected: &str) -> ParseError {
        ParseError::Syntax { pos: self.pos, expected: expected.to_string() }
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(&format!("`{s}`")))
        }
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if !f(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.src[start..self.pos]
    }

    fn uint(&mut self) -> Result<u32, ParseError> {
        self.skip_ws();
        let digits = self.take_while(|c| c.is_ascii_digit());
        digits.parse().map_err(|_| self.err("a non-negative integer"))
    }
}

/// Parse a full expression: a word followed by its target.
pub fn parse_expr(text: &str, params: &ModuliParams) -> Result<ExprAst, ParseError> {
    let mut cur = Cursor { src: text, pos: 0 };
    let mut tokens = Vec::new();
    loop {
        cur.skip_ws();
        if cur.rest().starts_with("|0>") || cur.rest().starts_with('@') {
            break;
        }
        if cur.at_end() {
            return Err(cur.err("an operator token, `|0>` or `@file`"));
        }
        tokens.push(parse_token(&mut cur, params)?);
    }
    if tokens.is_empty() {
        return Err(cur.err("at least one operator token"));
    }
    let target = if cur.eat("|0>") {
        Target::Vacuum
    } else {
        cur.expect("@")?;
        cur.skip_ws();
        let name = cur.take_while(|c| !c.is_whitespace());
        if name.is_empty() {
            return Err(cur.err("a file name"));
        }
        Target::File(PathBuf::from(name))
    };
    if !cur.at_end() {
        return Err(cur.err("end of input"));
    }
    Ok(ExprAst { word: OperatorWord::new(tokens), target })
}

/// Parse a bare word with no target (used for matrix dumps).
pub fn parse_word(text: &str, params: &ModuliParams) -> Result<OperatorWord<Q>, ParseError> {
    let mut cur = Cursor { src: text, pos: 0 };
    let mut tokens = Vec::new();
    while !cur.at_end() {
        tokens.push(parse_token(&mut cur, params)?);
    }
    if tokens.is_empty() {
        return Err(cur.err("at least one operator token"));
    }
    Ok(OperatorWord::new(tokens))
}

fn parse_token(cur: &mut Cursor<'_>, params: &ModuliParams) -> Result<OperatorToken<Q>, ParseError> {
    cur.skip_ws();
    let kind = cur.peek().and_then(OpKind::from_symbol).ok_or_else(|| cur.err("one of a, f, m, h, e"))?;
    cur.pos += 1;
    cur.expect("[")?;
    let index_pos = {
        cur.skip_ws();
        cur.pos
    };
    let index = cur.uint()?;
    cur.expect("]")?;
    let max = match kind {
        OpKind::A => Some(params.rank - 1),
        OpKind::M => Some(params.rank),
        _ => None,
    };
    if let Some(max) = max {
        if index > max {
            return Err(ParseError::IndexOutOfRange { pos: index_pos, kind: kind.symbol(), index, max });
        }
    }
    cur.expect("(")?;
    let class = parse_class(cur, params.genus)?;
    cur.expect(")")?;
    Ok(OperatorToken::capped(kind, index, class))
}

fn parse_rational(cur: &mut Cursor<'_>) -> Option<Q> {
    let save = cur.pos;
    cur.skip_ws();
    let num = cur.take_while(|c| c.is_ascii_digit());
    if num.is_empty() {
        cur.pos = save;
        return None;
    }
    let mut text = num.to_string();
    let before_slash = cur.pos;
    if cur.eat("/") {
        cur.skip_ws();
        let den = cur.take_while(|c| c.is_ascii_digit());
        if den.is_empty() || den.chars().all(|c| c == '0') {
            cur.pos = before_slash;
        } else {
            text = format!("{num}/{den}");
        }
    }
    text.parse().ok()
}

fn parse_letter(cur: &mut Cursor<'_>, genus: u32) -> Result<CurveLetter, ParseError> {
    cur.skip_ws();
    let pos = cur.pos;
    let word = cur.take_while(|c| c.is_ascii_alphanumeric());
    if word.is_empty() {
        return Err(cur.err("a class letter (1, w, al<i>, be<i>)"));
    }
    match CurveLetter::parse(word) {
        Some(l) if l.fits_genus(genus) => Ok(l),
        _ => Err(ParseError::UnknownLetter { pos, letter: word.to_string() }),
    }
}

fn parse_class(cur: &mut Cursor<'_>, genus: u32) -> Result<CurveClassQ, ParseError> {
    let mut class = CurveClassQ::zero(genus, vec!["_".to_string()]).expect("one label");
    let mut first = true;
    loop {
        cur.skip_ws();
        let mut coeff = Q::one();
        if cur.eat("-") {
            coeff = -coeff;
        } else if !first && !cur.eat("+") {
            break;
        }
        first = false;
        // `2*al1`, `1/2 * w`, or a bare letter (note `1` alone is the unit)
        let save = cur.pos;
        if let Some(q) = parse_rational(cur) {
            if cur.eat("*") {
                coeff *= q;
            } else {
                cur.pos = save;
            }
        }
        let letter = parse_letter(cur, genus)?;
        class.try_add_term(vec![letter], coeff).expect("letter checked against genus");
        cur.skip_ws();
        if cur.peek() == Some(')') {
            break;
        }
    }
    Ok(class)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(r: u32, g: u32) -> ModuliParams {
        ModuliParams::new(r, g, 0).unwrap()
    }

    #[test]
    fn parses_basic_word() {
        let ast = parse_expr("f[1](1) a[0](1) |0>", &p(1, 0)).unwrap();
        assert_eq!(ast.target, Target::Vacuum);
        assert_eq!(ast.word.to_string(), "f[1](1) a[0](1)");
        let ast = parse_expr("m[1](w) |0>", &p(1, 0)).unwrap();
        assert_eq!(ast.word.tokens[0].kind, OpKind::M);
    }

    #[test]
    fn a_index_out_of_range() {
        let err = parse_expr("a[2](al1) |0>", &p(2, 1)).unwrap_err();
        assert!(matches!(err, ParseError::IndexOutOfRange { kind: 'a', index: 2, max: 1, pos: 2 }));
    }

    #[test]
    fn unknown_letter() {
        let err = parse_expr("a[0](al2) |0>", &p(1, 1)).unwrap_err();
        assert_eq!(err, ParseError::UnknownLetter { pos: 5, letter: "al2".into() });
        assert!(matches!(parse_expr("a[0](x) |0>", &p(1, 1)), Err(ParseError::UnknownLetter { .. })));
    }

    #[test]
    fn combinations_and_files() {
        let ast = parse_expr("e[3](2*al1 - 1/2*w + be1) @state.json", &p(2, 1)).unwrap();
        assert_eq!(ast.target, Target::File("state.json".into()));
        assert_eq!(ast.word.to_string(), "e[3](2*al1 + be1 + -1/2*w)");
        let ast = parse_expr("a[0](-w)|0>", &p(1, 0)).unwrap();
        assert_eq!(ast.word.to_string(), "a[0](-1*w)");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        assert!(matches!(parse_expr("f[1](1)", &p(1, 0)), Err(ParseError::Syntax { pos: 7, .. })));
        assert!(matches!(parse_expr("|0>", &p(1, 0)), Err(ParseError::Syntax { pos: 0, .. })));
        assert!(matches!(parse_expr("f[x](1) |0>", &p(1, 0)), Err(ParseError::Syntax { pos: 2, .. })));
        assert!(matches!(parse_expr("f[1](1) |0> junk", &p(1, 0)), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse_expr("q[1](1) |0>", &p(1, 0)), Err(ParseError::Syntax { pos: 0, .. })));
    }
}
