use super::DslError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(f64),
    Dot,
    Colon,
    Comma,
    Equals,
    Arrow,
    LParen,
    RParen,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub(crate) fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

/// Valid, non-reserved name.
#[cfg(test)]
pub(crate) fn is_valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if is_name_start(c)) && chars.all(is_name_char) && !super::KEYWORDS.contains(&s)
}

pub(crate) fn tokenize(src: &str, first_line: usize) -> Result<Vec<Token>, DslError> {
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let line_no = first_line + i;
        let chars: Vec<char> = line.chars().collect();
        let mut pos = 0;
        while pos < chars.len() {
            let c = chars[pos];
            let column = pos + 1;
            let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: line_no, column });
            match c {
                '#' => break,
                c if c.is_whitespace() => pos += 1,
                '.' => {
                    push(&mut out, Tok::Dot);
                    pos += 1;
                }
                ':' => {
                    push(&mut out, Tok::Colon);
                    pos += 1;
                }
                ',' => {
                    push(&mut out, Tok::Comma);
                    pos += 1;
                }
                '(' => {
                    push(&mut out, Tok::LParen);
                    pos += 1;
                }
                ')' => {
                    push(&mut out, Tok::RParen);
                    pos += 1;
                }
                '=' if chars.get(pos + 1) == Some(&'>') => {
                    push(&mut out, Tok::Arrow);
                    pos += 2;
                }
                '=' => {
                    push(&mut out, Tok::Equals);
                    pos += 1;
                }
                c if is_name_start(c) => {
                    let start = pos;
                    while pos < chars.len() && is_name_char(chars[pos]) {
                        pos += 1;
                    }
                    push(&mut out, Tok::Ident(chars[start..pos].iter().collect()));
                }
                c if c.is_ascii_digit() || c == '-' || c == '+' => {
                    let (value, len) = scan_number(&chars[pos..]).ok_or_else(|| DslError::Syntax {
                        line: line_no,
                        column,
                        message: "malformed number".into(),
                    })?;
                    push(&mut out, Tok::Number(value));
                    pos += len;
                }
                other => {
                    return Err(DslError::Syntax {
                        line: line_no,
                        column,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            }
        }
    }
    Ok(out)
}

/// `[+-]?digits(.digits)?([eE][+-]?digits)?`; a trailing `.` with no digit
/// after it is left for the statement terminator.
fn scan_number(chars: &[char]) -> Option<(f64, usize)> {
    let mut i = 0;
    if matches!(chars.first(), Some('+' | '-')) {
        i += 1;
    }
    let digits = |from: usize| chars[from..].iter().take_while(|c| c.is_ascii_digit()).count();
    let int = digits(i);
    if int == 0 {
        return None;
    }
    i += int;
    if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(char::is_ascii_digit) {
        i += 1 + digits(i + 1);
    }
    if matches!(chars.get(i), Some('e' | 'E')) {
        let mut j = i + 1;
        if matches!(chars.get(j), Some('+' | '-')) {
            j += 1;
        }
        let exp = digits(j);
        if exp > 0 {
            i = j + exp;
        }
    }
    let text: String = chars[..i].iter().collect();
    text.parse().ok().map(|v| (v, i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s, 1).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn number_followed_by_terminator() {
        assert_eq!(toks("(0.8)."), vec![Tok::LParen, Tok::Number(0.8), Tok::RParen, Tok::Dot]);
        assert_eq!(toks("1."), vec![Tok::Number(1.0), Tok::Dot]);
        assert_eq!(toks("-2.5e-1"), vec![Tok::Number(-0.25)]);
    }

    #[test]
    fn comments_and_arrows() {
        assert_eq!(
            toks("a=1 => b # tail"),
            vec![Tok::Ident("a".into()), Tok::Equals, Tok::Number(1.0), Tok::Arrow, Tok::Ident("b".into())]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let t = tokenize("attr x.\n  @", 1).unwrap_err();
        assert_eq!(t, DslError::Syntax { line: 2, column: 3, message: "unexpected character `@`".into() });
    }

    #[test]
    fn names() {
        assert!(is_valid_name("liver-enlarged_2"));
        assert!(!is_valid_name("2x"));
        assert!(!is_valid_name("AND"));
        assert!(!is_valid_name(""));
    }
}
