//! Rule-based tokenizer and its inverse.
//!
//! Rules, applied to each whitespace-separated word:
//!
//! 1. Leading characters from [`OPENING`] or [`QUOTES`] are split off one at a
//!    time.
//! 2. Trailing characters from [`CLOSING`] or [`QUOTES`] are split off one at a
//!    time.
//! 3. Inside what remains, a hyphen or en dash with a digit on both sides
//!    becomes its own token (`2006-07` -> `2006 - 07`).
//!
//! Apostrophes, internal punctuation (`3.5`, `10:30`, `U.S`) and hyphens
//! between letters are left alone. There are no language-specific rules.
//!
//! The detokenizer reverses these rules: closing punctuation attaches to the
//! previous token, opening punctuation to the next, straight double quotes
//! alternate between opening and closing, and a digit-bounded hyphen joins
//! both neighbours. Text with spaced punctuation such as `a , b` or `1 - 2`
//! does not survive a round trip.

use crate::corpus::Sentence;

const OPENING: &[char] = &['(', '[', '{', '$', '“', '«', '¿', '¡'];
const CLOSING: &[char] = &['.', ',', '!', '?', ';', ':', ')', ']', '}', '%', '…', '”', '»'];
const QUOTES: &[char] = &['"'];
const DIGIT_DASHES: &[char] = &['-', '–'];

fn split_word<'a>(word: &'a str, out: &mut Vec<&'a str>) {
    let mut start = 0;
    let mut end = word.len();
    let mut leading = Vec::new();
    for (i, c) in word.char_indices() {
        if OPENING.contains(&c) || QUOTES.contains(&c) {
            leading.push(&word[i..i + c.len_utf8()]);
            start = i + c.len_utf8();
        } else {
            break;
        }
    }
    let mut trailing = Vec::new();
    for (i, c) in word[start..].char_indices().rev() {
        let i = start + i;
        if CLOSING.contains(&c) || QUOTES.contains(&c) {
            trailing.push(&word[i..i + c.len_utf8()]);
            end = i;
        } else {
            break;
        }
    }
    out.extend(leading);
    let core = &word[start..end];
    if !core.is_empty() {
        split_digit_dashes(core, out);
    }
    out.extend(trailing.into_iter().rev());
}

fn split_digit_dashes<'a>(core: &'a str, out: &mut Vec<&'a str>) {
    let chars: Vec<(usize, char)> = core.char_indices().collect();
    let mut piece_start = 0;
    for k in 1..chars.len().saturating_sub(1) {
        let (i, c) = chars[k];
        if DIGIT_DASHES.contains(&c) && chars[k - 1].1.is_ascii_digit() && chars[k + 1].1.is_ascii_digit() {
            out.push(&core[piece_start..i]);
            out.push(&core[i..i + c.len_utf8()]);
            piece_start = i + c.len_utf8();
        }
    }
    out.push(&core[piece_start..]);
}

pub fn tokenize(s: &Sentence) -> Sentence {
    let mut tokens = Vec::new();
    for word in s.tokens() {
        split_word(word, &mut tokens);
    }
    Sentence::from_tokens(tokens)
}

fn is_single(token: &str, set: &[char]) -> bool {
    let mut chars = token.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if set.contains(&c))
}

fn is_closing(token: &str) -> bool {
    !token.is_empty() && token.chars().all(|c| CLOSING.contains(&c))
}

pub fn detokenize(s: &Sentence) -> Sentence {
    let tokens: Vec<&str> = s.tokens().collect();
    let mut out = String::with_capacity(s.as_str().len());
    let mut attach_next = false;
    let mut quote_open = false;
    for (k, tok) in tokens.iter().enumerate() {
        let digit_dash = is_single(tok, DIGIT_DASHES)
            && k > 0
            && k + 1 < tokens.len()
            && tokens[k - 1].ends_with(|c: char| c.is_ascii_digit())
            && tokens[k + 1].starts_with(|c: char| c.is_ascii_digit());
        let (opens, closes) = if is_single(tok, QUOTES) {
            quote_open = !quote_open;
            (quote_open, !quote_open)
        } else {
            (is_single(tok, OPENING), is_closing(tok))
        };
        if k > 0 && !attach_next && !closes && !digit_dash {
            out.push(' ');
        }
        out.push_str(tok);
        attach_next = opens || digit_dash;
    }
    Sentence::new_unchecked(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(s: &str) -> String {
        tokenize(&Sentence::new(s).unwrap()).into_string()
    }

    fn detok(s: &str) -> String {
        detokenize(&Sentence::new(s).unwrap()).into_string()
    }

    #[test]
    fn splits_digit_hyphen() {
        assert_eq!(tok("2006-07"), "2006 - 07");
        assert_eq!(tok("1-2-3"), "1 - 2 - 3");
        assert_eq!(tok("well-known"), "well-known");
        assert_eq!(tok("-5"), "-5");
    }

    #[test]
    fn empty() {
        assert_eq!(tok(""), "");
        assert_eq!(detok(""), "");
    }

    #[test]
    fn punctuation() {
        assert_eq!(tok("Hello, world!"), "Hello , world !");
        assert_eq!(tok("(see p. 3)."), "( see p . 3 ) .");
        assert_eq!(tok("He said \"yes\"."), "He said \" yes \" .");
        assert_eq!(tok("costs $5, or 10%"), "costs $ 5 , or 10 %");
        assert_eq!(tok("Siltala's 3.5 10:30"), "Siltala's 3.5 10:30");
        assert_eq!(tok("wait..."), "wait . . .");
    }

    #[test]
    fn detok_inverts() {
        for s in [
            "Hello, world!",
            "(see p. 3).",
            "He said \"yes\". Then \"no\"?",
            "costs $5, or 10%",
            "was 2006-07 and 1999–2000",
            "wait...",
            "[a] {b} «c» “d”",
        ] {
            assert_eq!(detok(&tok(s)), s, "{s}");
        }
    }
}
