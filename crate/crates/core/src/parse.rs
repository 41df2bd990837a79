//! Answer extraction from free-form completions.

/// Extracts a 0-based option index from a model completion.
///
/// Resolution order:
/// 1. the last `answer` keyword (case-insensitive) followed by an option
///    number, bare or in parentheses (`Answer: (2)`, `the answer is 2`);
/// 2. a lone option number leading the text (`(2) cabinets`, `2`);
/// 3. the single option whose full text appears in the final line.
///
/// A number outside `1..=options.len()` is not an answer and falls through
/// to the option-text check.
pub fn parse_answer<S: AsRef<str>>(raw: &str, options: &[S]) -> Option<usize> {
    let n = options.len();
    let lower = raw.to_ascii_lowercase();

    let keyed = keyed_number(&lower).or_else(|| leading_number(raw));
    if let Some(number) = keyed {
        if (1..=n).contains(&number) {
            return Some(number - 1);
        }
    }

    let last_line = raw.trim_end().lines().last().unwrap_or("");
    let mut hits =
        options.iter().enumerate().filter(|(_, opt)| !opt.as_ref().is_empty() && last_line.contains(opt.as_ref()));
    match (hits.next(), hits.next()) {
        (Some((i, _)), None) => Some(i),
        _ => None,
    }
}

fn keyed_number(lower: &str) -> Option<usize> {
    let bytes = lower.as_bytes();
    let mut found = None;
    let mut from = 0;
    while let Some(pos) = lower[from..].find("answer") {
        let start = from + pos + "answer".len();
        if let Some(number) = number_after_keyword(&bytes[start..]) {
            found = Some(number);
        }
        from = start;
    }
    found
}

fn number_after_keyword(rest: &[u8]) -> Option<usize> {
    let mut i = skip_separators(rest, 0);
    if rest[i..].starts_with(b"is") && rest.get(i + 2).is_none_or(|c| !c.is_ascii_alphanumeric()) {
        i = skip_separators(rest, i + 2);
    }
    if rest[i..].starts_with(b"option") {
        i = skip_separators(rest, i + "option".len());
    }
    read_number(rest, i)
}

fn skip_separators(s: &[u8], mut i: usize) -> usize {
    while i < s.len() && matches!(s[i], b' ' | b'\t' | b':' | b'=' | b'-' | b'*') {
        i += 1;
    }
    i
}

/// Reads `(n)` or a bare `n` not glued to following alphanumerics.
fn read_number(s: &[u8], mut i: usize) -> Option<usize> {
    let paren = s.get(i) == Some(&b'(');
    if paren {
        i += 1;
    }
    let start = i;
    while i < s.len() && s[i].is_ascii_digit() {
        i += 1;
    }
    if i == start || i - start > 4 {
        return None;
    }
    if paren {
        if s.get(i) != Some(&b')') {
            return None;
        }
    } else if s.get(i).is_some_and(|c| c.is_ascii_alphabetic()) {
        return None;
    }
    core::str::from_utf8(&s[start..i]).ok()?.parse().ok()
}

fn leading_number(raw: &str) -> Option<usize> {
    read_number(raw.trim_start().as_bytes(), 0)
}
