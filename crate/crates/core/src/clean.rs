//! Text cleaning: HTML removal, entity decoding, control-character policy,
//! whitespace normalization.
//!
//! `clean_text` is idempotent: its output contains no tags, no decodable
//! entities, no control characters, and no whitespace runs, so a second
//! application is a no-op. Malformed markup never errors; phishing HTML is
//! routinely broken and the stripper tolerates it.

use alloc::string::String;
use alloc::vec::Vec;

/// Strip markup and normalize `raw` into plain single-line text.
pub fn clean_text(raw: &str) -> String {
    let stripped = strip_tags(raw);
    let decoded = decode_entities_fixpoint(&stripped);
    let filtered = drop_banned_chars(&decoded);
    collapse_whitespace(&filtered)
}

/// Forgiving tag stripper. Tags become single spaces so `<br>` still
/// separates words. `<script>`/`<style>` bodies and comments are dropped
/// entirely. An unclosed tag swallows the rest of the input rather than
/// erroring.
fn strip_tags(input: &str) -> String {
    let mut out = String::with_capacity(input.len());
    let bytes = input.as_bytes();
    let mut i = 0;
    while i < input.len() {
        if bytes[i] != b'<' {
            let ch_len = next_char_len(input, i);
            out.push_str(&input[i..i + ch_len]);
            i += ch_len;
            continue;
        }
        if input[i..].starts_with("<!--") {
            i = match input[i + 4..].find("-->") {
                Some(end) => i + 4 + end + 3,
                None => input.len(),
            };
            out.push(' ');
            continue;
        }
        let tag_end = match input[i + 1..].find('>') {
            Some(end) => i + 1 + end,
            None => {
                out.push(' ');
                break;
            }
        };
        let tag_body = &input[i + 1..tag_end];
        let name: String = tag_body
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .flat_map(|c| c.to_lowercase())
            .collect();
        i = tag_end + 1;
        out.push(' ');
        if (name == "script" || name == "style") && !tag_body.starts_with('/') {
            let close_a = alloc::format!("</{name}>");
            let close_b = alloc::format!("</{}>", name.to_uppercase());
            let rest = &input[i..];
            i = match (rest.find(&close_a), rest.find(&close_b)) {
                (Some(a), Some(b)) => i + a.min(b) + close_a.len(),
                (Some(a), None) => i + a + close_a.len(),
                (None, Some(b)) => i + b + close_b.len(),
                (None, None) => input.len(),
            };
        }
    }
    out
}

fn next_char_len(s: &str, i: usize) -> usize {
    s[i..].chars().next().map(char::len_utf8).unwrap_or(1)
}

/// Decode entities until no known entity remains. Each decode strictly
/// shrinks the string, so the loop terminates. Needed for idempotence:
/// one pass turns "&amp;lt;" into "&lt;", which would decode again.
fn decode_entities_fixpoint(input: &str) -> String {
    let mut current = String::from(input);
    loop {
        let (next, changed) = decode_entities_once(&current);
        if !changed {
            return next;
        }
        current = next;
    }
}

fn decode_entities_once(input: &str) -> (String, bool) {
    let mut out = String::with_capacity(input.len());
    let mut changed = false;
    let mut rest = input;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        match parse_entity(tail) {
            Some((decoded, consumed)) => {
                out.push(decoded);
                changed = true;
                rest = &tail[consumed..];
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    (out, changed)
}

/// Parse one entity at the start of `s` (which begins with '&').
/// Returns the decoded char and the number of bytes consumed.
fn parse_entity(s: &str) -> Option<(char, usize)> {
    let semi = s[1..].find(';').map(|p| p + 1)?;
    if semi < 2 || semi > 10 {
        return None;
    }
    let name = &s[1..semi];
    let consumed = semi + 1;
    if let Some(rest) = name.strip_prefix('#') {
        let code = if let Some(hex) = rest.strip_prefix('x').or_else(|| rest.strip_prefix('X')) {
            u32::from_str_radix(hex, 16).ok()?
        } else {
            rest.parse::<u32>().ok()?
        };
        return char::from_u32(code).map(|c| (c, consumed));
    }
    let decoded = match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => '\u{a0}',
        "copy" => '\u{a9}',
        "reg" => '\u{ae}',
        "trade" => '\u{2122}',
        "mdash" => '\u{2014}',
        "ndash" => '\u{2013}',
        "hellip" => '\u{2026}',
        "lsquo" => '\u{2018}',
        "rsquo" => '\u{2019}',
        "ldquo" => '\u{201c}',
        "rdquo" => '\u{201d}',
        _ => return None,
    };
    Some((decoded, consumed))
}

/// Drop control characters (keeping whitespace controls for the collapse
/// stage) and zero-width characters; decoded '<'/'>' become spaces so no
/// markup survives into the output.
fn drop_banned_chars(input: &str) -> String {
    let zero_width: &[char] = &['\u{200b}', '\u{200c}', '\u{200d}', '\u{feff}', '\u{ad}'];
    input
        .chars()
        .filter_map(|c| {
            if c == '<' || c == '>' {
                Some(' ')
            } else if c == '\t' || c == '\n' || c == '\r' {
                Some(c)
            } else if c.is_control() || zero_width.contains(&c) {
                None
            } else {
                Some(c)
            }
        })
        .collect()
}

fn collapse_whitespace(input: &str) -> String {
    let words: Vec<&str> = input.split_whitespace().collect();
    words.join(" ")
}
