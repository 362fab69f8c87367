//! Minimal RFC822/MIME message parsing for .eml files and mbox archives.
//!
//! Tolerant by design: header names are matched case-insensitively,
//! continuation lines are unfolded, unparseable lines are ignored, and a
//! message only counts as malformed when it has no parseable header at all.
//! Multipart bodies concatenate their text parts, preferring text/plain
//! over text/html; quoted-printable and base64 transfer encodings are
//! decoded.

use base64::Engine;

/// One parsed message: unfolded headers plus the extracted body text.
#[derive(Debug, Clone)]
pub struct ParsedMessage {
    pub headers: Vec<(String, String)>,
    pub body: String,
}

#[derive(Debug, thiserror::Error)]
pub enum MailParseError {
    #[error("no parseable headers")]
    NoHeaders,
}

pub fn parse_message(raw: &str) -> Result<ParsedMessage, MailParseError> {
    let (header_block, body_block) = split_header_body(raw);
    let headers = parse_headers(header_block);
    if headers.is_empty() {
        return Err(MailParseError::NoHeaders);
    }
    let body = extract_body(&headers, body_block);
    Ok(ParsedMessage { headers, body })
}

fn split_header_body(raw: &str) -> (&str, &str) {
    if let Some(pos) = raw.find("\r\n\r\n") {
        (&raw[..pos], &raw[pos + 4..])
    } else if let Some(pos) = raw.find("\n\n") {
        (&raw[..pos], &raw[pos + 2..])
    } else {
        (raw, "")
    }
}

fn parse_headers(block: &str) -> Vec<(String, String)> {
    let mut headers: Vec<(String, String)> = Vec::new();
    for line in block.lines() {
        if line.starts_with(' ') || line.starts_with('\t') {
            if let Some((_, value)) = headers.last_mut() {
                value.push(' ');
                value.push_str(line.trim());
            }
            continue;
        }
        let Some(colon) = line.find(':') else { continue };
        let name = line[..colon].trim();
        if name.is_empty() || name.contains(' ') {
            continue;
        }
        headers.push((name.to_string(), line[colon + 1..].trim().to_string()));
    }
    headers
}

fn header<'a>(headers: &'a [(String, String)], name: &str) -> Option<&'a str> {
    headers
        .iter()
        .find(|(n, _)| n.eq_ignore_ascii_case(name))
        .map(|(_, v)| v.as_str())
}

/// Pull a parameter like `boundary="..."` out of a Content-Type value.
fn content_type_param<'a>(value: &'a str, param: &str) -> Option<&'a str> {
    for part in value.split(';').skip(1) {
        let part = part.trim();
        let Some(eq) = part.find('=') else { continue };
        if part[..eq].trim().eq_ignore_ascii_case(param) {
            return Some(part[eq + 1..].trim().trim_matches('"'));
        }
    }
    None
}

fn media_type(value: &str) -> String {
    value.split(';').next().unwrap_or("").trim().to_ascii_lowercase()
}

fn extract_body(headers: &[(String, String)], body: &str) -> String {
    let content_type = header(headers, "content-type").unwrap_or("text/plain");
    let media = media_type(content_type);
    if media.starts_with("multipart/") {
        if let Some(boundary) = content_type_param(content_type, "boundary") {
            return extract_multipart(body, boundary);
        }
    }
    decode_transfer(headers, body)
}

fn extract_multipart(body: &str, boundary: &str) -> String {
    let delimiter = format!("--{boundary}");
    let mut plain_parts: Vec<String> = Vec::new();
    let mut html_parts: Vec<String> = Vec::new();
    let mut other_parts: Vec<String> = Vec::new();

    for chunk in body.split(&delimiter).skip(1) {
        let chunk = chunk.strip_prefix("\r\n").or_else(|| chunk.strip_prefix('\n')).unwrap_or(chunk);
        if chunk.starts_with("--") {
            break;
        }
        let (part_headers_block, part_body) = split_header_body(chunk);
        let part_headers = parse_headers(part_headers_block);
        let part_type = media_type(header(&part_headers, "content-type").unwrap_or("text/plain"));
        if part_type.starts_with("multipart/") {
            if let Some(inner) = header(&part_headers, "content-type")
                .and_then(|ct| content_type_param(ct, "boundary"))
            {
                other_parts.push(extract_multipart(part_body, inner));
                continue;
            }
        }
        let decoded = decode_transfer(&part_headers, part_body);
        match part_type.as_str() {
            "text/plain" => plain_parts.push(decoded),
            "text/html" => html_parts.push(decoded),
            t if t.starts_with("text/") => other_parts.push(decoded),
            _ => {}
        }
    }

    let chosen = if !plain_parts.is_empty() {
        plain_parts
    } else if !html_parts.is_empty() {
        html_parts
    } else {
        other_parts
    };
    chosen.join("\n")
}

fn decode_transfer(headers: &[(String, String)], body: &str) -> String {
    match header(headers, "content-transfer-encoding")
        .map(|v| v.trim().to_ascii_lowercase())
        .as_deref()
    {
        Some("quoted-printable") => decode_quoted_printable(body),
        Some("base64") => {
            let compact: String = body.chars().filter(|c| !c.is_whitespace()).collect();
            match base64::engine::general_purpose::STANDARD.decode(compact.as_bytes()) {
                Ok(bytes) => String::from_utf8_lossy(&bytes).into_owned(),
                Err(_) => body.to_string(),
            }
        }
        _ => body.to_string(),
    }
}

fn decode_quoted_printable(body: &str) -> String {
    let mut out = Vec::with_capacity(body.len());
    let bytes = body.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'=' {
            // Soft line break: "=\r\n" or "=\n".
            if bytes.get(i + 1) == Some(&b'\r') && bytes.get(i + 2) == Some(&b'\n') {
                i += 3;
                continue;
            }
            if bytes.get(i + 1) == Some(&b'\n') {
                i += 2;
                continue;
            }
            if i + 2 < bytes.len() {
                let hex = &body[i + 1..i + 3];
                if let Ok(value) = u8::from_str_radix(hex, 16) {
                    out.push(value);
                    i += 3;
                    continue;
                }
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    String::from_utf8_lossy(&out).into_owned()
}

/// Split an mbox archive into raw message chunks at "From " separator
/// lines. Returns the byte text of each message (separator excluded).
pub fn split_mbox(content: &str) -> Vec<&str> {
    let mut starts: Vec<usize> = Vec::new();
    if content.starts_with("From ") {
        starts.push(0);
    }
    let mut offset = 0;
    for line in content.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        if line_start > 0 && line.starts_with("From ") {
            starts.push(line_start);
        }
    }
    let mut chunks = Vec::with_capacity(starts.len());
    for (i, &start) in starts.iter().enumerate() {
        let end = starts.get(i + 1).copied().unwrap_or(content.len());
        let chunk = &content[start..end];
        // Drop the "From ..." separator line itself.
        let body_start = chunk.find('\n').map(|p| p + 1).unwrap_or(chunk.len());
        chunks.push(&chunk[body_start..]);
    }
    chunks
}
