//! Parsing free-form attempt text into the structured step model.
//!
//! The parser is deliberately forgiving: it recognizes the step patterns the
//! rationale generators produce, tolerates `=`-continuation lines wrapped
//! onto their own line, treats anything before the first labelled line as
//! preamble, and falls back to an opaque calculation step for lines that
//! match no known pattern. Structure checks belong to the feedback modules,
//! not the parser.

use crate::error::{PipelineError, Result};
use crate::step::{
    ordinal_from_word, Assign, Attempt, LetterDef, LinkSpan, OrderItem, Payload, Step, StepKind,
    StepLabel, FINAL_LABEL,
};
use crate::task::TaskKind;

/// Recognizes a step-label line and returns the label.
fn match_label(line: &str) -> Option<StepLabel> {
    let rest = line.strip_prefix('(')?;
    let close = rest.find(')')?;
    let inner = &rest[..close];
    if inner == FINAL_LABEL {
        return Some(StepLabel::final_response());
    }
    let numeric = !inner.is_empty()
        && inner.chars().all(|c| c.is_ascii_digit() || c == '.')
        && !inner.starts_with('.')
        && !inner.ends_with('.')
        && !inner.contains("..");
    numeric.then(|| StepLabel::new(inner))
}

/// Parses attempt text for the given task. Errors only when not a single
/// step label can be found.
pub fn parse_attempt(kind: TaskKind, text: &str) -> Result<Attempt> {
    let mut preamble_lines: Vec<&str> = Vec::new();
    let mut raw_steps: Vec<(StepLabel, String)> = Vec::new();
    for line in text.lines() {
        if let Some(label) = match_label(line) {
            raw_steps.push((label, line.to_string()));
        } else if let Some((_, raw)) = raw_steps.last_mut() {
            raw.push('\n');
            raw.push_str(line);
        } else {
            preamble_lines.push(line);
        }
    }
    if raw_steps.is_empty() {
        return Err(PipelineError::Parse(
            "attempt contains no parsable steps".into(),
        ));
    }
    let steps: Vec<Step> = raw_steps
        .into_iter()
        .map(|(label, raw)| parse_step(kind, label, raw))
        .collect();
    let final_answer = steps.iter().rev().find_map(|s| match &s.payload {
        Payload::Final { answer, .. } => answer.clone(),
        _ => None,
    });
    Ok(Attempt {
        preamble: preamble_lines.join("\n"),
        steps,
        final_answer,
        text: text.to_string(),
    })
}

/// Like [`parse_attempt`] but additionally requires what generated rationales
/// guarantee: strictly increasing labels, fully-typed payloads, and a final
/// response with an extractable answer.
pub fn parse_attempt_strict(kind: TaskKind, text: &str) -> Result<Attempt> {
    let a = parse_attempt(kind, text)?;
    for w in a.steps.windows(2) {
        if w[0].label.document_cmp(&w[1].label) != std::cmp::Ordering::Less {
            return Err(PipelineError::Parse(format!(
                "labels not strictly increasing: {} then {}",
                w[0].label.render(),
                w[1].label.render()
            )));
        }
    }
    if kind.is_scriptable() {
        if let Some(s) = a.steps.iter().find(|s| s.payload == Payload::Opaque) {
            return Err(PipelineError::Parse(format!(
                "step {} did not match any known pattern",
                s.label.render()
            )));
        }
    }
    match a.steps.last() {
        Some(s) if s.label.is_final() => {}
        _ => {
            return Err(PipelineError::Parse(
                "attempt does not end with a final response".into(),
            ))
        }
    }
    if a.final_answer.is_none() {
        return Err(PipelineError::Parse(
            "no answer found in the final response".into(),
        ));
    }
    Ok(a)
}

fn parse_step(kind: TaskKind, label: StepLabel, raw: String) -> Step {
    let prefix = label.render();
    let mut base = prefix.len().min(raw.len());
    if raw[base..].starts_with(' ') {
        base += 1;
    }
    let (step_kind, payload) = if label.is_final() {
        let (answer, claim) = extract_final(kind, &raw);
        (StepKind::FinalResponse, Payload::Final { answer, claim })
    } else {
        match kind {
            TaskKind::MultistepArithmetic => parse_arith_step(&raw, base),
            TaskKind::WordSorting => parse_sort_step(&raw, base),
            _ => (StepKind::Calculation, Payload::Opaque),
        }
    };
    Step {
        label,
        raw_text: raw,
        kind: step_kind,
        payload,
    }
}

// ---------------------------------------------------------------- arithmetic

fn parse_arith_step(raw: &str, base: usize) -> (StepKind, Payload) {
    let content = &raw[base..];
    if content.starts_with("This equation can be written as") {
        if let Some(p) = parse_decomposition(content) {
            return (StepKind::Decomposition, p);
        }
    } else if let Some(rest) = content.strip_prefix("Let's calculate") {
        if let Some((lead, eq_off)) = letter_lead(rest) {
            let links = split_chain(raw, base + (content.len() - rest.len()) + eq_off);
            if !links.is_empty() {
                return (
                    StepKind::Calculation,
                    Payload::Chain {
                        lead: Some(lead),
                        links,
                    },
                );
            }
        }
    } else if content.starts_with("Then, the final ") {
        if let Some(pos) = content.find(" is ") {
            let links = split_chain(raw, base + pos + " is ".len());
            if !links.is_empty() {
                return (StepKind::FinalEquation, Payload::Chain { lead: None, links });
            }
        }
    }
    (StepKind::Calculation, Payload::Opaque)
}

/// Parses `A = ...` or `A=(...` after "Let's calculate", returning the letter
/// and the offset just past the first `=` (relative to the text after the
/// lead-in).
fn letter_lead(rest: &str) -> Option<(char, usize)> {
    let mut it = rest.char_indices().peekable();
    while matches!(it.peek(), Some((_, ' '))) {
        it.next();
    }
    let (_, letter) = it.next()?;
    if !letter.is_ascii_uppercase() {
        return None;
    }
    while matches!(it.peek(), Some((_, ' '))) {
        it.next();
    }
    match it.next() {
        Some((i, '=')) => Some((letter, i + 1)),
        _ => None,
    }
}

/// Splits an equation chain on `=` at parenthesis depth zero, starting at
/// byte `from` of `raw`. Links keep their byte spans; a lone trailing period
/// is excluded from the last link.
fn split_chain(raw: &str, from: usize) -> Vec<LinkSpan> {
    let mut cuts = vec![from];
    let mut depth = 0i32;
    for (i, c) in raw[from..].char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            '=' if depth == 0 => cuts.push(from + i + 1),
            _ => {}
        }
    }
    cuts.push(raw.len() + 1);
    let mut links = Vec::new();
    for w in cuts.windows(2) {
        let (s, e) = (w[0], w[1] - 1);
        if let Some(span) = trim_span(raw, s, e) {
            links.push(span);
        }
    }
    if let Some(last) = links.last_mut() {
        if last.text.len() > 1 && last.text.ends_with('.') && !last.text.ends_with("..") {
            last.end -= 1;
            last.text.pop();
        }
    }
    links
}

fn trim_span(raw: &str, mut s: usize, mut e: usize) -> Option<LinkSpan> {
    let bytes = raw.as_bytes();
    while s < e && (bytes[s] as char).is_whitespace() {
        s += 1;
    }
    while e > s && (bytes[e - 1] as char).is_whitespace() {
        e -= 1;
    }
    (s < e).then(|| LinkSpan {
        text: raw[s..e].to_string(),
        start: s,
        end: e,
    })
}

fn parse_decomposition(content: &str) -> Option<Payload> {
    let q1 = content.find('"')?;
    let q2 = content[q1 + 1..].find('"')? + q1 + 1;
    let skeleton = content[q1 + 1..q2].to_string();
    let rest = content[q2 + 1..].strip_prefix(", where ")?;
    let rest = rest.strip_suffix('.').unwrap_or(rest);
    let mut defs = Vec::new();
    for chunk in rest.split(", ") {
        // The last comma-separated element joins two defs with " and ".
        for def in chunk.split(" and ") {
            let (letter_s, expr_text) = def.split_once(" = ")?;
            let mut letters = letter_s.chars();
            let letter = letters.next()?;
            if letters.next().is_some() || !letter.is_ascii_uppercase() {
                return None;
            }
            defs.push(LetterDef {
                letter,
                expr_text: expr_text.to_string(),
                raw: def.to_string(),
            });
        }
    }
    (!defs.is_empty()).then_some(Payload::Decomposition { skeleton, defs })
}

// ------------------------------------------------------------- word sorting

fn parse_sort_step(raw: &str, base: usize) -> (StepKind, Payload) {
    let content = &raw[base..];
    if let Some(rest) = content.strip_prefix("The ") {
        // "The first letter: ..." (or deeper ordinal on a retry step).
        if let Some(colon) = rest.find(" letter: ") {
            if let Some(position) = ordinal_from_word(&rest[..colon]) {
                let assigns_from = base + "The ".len() + colon + " letter: ".len();
                if let Some(assigns) = parse_assigns(raw, assigns_from) {
                    return (
                        StepKind::LetterAssign,
                        Payload::LetterAssign { position, assigns },
                    );
                }
            }
        }
    } else if content.starts_with("Now sort this subpart ") {
        if let Some(p) = parse_subsort(raw, base, content) {
            return (StepKind::Subsort, p);
        }
    } else if content.starts_with("We now have: ") {
        if let Some(items) = parse_order_items(raw, base + "We now have: ".len()) {
            return (StepKind::Ordering, Payload::Ordering { items });
        }
    } else if let Some(rest) = content.strip_prefix("Hence, we have ") {
        if let Some(words) = parse_word_sequence(rest) {
            return (StepKind::Combine, Payload::Combine { words });
        }
    }
    (StepKind::Calculation, Payload::Opaque)
}

/// Parses `"word"="c" (3), "word"="c" (3), ...` starting at byte `from`.
fn parse_assigns(raw: &str, from: usize) -> Option<Vec<Assign>> {
    let mut assigns = Vec::new();
    let mut pos = from;
    loop {
        let start = pos;
        let (word, p) = parse_quoted(raw, pos)?;
        pos = p;
        if !raw[pos..].starts_with('=') {
            return None;
        }
        pos += 1;
        let (letter, p) = parse_quoted(raw, pos)?;
        pos = p;
        if !raw[pos..].starts_with(" (") {
            return None;
        }
        pos += 2;
        let close = raw[pos..].find(')')? + pos;
        let index: u32 = raw[pos..close].parse().ok()?;
        pos = close + 1;
        assigns.push(Assign {
            word,
            letter,
            index,
            raw: raw[start..pos].to_string(),
        });
        if raw[pos..].starts_with(", ") {
            pos += 2;
        } else {
            break;
        }
    }
    (!assigns.is_empty()).then_some(assigns)
}

fn parse_quoted(raw: &str, pos: usize) -> Option<(String, usize)> {
    let rest = &raw[pos..];
    let inner = rest.strip_prefix('"')?;
    let close = inner.find('"')?;
    Some((inner[..close].to_string(), pos + close + 2))
}

fn parse_subsort(raw: &str, base: usize, content: &str) -> Option<Payload> {
    let open = content.find('[')?;
    let close = content.find(']')?;
    let group: Vec<String> = content[open + 1..close]
        .split(" ? ")
        .map(|w| w.trim_matches('"').to_string())
        .collect();
    let their = content.find(" by looking at their ")? + " by looking at their ".len();
    let letters_kw = content[their..].find(" letters: ")? + their;
    let position = ordinal_from_word(&content[their..letters_kw])?;
    let assigns_from = base + letters_kw + " letters: ".len();
    let assigns = parse_assigns(raw, assigns_from)?;
    Some(Payload::Subsort {
        group,
        position,
        assigns,
    })
}

/// Parses `(6) "fortescue" < (16) ["purloin" ? "percept"] < ...` items with
/// byte spans, starting at byte `from`.
fn parse_order_items(raw: &str, from: usize) -> Option<Vec<OrderItem>> {
    let mut items = Vec::new();
    let mut pos = from;
    loop {
        let start = pos;
        if !raw[pos..].starts_with('(') {
            return None;
        }
        let close = raw[pos..].find(')')? + pos;
        let index: u32 = raw[pos + 1..close].parse().ok()?;
        pos = close + 1;
        if !raw[pos..].starts_with(' ') {
            return None;
        }
        pos += 1;
        let members = if raw[pos..].starts_with('[') {
            let end = raw[pos..].find(']')? + pos;
            let members: Vec<String> = raw[pos + 1..end]
                .split(" ? ")
                .map(|w| w.trim_matches('"').to_string())
                .collect();
            pos = end + 1;
            members
        } else {
            let (w, p) = parse_quoted(raw, pos)?;
            pos = p;
            vec![w]
        };
        items.push(OrderItem {
            index,
            members,
            start,
            end: pos,
        });
        if raw[pos..].starts_with(" < ") {
            pos += 3;
        } else {
            break;
        }
    }
    (!items.is_empty()).then_some(items)
}

fn parse_word_sequence(rest: &str) -> Option<Vec<String>> {
    let rest = rest.strip_suffix('.').unwrap_or(rest);
    let mut words = Vec::new();
    for part in rest.split(" < ") {
        let w = part.trim();
        if !w.starts_with('"') || !w.ends_with('"') || w.len() < 3 {
            return None;
        }
        words.push(w[1..w.len() - 1].to_string());
    }
    (!words.is_empty()).then_some(words)
}

// ------------------------------------------------------------ final answers

/// Extracts the normalized answer and the verbatim `the answer is ...` claim
/// from a final-response step. Tolerates a trailing `[END]` sentinel.
fn extract_final(kind: TaskKind, raw: &str) -> (Option<String>, Option<String>) {
    const KEY: &str = "the answer is";
    let Some(pos) = raw.rfind(KEY) else {
        return (None, None);
    };
    let after = &raw[pos + KEY.len()..];
    if kind.is_multiple_choice() {
        let Some(open_rel) = after.find('(') else {
            return (None, None);
        };
        let Some(close_rel) = after[open_rel..].find(')') else {
            return (None, None);
        };
        let answer = after[open_rel..open_rel + close_rel + 1].to_string();
        let claim = raw[pos..pos + KEY.len() + open_rel + close_rel + 1].to_string();
        return (Some(answer), Some(claim));
    }
    if kind == TaskKind::WordSorting {
        let Some(rest) = after.strip_prefix(':') else {
            return (None, None);
        };
        let mut body = rest.trim_start();
        body = body.strip_suffix("[END]").unwrap_or(body).trim_end();
        body = body.strip_suffix('.').unwrap_or(body).trim_end();
        if body.is_empty() {
            return (None, None);
        }
        // Search from the key onward: the answer text may also occur
        // earlier in the line (e.g. a word echoed inside "response").
        let claim_end = raw[pos..]
            .find(body)
            .map(|i| pos + i + body.len())
            .unwrap_or(raw.len());
        return (
            Some(body.split_whitespace().collect::<Vec<_>>().join(" ")),
            Some(raw[pos..claim_end].to_string()),
        );
    }
    // Arithmetic: a single signed-integer token.
    let trimmed = after.trim_start();
    let skipped = after.len() - trimmed.len();
    let tok_end = trimmed
        .find(|c: char| c.is_whitespace())
        .unwrap_or(trimmed.len());
    let mut tok = &trimmed[..tok_end];
    tok = tok.strip_suffix('.').unwrap_or(tok);
    if tok.is_empty() || tok.parse::<i128>().is_err() {
        return (None, None);
    }
    let claim_end = pos + KEY.len() + skipped + tok.len();
    (Some(tok.to_string()), Some(raw[pos..claim_end].to_string()))
}
