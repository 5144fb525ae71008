//! Recursive parser for the bracketed record grammar.
//!
//! Records look like `Head[key=value,key=Value.Sub[...],...]`. Whitespace and
//! newlines between tokens are ignored; internal whitespace runs collapse to
//! one space, so line-wrapped feeds parse cleanly. Nominal value lists split
//! on commas at bracket depth 0 inside `{...}`. A comma-separated token with
//! no `=` (a line-wrap artifact in some feeds) is folded into the preceding
//! field's value.

use super::{MetricKind, MetricRecord, ProtocolError, SampleRate, ValueType};

/// Parses one metric record. Errors carry the byte offset of the offending
/// token in the input.
pub fn parse_record(text: &str) -> Result<MetricRecord, ProtocolError> {
    let open = text.find('[').ok_or(ProtocolError::Malformed {
        offset: 0,
        message: "expected '[' after the record head".into(),
    })?;
    let head = text[..open].trim();
    let head_offset = text.len() - text.trim_start().len();
    let kind = match head {
        "ControlledMetricType" => MetricKind::Controlled,
        "ObservableMetricType" => MetricKind::Observable,
        "KeyObjectiveType" => MetricKind::KeyObjective,
        other => {
            return Err(ProtocolError::UnknownHead {
                offset: head_offset,
                head: other.to_string(),
            })
        }
    };
    let close = matching_bracket(text, open)?;
    if !text[close + 1..].trim().is_empty() {
        return Err(ProtocolError::Malformed {
            offset: close + 1,
            message: "content after the closing bracket".into(),
        });
    }
    let fields = split_fields(text, open + 1, close)?;

    let mut name = None;
    let mut value_type = None;
    let mut units = None;
    let mut sample_rate = None;
    for field in &fields {
        match field.key.as_str() {
            "name" => name = Some(field.text(text)),
            "valueType" => value_type = Some(parse_value_type(text, field.start(), field.end())?),
            "units" => units = Some(field.text(text)),
            "sampleRate" => sample_rate = Some(parse_sample_rate(text, field.start(), field.end())?),
            other => {
                return Err(ProtocolError::Malformed {
                    offset: field.key_offset,
                    message: format!("unknown field \"{other}\""),
                })
            }
        }
    }

    let name = name
        .filter(|n| !n.is_empty())
        .ok_or(ProtocolError::MissingField {
            offset: open,
            field: "name".into(),
        })?;
    let value_type = value_type.ok_or(ProtocolError::MissingField {
        offset: open,
        field: "valueType".into(),
    })?;
    let units = match units {
        Some(u) if !u.is_empty() => u,
        _ => "n/a".to_string(),
    };
    Ok(MetricRecord {
        kind,
        name,
        value_type,
        units,
        sample_rate,
    })
}

struct Field {
    key: String,
    key_offset: usize,
    /// Value segments; line-wrap artifacts fold extra segments onto a field.
    spans: Vec<(usize, usize)>,
}

impl Field {
    fn start(&self) -> usize {
        self.spans[0].0
    }

    fn end(&self) -> usize {
        self.spans.last().expect("non-empty").1
    }

    /// The value as collapsed text, folded segments joined with one space.
    fn text(&self, source: &str) -> String {
        self.spans
            .iter()
            .map(|&(s, e)| collapse(&source[s..e]))
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Splits `text[from..to]` at depth-0 commas into `key=value` fields. A
/// segment without `=` extends the previous field's value.
fn split_fields(text: &str, from: usize, to: usize) -> Result<Vec<Field>, ProtocolError> {
    let mut fields: Vec<Field> = Vec::new();
    for (seg_start, seg_end) in split_at_commas(text, from, to) {
        let segment = &text[seg_start..seg_end];
        match find_depth0(text, seg_start, seg_end, '=') {
            Some(eq) => {
                let key = text[seg_start..eq].trim().to_string();
                if key.is_empty() {
                    return Err(ProtocolError::Malformed {
                        offset: seg_start,
                        message: "field with empty key".into(),
                    });
                }
                fields.push(Field {
                    key,
                    key_offset: seg_start,
                    spans: vec![(eq + 1, seg_end)],
                });
            }
            None => {
                if segment.trim().is_empty() {
                    continue;
                }
                let Some(previous) = fields.last_mut() else {
                    return Err(ProtocolError::Malformed {
                        offset: seg_start,
                        message: format!("value \"{}\" without a field key", segment.trim()),
                    });
                };
                previous.spans.push((seg_start, seg_end));
            }
        }
    }
    Ok(fields)
}

fn parse_value_type(text: &str, from: usize, to: usize) -> Result<ValueType, ProtocolError> {
    let raw = &text[from..to];
    let value = raw.trim_start();
    let start = from + (raw.len() - value.len());
    if value.starts_with("ValueType.Nominal") {
        let open = start + value.find('[').ok_or(ProtocolError::Malformed {
            offset: start,
            message: "expected '[' after ValueType.Nominal".into(),
        })?;
        let close = matching_bracket(text, open)?;
        let fields = split_fields(text, open + 1, close)?;
        let mut name = String::new();
        let mut values = None;
        for field in &fields {
            match field.key.as_str() {
                "name" => name = field.text(text),
                "values" => values = Some(parse_values(text, field.start(), field.end())?),
                "typ" => {}
                other => {
                    return Err(ProtocolError::Malformed {
                        offset: field.key_offset,
                        message: format!("unknown nominal field \"{other}\""),
                    })
                }
            }
        }
        let values = values.ok_or(ProtocolError::MissingField {
            offset: open,
            field: "values".into(),
        })?;
        if values.is_empty() {
            return Err(ProtocolError::Malformed {
                offset: open,
                message: "empty nominal value list".into(),
            });
        }
        Ok(ValueType::Nominal { name, values })
    } else if value.starts_with("ValueType.Integer") {
        let open = start + value.find('[').ok_or(ProtocolError::Malformed {
            offset: start,
            message: "expected '[' after ValueType.Integer".into(),
        })?;
        let close = matching_bracket(text, open)?;
        let fields = split_fields(text, open + 1, close)?;
        let mut min = None;
        let mut max = None;
        for field in &fields {
            match field.key.as_str() {
                "min" => min = Some(parse_int(text, field.start(), field.end())?),
                "max" => max = Some(parse_int(text, field.start(), field.end())?),
                "typ" => {}
                other => {
                    return Err(ProtocolError::Malformed {
                        offset: field.key_offset,
                        message: format!("unknown integer field \"{other}\""),
                    })
                }
            }
        }
        let min = min.ok_or(ProtocolError::MissingField {
            offset: open,
            field: "min".into(),
        })?;
        let max = max.ok_or(ProtocolError::MissingField {
            offset: open,
            field: "max".into(),
        })?;
        if min > max {
            return Err(ProtocolError::Malformed {
                offset: open,
                message: format!("integer range {min}..{max} has min > max"),
            });
        }
        Ok(ValueType::Integer { min, max })
    } else {
        Err(ProtocolError::Malformed {
            offset: start,
            message: format!("unknown value type \"{}\"", collapse(value)),
        })
    }
}

fn parse_sample_rate(text: &str, from: usize, to: usize) -> Result<SampleRate, ProtocolError> {
    let value = collapse(&text[from..to]);
    if value == "SampleRate.EventDriven[]" {
        Ok(SampleRate::EventDriven)
    } else {
        Err(ProtocolError::Malformed {
            offset: from,
            message: format!("unsupported sample rate \"{value}\""),
        })
    }
}

fn parse_values(text: &str, from: usize, to: usize) -> Result<Vec<String>, ProtocolError> {
    let segment = text[from..to].trim();
    let start = from + (text[from..to].len() - text[from..to].trim_start().len());
    if !segment.starts_with('{') {
        return Err(ProtocolError::Malformed {
            offset: start,
            message: "values must be a {...} list".into(),
        });
    }
    let close = matching_bracket(text, start)?;
    if !text[close + 1..to].trim().is_empty() {
        return Err(ProtocolError::Malformed {
            offset: close + 1,
            message: "content after the value list".into(),
        });
    }
    Ok(split_at_commas(text, start + 1, close)
        .into_iter()
        .map(|(s, e)| collapse(&text[s..e]))
        .filter(|v| !v.is_empty())
        .collect())
}

fn parse_int(text: &str, from: usize, to: usize) -> Result<i64, ProtocolError> {
    let value = text[from..to].trim();
    value.parse().map_err(|_| ProtocolError::Malformed {
        offset: from,
        message: format!("cannot parse \"{value}\" as an integer"),
    })
}

/// Byte index of the bracket closing the one at `open`, honoring nesting of
/// `[]` and `{}`. Parentheses are ordinary characters; zone names contain
/// them.
fn matching_bracket(text: &str, open: usize) -> Result<usize, ProtocolError> {
    let mut stack: Vec<u8> = Vec::new();
    for (i, &b) in text.as_bytes().iter().enumerate().skip(open) {
        match b {
            b'[' | b'{' => stack.push(b),
            b']' | b'}' => {
                let expected = if b == b']' { b'[' } else { b'{' };
                if stack.pop() != Some(expected) {
                    return Err(ProtocolError::UnbalancedBracket { offset: i });
                }
                if stack.is_empty() {
                    return Ok(i);
                }
            }
            _ => {}
        }
    }
    Err(ProtocolError::UnbalancedBracket { offset: open })
}

/// Byte index of the first `needle` at bracket depth 0 within the range.
fn find_depth0(text: &str, from: usize, to: usize, needle: char) -> Option<usize> {
    let mut depth = 0usize;
    for (i, &b) in text.as_bytes().iter().enumerate().take(to).skip(from) {
        match b {
            b'[' | b'{' => depth += 1,
            b']' | b'}' => depth = depth.saturating_sub(1),
            b if depth == 0 && b == needle as u8 => return Some(i),
            _ => {}
        }
    }
    None
}

/// Splits `text[from..to]` at commas that sit at bracket depth 0 relative to
/// the range. Returns byte spans.
fn split_at_commas(text: &str, from: usize, to: usize) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut depth = 0usize;
    let mut start = from;
    for (i, &b) in text.as_bytes().iter().enumerate().take(to).skip(from) {
        match b {
            b'[' | b'{' => depth += 1,
            b']' | b'}' => depth = depth.saturating_sub(1),
            b',' if depth == 0 => {
                spans.push((start, i));
                start = i + 1;
            }
            _ => {}
        }
    }
    spans.push((start, to));
    spans
}

/// Collapses whitespace runs (including newlines) to single spaces and trims.
fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
