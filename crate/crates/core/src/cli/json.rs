//! Deterministic JSON writer: object keys in sorted order, floats at 17
//! significant digits, non-finite floats as `null`.

use serde_json::Value;

use crate::numeric::format_sig17;

pub const SCHEMA_VERSION: u64 = 1;

/// Pretty-printed document with a trailing newline.
pub fn to_pretty(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, Some(0));
    out.push('\n');
    out
}

/// Single-line document without a trailing newline.
pub fn to_line(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, None);
    out
}

fn newline(out: &mut String, indent: Option<usize>) {
    if let Some(n) = indent {
        out.push('\n');
        out.extend(std::iter::repeat_n(' ', 2 * n));
    }
}

fn write_value(out: &mut String, value: &Value, indent: Option<usize>) {
    let inner = indent.map(|n| n + 1);
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                match n.as_f64().and_then(format_sig17) {
                    Some(s) => out.push_str(&s),
                    None => out.push_str("null"),
                }
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            // Arrays of scalars stay on one line to keep vectors readable.
            let flat = items.iter().all(|v| !v.is_array() && !v.is_object());
            out.push('[');
            for (i, v) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                    if flat && indent.is_some() {
                        out.push(' ');
                    }
                }
                if !flat {
                    newline(out, inner);
                }
                write_value(out, v, inner);
            }
            if !flat && !items.is_empty() {
                newline(out, indent);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(out, inner);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push(':');
                if indent.is_some() {
                    out.push(' ');
                }
                write_value(out, &map[*k], inner);
            }
            if !map.is_empty() {
                newline(out, indent);
            }
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_round_trip_exactly() {
        let xs = [0.1, 1.0 / 3.0, -2.5e-12, 6.02e23, 1.0, 0.0];
        let text = to_line(&json!(xs));
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, xs);
    }

    #[test]
    fn integers_stay_integers_and_nan_is_null() {
        let text = to_line(&json!({"n": 3u64, "x": f64::NAN, "b": [true, false]}));
        assert_eq!(text, r#"{"b":[true,false],"n":3,"x":null}"#);
    }

    #[test]
    fn pretty_output_parses_back() {
        let v = json!({"rows": [{"a": 1.5, "s": "x\"y"}], "empty": [], "o": {}});
        let back: Value = serde_json::from_str(&to_pretty(&v)).unwrap();
        assert_eq!(back, v);
    }
}
