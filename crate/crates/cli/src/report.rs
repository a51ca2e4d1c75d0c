//! Report values are built once as ordered JSON and rendered either as JSON
//! or as CSV blocks headed by `# path` comment lines.

use mcreduce::io::format_value;
use serde_json::{Map, Value};

/// Rounds to 15 decimal places so that `0.19999999999999996` prints as `0.2`.
pub fn tidy(v: f64) -> f64 {
    let r = (v * 1e15).round() / 1e15;
    if r.is_finite() {
        r + 0.0
    } else {
        v
    }
}

/// A JSON number, or the string `"inf"` for an infinite value.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        serde_json::Number::from_f64(tidy(v)).map_or(Value::Null, Value::Number)
    } else if v > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

pub fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| num(x)).collect())
}

pub fn matrix<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Value {
    Value::Array(rows.map(nums).collect())
}

pub fn render(value: &Value, json: bool) -> String {
    if json {
        let mut s = serde_json::to_string_pretty(value).expect("serializable");
        s.push('\n');
        s
    } else {
        let mut out = String::new();
        render_csv(value, "", &mut out);
        out
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some(String::new()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.as_f64().map_or_else(|| n.to_string(), |f| {
            if n.is_f64() {
                format_value(f)
            } else {
                n.to_string()
            }
        })),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

fn row(values: &[Value]) -> Option<String> {
    values
        .iter()
        .map(scalar)
        .collect::<Option<Vec<_>>>()
        .map(|v| v.join(","))
}

fn flat_object(v: &Value) -> Option<&Map<String, Value>> {
    match v {
        Value::Object(m) if m.values().all(|x| scalar(x).is_some()) => Some(m),
        _ => None,
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_owned()
    } else {
        format!("{prefix}/{key}")
    }
}

fn render_csv(value: &Value, path: &str, out: &mut String) {
    let header = |out: &mut String| {
        if !path.is_empty() {
            out.push_str("# ");
            out.push_str(path);
            out.push('\n');
        }
    };
    match value {
        Value::Null => {}
        Value::Object(map) => {
            for (k, v) in map {
                render_csv(v, &join(path, k), out);
            }
        }
        Value::Array(items) => {
            if let Some(line) = row(items) {
                header(out);
                out.push_str(&line);
                out.push('\n');
            } else if let Some(lines) = items
                .iter()
                .map(|r| r.as_array().and_then(|r| row(r)))
                .collect::<Option<Vec<_>>>()
            {
                header(out);
                for l in lines {
                    out.push_str(&l);
                    out.push('\n');
                }
            } else if let Some(objs) = items.iter().map(flat_object).collect::<Option<Vec<_>>>() {
                header(out);
                if let Some(first) = objs.first() {
                    out.push_str(&first.keys().cloned().collect::<Vec<_>>().join(","));
                    out.push('\n');
                }
                for o in objs {
                    let vals: Vec<Value> = o.values().cloned().collect();
                    out.push_str(&row(&vals).unwrap_or_default());
                    out.push('\n');
                }
            } else {
                for (i, item) in items.iter().enumerate() {
                    render_csv(item, &join(path, &i.to_string()), out);
                }
            }
        }
        other => {
            header(out);
            out.push_str(&scalar(other).unwrap_or_default());
            out.push('\n');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn tidy_rounds_noise() {
        assert_eq!(tidy(0.19999999999999996), 0.2);
        assert_eq!(tidy(-0.0).to_string(), "0");
        assert_eq!(num(f64::INFINITY), json!("inf"));
    }

    #[test]
    fn csv_blocks() {
        let v = json!({
            "thresholds": [0.2, 0.68],
            "Phi": [[0.5, 0.5], [1.0, 0.0]],
            "kl_rate": 0.25,
            "lift": null,
            "points": [{"R": 0.0, "kl": null}, {"R": 0.1, "kl": 1.5}],
        });
        let s = render(&v, false);
        assert_eq!(
            s,
            "# thresholds\n0.2,0.68\n# Phi\n0.5,0.5\n1,0\n# kl_rate\n0.25\n# points\nR,kl\n0,\n0.1,1.5\n"
        );
    }
}
