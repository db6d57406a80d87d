//! Flat CSV projection of JSON reports.
//!
//! A report carrying `"table": {"columns": [..], "rows": [[..], ..]}` becomes
//! that table; anything else becomes `path,value` rows over its leaves.

use serde_json::Value;

fn cell(v: &Value) -> String {
    let raw = match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(a) => a.iter().map(cell).collect::<Vec<_>>().join(" "),
        other => other.to_string(),
    };
    if raw.contains([',', '"', '\n']) {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw
    }
}

fn leaves(path: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if path.is_empty() { k.to_string() } else { format!("{path}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, x)| leaves(&join(k), x, out)),
        Value::Array(a) if a.iter().any(|x| x.is_object() || x.is_array()) => {
            a.iter().enumerate().for_each(|(i, x)| leaves(&join(&i.to_string()), x, out))
        }
        leaf => out.push((path.to_string(), cell(leaf))),
    }
}

pub fn to_csv(v: &Value) -> String {
    let mut s = String::new();
    if let (Some(cols), Some(rows)) = (
        v.pointer("/table/columns").and_then(Value::as_array),
        v.pointer("/table/rows").and_then(Value::as_array),
    ) {
        s.push_str(&cols.iter().map(cell).collect::<Vec<_>>().join(","));
        s.push('\n');
        for r in rows {
            let r = r.as_array().map(|r| r.iter().map(cell).collect::<Vec<_>>()).unwrap_or_default();
            s.push_str(&r.join(","));
            s.push('\n');
        }
        return s;
    }
    let mut out = Vec::new();
    leaves("", v, &mut out);
    s.push_str("path,value\n");
    for (p, x) in out {
        s.push_str(&format!("{},{x}\n", cell(&Value::String(p))));
    }
    s
}
