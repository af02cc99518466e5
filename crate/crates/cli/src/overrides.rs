//! `--override a.b.0=value` patches for JSON documents.

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;

/// Apply one `path=value` assignment. Path segments are object keys or
/// array indices; a missing key is created, an index may be at most the
/// array length (which appends). The value is parsed as JSON and falls
/// back to a string.
pub fn apply(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{assignment}` is not of the form key=value"))?;
    if path.is_empty() {
        bail!("override `{assignment}` has an empty key");
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let segments: Vec<&str> = path.split('.').collect();
    let mut node = doc;
    for (depth, seg) in segments.iter().enumerate() {
        let last = depth + 1 == segments.len();
        node = match node {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), value);
                    return Ok(());
                }
                map.entry(seg.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let i: usize = seg
                    .parse()
                    .with_context(|| format!("override `{path}`: `{seg}` is not an array index"))?;
                if i > items.len() {
                    bail!("override `{path}`: index {i} is past the end of an array of {}", items.len());
                }
                if i == items.len() {
                    items.push(Value::Null);
                }
                if last {
                    items[i] = value;
                    return Ok(());
                }
                &mut items[i]
            }
            _ => bail!("override `{path}`: `{seg}` indexes into a scalar"),
        };
    }
    unreachable!("the last segment returns")
}

pub fn apply_all(doc: &mut Value, assignments: &[String]) -> Result<()> {
    assignments.iter().try_for_each(|a| apply(doc, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn patches_nested_paths() {
        let mut doc = json!({"men": {"scores": [3, 1]}, "n_men": 10});
        apply(&mut doc, "men.scores.0=5.5").unwrap();
        apply(&mut doc, "n_men=20").unwrap();
        apply(&mut doc, "name=hello").unwrap();
        apply(&mut doc, "men.scores.2=7").unwrap();
        apply(&mut doc, "extra.flag=true").unwrap();
        assert_eq!(
            doc,
            json!({"men": {"scores": [5.5, 1, 7]}, "n_men": 20, "name": "hello", "extra": {"flag": true}})
        );
    }

    #[test]
    fn rejects_bad_paths() {
        let mut doc = json!({"a": [1], "b": 2});
        assert!(apply(&mut doc, "a.5=1").is_err());
        assert!(apply(&mut doc, "a.x=1").is_err());
        assert!(apply(&mut doc, "b.c=1").is_err());
        assert!(apply(&mut doc, "novalue").is_err());
        assert!(apply(&mut doc, "=3").is_err());
    }
}
