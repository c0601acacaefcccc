//! Named numeric inputs and outputs, read from and written as JSON objects.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::codegen::Lir;

/// Argument name -> values (one element for scalars).
pub type Inputs = BTreeMap<String, Vec<f64>>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InputError {
    #[error("input file not found: {0}")]
    NotFound(String),
    #[error("cannot read input file {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed inputs: {0}")]
    Malformed(String),
    #[error("missing input for argument `{0}`")]
    Missing(String),
    #[error("input `{0}` does not match any argument")]
    Unexpected(String),
    #[error("input `{name}` has {found} values, argument expects {expected}")]
    Length {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("input `{name}` must be {expected}")]
    Kind {
        name: String,
        expected: &'static str,
    },
}

/// Parses `{"name": number | [numbers], ...}`.
pub fn parse_inputs(text: &str) -> Result<Inputs, InputError> {
    let v: Value = serde_json::from_str(text).map_err(|e| InputError::Malformed(e.to_string()))?;
    let Value::Object(map) = v else {
        return Err(InputError::Malformed("expected a JSON object".into()));
    };
    let mut out = Inputs::new();
    for (name, v) in map {
        let values = match &v {
            Value::Number(n) => vec![number(&name, n)?],
            Value::Array(items) => items
                .iter()
                .map(|x| match x {
                    Value::Number(n) => number(&name, n),
                    _ => Err(InputError::Kind {
                        name: name.clone(),
                        expected: "a number or a flat array of numbers",
                    }),
                })
                .collect::<Result<_, _>>()?,
            _ => {
                return Err(InputError::Kind {
                    name,
                    expected: "a number or a flat array of numbers",
                })
            }
        };
        out.insert(name, values);
    }
    Ok(out)
}

fn number(name: &str, n: &Number) -> Result<f64, InputError> {
    n.as_f64().ok_or_else(|| InputError::Kind {
        name: name.to_string(),
        expected: "a finite number",
    })
}

pub fn read_inputs(path: &Path) -> Result<Inputs, InputError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            InputError::NotFound(path.display().to_string())
        } else {
            InputError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            }
        }
    })?;
    parse_inputs(&text)
}

/// Orders inputs by the function's arguments, checking names and lengths.
pub fn bind_inputs(lir: &Lir, inputs: &Inputs) -> Result<Vec<Vec<f64>>, InputError> {
    for name in inputs.keys() {
        if !lir.args.iter().any(|&a| &lir.vars[a].name == name) {
            return Err(InputError::Unexpected(name.clone()));
        }
    }
    lir.args
        .iter()
        .map(|&a| {
            let v = &lir.vars[a];
            let data = inputs
                .get(&v.name)
                .ok_or_else(|| InputError::Missing(v.name.clone()))?;
            if data.len() != v.size {
                return Err(InputError::Length {
                    name: v.name.clone(),
                    expected: v.size,
                    found: data.len(),
                });
            }
            Ok(data.clone())
        })
        .collect()
}

/// `{"<name>": [values...]}`; non-finite values become `null`.
pub fn render_outputs(name: &str, values: &[f64]) -> String {
    let arr = values
        .iter()
        .map(|&x| {
            Number::from_f64(x)
                .map(Value::Number)
                .unwrap_or(Value::Null)
        })
        .collect();
    let mut map = Map::new();
    map.insert(name.to_string(), Value::Array(arr));
    let mut s = serde_json::to_string(&Value::Object(map)).unwrap();
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalars_and_arrays() {
        let i = parse_inputs(r#"{"E": 0.5, "x": [1, 2.5, -3e-2]}"#).unwrap();
        assert_eq!(i["E"], [0.5]);
        assert_eq!(i["x"], [1.0, 2.5, -0.03]);
    }

    #[test]
    fn malformed() {
        assert!(matches!(
            parse_inputs("[1, 2]"),
            Err(InputError::Malformed(_))
        ));
        assert!(matches!(
            parse_inputs("{\"a\": \"x\"}"),
            Err(InputError::Kind { .. })
        ));
        assert!(matches!(
            parse_inputs("{\"a\": [[1]]}"),
            Err(InputError::Kind { .. })
        ));
        assert!(matches!(parse_inputs("{"), Err(InputError::Malformed(_))));
    }

    #[test]
    fn missing_file() {
        let err = read_inputs(Path::new("/nonexistent/pt.json")).unwrap_err();
        assert!(err.to_string().starts_with("input file not found"));
    }

    #[test]
    fn outputs_round_trip() {
        let s = render_outputs("M", &[0.1, 1.0 / 3.0]);
        let back = parse_inputs(&s).unwrap();
        assert_eq!(back["M"], [0.1, 1.0 / 3.0]);
    }
}
