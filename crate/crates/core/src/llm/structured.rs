//! JSON extraction from model replies and field-level validation.

use std::fmt;
use std::sync::Arc;

use serde_json::{Map, Value as Json};

/// Finds the first balanced `{...}` block in `text` that parses as a JSON
/// object. Markdown fences and surrounding prose are ignored.
pub fn extract_json_object(text: &str) -> Option<Map<String, Json>> {
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(off) = text[start..].find('{') {
        let open = start + off;
        if let Some(close) = balanced_end(bytes, open) {
            if let Ok(Json::Object(map)) = serde_json::from_str(&text[open..=close]) {
                return Some(map);
            }
        }
        start = open + 1;
    }
    None
}

fn balanced_end(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_str {
            match (escaped, b) {
                (true, _) => escaped = false,
                (false, b'\\') => escaped = true,
                (false, b'"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_str = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Reads an integer from a JSON number or a numeric string such as `"95"`,
/// `"95%"` or `"3 (Path Searching)"`.
pub fn coerce_int(v: &Json) -> Option<i64> {
    match v {
        Json::Number(n) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64)),
        Json::String(s) => {
            let t = s.trim();
            let digits: String = t
                .char_indices()
                .take_while(|(i, c)| c.is_ascii_digit() || (*i == 0 && *c == '-'))
                .map(|(_, c)| c)
                .collect();
            let rest = t[digits.len()..].trim_start();
            if digits.is_empty() || digits == "-" {
                return None;
            }
            let ok_rest = rest.is_empty()
                || rest.starts_with('%')
                || rest.starts_with('(')
                || rest.starts_with(':')
                || rest.starts_with('.');
            if ok_rest {
                digits.parse().ok()
            } else {
                None
            }
        }
        _ => None,
    }
}

/// A number from JSON or from a numeric string.
pub fn coerce_f64(v: &Json) -> Option<f64> {
    match v {
        Json::Number(n) => n.as_f64(),
        Json::String(s) => s.trim().trim_end_matches('%').trim().parse().ok(),
        _ => None,
    }
}

/// Strings from a JSON array; non-string scalars are stringified.
pub fn string_list(v: &Json) -> Option<Vec<String>> {
    let Json::Array(items) = v else {
        return None;
    };
    items
        .iter()
        .map(|i| match i {
            Json::String(s) => Some(s.clone()),
            Json::Number(n) => Some(n.to_string()),
            Json::Bool(b) => Some(b.to_string()),
            _ => None,
        })
        .collect()
}

pub type Validator = Arc<dyn Fn(&Map<String, Json>) -> Result<(), String> + Send + Sync>;

#[derive(Clone)]
pub enum FieldKind {
    /// Any string, possibly empty.
    Text,
    NonEmptyText,
    /// Integer (or numeric string) within an inclusive range.
    Integer {
        min: i64,
        max: i64,
    },
    /// 0 to 100, as a number or a string like `"85%"`.
    Percentage,
    TextList,
    /// Array of objects.
    ObjectList,
    Object,
    Bool,
    Any,
}

impl fmt::Debug for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl FieldKind {
    fn describe(&self) -> String {
        match self {
            FieldKind::Text => "a string".into(),
            FieldKind::NonEmptyText => "a non-empty string".into(),
            FieldKind::Integer { min, max } => format!("an integer in {min}..={max}"),
            FieldKind::Percentage => "a percentage (0-100)".into(),
            FieldKind::TextList => "a list of strings".into(),
            FieldKind::ObjectList => "a list of objects".into(),
            FieldKind::Object => "an object".into(),
            FieldKind::Bool => "a boolean".into(),
            FieldKind::Any => "any value".into(),
        }
    }

    fn accepts(&self, v: &Json) -> bool {
        match self {
            FieldKind::Text => v.is_string(),
            FieldKind::NonEmptyText => v.as_str().is_some_and(|s| !s.trim().is_empty()),
            FieldKind::Integer { min, max } => coerce_int(v).is_some_and(|i| (*min..=*max).contains(&i)),
            FieldKind::Percentage => coerce_f64(v).is_some_and(|p| (0.0..=100.0).contains(&p)),
            FieldKind::TextList => string_list(v).is_some(),
            FieldKind::ObjectList => v.as_array().is_some_and(|a| a.iter().all(Json::is_object)),
            FieldKind::Object => v.is_object(),
            FieldKind::Bool => v.is_boolean() || matches!(v.as_str(), Some("true" | "false" | "yes" | "no")),
            FieldKind::Any => true,
        }
    }
}

#[derive(Debug, Clone)]
struct Field {
    name: String,
    kind: FieldKind,
    required: bool,
}

/// Declared shape of a structured reply.
#[derive(Clone, Default)]
pub struct FieldSpec {
    fields: Vec<Field>,
    validators: Vec<Validator>,
}

impl fmt::Debug for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSpec")
            .field("fields", &self.fields)
            .field("validators", &self.validators.len())
            .finish()
    }
}

impl FieldSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn required(mut self, name: &str, kind: FieldKind) -> Self {
        self.fields.push(Field {
            name: name.into(),
            kind,
            required: true,
        });
        self
    }

    pub fn optional(mut self, name: &str, kind: FieldKind) -> Self {
        self.fields.push(Field {
            name: name.into(),
            kind,
            required: false,
        });
        self
    }

    pub fn check(mut self, f: impl Fn(&Map<String, Json>) -> Result<(), String> + Send + Sync + 'static) -> Self {
        self.validators.push(Arc::new(f));
        self
    }

    pub fn validate(&self, obj: &Map<String, Json>) -> Result<(), String> {
        for f in &self.fields {
            match obj.get(&f.name) {
                None | Some(Json::Null) if f.required => return Err(format!("missing required field '{}'", f.name)),
                None | Some(Json::Null) => {}
                Some(v) if !f.kind.accepts(v) => {
                    return Err(format!("field '{}' must be {}", f.name, f.kind.describe()))
                }
                Some(_) => {}
            }
        }
        for v in &self.validators {
            v(obj)?;
        }
        Ok(())
    }
}
