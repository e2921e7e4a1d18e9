//! Prompt templates shipped as text assets. Each asset is pinned by its
//! SHA-256 so an accidental edit to prompt wording fails the test suite.

use std::collections::BTreeMap;

use super::sha256_hex;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("unknown template '{0}'")]
    UnknownTemplate(String),
    #[error("missing slot '{0}'")]
    MissingSlot(String),
    #[error("unknown slot '{0}'")]
    UnknownSlot(String),
    #[error("template '{id}' does not match its pinned hash")]
    HashMismatch { id: String },
}

#[derive(Debug, Clone, Copy)]
pub struct Template {
    pub id: &'static str,
    pub text: &'static str,
    pub sha256: &'static str,
}

macro_rules! asset {
    ($id:literal, $hash:literal) => {
        Template {
            id: $id,
            text: include_str!(concat!("../../templates/", $id, ".txt")),
            sha256: $hash,
        }
    };
}

pub const TEMPLATES: &[Template] = &[
    asset!(
        "intent",
        "6b1de70e6820c3e06b727ad00be4eae5802bc5d0aa519fa656766cd1d9f6be62"
    ),
    asset!(
        "extraction",
        "115bb5d65a00ea3b14ece126aeee32a1b324c301a264b4d98e931dff6896a65e"
    ),
    asset!(
        "planning",
        "8eb0fbf7ffeda694d889d11dbcc14b13d9c12d0bbfa4ac2ab152c16fe06a54d1"
    ),
    asset!(
        "kg_interaction",
        "58455a05f3440b8966f12fabc452b37002c81dded81ebc7e9b7c68360f74b336"
    ),
    asset!(
        "reasoning",
        "81b78c8e91e2c51e86ced7352f0aa6545d4605143598bd4d75bc64112ebd4a02"
    ),
    asset!(
        "response",
        "9e5726f9e7f179d46a3c32711bfd251c20bc7fb4b9ba6785ee17b837da02d04a"
    ),
    asset!(
        "integration",
        "a5d7d1ad32590b1acaa2714738ca0143b7a264f72ca2f55aba5a0ba045dec8ab"
    ),
    asset!(
        "querygen_1",
        "b8ca4afffd43ad08ead1be92d6514e8bbcc25011add85e99c6c0fa1a0a52f4b5"
    ),
    asset!(
        "querygen_2",
        "1334aa8d319f999192f97a4a739dc5fa3b0109c8e605e483230bfccc2b7bff90"
    ),
    asset!(
        "querygen_3",
        "9479e517e5fc3c45e21dc1fd68acebed0c8320a15a864669de1ec9f6e46b0c27"
    ),
    asset!(
        "querygen_4",
        "915c9e6c986845465d647c6a999105f3fcdd52f4acb573d8ac57016afbd0eb44"
    ),
    asset!(
        "querygen_5",
        "41d39580b4901486b15027e34d55ffcf679ead6bcf783b05431b0e5da8a3c0e4"
    ),
    asset!(
        "querygen_6",
        "db0cc7ffa105549d0372d2c1183ca15f59535001d5d72d95f02f91429d76914d"
    ),
    asset!(
        "querygen_7",
        "2dc03d40f59490fe2601d7c199f01d368ab546429c8fb5d23d246acf16bf820b"
    ),
    asset!(
        "relation_definition",
        "5b4df118bad203b17c1f6bed664061b729f41f116b1e99d8fd4646a82c958c8c"
    ),
    asset!(
        "triple_extraction",
        "fa4311b4c3c6e4fecf26fec9887b6d448a6b60de3b6de690f970ec5f84d5fc6b"
    ),
    asset!(
        "fusion_confirm",
        "5cc084b58a99cab329dceee76cda67a30a79d41084099e9870df4097c07ba564"
    ),
];

pub fn template(id: &str) -> Result<&'static Template, TemplateError> {
    TEMPLATES
        .iter()
        .find(|t| t.id == id)
        .ok_or_else(|| TemplateError::UnknownTemplate(id.to_string()))
}

/// Slot occurrences `{name}` with `name` in `[a-z_]+`, as byte ranges.
fn slot_spans(text: &str) -> Vec<(usize, usize, &str)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_') {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b'}' {
                out.push((i, j + 1, &text[i + 1..j]));
                i = j + 1;
                continue;
            }
        }
        i += 1;
    }
    out
}

impl Template {
    /// Declared slot names in first-occurrence order.
    pub fn slots(&self) -> Vec<&'static str> {
        let mut out: Vec<&'static str> = Vec::new();
        for (_, _, name) in slot_spans(self.text) {
            if !out.contains(&name) {
                out.push(name);
            }
        }
        out
    }

    pub fn verify(&self) -> Result<(), TemplateError> {
        if sha256_hex(self.text) == self.sha256 {
            Ok(())
        } else {
            Err(TemplateError::HashMismatch {
                id: self.id.to_string(),
            })
        }
    }

    /// Substitutes every slot in one pass; slot values are never rescanned.
    pub fn render(&self, slots: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        let declared = self.slots();
        if let Some(extra) = slots.keys().find(|k| !declared.contains(k)) {
            return Err(TemplateError::UnknownSlot(extra.to_string()));
        }
        if let Some(missing) = declared.iter().find(|d| !slots.contains_key(*d)) {
            return Err(TemplateError::MissingSlot(missing.to_string()));
        }
        let mut out = String::with_capacity(self.text.len());
        let mut last = 0;
        for (start, end, name) in slot_spans(self.text) {
            out.push_str(&self.text[last..start]);
            out.push_str(&slots[name]);
            last = end;
        }
        out.push_str(&self.text[last..]);
        Ok(out)
    }
}

pub fn render_template(id: &str, slots: &[(&str, &str)]) -> Result<String, TemplateError> {
    let map: BTreeMap<&str, String> = slots.iter().map(|(k, v)| (*k, v.to_string())).collect();
    template(id)?.render(&map)
}
