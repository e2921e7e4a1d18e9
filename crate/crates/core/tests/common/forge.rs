//! Twenty-document legal corpus with a fake extraction model. Each document
//! has a fixed list of (subject, relation, object) lines; a few use
//! off-schema relations, alias spellings or self loops on purpose.

use std::path::PathBuf;
use std::sync::Arc;

use kgpilot_core::embedding::HashEmbedder;
use kgpilot_core::kgforge::{build, BuildOutput, Corpus, ForgeConfig, RelationSchema, UK_LEGISLATION_SCHEMA};
use kgpilot_core::llm::{ChatRequest, FnProvider, Gateway, LlmError, LlmProvider, ScriptedProvider};

pub const REGS: &str = "Biodiesel and Bioblend Regulations 2002";
pub const HODA: &str = "Hydrocarbon Oil Duties Act 1979";

pub fn forge_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/forge")
}

pub fn corpus() -> Corpus {
    Corpus::load_dir(&forge_dir().join("corpus")).unwrap()
}

pub fn schema() -> RelationSchema {
    RelationSchema::from_json_str(UK_LEGISLATION_SCHEMA).unwrap()
}

/// The fake model's triples for each document.
pub fn scripted_triples(doc: &str) -> Vec<(&'static str, &'static str, &'static str)> {
    match doc {
        "doc01" => vec![(REGS, "Defines", "biodiesel duty"), (REGS, "Cites Act", HODA)],
        "doc02" => vec![
            (HODA, "Defines", "duty of excise"),
            (HODA, "Has Provision", "Section 6"),
        ],
        "doc03" => vec![
            ("Oil Act", "Cites Act", "hydrocarbon oil duties act 1979"),
            ("Oil Act", "cites_act", "duty on biodiesel"),
            ("Oil Act", "Regulates", "storage of fuel"),
        ],
        "doc04" => vec![
            ("Finance Act 1994", "Has Provision", "duty on biodiesel"),
            ("Commissioners of Customs and Excise", "Regulates", "duty on biodiesel"),
        ],
        "doc05" => vec![
            ("Energy Act 2004", "Appoints", "Nuclear Decommissioning Authority"),
            (
                "Nuclear Decommissioning Authority",
                "Transfers",
                "liabilities of British Nuclear Fuels",
            ),
        ],
        "doc06" => vec![("Energy Act 2004", "Transfers", "the Nuclear Decommissioning Authority")],
        "doc07" => vec![
            ("Companies Act 2006", "Obliges", "accounting records"),
            ("Companies Act 2006", "Requires", "accounting records"),
            ("company group", "Has Entity", "subsidiary"),
        ],
        "doc08" => vec![
            ("Companies Act 2006", "Defines", "subsidiary"),
            ("Section 1159", "Includes Clause", "membership of a company"),
        ],
        "doc09" => vec![
            (
                "Financial Services and Markets Act 2000",
                "Regulates",
                "investment business",
            ),
            (
                "Financial Services and Markets Act 2000",
                "Obliges",
                "authorised persons",
            ),
        ],
        "doc10" => vec![
            (
                "Financial Services and Markets Act 2000",
                "Appoints",
                "Financial Conduct Authority",
            ),
            ("Financial Conduct Authority", "Regulates", "financial markets"),
        ],
        "doc11" => vec![
            ("Pensions Act 2004", "Excludes", "small schemes"),
            ("Pensions Act 2004", "Appoints", "Pensions Regulator"),
        ],
        "doc12" => vec![
            ("Pensions Regulator", "Regulates", "occupational pension schemes"),
            ("Pensions Act 2004", "Has Provision", "Pension Protection Fund"),
        ],
        "doc13" => vec![
            ("Water Industry Act 1991", "Obliges", "water undertakers"),
            ("Water Industry Act 1991", "Cites Act", "Water Resources Act 1991"),
        ],
        "doc14" => vec![
            ("Water Resources Act 1991", "Regulates", "abstraction licences"),
            ("Environment Agency", "Grants", "abstraction licences"),
        ],
        "doc15" => vec![
            (REGS, "Includes Clause", "records of biodiesel producers"),
            (REGS, "Obliges", "producers of biodiesel"),
        ],
        "doc16" => vec![
            (REGS, "Excludes", "fuel used in laboratories"),
            (REGS, "Defines", "Biodiesel Duty"),
        ],
        "doc17" => vec![
            ("Housing Act 1988", "Defines", "assured tenancy"),
            ("Housing Act 1988", "Has Provision", "rent increases"),
        ],
        "doc18" => vec![
            ("Housing Act 1988", "Transfers", "housing stock"),
            ("Rent Increase", "Includes Clause", "rent increase"),
        ],
        "doc19" => vec![
            ("Railways Act 1993", "Appoints", "Rail Regulator"),
            ("Railways Act 1993", "Obliges", "operators"),
        ],
        "doc20" => vec![
            ("Railways Act 1993", "Regulates", "railway franchising"),
            ("Transport Act 2000", "Cites Act", "Railways Act 1993"),
        ],
        _ => vec![],
    }
}

pub const OFF_SCHEMA: usize = 2;
pub const SELF_LOOPS: usize = 1;

/// Hand-derived merges: alias to canonical (the most frequent spelling).
pub const ALIASES: [(&str, &str); 4] = [
    ("biodiesel duty", "duty on biodiesel"),
    ("Biodiesel Duty", "duty on biodiesel"),
    ("hydrocarbon oil duties act 1979", HODA),
    (
        "the Nuclear Decommissioning Authority",
        "Nuclear Decommissioning Authority",
    ),
];

fn doc_of(prompt: &str) -> Option<&str> {
    prompt.lines().find_map(|l| l.strip_prefix("Document id: "))
}

pub fn fake_reply(req: &ChatRequest) -> Result<String, LlmError> {
    if req.tag != "triple_extraction" {
        return Err(LlmError::ProviderUnavailable(format!("no fake for {}", req.tag)));
    }
    let doc = doc_of(&req.user).ok_or_else(|| LlmError::ProviderUnavailable("no doc id".into()))?;
    let triples: Vec<serde_json::Value> = scripted_triples(doc)
        .into_iter()
        .map(|(s, r, o)| serde_json::json!({"subject": s, "relation": r, "object": o}))
        .collect();
    Ok(serde_json::to_string_pretty(&serde_json::json!({ "triples": triples })).unwrap())
}

pub fn run(provider: Arc<dyn LlmProvider>) -> BuildOutput {
    build(
        &corpus(),
        &schema(),
        &ForgeConfig::default(),
        &Gateway::new(provider),
        &HashEmbedder::default(),
    )
    .unwrap()
}

/// Builds against the fake model and keeps the prompt/reply pairs.
pub fn record_script() -> ScriptedProvider {
    let fake = Arc::new(FnProvider::new("fake-forge", fake_reply));
    let gw = Gateway::new(fake);
    build(
        &corpus(),
        &schema(),
        &ForgeConfig::default(),
        &gw,
        &HashEmbedder::default(),
    )
    .unwrap();
    let mut script = ScriptedProvider::new();
    for r in gw.log().records() {
        script.insert(&r.request.user, r.reply.unwrap());
    }
    script
}

pub fn stored_script() -> Arc<ScriptedProvider> {
    Arc::new(ScriptedProvider::from_file(&forge_dir().join("script.json")).unwrap())
}
