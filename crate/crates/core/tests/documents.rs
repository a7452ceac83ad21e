use povshift::ingest::{load_conll_document, load_pov_document, write_conll};
use povshift::synth::{nick_document, running_example};
use povshift::validate_document;

fn shipped(name: &str) -> String {
    let path = format!("{}/../../data/examples/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

#[test]
fn shipped_examples_match_generator() {
    assert_eq!(load_pov_document(&shipped("nick.json")).unwrap(), nick_document().unwrap());
    assert_eq!(load_pov_document(&shipped("running_example.json")).unwrap(), running_example().unwrap());
}

#[test]
fn shipped_examples_are_valid() {
    for name in ["nick.json", "running_example.json"] {
        let pov = load_pov_document(&shipped(name)).unwrap();
        assert!(validate_document(&pov.doc).is_empty(), "{name}");
    }
}

#[test]
fn json_round_trip() {
    let pov = nick_document().unwrap();
    let back = load_pov_document(&pov.to_json()).unwrap();
    assert_eq!(back, pov);
    assert_eq!(back.to_json(), pov.to_json());
}

#[test]
fn conll_round_trip_keeps_chains() {
    let doc = nick_document().unwrap().doc;
    let back = load_conll_document(&write_conll(&doc)).unwrap();
    assert_eq!(back.source_text, doc.source_text);
    let spans = |d: &povshift::Document| d.chains.iter().map(|c| c.mentions.iter().map(|m| m.span).collect::<Vec<_>>()).collect::<Vec<_>>();
    assert_eq!(spans(&back), spans(&doc));
}

#[test]
fn schema_file_names_required_fields() {
    let path = format!("{}/../../schema/document.v1.json", env!("CARGO_MANIFEST_DIR"));
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let required: Vec<&str> = schema["required"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    let doc: serde_json::Value = serde_json::from_str(&shipped("nick.json")).unwrap();
    for field in required {
        assert!(doc.get(field).is_some(), "{field}");
    }
}
