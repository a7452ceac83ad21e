//! Writes the bundled example documents and a synthetic benchmark corpus as JSON.
//!
//!     cargo run -p povshift --example synth_corpus -- OUT_DIR [NUM_DOCS] [SEED]

use std::fs;
use std::path::PathBuf;

use povshift::synth::{generate_corpus, nick_document, running_example, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().ok_or("usage: synth_corpus OUT_DIR [NUM_DOCS] [SEED]")?);
    let num_docs = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);
    fs::create_dir_all(&out)?;
    fs::write(out.join("nick.json"), nick_document()?.to_json() + "\n")?;
    fs::write(out.join("running_example.json"), running_example()?.to_json() + "\n")?;
    let corpus_dir = out.join("synthetic");
    fs::create_dir_all(&corpus_dir)?;
    for doc in generate_corpus(&SynthConfig { num_docs, seed, ..Default::default() })? {
        fs::write(corpus_dir.join(format!("{}.json", doc.doc.doc_id)), doc.to_json() + "\n")?;
    }
    Ok(())
}
