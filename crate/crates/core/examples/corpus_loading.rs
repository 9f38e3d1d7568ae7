//! Load a LIAR-style CSV, map its six labels to binary, sample and split.
//!
//! cargo run --example corpus_loading

use std::fs;

use ilc::corpus::{docs_in_split, load_corpus, sample_corpus, split_corpus, Format, LabelMap, Split};
use ilc::Domain;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("liar.csv");
    let labels = ["true", "mostly-true", "half-true", "barely-true", "false", "pants-fire"];
    let mut csv = String::from("id,text,label\n");
    for i in 0..600 {
        csv += &format!("s{i},\"Statement number {i}, said on air\",{}\n", labels[i % 6]);
    }
    csv += "s600,   ,true\n";
    fs::write(&path, csv)?;

    let (docs, report) = load_corpus(&path, Format::Csv, &LabelMap::liar(), Domain::News)?;
    println!("loaded {} rows, skipped {:?}", report.loaded, report.skipped);
    let sample = sample_corpus(&docs, 500, 7)?;
    let split = split_corpus(sample, 0.8, 0.2, 7)?;
    for s in [Split::Train, Split::Val, Split::Test] {
        let part = docs_in_split(&split, s);
        let deceptive = part.iter().filter(|d| d.label.index() == 1).count();
        println!("{:<5} {:>4} documents, {deceptive} deceptive", s.as_str(), part.len());
    }
    Ok(())
}
