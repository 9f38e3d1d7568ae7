//! Feature store files: JSON Lines (with the exporter's `# dim=` header) and
//! the compact binary form.
//!
//! cargo run --example store_io

use std::fs;

use ilc::corpus::Split;
use ilc::features::{read_store, write_store, RepresentationRecord};
use ilc::{Domain, Label};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let exported = dir.path().join("bert_news_on_email.jsonl");
    fs::write(
        &exported,
        "# dim=3\n\
         {\"doc_id\":\"e1\",\"target_domain\":\"Email\",\"encoder_id\":\"bert:News:0\",\"label\":1,\"split\":\"train\",\"vec\":[0.5,-1.25,3.0]}\n\
         {\"doc_id\":\"e2\",\"target_domain\":\"Email\",\"encoder_id\":\"bert:News:0\",\"label\":0,\"split\":\"test\",\"vec\":[0.1,0.2,0.3]}\n",
    )?;
    let store = read_store(&exported)?;
    println!("read {} records, dim {:?}", store.len(), store.dim_of("bert:News:0"));

    let mut records = store.into_records();
    records.push(RepresentationRecord {
        doc_id: "e1".into(),
        target_domain: Domain::Email,
        encoder_id: "lstm:Email:0".into(),
        label: Label::Deceptive,
        split: Split::Train,
        vec: vec![1.0; 128],
    });
    for name in ["mixed.jsonl", "mixed.ilcf"] {
        let path = dir.path().join(name);
        write_store(&path, &records)?;
        let back = read_store(&path)?;
        assert_eq!(back.records(), &records[..]);
        println!(
            "{name}: {} bytes, encoders {:?}",
            fs::metadata(&path)?.len(),
            back.encoder_ids().collect::<Vec<_>>()
        );
    }
    Ok(())
}
