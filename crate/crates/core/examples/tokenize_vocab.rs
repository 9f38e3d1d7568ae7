//! Tokenize text, build a vocabulary from training documents, and encode.
//!
//! cargo run --example tokenize_vocab

use ilc::corpus::{Document, Split};
use ilc::text::{decode, encode, tokenize, Vocabulary};
use ilc::{Domain, Label};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for text in ["Free $$$ Now!", "COVID-19  spread", "Café au lait, s'il vous plaît"] {
        println!("{text:?} -> {:?}", tokenize(text));
    }
    let texts = ["win free money now", "meeting moved to noon", "free money for the meeting"];
    let docs: Vec<Document> = texts
        .iter()
        .enumerate()
        .map(|(i, t)| Document {
            id: format!("t{i}"),
            domain: Domain::Email,
            text: t.to_string(),
            label: if i == 0 { Label::Deceptive } else { Label::NonDeceptive },
            split: Some(Split::Train),
        })
        .collect();
    let vocab = Vocabulary::build(docs.iter(), 2, 20_000)?;
    println!("vocabulary: {:?}", vocab.tokens());
    let enc = encode(&tokenize("free money at the meeting"), &vocab, 8);
    println!("indices {:?} (length {})", enc.indices, enc.length);
    println!("decoded {:?}", decode(&enc, &vocab));
    Ok(())
}
