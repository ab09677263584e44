//! Label answer spans with medical categories using the bundled gazetteer.
//!
//! `cargo run --example categorize_answers -- "lisinopril 10mg and a chest x-ray"`

use clinqa::categorizer::{assign_category, assign_soft_labels, extract_entities, Gazetteer};

fn main() {
    let g = Gazetteer::fixture();
    let mut texts: Vec<String> = std::env::args().skip(1).collect();
    if texts.is_empty() {
        texts = [
            "Lisinopril 10mg daily",
            "type 2 diabetes mellitus",
            "hemoglobin a1c of 8.2",
            "shortness of breath",
            "laparoscopic cholecystectomy",
            "an unfamiliar finding",
        ]
        .map(String::from)
        .to_vec();
    }

    for text in &texts {
        let hard = assign_category(text, &g);
        let soft = assign_soft_labels(text, &g);
        println!("{text:?}");
        println!("  label: {}{}", hard.label, if hard.gazetteer_miss { " (gazetteer miss)" } else { "" });
        for e in extract_entities(text, &g) {
            let senses: Vec<_> = e.senses.iter().map(|s| s.category.as_str()).collect();
            println!("  entity {:?} [{}..{}] senses {:?}", e.surface, e.char_start, e.char_end, senses);
        }
        let dist: Vec<String> = soft.0.iter().map(|(c, p)| format!("{c}={p:.2}")).collect();
        println!("  soft:  {}", if dist.is_empty() { "-".into() } else { dist.join(" ") });
    }
}
