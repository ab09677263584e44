//! Build a WordPiece vocabulary, pack a question/context pair and align the answer.

use clinqa::tokenizer::{align_answer_span, build_vocab, encode_pair, wordpiece_tokenize};

fn main() -> clinqa::Result<()> {
    let question = "What medication was the patient discharged on?";
    let context = "Patient discharged on lisinopril 10mg daily for hypertension. Follow up in two weeks.";
    let answer = "lisinopril 10mg daily";

    let vocab = build_vocab([question, context], 200, 1)?;
    println!("vocabulary: {} entries", vocab.len());
    println!("'patients' -> {:?}", wordpiece_tokenize("patients", &vocab));

    let pair = encode_pair(question, context, &vocab, 32)?;
    let start = context.find(answer).unwrap();
    let char_span = (start, start + answer.len());
    let (s, e) = align_answer_span(&pair, char_span).expect("answer survives truncation");

    println!("\n{:>3} {:<14} seg mask", "pos", "token");
    for i in 0..pair.len() {
        let tok = vocab.token(pair.input_ids[i]).unwrap_or("?");
        let mark = if (s..=e).contains(&i) { "  <- answer" } else { "" };
        println!("{i:>3} {tok:<14} {:>3} {:>4}{mark}", pair.segment_ids[i], pair.attention_mask[i]);
    }
    println!("\nanswer tokens {s}..={e}: {:?}", pair.window_text(context, s, e).unwrap());
    println!("truncated: {}", pair.truncated);
    Ok(())
}
