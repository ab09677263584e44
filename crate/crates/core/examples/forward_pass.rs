//! Run an untrained model on one pair and inspect both heads.

use clinqa::model::{class_head, decode_span, forward_encoder, init_params, span_head, EncoderConfig};
use clinqa::tokenizer::{build_vocab, encode_pair};

fn main() -> clinqa::Result<()> {
    let question = "Which lab was elevated?";
    let context = "Creatinine was elevated at 2.1 on admission and improved with fluids.";
    let vocab = build_vocab([question, context], 200, 1)?;

    let config = EncoderConfig::desk(vocab.len());
    let params = init_params(&config, 0)?;
    println!(
        "desk model: hidden {}, {} shared + {} per-task layers, {} parameters",
        config.hidden_dim,
        config.num_shared_layers,
        config.num_task_layers,
        params.num_parameters()
    );

    let pair = encode_pair(question, context, &vocab, config.max_seq_len)?;
    let out = forward_encoder(&params, &pair)?;
    println!(
        "shared states {:?}, qa branch {:?}, class branch {:?}",
        out.shared.dim(),
        out.qa.dim(),
        out.cls.dim()
    );

    let span = span_head(&params, &out);
    let (s, e) = decode_span(&span, 30)?;
    println!("best span tokens {s}..={e}: {:?}", pair.window_text(context, s, e).unwrap_or_default());

    let class = class_head(&params, &out);
    println!("category scores (untrained):");
    for (cat, p) in clinqa::corpus::CategoryLabel::ALL.iter().zip(class.softmax()) {
        println!("  {:<12} {p:.3}", cat.as_str());
    }
    println!("argmax: {}", class.argmax());
    Ok(())
}
