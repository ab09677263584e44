//! Losses, optimizer, learning-rate schedule, the training loop and the
//! experiments built on it.

mod experiments;
mod loss;
mod optimizer;
mod schedule;
mod trainer;

pub use experiments::{
    dedup_grid, grid_search_lambdas, run_ablation, AblationReport, AblationRow, GridRow,
    GridSearchResult,
};
pub use loss::{
    bce_loss, bce_loss_grad, classification_loss, classification_loss_grad, combined_loss,
    qa_loss, qa_loss_grad, LossWeights,
};
pub use optimizer::{adamw_step, AdamWConfig, TrainState};
pub use schedule::{lr_schedule, warmup_steps};
pub use trainer::{
    evaluate_records, example_loss, loss_and_gradient, predict, predict_pair, predict_records,
    prepare_example, prepare_examples, train, train_with, EarlyStopping, EpochLog, Example,
    LossParts, SpanPrediction, StopDecision, TrainConfig, TrainHooks, TrainOutcome,
};
