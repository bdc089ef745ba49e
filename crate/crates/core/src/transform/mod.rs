//! Mean latent tables, transfer vectors and the Modify step.

mod modify;
mod random;
mod table;

pub use modify::{
    modify_deterministic, modify_probabilistic, Bijection, FlipTarget, ModifyMode, ModifyOutcome, ModifyPolicy,
};
pub use random::{coin, uniform_below, FailingSource, FixedCoin, RandomSource, SecureSource, SeededSource};
pub use table::{
    apply_transfer, load_table, save_table, transfer_vector, LabeledLatent, MeanCell, MeanLatentTable, TransferVector,
};
