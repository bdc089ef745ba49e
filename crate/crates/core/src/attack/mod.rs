//! Re-identification attack and utility/privacy evaluation.

mod eval;
mod obfuscator;
mod reid;

pub use eval::{evaluate_utility_privacy, UtilityPrivacyTable, UtilityRow};
pub use obfuscator::{IdentityObfuscator, Obfuscator, ZeroObfuscator};
pub use reid::{mean_and_sample_std, run_reid_attack, AttackConfig, AttackReport, AttackRun};
