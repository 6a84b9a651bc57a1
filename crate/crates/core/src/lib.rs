pub mod error;
pub mod fp_code;
pub mod fp_lemma;
pub mod hard_dist;
pub mod harness;
pub mod matrix;
pub mod mechanisms;
pub mod pap;
pub mod reductions;
pub mod rng;
pub mod stats;
