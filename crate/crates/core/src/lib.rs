//! Behaviour trees whose condition nodes fuse votes from several sensing
//! modalities, plus a simulator for two laboratory manipulation tasks.

pub mod bt;
pub mod dsl;
pub mod fusion;
pub mod harness;
pub mod labsim;
