pub mod attributes;
pub mod esm;
pub mod lp;
pub mod mavt;
pub mod mga;
pub mod orchestrator;
