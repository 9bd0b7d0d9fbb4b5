pub mod distill;
pub mod evaluate;
pub mod explain;
pub mod pretrain;
