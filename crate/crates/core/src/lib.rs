#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bridge;
pub mod cli;
pub mod classify;
pub mod dual;
pub mod expr;
pub mod nnls;
pub mod opsim;
pub mod repfit;
pub mod verdict;
