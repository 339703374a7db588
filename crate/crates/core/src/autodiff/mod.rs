//! Reverse-mode differentiation over dense matrices, an LSTM layer, Adam and
//! finite-difference checks.

pub mod adam;
pub mod check;
pub mod lstm;
pub mod matrix;
pub mod tape;

pub use adam::{AdamConfig, AdamState};
pub use lstm::{lstm_cell, stacked_forward, LstmLayer, LstmVars};
pub use matrix::Matrix;
pub use tape::{Gradients, Tape, Var, SENTINEL};
