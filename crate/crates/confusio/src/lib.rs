//! Interpretable low-resource legal decision making for trademark-confusion
//! corpora: weak-supervision data augmentation, intermediate-label fusion
//! models, confidence-binned curriculum training, and calibration-aware
//! evaluation — all on a small reverse-mode autodiff engine.

pub mod augment;
pub mod autodiff;
pub mod cli;
pub mod corpus;
pub mod curriculum;
pub mod eval;
pub mod model;
pub mod rules;
pub mod textsim;
