//! A dependency-light CNN engine implementing the LANMSFF facial-expression
//! architecture end to end: dense tensors with reverse-mode autodiff,
//! hand-written convolution layers, the MassAtt and PWFS blocks, the model
//! assembly with its parameter audit and weight format, the training recipe
//! (Adam, patience-based decay, augmentation, k-fold splits), dataset
//! ingestion for FER-2013 / FERPlus / KDEF, and the evaluation stack
//! (accuracy, confusion matrices, information density, pose variance,
//! Grad-CAM heatmaps).

pub mod error;
pub(crate) mod hash;
pub mod blocks;
pub mod data;
pub mod eval;
pub mod imgproc;
pub mod model;
pub mod training;
pub mod layers;
pub mod tensor;

pub mod cli;
