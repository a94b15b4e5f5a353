//! Dataset ingestion and preprocessing: FER-2013 CSV, FERPlus vote CSV, the
//! KDEF image directory and pose-index files, plus the normalized binary
//! sample cache. Images are resized to 64x64 and min-max normalized per
//! image, landing in [0, 1].

pub mod cache;
pub mod fer2013;
pub mod ferplus;
pub mod kdef;
pub mod pose;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IMAGE_SIDE: usize = 64;

/// Head pose tag carried by multi-view datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pose {
    Deg(i16),
    Unknown,
}

impl Pose {
    pub fn label(&self) -> String {
        match self {
            Pose::Deg(d) => format!("{d:+}°"),
            Pose::Unknown => "unknown".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One preprocessed image: channel-major 64x64 planes in [0, 1].
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub channels: usize,
    pub image: Vec<f32>,
    pub label: usize,
    pub pose: Pose,
    pub split: Split,
}

impl Sample {
    pub fn pixel_count(&self) -> usize {
        self.channels * IMAGE_SIDE * IMAGE_SIDE
    }
}

/// Frozen, documented class orderings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSchema {
    pub name: String,
    pub classes: Vec<String>,
}

impl LabelSchema {
    pub fn new(name: &str, classes: &[&str]) -> Self {
        LabelSchema { name: name.into(), classes: classes.iter().map(|&c| c.into()).collect() }
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_name(&self, idx: usize) -> &str {
        self.classes.get(idx).map(String::as_str).unwrap_or("?")
    }
}

/// Seven-class ordering used by FER-2013 and KDEF. The index mapping is the
/// one whose per-class totals reproduce the published FER-2013 distribution
/// (4953 angry / 547 disgust / 5121 fear / 8989 happy / 6077 sad /
/// 4002 surprise / 6198 neutral).
pub fn fer2013_schema() -> LabelSchema {
    LabelSchema::new("fer2013", &["angry", "disgust", "fear", "happy", "sad", "surprise", "neutral"])
}

/// Eight-class FERPlus ordering, matching the vote-file column order.
pub fn ferplus_schema() -> LabelSchema {
    LabelSchema::new("ferplus", &["neutral", "happy", "surprise", "sad", "angry", "disgust", "fear", "contempt"])
}

/// Fallback schema with positional class names, for caches of other widths.
pub fn generic_schema(num_classes: usize) -> LabelSchema {
    LabelSchema {
        name: format!("generic-{num_classes}"),
        classes: (0..num_classes).map(|i| format!("class{i}")).collect(),
    }
}

/// Resizes per-channel planes of arbitrary extent to 64x64 and min-max
/// normalizes across the whole image, producing the stored f32 pixels.
pub fn finalize_image(planes: &[Vec<f64>], width: usize, height: usize) -> Vec<f32> {
    let mut all: Vec<f64> = Vec::with_capacity(planes.len() * IMAGE_SIDE * IMAGE_SIDE);
    for plane in planes {
        all.extend(crate::imgproc::resize_bilinear(plane, width, height, IMAGE_SIDE, IMAGE_SIDE));
    }
    crate::imgproc::minmax_normalize(&mut all);
    all.iter().map(|&v| v as f32).collect()
}

/// Stacks samples into an NCHW f64 batch tensor.
pub fn batch_tensor(samples: &[&Sample]) -> Result<Tensor> {
    if samples.is_empty() {
        return Err(Error::data("cannot build a batch from zero samples"));
    }
    let channels = samples[0].channels;
    let plane = IMAGE_SIDE * IMAGE_SIDE;
    let mut data = Vec::with_capacity(samples.len() * channels * plane);
    for s in samples {
        if s.channels != channels {
            return Err(Error::data(format!(
                "mixed channel counts in batch: {} vs {} (sample {})",
                channels, s.channels, s.id
            )));
        }
        data.extend(s.image.iter().map(|&v| v as f64));
    }
    Tensor::new(&[samples.len(), channels, IMAGE_SIDE, IMAGE_SIDE], data)
}

/// One-hot label matrix `(N, num_classes)` for a batch.
pub fn labels_one_hot(samples: &[&Sample], num_classes: usize) -> Result<Tensor> {
    let mut data = vec![0.0; samples.len() * num_classes];
    for (i, s) in samples.iter().enumerate() {
        if s.label >= num_classes {
            return Err(Error::data(format!(
                "sample {} has label {} outside the {}-class schema",
                s.id, s.label, num_classes
            )));
        }
        data[i * num_classes + s.label] = 1.0;
    }
    Tensor::new(&[samples.len(), num_classes], data)
}
