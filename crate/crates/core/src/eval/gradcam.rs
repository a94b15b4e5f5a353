//! Grad-CAM: gradient of a target logit with respect to a late feature map,
//! channel weights from globally averaged gradients, a weighted sum through
//! ReLU, bilinear upsampling to 64x64 and min-max normalization.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{batch_tensor, Sample, IMAGE_SIDE};
use crate::error::{Error, Result};
use crate::imgproc;
use crate::layers::Mode;
use crate::model::Model;
use crate::tensor::ops::{mul, sum_all};
use crate::tensor::{Tape, Tensor};

/// Which feature map the explanation reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradCamTap {
    /// Block-4 features before the final pooling (input_size/8 square).
    #[default]
    Block4PrePool,
    /// Block-4 output after pooling (input_size/16 square).
    Block4Output,
}

#[derive(Debug, Clone, Serialize)]
pub struct Heatmap {
    /// 64x64 row-major values in [0, 1].
    pub map: Vec<f64>,
    pub class_index: usize,
    pub sample_id: String,
    /// Set when the gradient field vanished and the map is flat zero.
    pub zero_gradient: bool,
}

/// Computes the heatmap for one sample and class.
pub fn grad_cam(model: &Model, sample: &Sample, target_class: usize, tap: GradCamTap) -> Result<Heatmap> {
    if target_class >= model.config.num_classes {
        return Err(Error::InvalidConfig(format!(
            "target class {target_class} outside the {}-class model",
            model.config.num_classes
        )));
    }
    let x = batch_tensor(&[sample])?;
    let tape = Tape::new();
    let trace = model.forward_traced(&tape, &x, Mode::Eval)?;
    let feature = match tap {
        GradCamTap::Block4PrePool => trace.block4_prepool.clone(),
        GradCamTap::Block4Output => trace.block4_out.clone(),
    };
    // scalar target: the requested logit
    let mut sel = vec![0.0; model.config.num_classes];
    sel[target_class] = 1.0;
    let selector = Tensor::new(&[1, model.config.num_classes], sel)?;
    let picked = mul(&tape, &trace.logits, &selector)?;
    let target = sum_all(&tape, &picked)?;
    model.zero_grad();
    tape.backward(&target)?;

    let (_, c, h, w) = feature.dims4("grad_cam")?;
    let plane = h * w;
    let grad = feature.grad();
    model.zero_grad();
    let grad = match grad {
        Some(g) if g.iter().any(|&v| v != 0.0) => g,
        _ => {
            return Ok(Heatmap {
                map: vec![0.0; IMAGE_SIDE * IMAGE_SIDE],
                class_index: target_class,
                sample_id: sample.id.clone(),
                zero_gradient: true,
            })
        }
    };

    let fd = feature.data();
    let mut cam = vec![0.0f64; plane];
    for ci in 0..c {
        let weight: f64 = grad[ci * plane..(ci + 1) * plane].iter().sum::<f64>() / plane as f64;
        for (acc, &v) in cam.iter_mut().zip(&fd[ci * plane..(ci + 1) * plane]) {
            *acc += weight * v;
        }
    }
    for v in cam.iter_mut() {
        *v = v.max(0.0);
    }
    let mut map = imgproc::resize_bilinear(&cam, w, h, IMAGE_SIDE, IMAGE_SIDE);
    imgproc::minmax_normalize(&mut map);
    Ok(Heatmap { map, class_index: target_class, sample_id: sample.id.clone(), zero_gradient: false })
}

/// Writes the heatmap as an 8-bit grayscale PNG.
pub fn heatmap_to_png(heatmap: &Heatmap, path: &Path) -> Result<()> {
    let side = IMAGE_SIDE as u32;
    let img = image::GrayImage::from_fn(side, side, |x, y| {
        let v = heatmap.map[(y * side + x) as usize];
        image::Luma([(v * 255.0).round().clamp(0.0, 255.0) as u8])
    });
    img.save(path).map_err(|e| Error::data(format!("failed to write heatmap image: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Pose, Split};
    use crate::model::LanmsffConfig;

    fn miniature_model() -> Model {
        Model::build(
            &LanmsffConfig {
                num_classes: 3,
                block_widths: [6, 12, 6, 8],
                dropout_rate: 0.0,
                ..Default::default()
            },
            21,
        )
        .unwrap()
    }

    fn sample() -> Sample {
        let image: Vec<f32> = (0..64 * 64).map(|i| ((i % 64) as f32) / 63.0).collect();
        Sample { id: "g".into(), channels: 1, image, label: 0, pose: Pose::Unknown, split: Split::Test }
    }

    #[test]
    fn heatmap_is_64x64_in_unit_range_for_both_taps() {
        let model = miniature_model();
        for tap in [GradCamTap::Block4PrePool, GradCamTap::Block4Output] {
            let hm = grad_cam(&model, &sample(), 1, tap).unwrap();
            assert_eq!(hm.map.len(), 64 * 64);
            assert!(hm.map.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn invalid_class_rejected() {
        let model = miniature_model();
        assert!(grad_cam(&model, &sample(), 9, GradCamTap::default()).is_err());
    }

    #[test]
    fn uniform_positive_fields_give_a_uniform_map() {
        // uniform channel weights on uniform feature maps produce a constant
        // cam; min-max normalization of a constant plane is all zeros
        let cam = vec![3.0; 8 * 8];
        let mut map = imgproc::resize_bilinear(&cam, 8, 8, 64, 64);
        imgproc::minmax_normalize(&mut map);
        assert!(map.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn upsampling_preserves_the_argmax_cell() {
        // peak at coarse cell (5, 2) of an 8x8 map
        let mut cam = vec![0.1; 64];
        cam[5 * 8 + 2] = 1.0;
        let map = imgproc::resize_bilinear(&cam, 8, 8, 64, 64);
        let (mut bi, mut bv) = (0usize, f64::NEG_INFINITY);
        for (i, &v) in map.iter().enumerate() {
            if v > bv {
                bv = v;
                bi = i;
            }
        }
        let (py, px) = (bi / 64, bi % 64);
        // each coarse cell covers an 8x8 block of the upsampled image
        assert_eq!(py / 8, 5, "peak row {py}");
        assert_eq!(px / 8, 2, "peak col {px}");
    }

    #[test]
    fn gradients_on_parameters_are_cleared_after_gradcam() {
        let model = miniature_model();
        let _ = grad_cam(&model, &sample(), 0, GradCamTap::default()).unwrap();
        assert!(model.params().iter().all(|p| p.value.grad().is_none()));
    }
}
