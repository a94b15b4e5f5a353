//! KDEF directory ingestion. Filenames encode everything:
//! session letter (A/B), gender (F/M), two-digit actor, two-letter emotion
//! code {AF,AN,DI,HA,NE,SA,SU} and an angle code {FL,HL,S,HR,FR} mapping to
//! poses {-90,-45,0,+45,+90}. Unrecognized names are skipped and reported,
//! not fatal.

use std::path::{Path, PathBuf};

use super::{finalize_image, Pose, Sample, Split};
use crate::error::{Error, Result};

/// Parse outcome: accepted samples plus `(path, reason)` for skipped files.
pub struct KdefParse {
    pub samples: Vec<Sample>,
    pub skipped: Vec<(String, String)>,
}

/// Emotion code -> index in the seven-class schema
/// (angry, disgust, fear, happy, sad, surprise, neutral).
fn emotion_index(code: &str) -> Option<usize> {
    match code {
        "AN" => Some(0),
        "DI" => Some(1),
        "AF" => Some(2),
        "HA" => Some(3),
        "SA" => Some(4),
        "SU" => Some(5),
        "NE" => Some(6),
        _ => None,
    }
}

fn pose_from_angle(code: &str) -> Option<Pose> {
    match code {
        "FL" => Some(Pose::Deg(-90)),
        "HL" => Some(Pose::Deg(-45)),
        "S" => Some(Pose::Deg(0)),
        "HR" => Some(Pose::Deg(45)),
        "FR" => Some(Pose::Deg(90)),
        _ => None,
    }
}

/// Decodes one KDEF file stem such as `AF01ANFL` into (label, pose).
pub fn decode_name(stem: &str) -> std::result::Result<(usize, Pose), String> {
    let up = stem.to_ascii_uppercase();
    if up.len() < 7 {
        return Err(format!("name `{stem}` too short for the KDEF convention"));
    }
    let bytes = up.as_bytes();
    if !(bytes[0] == b'A' || bytes[0] == b'B') {
        return Err(format!("unknown session letter `{}`", &up[0..1]));
    }
    if !(bytes[1] == b'F' || bytes[1] == b'M') {
        return Err(format!("unknown gender letter `{}`", &up[1..2]));
    }
    if !up[2..4].chars().all(|c| c.is_ascii_digit()) {
        return Err(format!("actor field `{}` is not two digits", &up[2..4]));
    }
    let label = emotion_index(&up[4..6]).ok_or_else(|| format!("unknown emotion code `{}`", &up[4..6]))?;
    let pose = pose_from_angle(&up[6..]).ok_or_else(|| format!("unknown angle code `{}`", &up[6..]))?;
    Ok((label, pose))
}

fn collect_images(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_images(&path, out)?;
        } else if matches!(
            path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
            Some("jpg" | "jpeg" | "png")
        ) {
            out.push(path);
        }
    }
    Ok(())
}

/// Loads every decodable image under `dir`. With `grayscale` the RGB data is
/// converted to luminance (one channel); otherwise three channels are kept.
pub fn parse_kdef(dir: &Path, grayscale: bool) -> Result<KdefParse> {
    if !dir.is_dir() {
        return Err(Error::data(format!("KDEF directory `{}` does not exist", dir.display())));
    }
    let mut paths = Vec::new();
    collect_images(dir, &mut paths)?;
    paths.sort();

    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for path in paths {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        let (label, pose) = match decode_name(stem) {
            Ok(v) => v,
            Err(reason) => {
                skipped.push((path.display().to_string(), reason));
                continue;
            }
        };
        let img = match image::open(&path) {
            Ok(i) => i.to_rgb8(),
            Err(e) => {
                skipped.push((path.display().to_string(), format!("decode failure: {e}")));
                continue;
            }
        };
        let (w, h) = (img.width() as usize, img.height() as usize);
        let planes: Vec<Vec<f64>> = if grayscale {
            // Rec.601 luminance
            let mut plane = vec![0.0f64; w * h];
            for (i, px) in img.pixels().enumerate() {
                plane[i] = 0.299 * px.0[0] as f64 + 0.587 * px.0[1] as f64 + 0.114 * px.0[2] as f64;
            }
            vec![plane]
        } else {
            let mut planes = vec![vec![0.0f64; w * h]; 3];
            for (i, px) in img.pixels().enumerate() {
                for (ch, plane) in planes.iter_mut().enumerate() {
                    plane[i] = px.0[ch] as f64;
                }
            }
            planes
        };
        samples.push(Sample {
            id: stem.to_ascii_uppercase(),
            channels: planes.len(),
            image: finalize_image(&planes, w, h),
            label,
            pose,
            split: Split::Train,
        });
    }
    Ok(KdefParse { samples, skipped })
}
