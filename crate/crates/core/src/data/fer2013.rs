//! FER-2013 CSV parser: rows of `emotion,pixels,Usage` with a 48x48 image as
//! 2304 space-separated 8-bit integers. Images are upscaled to 64x64 and
//! min-max normalized; the usage column maps Training / PublicTest /
//! PrivateTest onto train / val / test.

use std::io::BufRead;

use super::{finalize_image, Pose, Sample, Split};
use crate::error::{Error, Result};

const PIXELS: usize = 48 * 48;

/// Parses the full CSV. Every malformed row is a hard error carrying its
/// 1-based line number.
pub fn parse_fer2013<R: BufRead>(reader: R) -> Result<Vec<Sample>> {
    let mut samples = Vec::new();
    let mut plane = vec![0.0f64; PIXELS];
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::data_row(line_no, format!("read failure: {e}")))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if line_no == 1 && trimmed.to_ascii_lowercase().starts_with("emotion") {
            continue; // header
        }
        let mut fields = trimmed.splitn(3, ',');
        let (label_s, pixels_s, usage_s) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err(Error::data_row(line_no, "expected 3 comma-separated fields: label,pixels,usage")),
        };
        let label: usize = label_s
            .trim()
            .parse()
            .map_err(|_| Error::data_row(line_no, format!("malformed label `{label_s}`")))?;
        if label > 6 {
            return Err(Error::data_row(line_no, format!("label {label} outside [0,6]")));
        }
        let mut count = 0usize;
        for tok in pixels_s.split_ascii_whitespace() {
            let v: u32 = tok
                .parse()
                .map_err(|_| Error::data_row(line_no, format!("malformed pixel value `{tok}`")))?;
            if v > 255 {
                return Err(Error::data_row(line_no, format!("pixel value {v} exceeds 255")));
            }
            if count < PIXELS {
                plane[count] = v as f64;
            }
            count += 1;
        }
        if count != PIXELS {
            return Err(Error::data_row(line_no, format!("expected {PIXELS} pixels, got {count}")));
        }
        let split = match usage_s.trim() {
            "Training" => Split::Train,
            "PublicTest" => Split::Val,
            "PrivateTest" => Split::Test,
            other => return Err(Error::data_row(line_no, format!("unknown usage tag `{other}`"))),
        };
        samples.push(Sample {
            id: format!("fer2013-{:06}", samples.len()),
            channels: 1,
            image: finalize_image(std::slice::from_ref(&plane), 48, 48),
            label,
            pose: Pose::Unknown,
            split,
        });
    }
    Ok(samples)
}

/// Per-class totals, indexed by label.
pub fn class_counts(samples: &[Sample], num_classes: usize) -> Vec<usize> {
    let mut counts = vec![0usize; num_classes];
    for s in samples {
        if s.label < num_classes {
            counts[s.label] += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn row(label: usize, value: u8, usage: &str) -> String {
        let px = vec![value.to_string(); PIXELS].join(" ");
        format!("{label},{px},{usage}")
    }

    #[test]
    fn parses_header_and_rows() {
        let csv = format!("emotion,pixels,Usage\n{}\n{}\n", row(3, 128, "Training"), row(0, 10, "PrivateTest"));
        let samples = parse_fer2013(Cursor::new(csv)).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].label, 3);
        assert_eq!(samples[0].split, Split::Train);
        assert_eq!(samples[1].split, Split::Test);
        assert_eq!(samples[0].image.len(), 64 * 64);
    }

    #[test]
    fn wrong_pixel_count_names_the_row() {
        let mut bad = vec!["128".to_string(); PIXELS - 1].join(" ");
        bad = format!("2,{bad},Training");
        let csv = format!("emotion,pixels,Usage\n{}\n{bad}\n", row(1, 5, "Training"));
        let err = parse_fer2013(Cursor::new(csv)).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
        assert!(err.to_string().contains("2303"), "{err}");
    }

    #[test]
    fn label_out_of_range_rejected() {
        let csv = row(7, 1, "Training");
        let err = parse_fer2013(Cursor::new(csv)).unwrap_err();
        assert!(err.to_string().contains("outside"), "{err}");
    }

    #[test]
    fn malformed_pixel_rejected_with_row() {
        let px = vec!["12"; PIXELS - 1].join(" ") + " abc";
        let csv = format!("0,{px},Training");
        let err = parse_fer2013(Cursor::new(csv)).unwrap_err();
        assert!(err.to_string().contains("abc"), "{err}");
    }
}
