//! FERPlus relabeling: crowd-sourced vote rows aligned one-to-one with the
//! FER-2013 images. The majority vote over the eight emotion columns becomes
//! the label; rows whose overall winner is `unknown` or `not-a-face` are
//! discarded. Ties break toward the lower schema index.

use std::io::BufRead;

use super::{Pose, Sample, Split};
use crate::error::{Error, Result};

/// Default vote-column order of the FERPlus distribution:
/// eight emotions, then `unknown`, then `not-a-face` (NF).
pub const DEFAULT_VOTE_COLUMNS: [&str; 10] =
    ["neutral", "happiness", "surprise", "sadness", "anger", "disgust", "fear", "contempt", "unknown", "NF"];

/// One vote row: usage tag, image name, ten tagger counts in schema order.
#[derive(Debug, Clone)]
pub struct VoteRecord {
    pub usage: String,
    pub image_name: String,
    pub votes: [u32; 10],
}

/// Parses the vote CSV (`usage,Image name,<10 counts>`). A header row, when
/// present, may reorder the count columns; otherwise the documented default
/// order applies.
pub fn parse_votes<R: BufRead>(reader: R) -> Result<Vec<VoteRecord>> {
    let mut records = Vec::new();
    // maps schema slot -> column position among the count fields
    let mut column_map: Vec<usize> = (0..10).collect();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::data_row(line_no, format!("read failure: {e}")))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if line_no == 1 && fields.first().map(|f| f.eq_ignore_ascii_case("usage")).unwrap_or(false) {
            let counts = &fields[2..];
            if counts.len() != 10 {
                return Err(Error::data_row(line_no, format!("expected 10 vote columns, header names {}", counts.len())));
            }
            for (slot, want) in DEFAULT_VOTE_COLUMNS.iter().enumerate() {
                let pos = counts
                    .iter()
                    .position(|c| c.eq_ignore_ascii_case(want))
                    .ok_or_else(|| Error::data_row(line_no, format!("vote column `{want}` missing from header")))?;
                column_map[slot] = pos;
            }
            continue;
        }
        if fields.len() != 12 {
            return Err(Error::data_row(line_no, format!("expected 12 fields (usage, name, 10 counts), got {}", fields.len())));
        }
        let mut votes = [0u32; 10];
        for (slot, &pos) in column_map.iter().enumerate() {
            votes[slot] = fields[2 + pos]
                .parse()
                .map_err(|_| Error::data_row(line_no, format!("malformed vote count `{}`", fields[2 + pos])))?;
        }
        records.push(VoteRecord { usage: fields[0].to_string(), image_name: fields[1].to_string(), votes });
    }
    Ok(records)
}

/// First index attaining the maximum — the documented tie rule.
fn argmax(votes: &[u32; 10]) -> usize {
    let mut best = 0usize;
    for (i, &v) in votes.iter().enumerate().skip(1) {
        if v > votes[best] {
            best = i;
        }
    }
    best
}

/// Relabels the FER-2013 images with majority votes, producing 8-class
/// samples. Vote rows must align one-to-one with the images.
pub fn parse_ferplus(votes: &[VoteRecord], images: &[Sample]) -> Result<Vec<Sample>> {
    if votes.len() != images.len() {
        return Err(Error::data(format!(
            "vote row count {} does not match image count {}",
            votes.len(),
            images.len()
        )));
    }
    let mut out = Vec::new();
    for (vote, img) in votes.iter().zip(images) {
        let winner = argmax(&vote.votes);
        if winner >= 8 {
            continue; // unknown or not-a-face
        }
        let split = match vote.usage.as_str() {
            "Training" => Split::Train,
            "PublicTest" => Split::Val,
            "PrivateTest" => Split::Test,
            _ => img.split,
        };
        let id = if vote.image_name.is_empty() { format!("{}+", img.id) } else { vote.image_name.clone() };
        out.push(Sample {
            id,
            channels: img.channels,
            image: img.image.clone(),
            label: winner,
            pose: Pose::Unknown,
            split,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn image(id: &str) -> Sample {
        Sample {
            id: id.into(),
            channels: 1,
            image: vec![0.5; 64 * 64],
            label: 0,
            pose: Pose::Unknown,
            split: Split::Train,
        }
    }

    #[test]
    fn majority_vote_wins() {
        let csv = "Training,fer0000000.png,8,1,0,1,0,0,0,0,0,0\n";
        let votes = parse_votes(Cursor::new(csv)).unwrap();
        let out = parse_ferplus(&votes, &[image("a")]).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].label, 0); // neutral
        assert_eq!(out[0].id, "fer0000000.png");
    }

    #[test]
    fn unknown_majority_is_discarded() {
        let csv = "Training,x.png,0,0,0,0,0,0,0,0,10,0\n";
        let votes = parse_votes(Cursor::new(csv)).unwrap();
        let out = parse_ferplus(&votes, &[image("a")]).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn ties_break_toward_lower_index() {
        let csv = "Training,x.png,0,4,4,0,0,0,0,0,0,0\n";
        let votes = parse_votes(Cursor::new(csv)).unwrap();
        let out = parse_ferplus(&votes, &[image("a")]).unwrap();
        assert_eq!(out[0].label, 1); // happy, not surprise
    }

    #[test]
    fn header_reorders_columns() {
        let csv = "Usage,Image name,NF,unknown,contempt,fear,disgust,anger,sadness,surprise,happiness,neutral\n\
                   PublicTest,y.png,0,0,0,0,0,0,0,0,9,1\n";
        let votes = parse_votes(Cursor::new(csv)).unwrap();
        let out = parse_ferplus(&votes, &[image("a")]).unwrap();
        assert_eq!(out[0].label, 1); // happiness column relocated
        assert_eq!(out[0].split, Split::Val);
    }

    #[test]
    fn row_count_mismatch_rejected() {
        let csv = "Training,x.png,1,0,0,0,0,0,0,0,0,0\n";
        let votes = parse_votes(Cursor::new(csv)).unwrap();
        assert!(parse_ferplus(&votes, &[image("a"), image("b")]).is_err());
    }
}
