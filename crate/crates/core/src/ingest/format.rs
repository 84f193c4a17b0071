//! Plain-text frames file.
//!
//! Each frame is a block of five consecutive non-blank lines holding 14
//! whitespace-separated decimal numbers: x, y, confidence, then the two
//! auxiliary rows. Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;

use crate::skeleton::{Joint2D, SkeletalFrame, N_JOINTS};

const ROWS_PER_BLOCK: usize = 5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}: expected {N_JOINTS} values, got {got}")]
    MalformedRow { line: usize, got: usize },
    #[error("line {line}: non-numeric token {token:?}")]
    NonNumeric { line: usize, token: String },
    #[error("line {line}: truncated frame block ({rows} of 5 rows)")]
    TruncatedBlock { line: usize, rows: usize },
}

fn parse_row(line_no: usize, line: &str) -> Result<Vec<f64>, ParseError> {
    let values = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| ParseError::NonNumeric {
                line: line_no,
                token: tok.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != N_JOINTS {
        return Err(ParseError::MalformedRow {
            line: line_no,
            got: values.len(),
        });
    }
    Ok(values)
}

/// Parses a frames file into one [`SkeletalFrame`] per 5-row block.
///
/// Line numbers in errors are 1-based.
pub fn parse_skeletal_file(text: &str) -> Result<Vec<SkeletalFrame>, ParseError> {
    let mut frames = Vec::new();
    let mut block: Vec<Vec<f64>> = Vec::with_capacity(ROWS_PER_BLOCK);
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        last_line = line_no;
        block.push(parse_row(line_no, line)?);
        if block.len() == ROWS_PER_BLOCK {
            let mut rows = block.drain(..);
            let (xs, ys, cs) = (
                rows.next().unwrap(),
                rows.next().unwrap(),
                rows.next().unwrap(),
            );
            let aux = [rows.next().unwrap(), rows.next().unwrap()];
            drop(rows);
            let joints = (0..N_JOINTS)
                .map(|j| Joint2D::with_confidence(xs[j], ys[j], cs[j]))
                .collect();
            frames.push(SkeletalFrame::with_aux(joints, aux));
        }
    }
    if !block.is_empty() {
        return Err(ParseError::TruncatedBlock {
            line: last_line,
            rows: block.len(),
        });
    }
    Ok(frames)
}

fn push_row(out: &mut String, values: impl Iterator<Item = f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        // `{}` on f64 prints the shortest string that round-trips exactly.
        write!(out, "{v}").unwrap();
    }
    out.push('\n');
}

/// Serializes frames in the block format. Frames without aux rows get
/// zero-filled aux rows.
pub fn write_frames(frames: &[SkeletalFrame]) -> String {
    let mut out = String::new();
    for (i, f) in frames.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        push_row(&mut out, f.joints.iter().map(|j| j.x));
        push_row(&mut out, f.joints.iter().map(|j| j.y));
        push_row(&mut out, f.joints.iter().map(|j| j.confidence));
        match &f.aux {
            Some(aux) => {
                push_row(&mut out, aux[0].iter().copied());
                push_row(&mut out, aux[1].iter().copied());
            }
            None => {
                push_row(&mut out, std::iter::repeat_n(0.0, f.joints.len()));
                push_row(&mut out, std::iter::repeat_n(0.0, f.joints.len()));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn block(x0: f64) -> String {
        let row = |v: f64| {
            (0..14)
                .map(|j| format!("{}", v + j as f64))
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!(
            "{}\n{}\n{}\n{}\n{}\n",
            row(x0),
            row(x0 + 100.0),
            vec!["0.9"; 14].join(" "),
            row(0.0),
            row(1.0)
        )
    }

    #[test]
    fn two_blocks_give_two_frames() {
        let text = format!("{}\n{}", block(10.0), block(20.0));
        let frames = parse_skeletal_file(&text).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[1].joints[3].x, 23.0);
        assert_eq!(frames[1].joints[3].y, 123.0);
        assert_eq!(frames[0].joints[0].confidence, 0.9);
        assert_eq!(frames[0].aux.as_ref().unwrap()[1][2], 3.0);
    }

    #[test]
    fn short_row_names_its_line() {
        let mut text = block(0.0);
        text.push_str(&(0..13).map(|_| "1").collect::<Vec<_>>().join(" "));
        text.push('\n');
        assert_eq!(
            parse_skeletal_file(&text),
            Err(ParseError::MalformedRow { line: 6, got: 13 })
        );
    }

    #[test]
    fn bad_token_and_truncation() {
        let text = block(0.0).replacen("0.9", "abc", 1);
        assert_eq!(
            parse_skeletal_file(&text),
            Err(ParseError::NonNumeric {
                line: 3,
                token: "abc".into()
            })
        );
        let text: String = block(0.0).lines().take(3).map(|l| format!("{l}\n")).collect();
        assert_eq!(
            parse_skeletal_file(&text),
            Err(ParseError::TruncatedBlock { line: 3, rows: 3 })
        );
    }

    fn arb_frame() -> impl Strategy<Value = SkeletalFrame> {
        (
            proptest::collection::vec((-1e4f64..1e4, -1e4f64..1e4, 0f64..=1.0), 14),
            proptest::collection::vec(-1e6f64..1e6, 28),
        )
            .prop_map(|(js, aux)| {
                SkeletalFrame::with_aux(
                    js.into_iter()
                        .map(|(x, y, c)| Joint2D::with_confidence(x, y, c))
                        .collect(),
                    [aux[..14].to_vec(), aux[14..].to_vec()],
                )
            })
    }

    proptest! {
        #[test]
        fn write_then_parse_is_exact(frames in proptest::collection::vec(arb_frame(), 1..6)) {
            let text = write_frames(&frames);
            prop_assert_eq!(parse_skeletal_file(&text).unwrap(), frames);
        }
    }
}
