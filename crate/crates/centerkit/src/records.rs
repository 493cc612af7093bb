//! One-object-per-line point records.

use std::io::{BufRead, Write};
use std::path::Path;

use centerkit_core::CenterPoint;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub image_id: i64,
    pub category_id: i64,
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

impl From<&CenterPoint> for PointRecord {
    fn from(p: &CenterPoint) -> Self {
        Self {
            image_id: p.image_id,
            category_id: p.category_id,
            x: p.x,
            y: p.y,
            score: p.score,
        }
    }
}

impl From<&PointRecord> for CenterPoint {
    fn from(r: &PointRecord) -> Self {
        CenterPoint {
            x: r.x,
            y: r.y,
            score: r.score,
            category_id: r.category_id,
            image_id: r.image_id,
        }
    }
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[PointRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads records, skipping blank lines. Errors carry the byte offset of the bad line.
pub fn read_jsonl<R: BufRead>(reader: R, origin: &Path) -> Result<Vec<PointRecord>> {
    let mut out = Vec::new();
    let mut offset = 0usize;
    for line in reader.split(b'\n') {
        let line = line.map_err(|e| CliError::io(origin, e))?;
        let len = line.len() + 1;
        if !line.iter().all(u8::is_ascii_whitespace) {
            let rec: PointRecord = serde_json::from_slice(&line).map_err(|e| CliError::Parse {
                path: origin.to_path_buf(),
                offset: offset + e.column().saturating_sub(1),
                message: e.to_string(),
            })?;
            if !(0.0..=1.0).contains(&rec.score) || !rec.x.is_finite() || !rec.y.is_finite() {
                return Err(CliError::Parse {
                    path: origin.to_path_buf(),
                    offset,
                    message: format!("record out of domain: {rec:?}"),
                });
            }
            out.push(rec);
        }
        offset += len;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_blank_lines() {
        let recs = vec![
            PointRecord { image_id: 1, category_id: 2, x: 10.5, y: 3.0, score: 0.9 },
            PointRecord { image_id: 4, category_id: 2, x: 0.0, y: 1.25, score: 1.0 },
        ];
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &recs).unwrap();
        buf.extend_from_slice(b"\n  \n");
        let back = read_jsonl(&buf[..], Path::new("p.jsonl")).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn bad_line_offset() {
        let text = b"{\"image_id\":1,\"category_id\":1,\"x\":1,\"y\":1,\"score\":0.5}\n{oops}\n";
        match read_jsonl(&text[..], Path::new("p.jsonl")) {
            Err(CliError::Parse { offset, .. }) => assert!(offset >= 55),
            other => panic!("unexpected {other:?}"),
        }
        let text = b"{\"image_id\":1,\"category_id\":1,\"x\":1,\"y\":1,\"score\":1.5}\n";
        assert!(read_jsonl(&text[..], Path::new("p.jsonl")).is_err());
    }
}
