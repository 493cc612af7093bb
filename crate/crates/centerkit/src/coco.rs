//! COCO annotation subset: images, annotations with `bbox`, categories.

use std::collections::BTreeMap;
use std::path::Path;

use centerkit_core::{BoundingBox, Dataset, ImageInfo};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Deserialize)]
struct RawCoco {
    images: Vec<RawImage>,
    annotations: Vec<RawAnnotation>,
    categories: Vec<RawCategory>,
}

#[derive(Deserialize)]
struct RawImage {
    id: i64,
    width: f64,
    height: f64,
    #[serde(default)]
    file_name: String,
}

#[derive(Deserialize)]
struct RawAnnotation {
    image_id: i64,
    category_id: i64,
    bbox: [f64; 4],
}

#[derive(Deserialize)]
struct RawCategory {
    id: i64,
    #[serde(default)]
    name: String,
}

/// Byte offset of a 1-based (line, column) position as reported by serde_json.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start = bytes
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == b'\n')
        .nth(line.saturating_sub(2))
        .map_or(0, |(i, _)| i + 1);
    let start = if line == 1 { 0 } else { line_start };
    (start + column.saturating_sub(1)).min(bytes.len())
}

pub(crate) fn json_error(path: &Path, bytes: &[u8], err: serde_json::Error) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        offset: byte_offset(bytes, err.line(), err.column()),
        message: err.to_string(),
    }
}

/// Parses COCO JSON into a validated, clamped [`Dataset`].
///
/// `origin` only labels error messages.
pub fn parse_coco(bytes: &[u8], origin: &Path) -> Result<Dataset> {
    let raw: RawCoco = serde_json::from_slice(bytes).map_err(|e| json_error(origin, bytes, e))?;
    let images = raw
        .images
        .into_iter()
        .map(|im| ImageInfo::new(im.id, im.width, im.height, im.file_name))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| CliError::Format {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
    let boxes = raw
        .annotations
        .into_iter()
        .map(|a| {
            let [x, y, w, h] = a.bbox;
            BoundingBox::new(x, y, w, h, a.category_id, a.image_id)
        })
        .collect();
    let categories: BTreeMap<i64, String> =
        raw.categories.into_iter().map(|c| (c.id, c.name)).collect();
    Dataset::new(images, boxes, categories).map_err(|e| match e {
        centerkit_core::Error::UnknownImage(id) => {
            CliError::Reference(vec![format!("image_id {id}")])
        }
        centerkit_core::Error::UnknownCategory(id) => {
            CliError::Reference(vec![format!("category_id {id}")])
        }
        other => CliError::Format {
            path: origin.to_path_buf(),
            message: other.to_string(),
        },
    })
}

/// Reads and parses a COCO file.
pub fn load_coco(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    parse_coco(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "info": {"year": 2017},
        "images": [{"id": 1, "width": 100, "height": 100, "file_name": "a.jpg", "license": 3}],
        "annotations": [{"id": 5, "image_id": 1, "category_id": 2, "bbox": [10, 20, 30, 40], "iscrowd": 0, "area": 1200.0}],
        "categories": [{"id": 2, "name": "person", "supercategory": "person"}]
    }"#;

    #[test]
    fn minimal_dataset() {
        let ds = parse_coco(MINIMAL.as_bytes(), Path::new("m.json")).unwrap();
        assert_eq!(ds.images().len(), 1);
        let b = ds.boxes()[0];
        assert_eq!((b.x, b.y, b.w, b.h, b.category_id, b.image_id), (10.0, 20.0, 30.0, 40.0, 2, 1));
        assert_eq!(ds.categories()[&2], "person");
    }

    #[test]
    fn dangling_image() {
        let bad = MINIMAL.replace("\"image_id\": 1", "\"image_id\": 9");
        match parse_coco(bad.as_bytes(), Path::new("m.json")) {
            Err(CliError::Reference(ids)) => assert_eq!(ids, vec!["image_id 9".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
        let bad = MINIMAL.replace("\"category_id\": 2", "\"category_id\": 4");
        let err = parse_coco(bad.as_bytes(), Path::new("m.json")).unwrap_err();
        assert_eq!(err.exit_code(), 5);
        assert!(err.to_string().contains("category_id 4"));
    }

    #[test]
    fn clamps_boxes() {
        let s = MINIMAL.replace("[10, 20, 30, 40]", "[90.0, 90, 30, 30]");
        let ds = parse_coco(s.as_bytes(), Path::new("m.json")).unwrap();
        let b = ds.boxes()[0];
        assert_eq!((b.x, b.y, b.w, b.h), (90.0, 90.0, 10.0, 10.0));
    }

    #[test]
    fn malformed_json_reports_offset() {
        let text = "{\n  \"images\": [,\n]}";
        match parse_coco(text.as_bytes(), Path::new("m.json")) {
            Err(CliError::Parse { offset, .. }) => assert_eq!(&text[offset..offset + 1], ","),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_coco(b"{", Path::new("m.json")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
