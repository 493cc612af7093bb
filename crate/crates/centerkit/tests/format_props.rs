use std::path::Path;

use centerkit::ochm::{decode, encode, OchmError};
use centerkit::records::{read_jsonl, write_jsonl, PointRecord};
use centerkit_core::Heatmap;
use proptest::prelude::*;

fn raster() -> impl Strategy<Value = Heatmap> {
    (1usize..4, 1usize..12, 1usize..12, 1u8..17).prop_flat_map(|(c, h, w, s)| {
        proptest::collection::vec(0.0f32..=1.0, c * h * w)
            .prop_map(move |data| Heatmap::from_data(c, h, w, s as f32 * 0.5, data).unwrap())
    })
}

fn record() -> impl Strategy<Value = PointRecord> {
    (any::<i64>(), any::<i64>(), -1e6f64..1e6, -1e6f64..1e6, 0.0f64..=1.0).prop_map(
        |(image_id, category_id, x, y, score)| PointRecord {
            image_id,
            category_id,
            x,
            y,
            score,
        },
    )
}

proptest! {
    #[test]
    fn ochm_roundtrip_is_bit_exact(map in raster()) {
        let bytes = encode(&map).unwrap();
        prop_assert_eq!(bytes.len(), 24 + 4 * map.data().len());
        let back = decode(&bytes).unwrap();
        prop_assert_eq!(back.shape(), map.shape());
        prop_assert_eq!(back.stride().to_bits(), map.stride().to_bits());
        let a: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = map.data().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a, b);
        prop_assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn truncated_or_extended_files_are_rejected(map in raster(), cut in 1usize..8, extra in 1usize..8) {
        let bytes = encode(&map).unwrap();
        let short = &bytes[..bytes.len() - cut];
        let truncated = matches!(decode(short), Err(OchmError::Truncated { .. }));
        prop_assert!(truncated);
        let mut long = bytes.clone();
        long.extend(std::iter::repeat_n(0u8, extra));
        prop_assert!(matches!(decode(&long), Err(OchmError::Trailing(_))));
    }

    #[test]
    fn decode_never_panics(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode(&bytes);
    }

    #[test]
    fn jsonl_roundtrip_is_exact(records in proptest::collection::vec(record(), 0..20)) {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &records).unwrap();
        prop_assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), records.len());
        let back = read_jsonl(&buf[..], Path::new("mem")).unwrap();
        prop_assert_eq!(back, records);
    }
}
