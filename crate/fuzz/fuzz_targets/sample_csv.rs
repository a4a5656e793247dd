#![no_main]

use centerout::io::{read_sample_csv, sample_hash, write_points_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(points) = read_sample_csv(data) {
        assert!(points.len() > 0 && points.all_finite());
        let mut out = Vec::new();
        write_points_csv(&mut out, &points).unwrap();
        let back = read_sample_csv(out.as_slice()).unwrap();
        assert_eq!(sample_hash(&back), sample_hash(&points));
    }
});
