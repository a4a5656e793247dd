#![no_main]

use centerout::moreau::SmoothMap;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(map) = SmoothMap::from_json(text) else { return };
    if map.potential.targets.len() <= 64 && map.dim() <= 4 {
        let x = vec![0.5; map.dim()];
        if let Ok(t) = map.eval(&x) {
            assert!(t.iter().all(|v| v.is_finite()));
        }
    }
});
