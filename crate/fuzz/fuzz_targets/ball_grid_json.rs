#![no_main]

use centerout::grid::BallGrid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(grid) = BallGrid::from_json(text) {
        assert_eq!(grid.len(), grid.spec.n);
        assert_eq!(grid.ring_of.len(), grid.len());
        let again = serde_json::to_string(&grid).unwrap();
        assert_eq!(BallGrid::from_json(&again).unwrap(), grid);
    }
});
