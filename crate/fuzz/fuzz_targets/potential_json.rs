#![no_main]

use centerout::certificate::Potential;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = Potential::from_json(text) {
        let again = p.to_json().unwrap();
        assert_eq!(Potential::from_json(&again).unwrap(), p);
    }
});
