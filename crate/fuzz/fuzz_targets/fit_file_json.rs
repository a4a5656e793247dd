#![no_main]

use centerout::io::FitFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(fit) = FitFile::from_json(text) {
        let again = fit.to_json().unwrap();
        assert_eq!(FitFile::from_json(&again).unwrap(), fit);
    }
});
