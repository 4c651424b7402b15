#![no_main]

use libfuzzer_sys::fuzz_target;
use qkdcoex::dataset::parse_instances_csv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = parse_instances_csv(text, "fuzz-input");
});
