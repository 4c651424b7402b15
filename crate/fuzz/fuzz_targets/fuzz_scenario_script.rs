#![no_main]

use libfuzzer_sys::fuzz_target;
use qkdcoex::controller::ScenarioScript;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = ScenarioScript::parse(text);
});
