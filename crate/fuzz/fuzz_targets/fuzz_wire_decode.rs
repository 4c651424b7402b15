#![no_main]

use libfuzzer_sys::fuzz_target;
use qkdcoex::wire::SssConfigMessage;

fuzz_target!(|data: &[u8]| {
    if let Ok(message) = SssConfigMessage::decode(data) {
        // anything that decodes must re-encode to the same bytes
        assert_eq!(message.encode(), data);
    }
});
