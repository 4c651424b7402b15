#![no_main]

use libfuzzer_sys::fuzz_target;
use qkdcoex::wire::replay_reader;

fuzz_target!(|data: &[u8]| {
    if let Ok(replayed) = replay_reader(data) {
        // replayed records are gap-free and start at 1
        for (i, record) in replayed.records.iter().enumerate() {
            assert_eq!(record.sequence, i as u64 + 1);
        }
    }
});
