#![no_main]

use libfuzzer_sys::fuzz_target;
use qkdcoex::config::AppConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = AppConfig::parse(text) {
        // the echoed form of any accepted config must itself parse
        let echoed = cfg.echo();
        AppConfig::parse(&echoed).expect("echoed config re-parses");
    }
});
