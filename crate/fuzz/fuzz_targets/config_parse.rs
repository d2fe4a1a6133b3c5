#![no_main]

use libfuzzer_sys::fuzz_target;
use singconv_cli::config::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // resolution builds kernels and paths but does no integration
    if let Ok(cfg) = parse_config(text, None) {
        let _ = cfg.resolve();
    }
});
