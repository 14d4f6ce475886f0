#![no_main]

use cloudalloc::agent::parse_agent_checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_agent_checkpoint(text);
    }
});
