#![no_main]

use cloudalloc::forecast::{parse_checkpoint, to_checkpoint_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = parse_checkpoint(text) {
        let again = parse_checkpoint(&to_checkpoint_json(&model)).expect("re-parse own output");
        assert_eq!(again.dims(), model.dims());
    }
});
