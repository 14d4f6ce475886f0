#![no_main]

use cloudalloc::trace::{read_csv, read_csv_raw, write_csv_to};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_csv_raw(data);
    if let Ok(frame) = read_csv(data) {
        // Anything accepted must survive a write/read round trip.
        let mut out = Vec::new();
        write_csv_to(&frame, &mut out).expect("write accepted frame");
        let again = read_csv(out.as_slice()).expect("re-read written frame");
        assert_eq!(again.len(), frame.len());
    }
});
