#![no_main]

use cloudalloc::simenv::read_episode_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_episode_csv(data);
});
