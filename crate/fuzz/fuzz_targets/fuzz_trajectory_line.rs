#![no_main]

use libfuzzer_sys::fuzz_target;
use mec_core::env::parse_trajectory_line;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(rec) = parse_trajectory_line(line) {
        let back = parse_trajectory_line(&rec.to_json_line()).expect("re-parse of serialised record");
        assert_eq!(rec.slot, back.slot);
        assert_eq!(rec.backlog_bits, back.backlog_bits);
    }
});
