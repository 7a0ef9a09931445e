#![no_main]

use libfuzzer_sys::fuzz_target;
use mec_core::hasac::LearnedPolicy;
use mec_core::nn::net_from_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(net) = net_from_json(text) {
        // A decoded net must be usable on an input of its declared width.
        let _ = net.forward_vec(&vec![0.0; net.input_dim()]);
    }
    let _ = LearnedPolicy::from_json(text);
});
