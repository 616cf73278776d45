#![no_main]

use ecmt::io::{decode_eckp, encode_eckp, CheckpointMeta};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(store) = decode_eckp(data) {
        assert_eq!(encode_eckp(&store), data);
    }
    let _ = serde_json::from_slice::<CheckpointMeta>(data);
});
