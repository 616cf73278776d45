#![no_main]

use ecmt::game::{FeatureSet, Split};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = FeatureSet::from_ecfv(data, Split::Train) {
        assert_eq!(f.to_ecfv(), data);
    }
});
