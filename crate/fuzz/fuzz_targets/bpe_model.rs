#![no_main]

use ecmt::textdata::{BpeModel, Vocab};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = BpeModel::from_text(text) {
        let again = BpeModel::from_text(&m.to_text()).expect("serialized model reparses");
        assert_eq!(again.to_text(), m.to_text());
        let _ = m.segment("fuzz the segmenter");
    }
    if let Ok(v) = Vocab::from_text(text) {
        assert_eq!(Vocab::from_text(&v.to_text()).expect("vocab reparses").tokens(), v.tokens());
    }
});
