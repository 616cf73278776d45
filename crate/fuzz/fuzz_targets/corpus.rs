#![no_main]

use ecmt::textdata::{parse_lines, Tokenizer};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(lines) = parse_lines(data) else {
        return;
    };
    if let Ok(tok) = Tokenizer::learn(&lines, 8) {
        for l in &lines {
            let _ = tok.decode(&tok.encode(l));
        }
    }
});
