#![no_main]
use libfuzzer_sys::fuzz_target;

use cast::io::{read_corpus, write_corpus};

fuzz_target!(|data: &[u8]| {
    if let Ok(corpus) = read_corpus(data) {
        let mut out = Vec::new();
        write_corpus(&corpus, &mut out).expect("a corpus that was read can be written");
        assert_eq!(read_corpus(out.as_slice()).expect("written corpus reads back"), corpus);
    }
});
