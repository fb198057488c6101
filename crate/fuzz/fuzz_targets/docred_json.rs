#![no_main]
use libfuzzer_sys::fuzz_target;

use cast::synth::{ingest_docred_str, Featurization};
use cast::SplitTag;

fuzz_target!(|data: &str| {
    if let Ok(corpus) = ingest_docred_str(data, Featurization::HashedBow { dim: 32 }, SplitTag::Train, None) {
        assert!(cast::validate_corpus(&corpus).is_empty());
    }
});
