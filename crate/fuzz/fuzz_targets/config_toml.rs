#![no_main]
use libfuzzer_sys::fuzz_target;

use cast::config::FileConfig;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = FileConfig::parse(data) {
        assert_eq!(FileConfig::parse(&cfg.to_toml()).expect("printed config parses"), cfg);
    }
});
