#![no_main]
use libfuzzer_sys::fuzz_target;

use cast_cli::StrategySpec;

fuzz_target!(|data: &str| {
    if let Ok(spec) = data.parse::<StrategySpec>() {
        let again: StrategySpec = spec.to_string().parse().expect("printed spec parses");
        assert_eq!(again, spec);
    }
});
