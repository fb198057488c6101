#![no_main]
use libfuzzer_sys::fuzz_target;

use cast::report::WideTable;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = WideTable::read(data) {
        let mut out = Vec::new();
        table.write(&mut out).expect("table writes");
        let _ = WideTable::read(out.as_slice());
    }
});
