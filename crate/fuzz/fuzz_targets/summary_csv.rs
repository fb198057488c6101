#![no_main]
use libfuzzer_sys::fuzz_target;

use cast::report::{read_csv, CompareRow, SummaryRow, TrajectoryRow};

fuzz_target!(|data: &[u8]| {
    let _ = read_csv::<SummaryRow, _>(data);
    let _ = read_csv::<CompareRow, _>(data);
    let _ = read_csv::<TrajectoryRow, _>(data);
});
