#![no_main]
use libfuzzer_sys::fuzz_target;

// First byte picks the matrix size.
fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    let _ = qps::io::parse_matrix_csv(rest, n as usize % 16);
});
