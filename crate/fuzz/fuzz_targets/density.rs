#![no_main]
use libfuzzer_sys::fuzz_target;

// Sidecar JSON, a NUL byte, then the matrix CSV.
fuzz_target!(|data: &[u8]| {
    let (meta, csv) = match data.iter().position(|&b| b == 0) {
        Some(i) => (&data[..i], &data[i + 1..]),
        None => (data, &[][..]),
    };
    let _ = qps::io::parse_density(meta, csv);
});
