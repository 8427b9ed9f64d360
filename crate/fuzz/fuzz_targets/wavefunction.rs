#![no_main]
use libfuzzer_sys::fuzz_target;

// Sidecar JSON, a NUL byte, then the sample CSV.
fuzz_target!(|data: &[u8]| {
    let (meta, csv) = match data.iter().position(|&b| b == 0) {
        Some(i) => (&data[..i], &data[i + 1..]),
        None => (data, &[][..]),
    };
    if let Ok(m) = qps::io::parse_wavefunction_meta(meta) {
        let _ = qps::io::parse_wavefunction_csv(csv, &m);
    }
});
