#![no_main]
use libfuzzer_sys::fuzz_target;
use qps::phase::{PhaseGrid, PhasePair};

fuzz_target!(|data: &[u8]| {
    let pair = PhasePair::new(-7.0, 7.0, 32, -7.0, 7.0, 32).unwrap();
    let grid = PhaseGrid::new(vec![pair], 1.0).unwrap();
    let _ = qps::io::parse_distribution_csv(data, &grid);
});
