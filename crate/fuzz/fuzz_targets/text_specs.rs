#![no_main]
use libfuzzer_sys::fuzz_target;

// Command-line style values: grids, phase grids, tolerances, gauges, suites.
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let _ = qps::io::parse_grid_spec(s);
    let _ = qps::io::parse_pgrid_spec(s, 1.0);
    let _ = qps::io::parse_tol(s);
    let _ = s.parse::<qps::joint::GaugeChoice>();
    let _ = s.parse::<qps::verify::Suite>();
});
