#![no_main]

use libfuzzer_sys::fuzz_target;
use saddle_alloc::oracle::OracleSolution;

fuzz_target!(|data: &str| {
    if let Ok(sol) = OracleSolution::from_json_str(data) {
        let again = OracleSolution::from_json_str(&sol.to_json_string()).expect("serialized solution parses");
        assert_eq!(sol, again);
    }
});
