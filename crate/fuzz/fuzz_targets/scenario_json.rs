#![no_main]

use libfuzzer_sys::fuzz_target;
use saddle_alloc::tracker::{step_problem, Scenario};

fuzz_target!(|data: &str| {
    if let Ok(s) = Scenario::from_json_str(data) {
        assert_eq!(s.initial.len(), 2 * s.node_count());
        if s.steps() > 0 {
            // building the first step's problem must not panic
            let _ = step_problem(&s, 1, &s.initial);
        }
    }
});
