#![no_main]

use libfuzzer_sys::fuzz_target;
use saddle_alloc::tracker::TrajectoryLog;

fuzz_target!(|data: &str| {
    if let Ok(log) = TrajectoryLog::from_json_str(data) {
        let again = TrajectoryLog::from_json_str(&log.to_json_string()).expect("serialized log parses");
        assert_eq!(log, again);
    }
});
