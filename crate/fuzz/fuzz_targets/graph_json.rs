#![no_main]

use libfuzzer_sys::fuzz_target;
use saddle_alloc::weights::{laplacian, validate_weight_matrix, DEFAULT_TOL};
use saddle_alloc::Graph;

fuzz_target!(|data: &str| {
    if let Ok(g) = Graph::from_json_str(data) {
        let again = Graph::from_json_str(&g.to_json_string()).expect("serialized graph parses");
        assert_eq!(g, again);
        if g.node_count() <= 64 {
            let w = laplacian(&g);
            assert!(validate_weight_matrix(w.entries(), &g, DEFAULT_TOL).unwrap().passed());
        }
    }
});
