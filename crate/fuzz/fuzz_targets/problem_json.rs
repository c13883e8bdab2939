#![no_main]

use libfuzzer_sys::fuzz_target;
use saddle_alloc::{ProblemInstance, StackedPoint};

fuzz_target!(|data: &str| {
    if let Ok(p) = ProblemInstance::from_json_str(data) {
        let x = p.uniform_split();
        assert_eq!(x.len(), p.dim_x());
        let z = StackedPoint::new(x, vec![0.0; p.m()]);
        assert_eq!(p.grad_x(&z).unwrap().len(), p.dim_x());
        assert_eq!(p.grad_mu(&z).unwrap().len(), p.m());
        let _ = p.reg_lagrangian(&z).unwrap();
    }
});
