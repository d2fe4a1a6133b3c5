#![no_main]

use libfuzzer_sys::fuzz_target;
use singconv_core::expr::Expr;

const VARS: [&str; 3] = ["lambda", "t", "s"];

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(e) = Expr::parse(src, &VARS) else {
        return;
    };
    let printed = e.to_string();
    let back = Expr::parse(&printed, &VARS).expect("printed form parses");
    assert_eq!(back.to_string(), printed);
    let p = [3.0, 0.25, -0.5];
    match (e.eval(&p), back.eval(&p)) {
        (Ok(a), Ok(b)) => assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())),
        (Err(_), Err(_)) => {}
        (a, b) => panic!("{a:?} vs {b:?}"),
    }
});
