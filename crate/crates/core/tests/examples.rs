//! Worked examples with closed-form oracles.

use singconv_core::class_a::{tail_mass, ClassAOptions};
use singconv_core::kernels::{
    box_kernel, catalog_kernel, gauss_weierstrass_kernel, Kernel, Support, CATALOG_KERNELS,
};
use singconv_core::operator::{apply, apply_with, catalog_function, l1_norm, l1_norm_of_image, ApplyOptions, DomainSpec, SampleFunction};
use singconv_core::quadrature::{try_integrate_complement, try_integrate_rect, QuadOptions, Rect};

fn square(r: f64) -> Rect {
    Rect::new(-r, r, -r, r).unwrap()
}

fn support_breaks(k: &dyn Kernel, lambda: f64) -> QuadOptions {
    match k.support(lambda) {
        Support::Rect(r) => QuadOptions::default().with_breaks(&[r.a, r.b], &[r.c, r.d]),
        Support::Unbounded => QuadOptions::default(),
    }
}

#[test]
fn box_mass_over_wide_square() {
    let k = box_kernel();
    let f = |t: f64, s: f64| k.evaluate(10.0, t, s);
    let q = try_integrate_rect(f, &square(1.0), 1e-10, &support_breaks(k.as_ref(), 10.0)).unwrap();
    assert!((q.value - 1.0).abs() < 1e-8, "{}", q.value);
}

#[test]
fn box_mass_without_hints_flags_the_cap() {
    // jumps at 0.1 never land on dyadic cell edges of [-1, 1]
    let k = box_kernel();
    let f = |t: f64, s: f64| k.evaluate(10.0, t, s);
    let q = try_integrate_rect(f, &square(1.0), 1e-10, &QuadOptions::default()).unwrap();
    assert!(q.limited);
    assert!((q.value - 1.0).abs() < 1e-3, "{}", q.value);
}

#[test]
fn box_complement_examples() {
    let k = box_kernel();
    for (lambda, expected) in [(10.0, 0.75), (100.0, 0.0)] {
        let f = |t: f64, s: f64| k.evaluate(lambda, t, s);
        let opts = support_breaks(k.as_ref(), lambda);
        let q = try_integrate_complement(f, &square(0.05), &square(1.0), 1e-10, &opts).unwrap();
        assert!((q.value - expected).abs() < 1e-10, "lambda {lambda}: {}", q.value);
    }
}

#[test]
fn gauss_tail_against_erfc() {
    let k = gauss_weierstrass_kernel();
    let (lambda, gamma): (f64, f64) = (50.0, 0.5);
    let c = libm::erfc(lambda.sqrt() * gamma);
    let oracle = c * (2.0 - c);
    let got = tail_mass(k.as_ref(), lambda, gamma, &ClassAOptions::default()).unwrap();
    assert!(((got - oracle) / oracle).abs() < 0.1, "{got} vs {oracle}");
}

#[test]
fn clipping_is_value_neutral_on_box() {
    let k = box_kernel();
    let unclipped = ApplyOptions {
        clip_to_support: false,
        ..ApplyOptions::default()
    };
    for name in ["t", "ts", "sum_sq", "cos_prod"] {
        let f = catalog_function(name).unwrap();
        for lambda in [4.0, 8.0, 16.0] {
            for (x, y) in [(0.25, 0.5), (0.5, 0.125), (0.9375, 0.0625)] {
                let a = apply(k.as_ref(), &f, lambda, x, y, 1e-11).unwrap();
                let b = apply_with(k.as_ref(), &f, lambda, x, y, 1e-11, &unclipped).unwrap();
                assert!((a - b).abs() < 1e-9, "{name} lambda {lambda} ({x}, {y}): {a} vs {b}");
            }
        }
    }
}

#[test]
fn constant_reproduction_for_unit_mass_kernels() {
    let big = Rect::new(-4.0, 4.0, -4.0, 4.0).unwrap();
    let f = SampleFunction::constant(2.5, DomainSpec::bounded(big).unwrap());
    for name in CATALOG_KERNELS {
        let k = catalog_kernel(name).unwrap();
        for lambda in [16.0, 64.0] {
            let v = apply(k.as_ref(), &f, lambda, 0.1, -0.2, 1e-11).unwrap();
            assert!((v - 2.5).abs() < 1e-8, "{name} lambda {lambda}: {v}");
        }
    }
}

#[test]
fn image_norm_bound_on_bounded_catalog_functions() {
    // inner tolerance well below the 1e-3 slack; sqrt_abs refines deeply at t = 0
    let lambdas: Vec<f64> = (0..8).map(|i| 2f64.powi(i + 1)).collect();
    for kname in CATALOG_KERNELS {
        let k = catalog_kernel(kname).unwrap();
        let m = k.l1_bound_claim().unwrap();
        for fname in ["t", "ts", "sum_sq", "cos_prod", "indicator", "quadrant_jump", "sqrt_abs"] {
            let f = catalog_function(fname).unwrap();
            let norm = l1_norm(&f, 1e-12).unwrap();
            for &lambda in &lambdas {
                let img = l1_norm_of_image(k.as_ref(), &f, lambda, 1e-6).unwrap();
                assert!(img <= m * norm * (1.0 + 1e-3), "{kname} x {fname} lambda {lambda}: {img} vs {}", m * norm);
            }
        }
    }
}
