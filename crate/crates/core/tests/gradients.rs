mod support;

use support::suites;

#[test]
fn kernels_pass_finite_differences() {
    for (name, err) in suites::kernel_gradient_errors() {
        assert!(err < 1e-4, "{name}: {err:e}");
    }
}

#[test]
fn full_models_pass_finite_differences() {
    let t = std::time::Instant::now();
    for (name, err) in suites::model_gradient_errors() {
        eprintln!("{name}: {err:e}");
        assert!(err < 1e-3, "{name}: {err:e}");
    }
    eprintln!("{:?}", t.elapsed());
}
