mod common;

use common::*;
use mtnpass::objective::builtin;
use mtnpass::Vector;

#[test]
fn census_matches_frozen_values() {
    let points = camel_critical_points();
    assert_eq!(points.len(), 15);
    let minima = points.iter().filter(|c| c.morse_index() == 0).count();
    let saddles = points.iter().filter(|c| c.morse_index() == 1).count();
    let maxima = points.iter().filter(|c| c.morse_index() == 2).count();
    assert_eq!((minima, saddles, maxima), (6, 7, 2));

    for (p, value) in [
        (GLOBAL_MIN, GLOBAL_MIN_VALUE),
        (neg(GLOBAL_MIN), GLOBAL_MIN_VALUE),
        (LOCAL_MIN, LOCAL_MIN_VALUE),
        (neg(LOCAL_MIN), LOCAL_MIN_VALUE),
        (SADDLE, SADDLE_VALUE),
        (neg(SADDLE), SADDLE_VALUE),
    ] {
        let c = nearest_critical(p);
        assert!((c.x[0] - p[0]).abs() < 1e-12 && (c.x[1] - p[1]).abs() < 1e-12, "{c:?}");
        assert!((c.value - value).abs() < 1e-12);
    }
    let origin = nearest_critical([0.0, 0.0]);
    assert!(origin.x.norm() < 1e-14);
    let root65 = 65f64.sqrt();
    assert!((origin.eigenvalues[0] + root65).abs() < 1e-12);
    assert!((origin.eigenvalues[1] - root65).abs() < 1e-12);
}

#[test]
fn library_camel_agrees_with_oracle() {
    let camel = builtin("six_hump_camel").unwrap();
    for c in camel_critical_points() {
        let x = Vector::from_column_slice(c.x.as_slice());
        assert!((camel.eval_value(&x).unwrap() - c.value).abs() < 1e-13);
        assert!(camel.eval_gradient(&x).unwrap().norm() < 1e-11);
        let h = camel.eval_hessian(&x).unwrap();
        let reference = common::camel_hessian(c.x);
        for i in 0..2 {
            for j in 0..2 {
                assert!((h[(i, j)] - reference[(i, j)]).abs() < 1e-12);
            }
        }
    }
}
