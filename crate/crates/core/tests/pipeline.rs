//! End-to-end checks against values computed independently of this crate.

use dbnverify::abstraction::{build_dbn, BuildOptions};
use dbnverify::bounds::{dbn_error, LipschitzData, SetTerm};
use dbnverify::checker::{
    check_dense, check_sum_product, CheckOptions, InvarianceResult, Method, QuadratureOptions, QuadratureReference,
};
use dbnverify::model::{ProcessModel, SafeSet, SparseMatrix};
use dbnverify::partition::size_from_budget;
use dbnverify::Error;

fn one_d() -> (ProcessModel, SafeSet) {
    (
        ProcessModel::linear_gaussian(SparseMatrix::from_dense(&[vec![0.8]]).unwrap(), vec![0.2]).unwrap(),
        SafeSet::symmetric_box(1, 1.0).unwrap(),
    )
}

/// Abstract values from a direct dense recursion with erfc-based bin masses.
#[test]
fn one_d_abstraction_matches_dense_reference() {
    let (model, safe) = one_d();
    let lip = LipschitzData::for_model(&model, &safe).unwrap();
    let cases = [
        (0.5, 388, [0.989210275963818, 0.975480888423787, 0.985513816098227]),
        (0.1, 1936, [0.989212004649044, 0.975649825755664, 0.985556108270107]),
    ];
    for (eps, bins, expected) in cases {
        let counts = size_from_budget(&lip, &safe, 10, eps).unwrap();
        assert_eq!(counts, vec![bins]);
        let dbn = build_dbn(&model, &safe, &counts, BuildOptions::default()).unwrap();
        let v = check_sum_product(&dbn, 10, &CheckOptions::default()).unwrap();
        let r = InvarianceResult::from_dbn(&dbn, v, 10, None, Method::SumProduct);
        for (s, want) in [0.0, 0.5, -0.3].into_iter().zip(expected) {
            let got = r.lookup(&[s]).unwrap();
            assert!((got - want).abs() < 1e-11, "eps {eps} s {s}: {got} vs {want}");
        }
    }
}

#[test]
fn two_d_abstraction_matches_dense_reference() {
    let phi = SparseMatrix::from_dense(&[vec![0.8, 0.0], vec![0.5, 0.8]]).unwrap();
    let model = ProcessModel::linear_gaussian(phi, vec![0.2, 0.25]).unwrap();
    let safe = SafeSet::new(vec![-1.0, -0.5], vec![1.0, 1.5]).unwrap();
    let dbn = build_dbn(&model, &safe, &[12, 9], BuildOptions::default()).unwrap();
    let v = check_sum_product(&dbn, 6, &CheckOptions::default()).unwrap();
    let d = check_dense(&dbn, 6, &CheckOptions::default()).unwrap();
    assert!(v.max_abs_diff(&d) < 1e-14);
    for (cell, want) in [
        ([0, 0], 0.008515582712458),
        ([5, 4], 0.753321241800089),
        ([11, 8], 0.132234411704895),
        ([7, 2], 0.828863911063534),
    ] {
        assert!(
            (v.get(&cell) - want).abs() < 1e-12,
            "{cell:?}: {} vs {want}",
            v.get(&cell)
        );
    }
}

#[test]
fn abstraction_error_is_within_budget_and_sound() {
    let (model, safe) = one_d();
    let lip = LipschitzData::for_model(&model, &safe).unwrap();
    let quad = QuadratureReference::build(&model, &safe, 10, QuadratureOptions::for_dim(1)).unwrap();
    for eps in [1.0, 0.5, 0.25] {
        let counts = size_from_budget(&lip, &safe, 10, eps).unwrap();
        let dbn = build_dbn(&model, &safe, &counts, BuildOptions::default()).unwrap();
        let err = dbn_error(&lip, 10, &dbn.partition().diameters(), SetTerm::default()).unwrap();
        assert!(err.total <= eps);
        let v = check_sum_product(&dbn, 10, &CheckOptions::default()).unwrap();
        let r = InvarianceResult::from_dbn(&dbn, v, 10, Some(err.clone()), Method::SumProduct);
        for k in 0..=40 {
            let s = -1.0 + 2.0 * k as f64 / 40.0;
            assert!((r.lookup(&[s]).unwrap() - quad.value(&[s])).abs() <= err.total);
        }
    }
}

#[test]
fn quadrature_matches_gauss_legendre_reference() {
    let (model, safe) = one_d();
    let q = QuadratureReference::build(&model, &safe, 10, QuadratureOptions::for_dim(1)).unwrap();
    assert!((q.value(&[0.0]) - 0.989212076985376).abs() < 1e-7);
    assert!((q.value(&[0.9]) - 0.855903080619717).abs() < 1e-7);
    assert_eq!(q.value(&[1.2]), 0.0);
    assert_eq!(q.value_at(10, &[0.3]), 1.0);
    // dynamics that push everything out quickly
    let fast = ProcessModel::linear_gaussian(SparseMatrix::from_dense(&[vec![3.0]]).unwrap(), vec![0.5]).unwrap();
    let q = QuadratureReference::build(&fast, &safe, 4, QuadratureOptions::for_dim(1)).unwrap();
    let v = q.value(&[0.0]);
    assert!(v > 0.0 && v < 0.5);
}

#[test]
fn quadrature_rejects_three_dimensions() {
    let model = ProcessModel::linear_gaussian(SparseMatrix::identity(3), vec![0.3; 3]).unwrap();
    let safe = SafeSet::symmetric_box(3, 1.0).unwrap();
    assert!(matches!(
        QuadratureReference::build(&model, &safe, 2, QuadratureOptions::for_dim(3)),
        Err(Error::InvalidParameter(_))
    ));
}

#[test]
fn build_cap_is_an_error() {
    let (model, safe) = one_d();
    let opts = BuildOptions {
        max_entries: 100,
        ..Default::default()
    };
    let e = build_dbn(&model, &safe, &[200], opts).unwrap_err();
    assert!(e.is_resource_cap());
}
