use landslide_lab::ads::kstar;
use landslide_lab::geom::io::FieldFile;
use landslide_lab::geom::mat2::{self, M2};
use landslide_lab::geom::MetricField;
use landslide_lab::minlag::labourie_root;
use proptest::prelude::*;

fn spd() -> impl Strategy<Value = M2> {
    (0.2f64..5.0, 0.2f64..5.0, 0.0f64..std::f64::consts::PI).prop_map(|(l1, l2, a)| {
        let r = mat2::rot(a);
        let m = r * M2::new(l1, 0.0, 0.0, l2) * r.transpose();
        mat2::sym(m[(0, 0)], m[(0, 1)], m[(1, 1)])
    })
}

fn close(a: &M2, b: &M2, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + a.norm().max(b.norm()))
}

fn root(h: &M2, hs: &M2) -> M2 {
    let f = |m: &M2| MetricField::new(vec![*m]).unwrap();
    labourie_root(&f(h), &f(hs)).unwrap().values[0]
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn root_squares_back_and_is_self_adjoint(h in spd(), hs in spd()) {
        let b = root(&h, &hs);
        prop_assert!(close(&(b * b), &(h.try_inverse().unwrap() * hs), 1e-12));
        prop_assert!(close(&mat2::adjoint(&b, &h), &b, 1e-12));
        prop_assert!(close(&mat2::pullback(&h, &b), &hs, 1e-12));
        prop_assert!(b.trace() > 0.0 && b.determinant() > 0.0);
    }

    #[test]
    fn swapping_the_pair_inverts_the_root(h in spd(), hs in spd()) {
        let b = root(&h, &hs);
        prop_assert!(close(&(b * root(&hs, &h)), &mat2::ident(), 1e-12));
    }

    #[test]
    fn unit_determinant_root_satisfies_the_trace_identity(h in spd(), hs in spd()) {
        let b0 = root(&h, &hs);
        let b = b0 / b0.determinant().sqrt();
        let one = mat2::ident();
        let lhs = (one + b * b).determinant();
        prop_assert!((lhs - b.trace().powi(2)).abs() <= 1e-12 * lhs.abs().max(1.0));
        prop_assert!(close(&((one + b) * (one + b)), &(b * (b.trace() + 2.0)), 1e-12));
    }

    #[test]
    fn complex_structure_is_an_isometry_squaring_to_minus_one(g in spd()) {
        let j = mat2::j_of(&g);
        prop_assert!(close(&(j * j), &(-mat2::ident()), 1e-12));
        prop_assert!(close(&mat2::pullback(&g, &j), &g, 1e-12));
    }

    #[test]
    fn dual_curvature_is_an_involution(k in -50.0f64..-1.0001) {
        let back = kstar(kstar(k).unwrap()).unwrap();
        prop_assert!((back - k).abs() <= 1e-14 * k.abs());
    }

    #[test]
    fn metric_files_round_trip_exactly(ms in prop::collection::vec(spd(), 1..20)) {
        let g = MetricField::new(ms).unwrap();
        let back = FieldFile::from_json(&FieldFile::from_metric(&g).to_json()).unwrap().into_metric().unwrap();
        prop_assert_eq!(back, g);
    }
}

#[test]
fn curvature_at_or_above_minus_one_has_no_dual() {
    assert!(kstar(-1.0).is_err());
    assert!(kstar(-0.5).is_err());
}
