use eqsmooth_bench::{caps, linear_sample, EPSILON};

#[test]
fn caps_have_requested_shape_and_repeat() {
    let a = caps(50, 3, 7);
    assert_eq!(a.len(), 50);
    assert_eq!(a.dim(), 3);
    assert_eq!(a.budget().epsilon(), EPSILON);
    assert_eq!(a, caps(50, 3, 7));
    assert_ne!(a, caps(50, 3, 8));
}

#[test]
fn linear_sample_is_labelled_with_points() {
    let d = linear_sample(40, 4, 1);
    assert_eq!(d.len(), 40);
    assert!(d
        .records()
        .iter()
        .all(|r| r.label.is_some() && r.point.is_some()));
    assert_eq!(d, linear_sample(40, 4, 1));
}
