use vsgd_web::{heatmap_svg, loss_curve, reweight_demo};

#[test]
fn loss_curve_starts_at_initial_loss_and_descends() {
    let curve = loss_curve("quad", 1.0, 0.1, "vsgd-fd", 1, 0.1, 200, 3).unwrap();
    assert_eq!(curve.len(), 201);
    assert!((curve[0] - (1.0 + 0.1)).abs() < 1e-12, "{}", curve[0]);
    assert!(curve[200] < curve[0]);
}

#[test]
fn loss_curve_is_seeded() {
    let a = loss_curve("abs", 10.0, 1.0, "adagrad", 10, 0.1, 50, 7).unwrap();
    let b = loss_curve("abs", 10.0, 1.0, "adagrad", 10, 0.1, 50, 7).unwrap();
    assert_eq!(a, b);
}

#[test]
fn loss_curve_stops_on_divergence() {
    let curve = loss_curve("quad", 10.0, 0.1, "sgd", 1, 100.0, 1000, 1).unwrap();
    assert!(curve.len() < 1001);
    assert!(curve.iter().all(|l| l.is_finite()));
}

#[test]
fn bad_names_are_reported() {
    assert!(loss_curve("sine", 1.0, 1.0, "sgd", 1, 0.1, 10, 0).unwrap_err().contains("sine"));
    assert!(loss_curve("quad", 1.0, 1.0, "adam", 1, 0.1, 10, 0).is_err());
    assert!(heatmap_svg("quad", "vsgd-fd", 1, 0.1, 0, 16, 0).is_err());
    assert!(reweight_demo(0, 0).is_err());
}

#[test]
fn heatmap_is_a_complete_svg() {
    let svg = heatmap_svg("gauss", "vsgd-fd", 1, 0.1, 5, 32, 11).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert!(svg.matches("<rect").count() >= 9);
}

#[test]
fn reweight_layout() {
    let v = reweight_demo(12, 5).unwrap();
    assert_eq!(v.len(), 8 + 24);
    assert!(v[6].abs() <= 1.0 + 1e-12 && v[7].abs() <= 1.0 + 1e-12);
}
